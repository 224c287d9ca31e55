#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mars {

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Dense row-major matrix. Sized for the d x d curvature matrices of the
// linear reward model, so no blocking or BLAS.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix zeros(std::size_t n) { return Matrix(n, n); }
    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> diag);
    static Matrix outer(std::span<const double> v, double scale = 1.0);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> data() const noexcept { return data_; }

    // this += scale * v v^T
    void add_outer(std::span<const double> v, double scale);

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    double frobenius_norm() const;
    double max_abs_asymmetry() const;
    double trace() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

struct JacobiOptions {
    double relative_tolerance = 1e-12;
    int max_sweeps = 100;
    double symmetry_tolerance = 1e-9;
};

struct EigenResult {
    Vector values;  // ascending
    int sweeps = 0;
    bool converged = false;
};

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Iterates
// until the off-diagonal Frobenius norm drops below
// relative_tolerance * ||A||_F or max_sweeps is reached.
// Throws ConfigError when the matrix is not square, larger than
// kMaxDenseDim, or asymmetric beyond symmetry_tolerance (scaled by max(1, max|a_ij|)).
EigenResult symmetric_eigenvalues(const Matrix& a, const JacobiOptions& opts = {});

double min_eigenvalue(const Matrix& a, const JacobiOptions& opts = {});

inline constexpr std::size_t kMaxDenseDim = 256;

}  // namespace mars
