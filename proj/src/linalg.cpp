#include "mars/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mars/error.hpp"

namespace mars {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError(a.size(), b.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

Matrix Matrix::outer(std::span<const double> v, double scale) {
    Matrix m(v.size(), v.size());
    m.add_outer(v, scale);
    return m;
}

void Matrix::add_outer(std::span<const double> v, double scale) {
    if (!square() || v.size() != rows_) throw DimensionError(rows_, v.size(), "Matrix::add_outer");
    // Fill the upper triangle and mirror it so the result is exactly symmetric.
    for (std::size_t i = 0; i < rows_; ++i) {
        const double si = scale * v[i];
        for (std::size_t j = i; j < cols_; ++j) {
            const double x = si * v[j];
            data_[i * cols_ + j] += x;
            if (j != i) data_[j * cols_ + i] += x;
        }
    }
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw DimensionError(rows_ * cols_, other.rows_ * other.cols_, "Matrix::operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw DimensionError(rows_ * cols_, other.rows_ * other.cols_, "Matrix::operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

double Matrix::frobenius_norm() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
}

double Matrix::max_abs_asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i + 1; j < cols_; ++j)
            worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
    return worst;
}

double Matrix::trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

// Zeroes a(p, q) with a two-sided rotation. Uses the small-angle form of
// the rotation so that |t| <= 1 and the update stays accurate.
void rotate(Matrix& a, std::size_t p, std::size_t q) {
    const double apq = a(p, q);
    if (apq == 0.0) return;
    const double app = a(p, p);
    const double aqq = a(q, q);
    const double theta = (aqq - app) / (2.0 * apq);
    const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;
    const double tau = s / (1.0 + c);

    a(p, p) = app - t * apq;
    a(q, q) = aqq + t * apq;
    a(p, q) = 0.0;
    a(q, p) = 0.0;
    const std::size_t n = a.rows();
    for (std::size_t r = 0; r < n; ++r) {
        if (r == p || r == q) continue;
        const double arp = a(r, p);
        const double arq = a(r, q);
        const double new_rp = arp - s * (arq + tau * arp);
        const double new_rq = arq + s * (arp - tau * arq);
        a(r, p) = new_rp;
        a(p, r) = new_rp;
        a(r, q) = new_rq;
        a(q, r) = new_rq;
    }
}

}  // namespace

EigenResult symmetric_eigenvalues(const Matrix& input, const JacobiOptions& opts) {
    if (!input.square())
        throw ConfigError("symmetric_eigenvalues: matrix is " + std::to_string(input.rows()) + "x" +
                          std::to_string(input.cols()) + ", expected square");
    if (input.rows() > kMaxDenseDim)
        throw ConfigError("symmetric_eigenvalues: dimension " + std::to_string(input.rows()) +
                          " exceeds dense cap " + std::to_string(kMaxDenseDim));

    double scale = 1.0;
    for (double x : input.data()) scale = std::max(scale, std::abs(x));
    const double asym = input.max_abs_asymmetry();
    if (asym > opts.symmetry_tolerance * scale)
        throw ConfigError("symmetric_eigenvalues: matrix is not symmetric (max |a_ij - a_ji| = " +
                          std::to_string(asym) + ")");

    // Work on the exactly symmetrized copy.
    Matrix a = input;
    const std::size_t n = a.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = m;
            a(j, i) = m;
        }

    EigenResult out;
    const double threshold = opts.relative_tolerance * a.frobenius_norm();
    while (true) {
        if (off_diagonal_norm(a) <= threshold) {
            out.converged = true;
            break;
        }
        if (out.sweeps >= opts.max_sweeps) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) rotate(a, p, q);
        ++out.sweeps;
    }

    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
    std::sort(out.values.begin(), out.values.end());
    return out;
}

double min_eigenvalue(const Matrix& a, const JacobiOptions& opts) {
    if (a.rows() == 0) throw EmptyInputError("min_eigenvalue: empty matrix");
    return symmetric_eigenvalues(a, opts).values.front();
}

}  // namespace mars
