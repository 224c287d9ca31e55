#pragma once

// Average curvature of the BT loss and its margin dependence.
//
// For a dataset D the average curvature (empirical Fisher) is
//   I_D(theta) = mean_z c(margin(z)) psi(z) psi(z)^T,   c(t) = sigma(t) sigma(-t).
// With P (well-separated, |margin| >= gamma_org) and Q (hard, |margin| <= gamma_aug)
// and E_Q[psi psi^T] >= beta E_P[psi psi^T], the mixture R = alpha P + (1 - alpha) Q obeys
//   I_R >= [alpha + (1 - alpha) gamma_curv] I_P,   gamma_curv = beta c(gamma_aug) / c(gamma_org)
// in the Loewner order, hence also lambda_min(I_R) >= [...] lambda_min(I_P).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mars/bt_core.hpp"
#include "mars/linalg.hpp"

namespace mars {

struct FisherMatrix {
    Matrix entries;
    std::size_t n_samples = 0;
};

// Mean of c(margin) psi psi^T over the tuples.
FisherMatrix empirical_fisher(const RewardParams& params, std::span<const PreferenceTuple> tuples);

// Mean of psi psi^T (the curvature-free second moment).
Matrix second_moment(std::span<const PreferenceTuple> tuples);

struct MarginBin {
    std::size_t index = 0;
    std::vector<std::string> tuple_ids;
    double lo = 0.0;  // smallest |margin| in the bin
    double hi = 0.0;  // largest |margin| in the bin
    double mean_curvature_weight = 0.0;
    double min_eigenvalue = 0.0;  // of the bin-averaged empirical Fisher
};

// Sorts by |margin| ascending (ties by id) and cuts into n_bins contiguous
// equal-count bins, the remainder going to the earliest bins.
std::vector<MarginBin> bin_by_margin(const RewardParams& params, std::span<const PreferenceTuple> tuples,
                                     std::size_t n_bins);

struct MixtureSpec {
    double alpha = 0.5;
    std::size_t n = 0;        // samples from P
    std::size_t n_prime = 0;  // samples from Q
    double gamma_org = 2.0;
    double gamma_aug = 0.5;
    double beta = 0.0;

    // alpha = n / (n + n_prime)
    static MixtureSpec from_counts(std::size_t n, std::size_t n_prime, double gamma_org, double gamma_aug,
                                   double beta = 0.0);
    void validate() const;
};

struct AlphaCheck {
    double alpha = 0.0;
    double factor = 0.0;            // alpha + (1 - alpha) gamma_curv
    double psd_slack = 0.0;         // lambda_min(I_R - factor I_P)
    double eig_bound_slack = 0.0;   // lambda_min(I_R) - factor lambda_min(I_P)
    double lambda_min_R = 0.0;
    bool pass = false;
};

struct CurvatureReport {
    double gamma_org = 0.0;
    double gamma_aug = 0.0;
    double beta = 0.0;
    double c_org = 0.0;
    double c_aug = 0.0;
    double gamma_curv = 0.0;
    double beta_slack = 0.0;       // lambda_min(E_Q[psi psi^T] - beta E_P[psi psi^T])
    double q_dominance_slack = 0.0;  // lambda_min(I_Q - gamma_curv I_P)
    double lambda_min_P = 0.0;
    double lambda_min_Q = 0.0;
    double tolerance = 1e-8;
    std::vector<AlphaCheck> checks;
    bool pass = false;
};

inline constexpr double kBetaCertTolerance = 1e-9;
inline constexpr double kSlackTolerance = 1e-8;

// Checks the margin regimes and the certified beta, then evaluates both
// inequalities on every alpha of the grid (spec.alpha when the grid is empty).
// Throws AssumptionError naming the offending tuples when a precondition fails.
CurvatureReport verify_theorem(std::span<const PreferenceTuple> p_tuples, std::span<const PreferenceTuple> q_tuples,
                               const RewardParams& params, const MixtureSpec& spec,
                               std::span<const double> alpha_grid = {});

// Largest beta (to bisection resolution) with
// lambda_min(E_Q[psi psi^T] - beta E_P[psi psi^T]) >= 0. Returns 0 when none is positive.
double certify_beta(std::span<const PreferenceTuple> p_tuples, std::span<const PreferenceTuple> q_tuples,
                    int iterations = 100);

struct AssumptionDataset {
    Dataset p_tuples;
    Dataset q_tuples;
    RewardParams params;
    MixtureSpec spec;  // beta certified, alpha from counts
};

// Builds P with |margin| in [gamma_org, 2 gamma_org] and Q with |margin| in
// [0, gamma_aug] under a random unit theta; signs alternate. Each psi is the
// margin along theta plus a random orthogonal component, so P and Q share
// feature directions and beta is certified positive.
// Sample counts come from spec.n (P) and spec.n_prime (Q); both must be >= dim.
AssumptionDataset make_assumption_dataset(const MixtureSpec& spec, std::size_t dim, std::uint64_t seed);

}  // namespace mars
