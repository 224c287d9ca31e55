#pragma once

// Bradley-Terry pairwise preference model over a linear reward r(x, y) = theta . phi(x, y).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mars/linalg.hpp"

namespace mars {

using FeatureVec = Vector;

enum class Origin { human, synthetic };

const char* to_string(Origin o);
Origin origin_from_string(const std::string& s);

// Raw text of a comparison, present for datasets loaded in text mode.
struct TextPair {
    std::string prompt;
    std::string chosen;
    std::string rejected;

    friend bool operator==(const TextPair&, const TextPair&) = default;
};

// One comparison z = (x, y+, y-). `psi` caches chosen_feat - rejected_feat;
// build through make() so the cache and the origin/parent_id pairing stay valid.
struct PreferenceTuple {
    std::string id;
    Origin origin = Origin::human;
    std::optional<std::string> parent_id;
    FeatureVec chosen_feat;
    FeatureVec rejected_feat;
    FeatureVec psi;
    std::optional<TextPair> text;

    static PreferenceTuple make(std::string id, FeatureVec chosen, FeatureVec rejected,
                                std::optional<TextPair> text = std::nullopt);
    static PreferenceTuple make_synthetic(std::string id, std::string parent_id, FeatureVec chosen,
                                          FeatureVec rejected, std::optional<TextPair> text = std::nullopt);

    std::size_t dim() const noexcept { return psi.size(); }

    // Same comparison with the preference direction reversed.
    PreferenceTuple swapped() const;

    friend bool operator==(const PreferenceTuple&, const PreferenceTuple&) = default;
};

using Dataset = std::vector<PreferenceTuple>;

// Throws EmptyInputError on an empty dataset and DimensionError on inconsistent dims.
std::size_t dataset_dim(std::span<const PreferenceTuple> data);

struct RewardParams {
    Vector theta;

    static RewardParams zeros(std::size_t dim) { return RewardParams{Vector(dim, 0.0)}; }
    std::size_t dim() const noexcept { return theta.size(); }

    friend bool operator==(const RewardParams&, const RewardParams&) = default;
};

struct TrainConfig {
    double learning_rate = 0.5;
    std::size_t epochs_inner = 200;
    double l2 = 0.0;
    std::int64_t seed = 0;

    void validate() const;
};

// 1 / (1 + e^-t), evaluated on the branch that cannot overflow.
double sigmoid(double t);

// log(1 + e^t) without overflow.
double softplus(double t);

// Logistic curvature factor c(t) = sigma(t) (1 - sigma(t)), computed as
// sigma(t) sigma(-t) so that it keeps relative accuracy in the tails.
double curvature_weight(double t);

double margin(const RewardParams& params, const PreferenceTuple& z);
double bt_prob(const RewardParams& params, const PreferenceTuple& z);

// Per-sample loss -log sigma(margin).
double sample_loss(const RewardParams& params, const PreferenceTuple& z);

// Mean negative log-likelihood plus (l2 / 2) ||theta||^2.
double nll_loss(const RewardParams& params, std::span<const PreferenceTuple> data, double l2 = 0.0);

// Gradient of nll_loss: mean of (sigma(margin) - 1) psi, plus l2 * theta.
Vector grad(const RewardParams& params, std::span<const PreferenceTuple> data, double l2 = 0.0);

Vector sample_grad(const RewardParams& params, const PreferenceTuple& z);

// c(margin) psi psi^T.
Matrix per_sample_hessian(const RewardParams& params, const PreferenceTuple& z);

// Full-batch gradient descent for cfg.epochs_inner steps starting from `init`.
// Throws DivergenceError naming the step at which loss or gradient became non-finite.
RewardParams train(const RewardParams& init, std::span<const PreferenceTuple> data, const TrainConfig& cfg);

}  // namespace mars
