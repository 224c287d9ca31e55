#include "mars/bt_core.hpp"

#include <cmath>
#include <utility>

#include "mars/error.hpp"

namespace mars {

const char* to_string(Origin o) { return o == Origin::human ? "human" : "synthetic"; }

Origin origin_from_string(const std::string& s) {
    if (s == "human") return Origin::human;
    if (s == "synthetic") return Origin::synthetic;
    throw ConfigError("unknown origin '" + s + "' (expected human|synthetic)");
}

namespace {

FeatureVec difference(const FeatureVec& chosen, const FeatureVec& rejected, const std::string& id) {
    if (chosen.empty()) throw ConfigError("tuple '" + id + "': empty feature vector");
    if (chosen.size() != rejected.size())
        throw DimensionError(chosen.size(), rejected.size(), "tuple '" + id + "' rejected_feat");
    FeatureVec psi(chosen.size());
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        if (!std::isfinite(chosen[k]) || !std::isfinite(rejected[k]))
            throw ConfigError("tuple '" + id + "': non-finite feature at index " + std::to_string(k));
        psi[k] = chosen[k] - rejected[k];
    }
    return psi;
}

void check_dim(const RewardParams& params, const PreferenceTuple& z) {
    if (params.dim() != z.dim()) throw DimensionError(params.dim(), z.dim(), "tuple '" + z.id + "'");
}

}  // namespace

PreferenceTuple PreferenceTuple::make(std::string id, FeatureVec chosen, FeatureVec rejected,
                                      std::optional<TextPair> text) {
    PreferenceTuple z;
    z.psi = difference(chosen, rejected, id);
    z.id = std::move(id);
    z.chosen_feat = std::move(chosen);
    z.rejected_feat = std::move(rejected);
    z.text = std::move(text);
    return z;
}

PreferenceTuple PreferenceTuple::make_synthetic(std::string id, std::string parent_id, FeatureVec chosen,
                                                FeatureVec rejected, std::optional<TextPair> text) {
    PreferenceTuple z = make(std::move(id), std::move(chosen), std::move(rejected), std::move(text));
    z.origin = Origin::synthetic;
    z.parent_id = std::move(parent_id);
    return z;
}

PreferenceTuple PreferenceTuple::swapped() const {
    PreferenceTuple z = *this;
    std::swap(z.chosen_feat, z.rejected_feat);
    for (double& v : z.psi) v = -v;
    if (z.text) std::swap(z.text->chosen, z.text->rejected);
    return z;
}

std::size_t dataset_dim(std::span<const PreferenceTuple> data) {
    if (data.empty()) throw EmptyInputError("dataset is empty");
    const std::size_t d = data.front().dim();
    for (const auto& z : data)
        if (z.dim() != d) throw DimensionError(d, z.dim(), "tuple '" + z.id + "'");
    return d;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning_rate must be finite and >= 0");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("l2 must be finite and >= 0");
    if (epochs_inner == 0) throw ConfigError("epochs_inner must be >= 1");
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double softplus(double t) {
    if (t > 0.0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

double curvature_weight(double t) { return sigmoid(t) * sigmoid(-t); }

double margin(const RewardParams& params, const PreferenceTuple& z) {
    check_dim(params, z);
    return dot(params.theta, z.psi);
}

double bt_prob(const RewardParams& params, const PreferenceTuple& z) { return sigmoid(margin(params, z)); }

double sample_loss(const RewardParams& params, const PreferenceTuple& z) {
    return softplus(-margin(params, z));
}

double nll_loss(const RewardParams& params, std::span<const PreferenceTuple> data, double l2) {
    if (data.empty()) throw EmptyInputError("nll_loss: dataset is empty");
    double total = 0.0;
    for (const auto& z : data) total += sample_loss(params, z);
    double loss = total / static_cast<double>(data.size());
    if (l2 > 0.0) loss += 0.5 * l2 * dot(params.theta, params.theta);
    return loss;
}

Vector sample_grad(const RewardParams& params, const PreferenceTuple& z) {
    // sigma(m) - 1 == -sigma(-m), which stays exact as m -> +inf.
    const double w = -sigmoid(-margin(params, z));
    Vector g(z.psi.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = w * z.psi[k];
    return g;
}

Vector grad(const RewardParams& params, std::span<const PreferenceTuple> data, double l2) {
    if (data.empty()) throw EmptyInputError("grad: dataset is empty");
    Vector g(params.dim(), 0.0);
    for (const auto& z : data) {
        const double w = -sigmoid(-margin(params, z));
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += w * z.psi[k];
    }
    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = g[k] * inv_n + l2 * params.theta[k];
    return g;
}

Matrix per_sample_hessian(const RewardParams& params, const PreferenceTuple& z) {
    return Matrix::outer(z.psi, curvature_weight(margin(params, z)));
}

RewardParams train(const RewardParams& init, std::span<const PreferenceTuple> data, const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t d = dataset_dim(data);
    if (init.dim() != d) throw DimensionError(d, init.dim(), "train: initial parameters");

    RewardParams params = init;
    for (std::size_t step = 0; step < cfg.epochs_inner; ++step) {
        const Vector g = grad(params, data, cfg.l2);
        for (std::size_t k = 0; k < d; ++k) {
            if (!std::isfinite(g[k])) throw DivergenceError(step);
            params.theta[k] -= cfg.learning_rate * g[k];
            if (!std::isfinite(params.theta[k])) throw DivergenceError(step);
        }
    }
    if (!std::isfinite(nll_loss(params, data, cfg.l2))) throw DivergenceError(cfg.epochs_inner);
    return params;
}

}  // namespace mars
