#include "mars/mars_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mars/metrics.hpp"

namespace mars {

const char* to_string(SplitPolicy p) {
    switch (p) {
        case SplitPolicy::balanced: return "balanced";
        case SplitPolicy::chosen_only: return "chosen_only";
        case SplitPolicy::rejected_only: return "rejected_only";
    }
    return "?";
}

SplitPolicy split_policy_from_string(const std::string& s) {
    if (s == "balanced") return SplitPolicy::balanced;
    if (s == "chosen_only") return SplitPolicy::chosen_only;
    if (s == "rejected_only") return SplitPolicy::rejected_only;
    throw ConfigError("unknown split_policy '" + s + "' (expected balanced|chosen_only|rejected_only)");
}

void MarsConfig::validate() const {
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
}

std::uint64_t AugmentationPlan::total_counts() const {
    std::uint64_t s = 0;
    for (const auto& r : records) s += r.n_plus + r.n_minus;
    return s;
}

std::uint64_t AugmentationPlan::synthetic_pairs() const {
    std::uint64_t s = 0;
    for (const auto& r : records) s += (r.n_plus + 1) * (r.n_minus + 1) - 1;
    return s;
}

std::vector<ScoredMargin> score_margins(const RewardParams& params, std::span<const PreferenceTuple> data) {
    if (data.empty()) throw EmptyInputError("score_margins: dataset is empty");
    std::vector<ScoredMargin> out;
    out.reserve(data.size());
    for (const auto& z : data) out.push_back({z.id, margin(params, z)});
    return out;
}

AllocationWeights allocate(std::span<const double> margins, double tau) {
    if (margins.empty()) throw EmptyInputError("allocate: no margins");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    std::vector<double> logits(margins.size());
    for (std::size_t i = 0; i < margins.size(); ++i) {
        if (!std::isfinite(margins[i])) throw ConfigError("allocate: non-finite margin at index " + std::to_string(i));
        logits[i] = -tau * std::abs(margins[i]);
    }
    const double shift = *std::max_element(logits.begin(), logits.end());
    AllocationWeights w;
    w.q.resize(margins.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        w.q[i] = std::exp(logits[i] - shift);
        z += w.q[i];
    }
    for (double& q : w.q) q /= z;
    return w;
}

std::vector<std::uint64_t> round_budget(std::span<const double> q, std::uint64_t budget_B,
                                        std::span<const double> tie_margins, std::span<const std::string> tie_ids) {
    const std::size_t n = q.size();
    std::vector<std::uint64_t> counts(n, 0);
    if (n == 0 || budget_B == 0) return counts;
    if (!tie_margins.empty() && tie_margins.size() != n) throw DimensionError(n, tie_margins.size(), "round_budget margins");
    if (!tie_ids.empty() && tie_ids.size() != n) throw DimensionError(n, tie_ids.size(), "round_budget ids");

    const double b = static_cast<double>(budget_B);
    std::vector<double> remainder(n);
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(q[i] >= 0.0) || !std::isfinite(q[i])) throw ConfigError("round_budget: invalid weight at index " + std::to_string(i));
        const double exact = b * q[i];
        const double fl = std::floor(exact);
        counts[i] = static_cast<std::uint64_t>(fl);
        remainder[i] = exact - fl;
        assigned += counts[i];
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
        if (remainder[a] != remainder[c]) return remainder[a] > remainder[c];
        if (!tie_margins.empty()) {
            const double ma = std::abs(tie_margins[a]);
            const double mc = std::abs(tie_margins[c]);
            if (ma != mc) return ma < mc;
        }
        if (!tie_ids.empty() && tie_ids[a] != tie_ids[c]) return tie_ids[a] < tie_ids[c];
        return a < c;
    });

    // Weights summing to 1 within rounding leave a deficit smaller than n;
    // the cyclic walk also absorbs larger deficits from loosely normalized input.
    for (std::size_t k = 0; assigned < budget_B; k = (k + 1) % n) {
        ++counts[order[k]];
        ++assigned;
    }
    while (assigned > budget_B) {
        for (auto it = order.rbegin(); it != order.rend() && assigned > budget_B; ++it) {
            if (counts[*it] > 0) {
                --counts[*it];
                --assigned;
            }
        }
    }
    return counts;
}

SplitCounts split_counts(std::uint64_t b, SplitPolicy policy) {
    switch (policy) {
        case SplitPolicy::balanced: return {b - b / 2, b / 2};
        case SplitPolicy::chosen_only: return {b, 0};
        case SplitPolicy::rejected_only: return {0, b};
    }
    return {b - b / 2, b / 2};
}

std::string synthetic_id(std::string_view parent_id, std::size_t epoch, std::size_t i, std::size_t j) {
    return std::string(parent_id) + "~e" + std::to_string(epoch) + "c" + std::to_string(i) + "r" + std::to_string(j);
}

Dataset synthesize_pairs(const PreferenceTuple& z, std::uint64_t n_plus, std::uint64_t n_minus,
                         const Augmenter& augmenter, std::size_t epoch) {
    Dataset out;
    if (n_plus == 0 && n_minus == 0) return out;

    VariantBatch chosen;
    VariantBatch rejected;
    try {
        chosen = augmenter.augment(payload_of(z, Side::chosen), z.id, Side::chosen, n_plus, epoch);
        rejected = augmenter.augment(payload_of(z, Side::rejected), z.id, Side::rejected, n_minus, epoch);
    } catch (const AugmentError&) {
        throw;
    } catch (const std::exception& e) {
        throw AugmentError(z.id, e.what());
    }
    if (chosen.variants.size() != n_plus)
        throw AugmentError(z.id, "augmenter returned " + std::to_string(chosen.variants.size()) +
                                     " chosen variants, expected " + std::to_string(n_plus));
    if (rejected.variants.size() != n_minus)
        throw AugmentError(z.id, "augmenter returned " + std::to_string(rejected.variants.size()) +
                                     " rejected variants, expected " + std::to_string(n_minus));

    // Index 0 is the original response on each side.
    std::vector<Payload> pos{payload_of(z, Side::chosen)};
    std::vector<Payload> neg{payload_of(z, Side::rejected)};
    for (auto& v : chosen.variants) pos.push_back(std::move(v.payload));
    for (auto& v : rejected.variants) neg.push_back(std::move(v.payload));

    out.reserve((n_plus + 1) * (n_minus + 1) - 1);
    for (std::size_t i = 0; i < pos.size(); ++i) {
        for (std::size_t j = 0; j < neg.size(); ++j) {
            if (i == 0 && j == 0) continue;
            std::optional<TextPair> text;
            if (z.text) {
                text = TextPair{z.text->prompt, pos[i].text.value_or(z.text->chosen), neg[j].text.value_or(z.text->rejected)};
            }
            if (pos[i].features.size() != z.dim() || neg[j].features.size() != z.dim())
                throw AugmentError(z.id, "augmenter changed the feature dimension");
            out.push_back(PreferenceTuple::make_synthetic(synthetic_id(z.id, epoch, i, j), z.id, pos[i].features,
                                                          neg[j].features, std::move(text)));
        }
    }
    return out;
}

AugmentationPlan build_plan(std::span<const ScoredMargin> margins, const std::vector<bool>& eligible,
                            const MarsConfig& cfg, AllocationMode mode) {
    cfg.validate();
    if (margins.empty()) throw EmptyInputError("build_plan: no margins");
    if (eligible.size() != margins.size()) throw DimensionError(margins.size(), eligible.size(), "build_plan eligibility");

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < margins.size(); ++i)
        if (eligible[i]) idx.push_back(i);

    AugmentationPlan plan;
    plan.budget_B = cfg.budget_B;
    plan.records.resize(margins.size());
    for (std::size_t i = 0; i < margins.size(); ++i) {
        plan.records[i].tuple_id = margins[i].tuple_id;
        plan.records[i].delta = margins[i].delta;
    }
    if (idx.empty()) {
        if (cfg.budget_B > 0) throw ConfigError("build_plan: no tuple is eligible for augmentation");
        return plan;
    }

    std::vector<double> sub_margins;
    std::vector<std::string> sub_ids;
    for (std::size_t i : idx) {
        sub_margins.push_back(margins[i].delta);
        sub_ids.push_back(margins[i].tuple_id);
    }
    std::vector<double> q;
    if (mode == AllocationMode::uniform) {
        q.assign(idx.size(), 1.0 / static_cast<double>(idx.size()));
    } else {
        q = allocate(sub_margins, cfg.tau).q;
    }
    const std::vector<std::uint64_t> b = round_budget(q, cfg.budget_B, sub_margins, sub_ids);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        PlanRecord& r = plan.records[idx[k]];
        r.q = q[k];
        r.b = b[k];
        const SplitCounts s = split_counts(b[k], cfg.split_policy);
        r.n_plus = s.n_plus;
        r.n_minus = s.n_minus;
    }
    return plan;
}

namespace {

std::vector<double> margins_only(const RewardParams& params, std::span<const PreferenceTuple> data) {
    std::vector<double> m;
    m.reserve(data.size());
    for (const auto& z : data) m.push_back(margin(params, z));
    return m;
}

}  // namespace

MarsResult run_refinement(const Dataset& dataset0, const RewardParams& params0, const MarsConfig& cfg,
                          const TrainConfig& train_cfg, const Augmenter& augmenter, AllocationMode mode) {
    cfg.validate();
    train_cfg.validate();
    const std::size_t d = dataset_dim(dataset0);
    if (params0.dim() != d) throw DimensionError(d, params0.dim(), "run_mars: initial parameters");

    MarsResult result;
    result.params = params0;
    Dataset current = dataset0;

    for (std::size_t t = 1; t <= cfg.epochs_T; ++t) {
        try {
            const Dataset& scored = cfg.cumulative ? current : dataset0;
            EpochReport rep;
            rep.epoch = t;

            const std::vector<ScoredMargin> margins = score_margins(result.params, scored);
            rep.margins.reserve(margins.size());
            for (const auto& m : margins) rep.margins.push_back(m.delta);

            std::vector<bool> eligible(scored.size());
            for (std::size_t i = 0; i < scored.size(); ++i)
                eligible[i] = cfg.augment_synthetic || scored[i].origin == Origin::human;
            rep.plan = build_plan(margins, eligible, cfg, mode);

            Dataset synthetic;
            for (std::size_t i = 0; i < scored.size(); ++i) {
                const PlanRecord& r = rep.plan.records[i];
                if (r.b == 0) continue;
                Dataset pairs = synthesize_pairs(scored[i], r.n_plus, r.n_minus, augmenter, t);
                synthetic.insert(synthetic.end(), std::make_move_iterator(pairs.begin()),
                                 std::make_move_iterator(pairs.end()));
            }

            Dataset next = cfg.cumulative ? std::move(current) : dataset0;
            rep.dataset_size_before = next.size();
            rep.synthetic_added = synthetic.size();
            next.insert(next.end(), std::make_move_iterator(synthetic.begin()), std::make_move_iterator(synthetic.end()));
            rep.dataset_size_after = next.size();

            rep.loss_before = nll_loss(result.params, next, train_cfg.l2);
            RewardParams trained = train(result.params, next, train_cfg);
            rep.loss_after = nll_loss(trained, next, train_cfg.l2);

            const std::vector<double> orig = margins_only(trained, dataset0);
            double abs_sum = 0.0;
            for (double m : orig) abs_sum += std::abs(m);
            rep.mean_abs_margin = abs_sum / static_cast<double>(orig.size());
            if (orig.size() >= 2) {
                const SnrResult snr = margin_snr(orig);
                rep.snr = snr.snr;
                rep.snr_degenerate = snr.degenerate;
            }

            result.params = std::move(trained);
            current = std::move(next);
            result.reports.push_back(std::move(rep));
        } catch (const std::exception& e) {
            throw MarsRunError(t, e.what(), result.reports);
        }
    }
    result.final_dataset = std::move(current);
    return result;
}

MarsResult run_mars(const Dataset& dataset0, const RewardParams& params0, const MarsConfig& cfg,
                    const TrainConfig& train_cfg, const Augmenter& augmenter) {
    return run_refinement(dataset0, params0, cfg, train_cfg, augmenter, AllocationMode::margin_softmax);
}

MarsResult run_uniform_baseline(const Dataset& dataset0, const RewardParams& params0, const MarsConfig& cfg,
                                const TrainConfig& train_cfg, const Augmenter& augmenter) {
    return run_refinement(dataset0, params0, cfg, train_cfg, augmenter, AllocationMode::uniform);
}

}  // namespace mars
