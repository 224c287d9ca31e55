#pragma once

// Margin-aware budgeted augmentation with iterative reward-model retraining.
//
// Each epoch t:
//   1. score margins of D^{t-1} under r^{t-1}
//   2. q_i = softmax(-tau |margin_i|) over augmentation-eligible tuples
//   3. b_i = largest-remainder rounding of B q_i, split into (n+, n-)
//   4. emit the (n+ + 1)(n- + 1) - 1 new pairs of every tuple
//   5. D^t = D^{t-1} u D_syn (cumulative) or D^0 u D_syn, warm-start train r^t on D^t

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mars/augmentation.hpp"
#include "mars/bt_core.hpp"
#include "mars/error.hpp"

namespace mars {

enum class SplitPolicy { balanced, chosen_only, rejected_only };
const char* to_string(SplitPolicy p);
SplitPolicy split_policy_from_string(const std::string& s);

enum class AllocationMode { margin_softmax, uniform };

struct MarsConfig {
    std::size_t epochs_T = 3;
    std::uint64_t budget_B = 0;
    double tau = 0.1;
    SplitPolicy split_policy = SplitPolicy::balanced;
    bool cumulative = true;
    // Allow synthetic tuples scored in cumulative mode to receive budget.
    bool augment_synthetic = false;
    std::int64_t seed = 0;

    void validate() const;
};

struct ScoredMargin {
    std::string tuple_id;
    double delta;

    friend bool operator==(const ScoredMargin&, const ScoredMargin&) = default;
};

struct AllocationWeights {
    std::vector<double> q;

    friend bool operator==(const AllocationWeights&, const AllocationWeights&) = default;
};

struct PlanRecord {
    std::string tuple_id;
    double delta = 0.0;
    double q = 0.0;
    std::uint64_t b = 0;
    std::uint64_t n_plus = 0;
    std::uint64_t n_minus = 0;

    friend bool operator==(const PlanRecord&, const PlanRecord&) = default;
};

struct AugmentationPlan {
    std::uint64_t budget_B = 0;
    std::vector<PlanRecord> records;

    std::uint64_t total_counts() const;
    std::uint64_t synthetic_pairs() const;

    friend bool operator==(const AugmentationPlan&, const AugmentationPlan&) = default;
};

struct EpochReport {
    std::size_t epoch = 0;
    std::vector<double> margins;  // per scored tuple, in dataset order
    std::size_t dataset_size_before = 0;
    std::size_t dataset_size_after = 0;
    std::size_t synthetic_added = 0;
    double loss_before = 0.0;  // r^{t-1} on D^t
    double loss_after = 0.0;   // r^t on D^t
    double mean_abs_margin = 0.0;  // r^t on the original tuples
    double snr = 0.0;              // r^t on the original tuples
    bool snr_degenerate = false;
    AugmentationPlan plan;

    friend bool operator==(const EpochReport&, const EpochReport&) = default;
};

struct MarsResult {
    RewardParams params;
    std::vector<EpochReport> reports;
    Dataset final_dataset;
};

// Raised when an epoch fails; carries the reports of the completed epochs.
class MarsRunError : public Error {
public:
    MarsRunError(std::size_t epoch, const std::string& cause, std::vector<EpochReport> partial)
        : Error("epoch " + std::to_string(epoch) + " failed: " + cause),
          epoch_(epoch), partial_(std::move(partial)) {}
    const char* kind() const noexcept override { return "run"; }
    std::size_t epoch() const noexcept { return epoch_; }
    const std::vector<EpochReport>& partial_reports() const noexcept { return partial_; }

private:
    std::size_t epoch_;
    std::vector<EpochReport> partial_;
};

std::vector<ScoredMargin> score_margins(const RewardParams& params, std::span<const PreferenceTuple> data);

// q_i = exp(-tau |m_i|) / sum_j exp(-tau |m_j|), max-shifted.
AllocationWeights allocate(std::span<const double> margins, double tau);

// floor(B q_i) plus a largest-remainder top-up so the counts sum to B exactly.
// Remainder ties go to the smaller |margin|, then the smaller id; empty
// tie spans fall back to index order.
std::vector<std::uint64_t> round_budget(std::span<const double> q, std::uint64_t budget_B,
                                        std::span<const double> tie_margins = {},
                                        std::span<const std::string> tie_ids = {});

struct SplitCounts {
    std::uint64_t n_plus;
    std::uint64_t n_minus;

    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

SplitCounts split_counts(std::uint64_t b, SplitPolicy policy);

// Id of the synthetic pair built from chosen variant i and rejected variant j
// (0 = original response) of `parent_id` in `epoch`.
std::string synthetic_id(std::string_view parent_id, std::size_t epoch, std::size_t i, std::size_t j);

// Cartesian product of {y+} u chosen variants and {y-} u rejected variants,
// minus the original pair. All-or-nothing: an augmenter failure yields an
// AugmentError and no tuples.
Dataset synthesize_pairs(const PreferenceTuple& z, std::uint64_t n_plus, std::uint64_t n_minus,
                         const Augmenter& augmenter, std::size_t epoch = 1);

// Builds the allocation plan for one epoch. `eligible[i]` marks tuples that may
// receive budget; weights are renormalized over eligible tuples.
AugmentationPlan build_plan(std::span<const ScoredMargin> margins, const std::vector<bool>& eligible,
                            const MarsConfig& cfg, AllocationMode mode);

MarsResult run_mars(const Dataset& dataset0, const RewardParams& params0, const MarsConfig& cfg,
                    const TrainConfig& train_cfg, const Augmenter& augmenter);

MarsResult run_uniform_baseline(const Dataset& dataset0, const RewardParams& params0, const MarsConfig& cfg,
                                const TrainConfig& train_cfg, const Augmenter& augmenter);

MarsResult run_refinement(const Dataset& dataset0, const RewardParams& params0, const MarsConfig& cfg,
                          const TrainConfig& train_cfg, const Augmenter& augmenter, AllocationMode mode);

}  // namespace mars
