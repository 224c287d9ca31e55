#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mars/bt_core.hpp"

namespace mars {

// Exact ties (margin == 0) count one half.
double pairwise_accuracy(const RewardParams& params, std::span<const PreferenceTuple> data);
double pairwise_accuracy(std::span<const double> margins);

struct SnrResult {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    double snr = 0.0;  // +inf when std == 0
    bool degenerate = false;  // std == 0
};

// mean / population std. Requires at least two margins.
SnrResult margin_snr(std::span<const double> margins);
SnrResult margin_snr(const RewardParams& params, std::span<const PreferenceTuple> data);

struct HistogramBin {
    double lo;
    double hi;
    std::size_t count;

    friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

// Fixed-width bins aligned at integer multiples of `width`, covering
// [min, max] of the margins. Empty interior bins are kept.
std::vector<HistogramBin> margin_histogram(std::span<const double> margins, double width);

struct EvalSummary {
    std::size_t n = 0;
    double pairwise_accuracy = 0.0;
    double margin_mean = 0.0;
    double margin_std = 0.0;
    double snr = 0.0;
    bool snr_degenerate = false;
    std::vector<HistogramBin> histogram;
};

EvalSummary evaluate(const RewardParams& params, std::span<const PreferenceTuple> data, double hist_width = 0.5);

}  // namespace mars
