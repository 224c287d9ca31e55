#include "mars/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mars/error.hpp"

namespace mars {

namespace {

std::vector<double> margins_of(const RewardParams& params, std::span<const PreferenceTuple> data) {
    std::vector<double> m;
    m.reserve(data.size());
    for (const auto& z : data) m.push_back(margin(params, z));
    return m;
}

}  // namespace

double pairwise_accuracy(std::span<const double> margins) {
    if (margins.empty()) throw EmptyInputError("pairwise_accuracy: dataset is empty");
    double hits = 0.0;
    for (double m : margins) {
        if (m > 0.0)
            hits += 1.0;
        else if (m == 0.0)
            hits += 0.5;
    }
    return hits / static_cast<double>(margins.size());
}

double pairwise_accuracy(const RewardParams& params, std::span<const PreferenceTuple> data) {
    return pairwise_accuracy(margins_of(params, data));
}

SnrResult margin_snr(std::span<const double> margins) {
    if (margins.size() < 2)
        throw EmptyInputError("margin_snr: needs at least 2 margins, got " + std::to_string(margins.size()));
    const double n = static_cast<double>(margins.size());
    double sum = 0.0;
    for (double m : margins) sum += m;
    SnrResult r;
    r.mean = sum / n;
    double ss = 0.0;
    for (double m : margins) ss += (m - r.mean) * (m - r.mean);
    r.std = std::sqrt(ss / n);
    if (r.std == 0.0) {
        r.degenerate = true;
        r.snr = std::numeric_limits<double>::infinity();
    } else {
        r.snr = r.mean / r.std;
    }
    return r;
}

SnrResult margin_snr(const RewardParams& params, std::span<const PreferenceTuple> data) {
    return margin_snr(margins_of(params, data));
}

std::vector<HistogramBin> margin_histogram(std::span<const double> margins, double width) {
    if (!(width > 0.0) || !std::isfinite(width)) throw ConfigError("histogram bin width must be > 0");
    std::vector<HistogramBin> bins;
    if (margins.empty()) return bins;
    const auto [mn, mx] = std::minmax_element(margins.begin(), margins.end());
    const auto first = static_cast<long long>(std::floor(*mn / width));
    const auto last = static_cast<long long>(std::floor(*mx / width));
    if (last - first > 100000) throw ConfigError("histogram would need more than 100000 bins; increase the width");
    for (long long k = first; k <= last; ++k)
        bins.push_back({static_cast<double>(k) * width, static_cast<double>(k + 1) * width, 0});
    for (double m : margins) {
        const auto k = static_cast<long long>(std::floor(m / width));
        ++bins[static_cast<std::size_t>(k - first)].count;
    }
    return bins;
}

EvalSummary evaluate(const RewardParams& params, std::span<const PreferenceTuple> data, double hist_width) {
    const std::vector<double> m = margins_of(params, data);
    EvalSummary s;
    s.n = m.size();
    s.pairwise_accuracy = pairwise_accuracy(m);
    const SnrResult snr = margin_snr(m);
    s.margin_mean = snr.mean;
    s.margin_std = snr.std;
    s.snr = snr.snr;
    s.snr_degenerate = snr.degenerate;
    s.histogram = margin_histogram(m, hist_width);
    return s;
}

}  // namespace mars
