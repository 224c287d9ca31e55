#include "mars/fisher_lab.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "mars/error.hpp"
#include "mars/rng.hpp"

namespace mars {

FisherMatrix empirical_fisher(const RewardParams& params, std::span<const PreferenceTuple> tuples) {
    if (tuples.empty()) throw EmptyInputError("empirical_fisher: no tuples");
    const std::size_t d = dataset_dim(tuples);
    if (params.dim() != d) throw DimensionError(d, params.dim(), "empirical_fisher: parameters");
    FisherMatrix f{Matrix::zeros(d), tuples.size()};
    for (const auto& z : tuples) f.entries.add_outer(z.psi, curvature_weight(margin(params, z)));
    f.entries *= 1.0 / static_cast<double>(tuples.size());
    return f;
}

Matrix second_moment(std::span<const PreferenceTuple> tuples) {
    const std::size_t d = dataset_dim(tuples);
    Matrix s = Matrix::zeros(d);
    for (const auto& z : tuples) s.add_outer(z.psi, 1.0);
    s *= 1.0 / static_cast<double>(tuples.size());
    return s;
}

std::vector<MarginBin> bin_by_margin(const RewardParams& params, std::span<const PreferenceTuple> tuples,
                                     std::size_t n_bins) {
    if (n_bins == 0) throw ConfigError("bin_by_margin: n_bins must be >= 1");
    if (tuples.size() < n_bins)
        throw ConfigError("bin_by_margin: " + std::to_string(tuples.size()) + " tuples cannot fill " +
                          std::to_string(n_bins) + " bins");

    std::vector<double> abs_margin(tuples.size());
    for (std::size_t i = 0; i < tuples.size(); ++i) abs_margin[i] = std::abs(margin(params, tuples[i]));
    std::vector<std::size_t> order(tuples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (abs_margin[a] != abs_margin[b]) return abs_margin[a] < abs_margin[b];
        return tuples[a].id < tuples[b].id;
    });

    const std::size_t base = tuples.size() / n_bins;
    const std::size_t extra = tuples.size() % n_bins;
    std::vector<MarginBin> bins;
    bins.reserve(n_bins);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t count = base + (b < extra ? 1 : 0);
        MarginBin bin;
        bin.index = b;
        Dataset members;
        members.reserve(count);
        double curvature = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t i = order[pos + k];
            bin.tuple_ids.push_back(tuples[i].id);
            members.push_back(tuples[i]);
            curvature += curvature_weight(abs_margin[i]);
        }
        bin.lo = abs_margin[order[pos]];
        bin.hi = abs_margin[order[pos + count - 1]];
        bin.mean_curvature_weight = curvature / static_cast<double>(count);
        bin.min_eigenvalue = min_eigenvalue(empirical_fisher(params, members).entries);
        bins.push_back(std::move(bin));
        pos += count;
    }
    return bins;
}

MixtureSpec MixtureSpec::from_counts(std::size_t n, std::size_t n_prime, double gamma_org, double gamma_aug,
                                     double beta) {
    MixtureSpec s;
    s.n = n;
    s.n_prime = n_prime;
    s.alpha = (n + n_prime) == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(n + n_prime);
    s.gamma_org = gamma_org;
    s.gamma_aug = gamma_aug;
    s.beta = beta;
    return s;
}

void MixtureSpec::validate() const {
    if (!(gamma_aug > 0.0)) throw ConfigError("gamma_aug must be > 0");
    if (!(gamma_aug < gamma_org)) throw ConfigError("gamma_aug must be < gamma_org");
    if (!std::isfinite(gamma_org)) throw ConfigError("gamma_org must be finite");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 0");
}

double certify_beta(std::span<const PreferenceTuple> p_tuples, std::span<const PreferenceTuple> q_tuples,
                    int iterations) {
    const Matrix sp = second_moment(p_tuples);
    const Matrix sq = second_moment(q_tuples);
    if (sp.rows() != sq.rows()) throw DimensionError(sp.rows(), sq.rows(), "certify_beta: Q tuples");

    auto feasible = [&](double beta) { return min_eigenvalue(sq - beta * sp) >= 0.0; };
    if (!feasible(0.0)) return 0.0;

    // Any direction v bounds beta by v^T S_Q v / v^T S_P v; use the coordinate axes.
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sp.rows(); ++i)
        if (sp(i, i) > 0.0) hi = std::min(hi, sq(i, i) / sp(i, i));
    if (!std::isfinite(hi)) return 0.0;  // S_P == 0: any beta works, none is informative

    double lo = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

CurvatureReport verify_theorem(std::span<const PreferenceTuple> p_tuples, std::span<const PreferenceTuple> q_tuples,
                               const RewardParams& params, const MixtureSpec& spec,
                               std::span<const double> alpha_grid) {
    spec.validate();
    if (p_tuples.empty()) throw EmptyInputError("verify_theorem: P is empty");
    if (q_tuples.empty()) throw EmptyInputError("verify_theorem: Q is empty");
    const std::size_t d = dataset_dim(p_tuples);
    if (dataset_dim(q_tuples) != d) throw DimensionError(d, q_tuples.front().dim(), "verify_theorem: Q tuples");
    if (params.dim() != d) throw DimensionError(d, params.dim(), "verify_theorem: parameters");

    std::vector<std::string> bad;
    for (const auto& z : p_tuples)
        if (!(std::abs(margin(params, z)) >= spec.gamma_org)) bad.push_back(z.id);
    if (!bad.empty())
        throw AssumptionError("|margin(z)| >= gamma_org = " + std::to_string(spec.gamma_org) + " for z in P", bad);
    for (const auto& z : q_tuples)
        if (!(std::abs(margin(params, z)) <= spec.gamma_aug)) bad.push_back(z.id);
    if (!bad.empty())
        throw AssumptionError("|margin(z)| <= gamma_aug = " + std::to_string(spec.gamma_aug) + " for z in Q", bad);

    CurvatureReport rep;
    rep.gamma_org = spec.gamma_org;
    rep.gamma_aug = spec.gamma_aug;
    rep.beta = spec.beta;
    rep.tolerance = kSlackTolerance;

    const Matrix sp = second_moment(p_tuples);
    const Matrix sq = second_moment(q_tuples);
    rep.beta_slack = min_eigenvalue(sq - spec.beta * sp);
    if (!(spec.beta > 0.0) || rep.beta_slack < -kBetaCertTolerance)
        throw AssumptionError("lambda_min(E_Q[psi psi^T] - beta E_P[psi psi^T]) = " + std::to_string(rep.beta_slack) +
                                  " >= -1e-9 with beta = " + std::to_string(spec.beta) + " > 0",
                              {});

    rep.c_org = curvature_weight(spec.gamma_org);
    rep.c_aug = curvature_weight(spec.gamma_aug);
    rep.gamma_curv = spec.beta * rep.c_aug / rep.c_org;

    const Matrix ip = empirical_fisher(params, p_tuples).entries;
    const Matrix iq = empirical_fisher(params, q_tuples).entries;
    rep.lambda_min_P = min_eigenvalue(ip);
    rep.lambda_min_Q = min_eigenvalue(iq);
    rep.q_dominance_slack = min_eigenvalue(iq - rep.gamma_curv * ip);

    std::vector<double> grid(alpha_grid.begin(), alpha_grid.end());
    if (grid.empty()) grid.push_back(spec.alpha);

    rep.pass = true;
    for (double alpha : grid) {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha grid value outside [0, 1]");
        AlphaCheck c;
        c.alpha = alpha;
        c.factor = alpha + (1.0 - alpha) * rep.gamma_curv;
        const Matrix ir = alpha * ip + (1.0 - alpha) * iq;
        c.lambda_min_R = min_eigenvalue(ir);
        c.psd_slack = min_eigenvalue(ir - c.factor * ip);
        c.eig_bound_slack = c.lambda_min_R - c.factor * rep.lambda_min_P;
        c.pass = c.psd_slack >= -kSlackTolerance && c.eig_bound_slack >= -kSlackTolerance;
        rep.pass = rep.pass && c.pass;
        rep.checks.push_back(c);
    }
    return rep;
}

namespace {

Vector random_unit(rng::Stream& s, std::size_t dim) {
    Vector v(dim);
    double n = 0.0;
    while (n < 1e-8) {
        for (double& x : v) x = s.normal();
        n = norm2(v);
    }
    for (double& x : v) x /= n;
    return v;
}

// Unit vector orthogonal to `axis` (unit). Zero when dim == 1.
Vector random_orthogonal(rng::Stream& s, const Vector& axis) {
    Vector v(axis.size(), 0.0);
    if (axis.size() < 2) return v;
    double n = 0.0;
    while (n < 1e-8) {
        for (double& x : v) x = s.normal();
        const double p = dot(v, axis);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] -= p * axis[k];
        n = norm2(v);
    }
    for (double& x : v) x /= n;
    return v;
}

Dataset sample_regime(rng::Stream& s, const RewardParams& params, std::size_t count, double lo, double hi,
                      double spread, const std::string& prefix, const std::function<bool(double)>& accept) {
    const std::size_t dim = params.dim();
    Dataset out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        while (true) {
            const double sign = (k % 2 == 0) ? 1.0 : -1.0;
            const double m = sign * s.uniform(lo, hi);
            const Vector w = random_orthogonal(s, params.theta);
            const double r = s.uniform(0.0, spread);
            Vector rejected(dim);
            for (double& x : rejected) x = s.normal();
            Vector chosen(dim);
            for (std::size_t i = 0; i < dim; ++i) chosen[i] = rejected[i] + m * params.theta[i] + r * w[i];
            PreferenceTuple z = PreferenceTuple::make(prefix + std::to_string(k), std::move(chosen), std::move(rejected));
            if (accept(std::abs(margin(params, z)))) {
                out.push_back(std::move(z));
                break;
            }
        }
    }
    return out;
}

}  // namespace

AssumptionDataset make_assumption_dataset(const MixtureSpec& spec_in, std::size_t dim, std::uint64_t seed) {
    if (!(spec_in.gamma_aug > 0.0 && spec_in.gamma_aug < spec_in.gamma_org))
        throw ConfigError("infeasible mixture: need 0 < gamma_aug < gamma_org (got gamma_aug = " +
                          std::to_string(spec_in.gamma_aug) + ", gamma_org = " + std::to_string(spec_in.gamma_org) + ")");
    if (dim < 2) throw ConfigError("make_assumption_dataset: dim must be >= 2");
    if (dim > kMaxDenseDim) throw ConfigError("make_assumption_dataset: dim exceeds dense cap");
    if (spec_in.n < dim || spec_in.n_prime < dim)
        throw ConfigError("make_assumption_dataset: sample counts must be >= dim");

    const double g_org = spec_in.gamma_org;
    const double g_aug = spec_in.gamma_aug;
    rng::Stream s(rng::combine(seed, 0x61737375ULL));

    AssumptionDataset out;
    out.params = RewardParams{random_unit(s, dim)};
    // Orthogonal spread shared by both regimes so Q covers the directions P uses.
    const double spread = 2.0 * g_org;
    out.p_tuples = sample_regime(s, out.params, spec_in.n, g_org, 2.0 * g_org, spread, "p",
                                 [&](double a) { return a >= g_org; });
    out.q_tuples = sample_regime(s, out.params, spec_in.n_prime, 0.0, g_aug, spread, "q",
                                 [&](double a) { return a <= g_aug; });

    out.spec = MixtureSpec::from_counts(spec_in.n, spec_in.n_prime, g_org, g_aug,
                                        certify_beta(out.p_tuples, out.q_tuples));
    if (!(out.spec.beta > 0.0)) throw ConfigError("make_assumption_dataset: could not certify a positive beta");
    return out;
}

}  // namespace mars
