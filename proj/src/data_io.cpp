#include "mars/data_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>
#include <unordered_set>

#include "mars/augmentation.hpp"
#include "mars/error.hpp"
#include "mars/rng.hpp"

namespace mars {

using nlohmann::json;

const char* to_string(DatasetMode m) { return m == DatasetMode::feature ? "feature" : "text"; }

DatasetMode dataset_mode_from_string(const std::string& s) {
    if (s == "feature") return DatasetMode::feature;
    if (s == "text") return DatasetMode::text;
    throw ConfigError("unknown dataset mode '" + s + "' (expected feature|text)");
}

const char* to_string(LabelMode m) {
    switch (m) {
        case LabelMode::balanced: return "balanced";
        case LabelMode::consistent: return "consistent";
        case LabelMode::bradley_terry: return "bradley_terry";
    }
    return "?";
}

LabelMode label_mode_from_string(const std::string& s) {
    if (s == "balanced") return LabelMode::balanced;
    if (s == "consistent") return LabelMode::consistent;
    if (s == "bradley_terry") return LabelMode::bradley_terry;
    throw ConfigError("unknown label mode '" + s + "' (expected balanced|consistent|bradley_terry)");
}

// ---------------------------------------------------------------------------
// files

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError(path.string(), "read failed");
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(path.string(), "cannot open for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError(path.string(), "write failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignore;
        std::filesystem::remove(tmp, ignore);
        throw IoError(path.string(), "rename failed: " + ec.message());
    }
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// datasets

namespace {

FeatureVec feature_array(const json& j, const char* key, const std::string& path, std::size_t line) {
    if (!j.contains(key)) throw DataError(path, line, std::string("missing key '") + key + "'");
    const json& arr = j.at(key);
    if (!arr.is_array()) throw DataError(path, line, std::string("'") + key + "' must be an array of numbers");
    if (arr.empty()) throw DataError(path, line, std::string("'") + key + "' is empty");
    FeatureVec v;
    v.reserve(arr.size());
    for (const auto& x : arr) {
        if (!x.is_number()) throw DataError(path, line, std::string("'") + key + "' must be an array of numbers");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw DataError(path, line, std::string("'") + key + "' has a non-finite entry");
        v.push_back(d);
    }
    return v;
}

std::string string_field(const json& j, const char* key, const std::string& path, std::size_t line) {
    if (!j.contains(key)) throw DataError(path, line, std::string("missing key '") + key + "'");
    if (!j.at(key).is_string()) throw DataError(path, line, std::string("'") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, DatasetMode mode, std::size_t featurizer_dim) {
    if (mode == DatasetMode::text && featurizer_dim == 0) throw ConfigError("featurizer_dim must be >= 1");
    const std::string p = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(p, "cannot open for reading");

    static const std::set<std::string> feature_keys{"id", "chosen_feat", "rejected_feat", "origin", "parent_id"};
    static const std::set<std::string> text_keys{"id", "prompt", "chosen", "rejected", "origin", "parent_id"};
    const auto& allowed = mode == DatasetMode::feature ? feature_keys : text_keys;

    Dataset data;
    std::unordered_set<std::string> seen;
    std::size_t dim = 0;
    std::size_t dim_line = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError(p, lineno, "malformed JSON");
        if (!j.is_object()) throw DataError(p, lineno, "record must be a JSON object");
        for (const auto& [key, _] : j.items())
            if (!allowed.count(key)) throw DataError(p, lineno, "unknown key '" + key + "'");

        const std::string id = string_field(j, "id", p, lineno);
        if (id.empty()) throw DataError(p, lineno, "empty id");
        if (!seen.insert(id).second) throw DataError(p, lineno, "duplicate id '" + id + "'");

        PreferenceTuple z;
        if (mode == DatasetMode::feature) {
            FeatureVec chosen = feature_array(j, "chosen_feat", p, lineno);
            FeatureVec rejected = feature_array(j, "rejected_feat", p, lineno);
            if (chosen.size() != rejected.size())
                throw DataError(p, lineno, "chosen_feat has dim " + std::to_string(chosen.size()) +
                                               " but rejected_feat has dim " + std::to_string(rejected.size()));
            z = PreferenceTuple::make(id, std::move(chosen), std::move(rejected));
        } else {
            TextPair text{string_field(j, "prompt", p, lineno), string_field(j, "chosen", p, lineno),
                          string_field(j, "rejected", p, lineno)};
            FeatureVec chosen = featurize(text.chosen, featurizer_dim);
            FeatureVec rejected = featurize(text.rejected, featurizer_dim);
            z = PreferenceTuple::make(id, std::move(chosen), std::move(rejected), std::move(text));
        }

        if (j.contains("origin")) {
            if (!j["origin"].is_string()) throw DataError(p, lineno, "'origin' must be a string");
            const std::string o = j["origin"].get<std::string>();
            if (o == "human")
                z.origin = Origin::human;
            else if (o == "synthetic")
                z.origin = Origin::synthetic;
            else
                throw DataError(p, lineno, "unknown origin '" + o + "'");
        }
        if (j.contains("parent_id")) z.parent_id = string_field(j, "parent_id", p, lineno);
        if ((z.origin == Origin::synthetic) != z.parent_id.has_value())
            throw DataError(p, lineno, "parent_id must be present exactly when origin is synthetic");

        if (data.empty()) {
            dim = z.dim();
            dim_line = lineno;
        } else if (z.dim() != dim) {
            throw DataError(p, lineno, "dimension " + std::to_string(z.dim()) + " differs from dimension " +
                                           std::to_string(dim) + " established at line " + std::to_string(dim_line));
        }
        data.push_back(std::move(z));
    }
    if (in.bad()) throw IoError(p, "read failed");
    if (data.empty()) throw EmptyInputError(p + ": dataset is empty");
    return data;
}

std::string dataset_to_jsonl(const Dataset& data) {
    std::string out;
    for (const auto& z : data) {
        json j;
        j["id"] = z.id;
        if (z.text) {
            j["prompt"] = z.text->prompt;
            j["chosen"] = z.text->chosen;
            j["rejected"] = z.text->rejected;
        } else {
            j["chosen_feat"] = z.chosen_feat;
            j["rejected_feat"] = z.rejected_feat;
        }
        if (z.origin == Origin::synthetic) {
            j["origin"] = "synthetic";
            if (z.parent_id) j["parent_id"] = *z.parent_id;
        }
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    write_file_atomic(path, dataset_to_jsonl(data));
}

// ---------------------------------------------------------------------------
// generators

void SyntheticSpec::validate() const {
    if (dim == 0) throw ConfigError("dim must be >= 1");
    if (n == 0) throw ConfigError("n must be >= 1");
    if (!(margin_lo >= 0.0 && margin_lo < margin_hi) || !std::isfinite(margin_hi))
        throw ConfigError("infeasible margin regime: need 0 <= margin_lo < margin_hi");
    if (!(orth_scale >= 0.0) || !std::isfinite(orth_scale)) throw ConfigError("orth_scale must be finite and >= 0");
}

RewardParams random_params(std::size_t dim, double norm, std::uint64_t seed) {
    if (dim == 0) throw ConfigError("dim must be >= 1");
    rng::Stream s(rng::combine(seed, 0x7468657461ULL));
    Vector v(dim);
    double n = 0.0;
    while (n < 1e-8) {
        for (double& x : v) x = s.normal();
        n = norm2(v);
    }
    for (double& x : v) x *= norm / n;
    return RewardParams{std::move(v)};
}

Dataset generate_synthetic(const SyntheticSpec& spec, const RewardParams& theta_true) {
    spec.validate();
    if (theta_true.dim() != spec.dim) throw DimensionError(spec.dim, theta_true.dim(), "generate_synthetic: theta_true");
    const double tn = norm2(theta_true.theta);
    if (!(tn > 0.0)) throw ConfigError("generate_synthetic: theta_true must be nonzero");

    Vector axis = theta_true.theta;
    for (double& x : axis) x /= tn;

    Dataset out;
    out.reserve(spec.n);
    for (std::size_t k = 0; k < spec.n; ++k) {
        // Per-tuple stream: output does not depend on generation order.
        rng::Stream s(rng::combine(spec.seed, k));
        const double m = s.uniform(spec.margin_lo, spec.margin_hi);

        Vector w(spec.dim, 0.0);
        if (spec.dim > 1) {
            double wn = 0.0;
            while (wn < 1e-8) {
                for (double& x : w) x = s.normal();
                const double p = dot(w, axis);
                for (std::size_t i = 0; i < spec.dim; ++i) w[i] -= p * axis[i];
                wn = norm2(w);
            }
            const double r = s.uniform(0.0, spec.orth_scale);
            for (double& x : w) x *= r / wn;
        }

        Vector rejected(spec.dim);
        for (double& x : rejected) x = s.normal();
        Vector chosen(spec.dim);
        for (std::size_t i = 0; i < spec.dim; ++i) chosen[i] = rejected[i] + (m / tn) * axis[i] + w[i];

        bool flip = false;
        switch (spec.labels) {
            case LabelMode::balanced: flip = (k % 2 == 1); break;
            case LabelMode::consistent: flip = false; break;
            case LabelMode::bradley_terry: flip = s.uniform() < sigmoid(-m); break;
        }
        if (flip) std::swap(chosen, rejected);
        out.push_back(PreferenceTuple::make(spec.id_prefix + std::to_string(k), std::move(chosen), std::move(rejected)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// params

json params_to_json(const RewardParams& p) { return json{{"dim", p.dim()}, {"theta", p.theta}}; }

RewardParams params_from_json(const json& j, const std::string& origin) {
    if (!j.is_object() || !j.contains("theta") || !j["theta"].is_array())
        throw DataError(origin, 0, "params must be an object with a 'theta' array");
    RewardParams p;
    for (const auto& x : j["theta"]) {
        if (!x.is_number()) throw DataError(origin, 0, "'theta' must contain numbers only");
        p.theta.push_back(x.get<double>());
        if (!std::isfinite(p.theta.back())) throw DataError(origin, 0, "'theta' has a non-finite entry");
    }
    if (p.theta.empty()) throw DataError(origin, 0, "'theta' is empty");
    if (j.contains("dim") && (!j["dim"].is_number_unsigned() || j["dim"].get<std::size_t>() != p.dim()))
        throw DataError(origin, 0, "'dim' does not match the length of 'theta'");
    return p;
}

void save_params(const RewardParams& p, const std::filesystem::path& path) {
    write_file_atomic(path, params_to_json(p).dump(2) + "\n");
}

RewardParams load_params(const std::filesystem::path& path) {
    const json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw DataError(path.string(), 0, "malformed JSON");
    return params_from_json(j, path.string());
}

// ---------------------------------------------------------------------------
// reports

namespace {

// JSON cannot carry inf/nan; emit them as strings.
json number(double x) {
    if (std::isfinite(x)) return x;
    return format_double(x);
}

}  // namespace

std::string epoch_reports_csv(const std::vector<EpochReport>& reports) {
    std::string out = "epoch,size_before,size_after,synthetic_added,loss_before,loss_after,mean_abs_margin,snr\n";
    for (const auto& r : reports) {
        out += std::to_string(r.epoch) + "," + std::to_string(r.dataset_size_before) + "," +
               std::to_string(r.dataset_size_after) + "," + std::to_string(r.synthetic_added) + "," +
               format_double(r.loss_before) + "," + format_double(r.loss_after) + "," +
               format_double(r.mean_abs_margin) + "," + format_double(r.snr) + "\n";
    }
    return out;
}

json epoch_report_json(const EpochReport& r, bool include_plan) {
    json j{{"epoch", r.epoch},
           {"size_before", r.dataset_size_before},
           {"size_after", r.dataset_size_after},
           {"synthetic_added", r.synthetic_added},
           {"loss_before", number(r.loss_before)},
           {"loss_after", number(r.loss_after)},
           {"mean_abs_margin", number(r.mean_abs_margin)},
           {"snr", number(r.snr)},
           {"snr_degenerate", r.snr_degenerate}};
    if (include_plan) {
        json recs = json::array();
        for (const auto& p : r.plan.records) {
            if (p.b == 0) continue;
            recs.push_back({{"tuple_id", p.tuple_id}, {"delta", number(p.delta)}, {"q", number(p.q)},
                            {"b", p.b}, {"n_plus", p.n_plus}, {"n_minus", p.n_minus}});
        }
        j["plan"] = {{"budget_B", r.plan.budget_B}, {"records", std::move(recs)}};
    }
    return j;
}

std::string margin_bins_csv(const std::vector<MarginBin>& bins) {
    std::string out = "bin_index,lo,hi,mean_curvature,min_eig\n";
    for (const auto& b : bins)
        out += std::to_string(b.index) + "," + format_double(b.lo) + "," + format_double(b.hi) + "," +
               format_double(b.mean_curvature_weight) + "," + format_double(b.min_eigenvalue) + "\n";
    return out;
}

std::string curvature_checks_csv(const CurvatureReport& r) {
    std::string out = "alpha,factor,psd_slack,eig_bound_slack,lambda_min_R,pass\n";
    for (const auto& c : r.checks)
        out += format_double(c.alpha) + "," + format_double(c.factor) + "," + format_double(c.psd_slack) + "," +
               format_double(c.eig_bound_slack) + "," + format_double(c.lambda_min_R) + "," +
               (c.pass ? "true" : "false") + "\n";
    return out;
}

json curvature_report_json(const CurvatureReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"alpha", number(c.alpha)},
                          {"factor", number(c.factor)},
                          {"psd_slack", number(c.psd_slack)},
                          {"eig_bound_slack", number(c.eig_bound_slack)},
                          {"lambda_min_R", number(c.lambda_min_R)},
                          {"pass", c.pass}});
    return json{{"verdict", r.pass ? "pass" : "fail"},
                {"gamma_org", number(r.gamma_org)},
                {"gamma_aug", number(r.gamma_aug)},
                {"beta", number(r.beta)},
                {"c_org", number(r.c_org)},
                {"c_aug", number(r.c_aug)},
                {"gamma_curv", number(r.gamma_curv)},
                {"beta_slack", number(r.beta_slack)},
                {"q_dominance_slack", number(r.q_dominance_slack)},
                {"lambda_min_P", number(r.lambda_min_P)},
                {"lambda_min_Q", number(r.lambda_min_Q)},
                {"tolerance", number(r.tolerance)},
                {"checks", std::move(checks)}};
}

std::string eval_summary_csv(const EvalSummary& s) {
    std::string hist;
    for (std::size_t i = 0; i < s.histogram.size(); ++i) {
        if (i) hist.push_back(';');
        hist += format_double(s.histogram[i].lo) + ":" + format_double(s.histogram[i].hi) + ":" +
                std::to_string(s.histogram[i].count);
    }
    return "n,pairwise_accuracy,margin_mean,margin_std,snr,snr_degenerate,histogram\n" + std::to_string(s.n) + "," +
           format_double(s.pairwise_accuracy) + "," + format_double(s.margin_mean) + "," +
           format_double(s.margin_std) + "," + format_double(s.snr) + "," + (s.snr_degenerate ? "true" : "false") +
           "," + hist + "\n";
}

json eval_summary_json(const EvalSummary& s) {
    json hist = json::array();
    for (const auto& b : s.histogram) hist.push_back({{"lo", number(b.lo)}, {"hi", number(b.hi)}, {"count", b.count}});
    return json{{"n", s.n},
                {"pairwise_accuracy", number(s.pairwise_accuracy)},
                {"margin_mean", number(s.margin_mean)},
                {"margin_std", number(s.margin_std)},
                {"snr", number(s.snr)},
                {"snr_degenerate", s.snr_degenerate},
                {"histogram", std::move(hist)}};
}

void save_report(const json& report, const std::filesystem::path& path) {
    write_file_atomic(path, report.dump(2) + "\n");
}

void save_csv(std::string_view csv, const std::filesystem::path& path) { write_file_atomic(path, csv); }

}  // namespace mars
