#include "mars/run_config.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "mars/error.hpp"

namespace mars {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
    return x;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    const std::int64_t x = parse_int(key, v);
    if (x < 0) throw ConfigError("'" + key + "' must be >= 0, got '" + v + "'");
    return static_cast<std::size_t>(x);
}

double parse_real(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(x))
        throw ConfigError("'" + key + "' expects a finite number, got '" + v + "'");
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("'" + key + "' expects true|false, got '" + v + "'");
}

std::vector<double> parse_real_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const std::string item = trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos
                                                                                                   : comma - start));
        out.push_back(parse_real(key, item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

template <class Field>
ConfigKey count_key(const char* name, const char* help, Field field) {
    return {name, help, [name, field](RunConfig& c, const std::string& v) { c.*field = parse_count(name, v); },
            [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

template <class Field>
ConfigKey int_key(const char* name, const char* help, Field field) {
    return {name, help, [name, field](RunConfig& c, const std::string& v) { c.*field = parse_int(name, v); },
            [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

template <class Field>
ConfigKey real_key(const char* name, const char* help, Field field) {
    return {name, help, [name, field](RunConfig& c, const std::string& v) { c.*field = parse_real(name, v); },
            [field](const RunConfig& c) { return format_double(c.*field); }};
}

template <class Field>
ConfigKey bool_key(const char* name, const char* help, Field field) {
    return {name, help, [name, field](RunConfig& c, const std::string& v) { c.*field = parse_bool(name, v); },
            [field](const RunConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

template <class Field>
ConfigKey string_key(const char* name, const char* help, Field field) {
    return {name, help, [field](RunConfig& c, const std::string& v) { c.*field = v; },
            [field](const RunConfig& c) { return quote(c.*field); }};
}

template <class Field, class Parse>
ConfigKey enum_key(const char* name, const char* help, Field field, Parse parse) {
    return {name, help, [field, parse](RunConfig& c, const std::string& v) { c.*field = parse(v); },
            [field](const RunConfig& c) { return std::string(to_string(c.*field)); }};
}

std::vector<ConfigKey> build_keys() {
    std::vector<ConfigKey> k;
    k.push_back(string_key("data", "input dataset (JSONL)", &RunConfig::data));
    k.push_back(enum_key("data_mode", "feature|text", &RunConfig::data_mode, dataset_mode_from_string));
    k.push_back(count_key("featurizer_dim", "hashed featurizer dimension (text mode)", &RunConfig::featurizer_dim));
    k.push_back(string_key("params", "parameter file (JSON); empty starts from zeros", &RunConfig::params));
    k.push_back(string_key("out", "output directory", &RunConfig::out));
    k.push_back(int_key("seed", "seed for every random stream", &RunConfig::seed));

    k.push_back(count_key("epochs_T", "refinement epochs", &RunConfig::epochs_T));
    k.push_back(int_key("budget_B", "augmented responses per epoch; -1 means 2 x dataset size", &RunConfig::budget_B));
    k.push_back(real_key("tau", "allocation temperature in (0, 1]", &RunConfig::tau));
    k.push_back(enum_key("split_policy", "balanced|chosen_only|rejected_only", &RunConfig::split_policy,
                         split_policy_from_string));
    k.push_back(bool_key("cumulative", "grow D^t from D^{t-1} (true) or from D^0 (false)", &RunConfig::cumulative));
    k.push_back(bool_key("augment_synthetic", "let synthetic tuples receive budget", &RunConfig::augment_synthetic));

    k.push_back(real_key("learning_rate", "gradient descent step size", &RunConfig::learning_rate));
    k.push_back(count_key("epochs_inner", "gradient steps per training call", &RunConfig::epochs_inner));
    k.push_back(real_key("l2", "L2 penalty", &RunConfig::l2));

    k.push_back(enum_key("augmenter", "feature_jitter|token_perturb|external_service", &RunConfig::augmenter,
                         augmenter_kind_from_string));
    k.push_back(real_key("jitter_scale", "feature jitter scale", &RunConfig::jitter_scale));
    k.push_back(enum_key("noise", "uniform|gaussian", &RunConfig::noise, noise_kind_from_string));
    k.push_back(real_key("edit_rate", "token edit probability", &RunConfig::edit_rate));
    k.push_back(string_key("endpoint", "paraphrase service URL", &RunConfig::endpoint));
    k.push_back(int_key("timeout_ms", "paraphrase request timeout", &RunConfig::timeout_ms));
    k.push_back(count_key("max_in_flight", "concurrent paraphrase requests", &RunConfig::max_in_flight));

    k.push_back(count_key("n_bins", "equal-count margin bins", &RunConfig::n_bins));
    k.push_back(real_key("hist_width", "margin histogram bin width", &RunConfig::hist_width));

    k.push_back(count_key("dim", "feature dimension for generated data", &RunConfig::dim));
    k.push_back(count_key("n", "generated tuple count", &RunConfig::n));
    k.push_back(real_key("margin_lo", "smallest generated |margin|", &RunConfig::margin_lo));
    k.push_back(real_key("margin_hi", "largest generated |margin|", &RunConfig::margin_hi));
    k.push_back(enum_key("labels", "balanced|consistent|bradley_terry", &RunConfig::labels, label_mode_from_string));
    k.push_back(real_key("orth_scale", "norm bound of the off-axis psi component", &RunConfig::orth_scale));
    k.push_back(real_key("theta_norm", "norm of the generated true parameters", &RunConfig::theta_norm));

    k.push_back(count_key("n_p", "well-separated sample count", &RunConfig::n_p));
    k.push_back(count_key("n_q", "hard sample count", &RunConfig::n_q));
    k.push_back(real_key("gamma_org", "margin floor of the well-separated set", &RunConfig::gamma_org));
    k.push_back(real_key("gamma_aug", "margin ceiling of the hard set", &RunConfig::gamma_aug));
    k.push_back({"alpha_grid", "comma-separated mixture weights",
                 [](RunConfig& c, const std::string& v) { c.alpha_grid = parse_real_list("alpha_grid", v); },
                 [](const RunConfig& c) {
                     std::string s;
                     for (std::size_t i = 0; i < c.alpha_grid.size(); ++i) {
                         if (i) s += ",";
                         s += format_double(c.alpha_grid[i]);
                     }
                     return quote(s);
                 }});
    return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : config_keys()) {
        if (k.name == key) {
            k.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& origin) {
    std::set<std::string> seen;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;

        // Strip a comment unless the '#' sits inside a quoted value.
        bool in_quotes = false;
        std::size_t cut = raw.size();
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '"') in_quotes = !in_quotes;
            if (raw[i] == '#' && !in_quotes) {
                cut = i;
                break;
            }
        }
        const std::string line = trim(raw.substr(0, cut));
        if (line.empty()) continue;

        const auto where = origin + ":" + std::to_string(lineno) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError(where + "missing key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        } else if (!value.empty() && value.front() == '"') {
            throw ConfigError(where + "unterminated string");
        }
        if (!seen.insert(key).second) throw ConfigError(where + "repeated key '" + key + "'");
        try {
            set_config_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    apply_config_text(cfg, read_file(path), path);
    return cfg;
}

std::string config_to_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
    return out;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& k : config_keys()) {
        std::string v = k.get(cfg);
        if (v.size() >= 2 && v.front() == '"') v = v.substr(1, v.size() - 2);
        j[k.name] = v;
    }
    return j;
}

void RunConfig::validate() const {
    if (featurizer_dim == 0) throw ConfigError("featurizer_dim must be >= 1");
    if (out.empty()) throw ConfigError("out must not be empty");
    if (epochs_T == 0) throw ConfigError("epochs_T must be >= 1");
    if (budget_B < -1) throw ConfigError("budget_B must be >= 0, or -1 for twice the dataset size");
    if (n_bins == 0) throw ConfigError("n_bins must be >= 1");
    if (!(hist_width > 0.0)) throw ConfigError("hist_width must be > 0");
    if (!(theta_norm > 0.0)) throw ConfigError("theta_norm must be > 0");
    if (alpha_grid.empty()) throw ConfigError("alpha_grid must not be empty");
    for (double a : alpha_grid)
        if (a < 0.0 || a > 1.0) throw ConfigError("alpha_grid entries must lie in [0, 1]");
    mars_config(1).validate();
    train_config().validate();
    augmenter_spec().validate();
}

MarsConfig RunConfig::mars_config(std::size_t dataset_size) const {
    MarsConfig m;
    m.epochs_T = epochs_T;
    m.budget_B = budget_B < 0 ? 2 * static_cast<std::uint64_t>(dataset_size) : static_cast<std::uint64_t>(budget_B);
    m.tau = tau;
    m.split_policy = split_policy;
    m.cumulative = cumulative;
    m.augment_synthetic = augment_synthetic;
    m.seed = seed;
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.learning_rate = learning_rate;
    t.epochs_inner = epochs_inner;
    t.l2 = l2;
    t.seed = seed;
    return t;
}

AugmenterSpec RunConfig::augmenter_spec() const {
    AugmenterSpec a;
    a.kind = augmenter;
    a.jitter_scale = jitter_scale;
    a.noise = noise;
    a.edit_rate = edit_rate;
    a.endpoint = endpoint;
    a.timeout_ms = timeout_ms;
    a.max_in_flight = max_in_flight;
    a.featurizer_dim = featurizer_dim;
    a.seed = seed;
    return a;
}

SyntheticSpec RunConfig::synthetic_spec() const {
    SyntheticSpec s;
    s.dim = dim;
    s.n = n;
    s.margin_lo = margin_lo;
    s.margin_hi = margin_hi;
    s.labels = labels;
    s.orth_scale = orth_scale;
    s.seed = static_cast<std::uint64_t>(seed);
    return s;
}

}  // namespace mars
