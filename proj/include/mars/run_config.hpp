#pragma once

// Flat run configuration shared by every CLI command.
//
// Text form, one entry per line:
//   key = value   # trailing comments allowed
// Strings may be bare or double-quoted. Unknown and repeated keys are rejected.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mars/augmentation.hpp"
#include "mars/bt_core.hpp"
#include "mars/data_io.hpp"
#include "mars/mars_engine.hpp"

namespace mars {

struct RunConfig {
    // inputs and outputs
    std::string data;
    DatasetMode data_mode = DatasetMode::feature;
    std::size_t featurizer_dim = 64;
    std::string params;  // initial / evaluated parameters; empty means zeros
    std::string out = "out";
    std::int64_t seed = 0;

    // refinement loop
    std::size_t epochs_T = 3;
    std::int64_t budget_B = -1;  // -1: twice the dataset size
    double tau = 0.1;
    SplitPolicy split_policy = SplitPolicy::balanced;
    bool cumulative = true;
    bool augment_synthetic = false;

    // inner trainer
    double learning_rate = 0.5;
    std::size_t epochs_inner = 200;
    double l2 = 0.0;

    // augmenter
    AugmenterKind augmenter = AugmenterKind::feature_jitter;
    double jitter_scale = 0.1;
    NoiseKind noise = NoiseKind::uniform;
    double edit_rate = 0.15;
    std::string endpoint;
    std::int64_t timeout_ms = 30000;
    std::size_t max_in_flight = 4;

    // analysis and evaluation
    std::size_t n_bins = 5;
    double hist_width = 0.5;

    // generators
    std::size_t dim = 16;
    std::size_t n = 1000;
    double margin_lo = 0.0;
    double margin_hi = 4.0;
    LabelMode labels = LabelMode::balanced;
    double orth_scale = 1.0;
    double theta_norm = 1.0;

    // mixture curvature bound check
    std::size_t n_p = 200;
    std::size_t n_q = 200;
    double gamma_org = 2.0;
    double gamma_aug = 0.5;
    std::vector<double> alpha_grid{0.0, 0.25, 0.5, 0.75, 1.0};

    void validate() const;

    MarsConfig mars_config(std::size_t dataset_size) const;
    TrainConfig train_config() const;
    AugmenterSpec augmenter_spec() const;
    SyntheticSpec synthetic_spec() const;
};

struct ConfigKey {
    std::string name;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

// Every key, in echo order.
const std::vector<ConfigKey>& config_keys();

// Throws ConfigError on an unknown key or an unparsable value.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Applies every entry of `text` on top of `cfg`. Errors cite `origin` and the 1-based line.
void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& origin = "config");

RunConfig load_run_config(const std::string& path);

// Resolved echo in the same grammar the parser accepts.
std::string config_to_text(const RunConfig& cfg);
nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace mars
