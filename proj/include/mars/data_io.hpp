#pragma once

// Dataset files, synthetic generators, and report serialization.
//
// Feature-mode JSONL, one tuple per line:
//   {"id": str, "chosen_feat": [f...], "rejected_feat": [f...]}
// Text-mode JSONL:
//   {"id": str, "prompt": str, "chosen": str, "rejected": str}
// Both accept the optional keys "origin" ("human"|"synthetic") and
// "parent_id" (required iff origin is synthetic). Other keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mars/bt_core.hpp"
#include "mars/fisher_lab.hpp"
#include "mars/mars_engine.hpp"
#include "mars/metrics.hpp"

namespace mars {

enum class DatasetMode { feature, text };
const char* to_string(DatasetMode m);
DatasetMode dataset_mode_from_string(const std::string& s);

// Text mode featurizes each response with featurize(response, featurizer_dim).
Dataset load_dataset(const std::filesystem::path& path, DatasetMode mode, std::size_t featurizer_dim = 64);

// Text-mode tuples are written in text mode, everything else in feature mode.
void save_dataset(const Dataset& data, const std::filesystem::path& path);

std::string dataset_to_jsonl(const Dataset& data);

enum class LabelMode {
    balanced,    // preference sign alternates
    consistent,  // chosen is always the higher-reward response
    bradley_terry  // label sampled from sigma(true margin)
};
const char* to_string(LabelMode m);
LabelMode label_mode_from_string(const std::string& s);

struct SyntheticSpec {
    std::size_t dim = 16;
    std::size_t n = 1000;
    double margin_lo = 0.0;
    double margin_hi = 4.0;
    LabelMode labels = LabelMode::balanced;
    // Norm of the psi component orthogonal to theta_true is drawn from [0, orth_scale].
    double orth_scale = 1.0;
    std::string id_prefix = "s";
    std::uint64_t seed = 0;

    void validate() const;
};

// Tuples whose |theta_true . psi| is uniform in [margin_lo, margin_hi].
// Under LabelMode::bradley_terry the stored orientation is flipped with
// probability sigma(-|margin|), so the label is a draw from the BT model.
Dataset generate_synthetic(const SyntheticSpec& spec, const RewardParams& theta_true);

// Random direction scaled to the given norm, keyed by seed.
RewardParams random_params(std::size_t dim, double norm, std::uint64_t seed);

// Writes via a temp file in the same directory, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

nlohmann::json params_to_json(const RewardParams& p);
RewardParams params_from_json(const nlohmann::json& j, const std::string& origin = "params");
void save_params(const RewardParams& p, const std::filesystem::path& path);
RewardParams load_params(const std::filesystem::path& path);

// Shortest round-trip decimal form; "inf"/"-inf"/"nan" for non-finite values.
std::string format_double(double x);

// epoch,size_before,size_after,synthetic_added,loss_before,loss_after,mean_abs_margin,snr
std::string epoch_reports_csv(const std::vector<EpochReport>& reports);
nlohmann::json epoch_report_json(const EpochReport& r, bool include_plan = true);

// bin_index,lo,hi,mean_curvature,min_eig
std::string margin_bins_csv(const std::vector<MarginBin>& bins);

// alpha,factor,psd_slack,eig_bound_slack,lambda_min_R,pass
std::string curvature_checks_csv(const CurvatureReport& r);
nlohmann::json curvature_report_json(const CurvatureReport& r);

// n,pairwise_accuracy,margin_mean,margin_std,snr,snr_degenerate,histogram
// with histogram as "lo:hi:count" entries joined by ';'.
std::string eval_summary_csv(const EvalSummary& s);
nlohmann::json eval_summary_json(const EvalSummary& s);

void save_report(const nlohmann::json& report, const std::filesystem::path& path);
void save_csv(std::string_view csv, const std::filesystem::path& path);

}  // namespace mars
