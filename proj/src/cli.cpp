#include "mars/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "mars/data_io.hpp"
#include "mars/error.hpp"
#include "mars/fisher_lab.hpp"
#include "mars/metrics.hpp"
#include "mars/run_config.hpp"

namespace mars::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::shared_ptr<spdlog::logger> logger() {
    if (auto existing = spdlog::get("mars")) return existing;
    auto log = spdlog::stderr_logger_mt("mars");
    log->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("MARS_LOG")) {
        const std::string v = env;
        if (v == "error") level = spdlog::level::err;
        else if (v == "warn") level = spdlog::level::warn;
        else if (v == "info") level = spdlog::level::info;
        else if (v == "debug") level = spdlog::level::debug;
    }
    log->set_level(level);
    return log;
}

fs::path prepare_out(const RunConfig& cfg) {
    const fs::path out = cfg.out;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw IoError(cfg.out, "cannot create output directory");
    write_file_atomic(out / "config.resolved", config_to_text(cfg));
    return out;
}

Dataset require_dataset(const RunConfig& cfg) {
    if (cfg.data.empty()) throw ConfigError("this command requires --data");
    if (!fs::exists(cfg.data)) throw ConfigError("dataset file not found: " + cfg.data);
    Dataset d = load_dataset(cfg.data, cfg.data_mode, cfg.featurizer_dim);
    logger()->info("loaded {} tuples of dim {} from {}", d.size(), d.front().dim(), cfg.data);
    return d;
}

RewardParams initial_params(const RunConfig& cfg, std::size_t dim, bool required) {
    if (cfg.params.empty()) {
        if (required) throw ConfigError("this command requires --params");
        return RewardParams::zeros(dim);
    }
    if (!fs::exists(cfg.params)) throw ConfigError("params file not found: " + cfg.params);
    RewardParams p = load_params(cfg.params);
    if (p.dim() != dim) throw DimensionError(dim, p.dim(), "params file " + cfg.params);
    return p;
}

std::string plan_csv(const std::vector<EpochReport>& reports) {
    std::string out = "epoch,tuple_id,delta,q,b,n_plus,n_minus\n";
    for (const auto& r : reports)
        for (const auto& p : r.plan.records) {
            if (p.b == 0) continue;
            out += std::to_string(r.epoch) + "," + p.tuple_id + "," + format_double(p.delta) + "," +
                   format_double(p.q) + "," + std::to_string(p.b) + "," + std::to_string(p.n_plus) + "," +
                   std::to_string(p.n_minus) + "\n";
        }
    return out;
}

enum class TrainMode { mars, uniform, plain };

int cmd_train(const RunConfig& cfg, TrainMode mode, const std::string& name, std::ostream& out) {
    const Dataset data = require_dataset(cfg);
    const RewardParams init = initial_params(cfg, data.front().dim(), false);
    MarsConfig mc = cfg.mars_config(data.size());
    if (mode == TrainMode::plain) mc.budget_B = 0;
    const TrainConfig tc = cfg.train_config();
    const std::unique_ptr<Augmenter> aug = make_augmenter(cfg.augmenter_spec());
    const fs::path dir = prepare_out(cfg);

    const AllocationMode alloc = mode == TrainMode::uniform ? AllocationMode::uniform : AllocationMode::margin_softmax;
    MarsResult result;
    try {
        result = run_refinement(data, init, mc, tc, *aug, alloc);
    } catch (const MarsRunError& e) {
        save_csv(epoch_reports_csv(e.partial_reports()), dir / "epochs.csv");
        throw;
    }
    for (const auto& r : result.reports)
        logger()->info("epoch {}: size {} -> {}, loss {} -> {}, snr {}", r.epoch, r.dataset_size_before,
                       r.dataset_size_after, r.loss_before, r.loss_after, r.snr);

    const EvalSummary summary = evaluate(result.params, data, cfg.hist_width);
    json epochs = json::array();
    for (const auto& r : result.reports) epochs.push_back(epoch_report_json(r, false));
    const json report{{"command", name},
                      {"config", config_to_json(cfg)},
                      {"budget_B", mc.budget_B},
                      {"epochs", std::move(epochs)},
                      {"final", eval_summary_json(summary)}};

    save_csv(epoch_reports_csv(result.reports), dir / "epochs.csv");
    save_csv(plan_csv(result.reports), dir / "plan.csv");
    save_params(result.params, dir / "params.json");
    save_report(report, dir / "report.json");
    out << "final pairwise_accuracy=" << format_double(summary.pairwise_accuracy)
        << " snr=" << format_double(summary.snr) << " size=" << result.final_dataset.size() << "\n";
    return kExitOk;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& out) {
    const Dataset data = require_dataset(cfg);
    const RewardParams params = initial_params(cfg, data.front().dim(), true);
    const std::vector<MarginBin> bins = bin_by_margin(params, data, cfg.n_bins);
    const fs::path dir = prepare_out(cfg);
    const std::string csv = margin_bins_csv(bins);
    save_csv(csv, dir / "bins.csv");
    out << csv;
    return kExitOk;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    const MixtureSpec spec = MixtureSpec::from_counts(cfg.n_p, cfg.n_q, cfg.gamma_org, cfg.gamma_aug);
    const AssumptionDataset ad = make_assumption_dataset(spec, cfg.dim, static_cast<std::uint64_t>(cfg.seed));
    const CurvatureReport rep = verify_theorem(ad.p_tuples, ad.q_tuples, ad.params, ad.spec, cfg.alpha_grid);
    const fs::path dir = prepare_out(cfg);
    json verdict = curvature_report_json(rep);
    verdict["config"] = config_to_json(cfg);
    save_report(verdict, dir / "verdict.json");
    save_csv(curvature_checks_csv(rep), dir / "alpha_checks.csv");
    out << "verdict " << (rep.pass ? "pass" : "fail") << " gamma_curv=" << format_double(rep.gamma_curv)
        << " beta=" << format_double(rep.beta) << "\n";
    return rep.pass ? kExitOk : kExitRuntime;
}

int cmd_gen(const RunConfig& cfg, std::ostream& out) {
    const SyntheticSpec spec = cfg.synthetic_spec();
    spec.validate();
    const RewardParams theta = random_params(cfg.dim, cfg.theta_norm, static_cast<std::uint64_t>(cfg.seed));
    const Dataset data = generate_synthetic(spec, theta);
    const fs::path dir = prepare_out(cfg);
    save_dataset(data, dir / "data.jsonl");
    save_params(theta, dir / "theta_true.json");
    out << "wrote " << data.size() << " tuples to " << (dir / "data.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const Dataset data = require_dataset(cfg);
    const RewardParams params = initial_params(cfg, data.front().dim(), true);
    const EvalSummary s = evaluate(params, data, cfg.hist_width);
    const fs::path dir = prepare_out(cfg);
    const std::string csv = eval_summary_csv(s);
    json j = eval_summary_json(s);
    j["config"] = config_to_json(cfg);
    save_csv(csv, dir / "eval.csv");
    save_report(j, dir / "eval.json");
    out << csv;
    return kExitOk;
}

int exit_code_for(const Error& e) {
    const std::string k = e.kind();
    if (k == "config" || k == "data" || k == "dimension" || k == "empty_input") return kExitValidation;
    return kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Margin-aware preference augmentation and curvature analysis", "mars"};
    app.require_subcommand(1);

    struct Sub {
        std::string name;
        std::string help;
        CLI::App* app = nullptr;
        std::string config_path{};
        std::map<std::string, std::string> values{};
    };
    std::vector<Sub> subs{
        {"train-mars", "margin-aware augmentation with iterative retraining"},
        {"train-uniform", "uniform augmentation baseline"},
        {"train-plain", "refinement without augmentation (budget 0)"},
        {"analyze-curvature", "margin-binned curvature of a params + dataset pair"},
        {"verify-theorem", "numerical check of the mixture curvature bound"},
        {"gen-data", "write a synthetic dataset and its true parameters"},
        {"eval", "pairwise accuracy and margin statistics"},
    };
    const RunConfig defaults;
    for (auto& s : subs) {
        s.app = app.add_subcommand(s.name, s.help);
        s.app->add_option("--config", s.config_path, "key = value config file");
        for (const auto& k : config_keys())
            s.app->add_option("--" + k.name, s.values[k.name], k.help + " [default: " + k.get(defaults) + "]");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitValidation;
    }

    const auto it = std::find_if(subs.begin(), subs.end(), [](const Sub& s) { return s.app->parsed(); });
    const Sub& sub = *it;

    try {
        RunConfig cfg;
        if (!sub.config_path.empty()) {
            if (!fs::exists(sub.config_path)) throw ConfigError("config file not found: " + sub.config_path);
            apply_config_text(cfg, read_file(sub.config_path), sub.config_path);
        }
        for (const auto& k : config_keys())
            if (sub.app->get_option("--" + k.name)->count() > 0) set_config_value(cfg, k.name, sub.values.at(k.name));
        cfg.validate();

        const std::string& name = sub.name;
        logger()->debug("running {}", name);
        if (name == "train-mars") return cmd_train(cfg, TrainMode::mars, name, out);
        if (name == "train-uniform") return cmd_train(cfg, TrainMode::uniform, name, out);
        if (name == "train-plain") return cmd_train(cfg, TrainMode::plain, name, out);
        if (name == "analyze-curvature") return cmd_analyze(cfg, out);
        if (name == "verify-theorem") return cmd_verify(cfg, out);
        if (name == "gen-data") return cmd_gen(cfg, out);
        return cmd_eval(cfg, out);
    } catch (const Error& e) {
        logger()->debug("{} error: {}", e.kind(), e.what());
        err << "error (" << e.kind() << "): " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace mars::cli
