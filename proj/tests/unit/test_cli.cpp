#include <doctest.h>

#include <cstdlib>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "mars/cli.hpp"
#include "mars/data_io.hpp"
#include "mars/run_config.hpp"
#include "test_support.hpp"

using namespace mars;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> csv_rows(const std::string& csv) {
    std::vector<std::string> rows;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) rows.push_back(line);
    return rows;
}

std::vector<double> column(const std::string& csv, std::size_t col) {
    std::vector<double> values;
    const auto rows = csv_rows(csv);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        std::istringstream line(rows[r]);
        std::string cell;
        for (std::size_t c = 0; c <= col; ++c) std::getline(line, cell, ',');
        values.push_back(std::stod(cell));
    }
    return values;
}

}  // namespace

TEST_CASE("gen-data then plain training") {
    testing::TempDir dir("cli_plain");
    const std::string data_dir = (dir / "gen").string();
    auto g = run_cli({"gen-data", "--n", "200", "--dim", "4", "--seed", "3", "--out", data_dir});
    REQUIRE(g.code == 0);
    CHECK(fs::exists(dir / "gen/data.jsonl"));
    CHECK(fs::exists(dir / "gen/theta_true.json"));
    CHECK(fs::exists(dir / "gen/config.resolved"));
    CHECK(load_dataset(dir / "gen/data.jsonl", DatasetMode::feature).size() == 200);

    const std::string out = (dir / "plain").string();
    auto t = run_cli({"train-plain", "--data", data_dir + "/data.jsonl", "--epochs_T", "1", "--out", out});
    REQUIRE(t.code == 0);
    CHECK(t.out.rfind("final pairwise_accuracy=", 0) == 0);
    const std::string epochs = read_file(dir / "plain/epochs.csv");
    const auto rows = csv_rows(epochs);
    REQUIRE(rows.size() == 2);
    CHECK(column(epochs, 3) == std::vector<double>{0.0});
    CHECK(csv_rows(read_file(dir / "plain/plan.csv")).size() == 1);
    const auto report = nlohmann::json::parse(read_file(dir / "plain/report.json"));
    CHECK(report["command"] == "train-plain");
    CHECK(report["budget_B"] == 0);
    CHECK(load_params(dir / "plain/params.json").dim() == 4);

    const std::string mout = (dir / "mars").string();
    auto m = run_cli({"train-mars", "--data", data_dir + "/data.jsonl", "--epochs_T", "2", "--out", mout});
    REQUIRE(m.code == 0);
    const std::string mep = read_file(dir / "mars/epochs.csv");
    CHECK(csv_rows(mep).size() == 3);
    for (double added : column(mep, 3)) CHECK(added > 0);
    const std::string plan = read_file(dir / "mars/plan.csv");
    double total = 0;
    for (double b : column(plan, 4)) total += b;
    CHECK(total == 2 * 400);  // B = 2N per epoch
}

TEST_CASE("analysis commands") {
    testing::TempDir dir("cli_analysis");
    const std::string gen = (dir / "gen").string();
    REQUIRE(run_cli({"gen-data", "--n", "500", "--dim", "6", "--out", gen}).code == 0);
    const std::string data = gen + "/data.jsonl", theta = gen + "/theta_true.json";

    auto a = run_cli({"analyze-curvature", "--data", data, "--params", theta, "--out", (dir / "a").string()});
    REQUIRE(a.code == 0);
    CHECK(a.out == read_file(dir / "a/bins.csv"));
    const auto curv = column(a.out, 3);
    REQUIRE(curv.size() == 5);
    for (std::size_t i = 1; i < curv.size(); ++i) CHECK(curv[i] < curv[i - 1]);

    auto e = run_cli({"eval", "--data", data, "--params", theta, "--out", (dir / "e").string()});
    REQUIRE(e.code == 0);
    CHECK(column(e.out, 1) == std::vector<double>{0.5});  // balanced labels
    CHECK(fs::exists(dir / "e/eval.json"));

    auto v = run_cli({"verify-theorem", "--dim", "4", "--out", (dir / "v").string()});
    REQUIRE(v.code == 0);
    CHECK(v.out.rfind("verdict pass", 0) == 0);
    const auto verdict = nlohmann::json::parse(read_file(dir / "v/verdict.json"));
    CHECK(verdict["verdict"] == "pass");
    CHECK(csv_rows(read_file(dir / "v/alpha_checks.csv")).size() == 6);

    CHECK(run_cli({"analyze-curvature", "--data", data, "--out", (dir / "a2").string()}).code == 1);
    CHECK(run_cli({"eval", "--data", data, "--params", (dir / "none.json").string()}).code == 1);
}

TEST_CASE("validation errors exit 1") {
    testing::TempDir dir("cli_errors");
    CHECK(run_cli({}).code == 1);
    CHECK(run_cli({"fly"}).code == 1);
    CHECK(run_cli({"eval", "--bogus", "1"}).code == 1);
    const auto missing = run_cli({"train-mars", "--data", (dir / "nope.jsonl").string()});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("error (config)") != std::string::npos);
    CHECK(run_cli({"train-mars"}).code == 1);
    CHECK(run_cli({"train-mars", "--tau", "3", "--data", "x"}).code == 1);
    CHECK(run_cli({"gen-data", "--margin_lo", "5", "--margin_hi", "1", "--out", (dir / "g").string()}).code == 1);
    CHECK(run_cli({"eval", "--config", (dir / "missing.cfg").string()}).code == 1);

    write_file_atomic(dir / "bad.jsonl", "{\"id\": \"a\", \"chosen_feat\": [1], \"rejected_feat\": [0]}\n{oops\n");
    const auto bad = run_cli({"train-plain", "--data", (dir / "bad.jsonl").string(), "--out", (dir / "o").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find(":2:") != std::string::npos);

    const auto help = run_cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("train-mars") != std::string::npos);
}

TEST_CASE("flags override the config file") {
    testing::TempDir dir("cli_cfg");
    write_file_atomic(dir / "run.cfg", "n = 50\ndim = 3\nseed = 2\n");
    const std::string out = (dir / "g").string();
    REQUIRE(run_cli({"gen-data", "--config", (dir / "run.cfg").string(), "--n", "30", "--out", out}).code == 0);
    CHECK(load_dataset(dir / "g/data.jsonl", DatasetMode::feature).size() == 30);
    RunConfig resolved = load_run_config((dir / "g/config.resolved").string());
    CHECK(resolved.n == 30);
    CHECK(resolved.dim == 3);
    CHECK(resolved.seed == 2);
}

TEST_CASE("outputs are byte-identical across runs") {
    testing::TempDir dir("cli_det");
    const std::string gen = (dir / "gen").string();
    REQUIRE(run_cli({"gen-data", "--n", "100", "--dim", "3", "--out", gen}).code == 0);
    for (const char* cmd : {"train-mars", "train-uniform"}) {
        const std::string out = (dir / cmd).string();
        const std::vector<std::string> args{cmd, "--data", gen + "/data.jsonl", "--epochs_inner", "50", "--out", out};
        std::map<std::string, std::string> first;
        REQUIRE(run_cli(args).code == 0);
        for (const char* f : {"epochs.csv", "plan.csv", "params.json", "report.json"}) first[f] = read_file(fs::path(out) / f);
        fs::remove_all(out);
        REQUIRE(run_cli(args).code == 0);
        for (const auto& [f, contents] : first) CHECK(read_file(fs::path(out) / f) == contents);
    }
}

TEST_CASE("installed binary exit codes") {
    const std::string tool = MARS_TOOL_PATH;
    auto status = [&](const std::string& args) {
        const int raw = std::system((tool + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    testing::TempDir dir("cli_bin");
    CHECK(status("--help") == 0);
    CHECK(status("nonsense") == 1);
    CHECK(status("gen-data --n 20 --dim 2 --out " + (dir / "g").string()) == 0);
    CHECK(status("eval --data " + (dir / "g/data.jsonl").string()) == 1);
    CHECK(status("eval --data " + (dir / "g/data.jsonl").string() + " --params " + (dir / "g/theta_true.json").string() +
                 " --out " + (dir / "e").string()) == 0);
}
