#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mars/augmentation.hpp"
#include "mars/bt_core.hpp"
#include "mars/data_io.hpp"
#include "mars/error.hpp"
#include "mars/fisher_lab.hpp"
#include "mars/mars_engine.hpp"
#include "mars/metrics.hpp"

namespace py = pybind11;
using namespace mars;

namespace {

std::vector<std::vector<double>> to_rows(const Matrix& m) {
    std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Margin-aware preference augmentation under the Bradley-Terry model";

    auto base = py::register_exception<Error>(m, "MarsError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<EmptyInputError>(m, "EmptyInputError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<AugmentError>(m, "AugmentError", base.ptr());
    py::register_exception<AssumptionError>(m, "AssumptionError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<MarsRunError>(m, "MarsRunError", base.ptr());

    py::enum_<Origin>(m, "Origin").value("human", Origin::human).value("synthetic", Origin::synthetic);
    py::enum_<SplitPolicy>(m, "SplitPolicy")
        .value("balanced", SplitPolicy::balanced)
        .value("chosen_only", SplitPolicy::chosen_only)
        .value("rejected_only", SplitPolicy::rejected_only);
    py::enum_<LabelMode>(m, "LabelMode")
        .value("balanced", LabelMode::balanced)
        .value("consistent", LabelMode::consistent)
        .value("bradley_terry", LabelMode::bradley_terry);
    py::enum_<DatasetMode>(m, "DatasetMode").value("feature", DatasetMode::feature).value("text", DatasetMode::text);
    py::enum_<AugmenterKind>(m, "AugmenterKind")
        .value("feature_jitter", AugmenterKind::feature_jitter)
        .value("token_perturb", AugmenterKind::token_perturb)
        .value("external_service", AugmenterKind::external_service);
    py::enum_<NoiseKind>(m, "NoiseKind").value("uniform", NoiseKind::uniform).value("gaussian", NoiseKind::gaussian);

    py::class_<TextPair>(m, "TextPair")
        .def(py::init<std::string, std::string, std::string>(), py::arg("prompt"), py::arg("chosen"), py::arg("rejected"))
        .def_readonly("prompt", &TextPair::prompt)
        .def_readonly("chosen", &TextPair::chosen)
        .def_readonly("rejected", &TextPair::rejected);

    py::class_<PreferenceTuple>(m, "PreferenceTuple")
        .def(py::init(&PreferenceTuple::make), py::arg("id"), py::arg("chosen"), py::arg("rejected"),
             py::arg("text") = std::nullopt)
        .def_readonly("id", &PreferenceTuple::id)
        .def_readonly("chosen_feat", &PreferenceTuple::chosen_feat)
        .def_readonly("rejected_feat", &PreferenceTuple::rejected_feat)
        .def_readonly("psi", &PreferenceTuple::psi)
        .def_readonly("origin", &PreferenceTuple::origin)
        .def_readonly("parent_id", &PreferenceTuple::parent_id)
        .def_readonly("text", &PreferenceTuple::text)
        .def_property_readonly("dim", &PreferenceTuple::dim)
        .def("swapped", &PreferenceTuple::swapped)
        .def("__repr__", [](const PreferenceTuple& z) { return "PreferenceTuple('" + z.id + "', dim=" + std::to_string(z.dim()) + ")"; });

    py::class_<RewardParams>(m, "RewardParams")
        .def(py::init<Vector>(), py::arg("theta"))
        .def_static("zeros", &RewardParams::zeros, py::arg("dim"))
        .def_readwrite("theta", &RewardParams::theta)
        .def_property_readonly("dim", &RewardParams::dim);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("epochs_inner", &TrainConfig::epochs_inner)
        .def_readwrite("l2", &TrainConfig::l2)
        .def_readwrite("seed", &TrainConfig::seed);

    m.def("sigmoid", &sigmoid, py::arg("t"));
    m.def("curvature_weight", &curvature_weight, py::arg("t"));
    m.def("margin", &margin, py::arg("params"), py::arg("z"));
    m.def("nll_loss", [](const RewardParams& p, const Dataset& d, double l2) { return nll_loss(p, d, l2); },
          py::arg("params"), py::arg("data"), py::arg("l2") = 0.0);
    m.def("grad", [](const RewardParams& p, const Dataset& d, double l2) { return grad(p, d, l2); }, py::arg("params"),
          py::arg("data"), py::arg("l2") = 0.0);
    m.def("train", [](const RewardParams& init, const Dataset& d, const TrainConfig& cfg) { return train(init, d, cfg); },
          py::arg("init"), py::arg("data"), py::arg("config") = TrainConfig{});

    py::class_<AugmenterSpec>(m, "AugmenterSpec")
        .def(py::init<>())
        .def_readwrite("kind", &AugmenterSpec::kind)
        .def_readwrite("jitter_scale", &AugmenterSpec::jitter_scale)
        .def_readwrite("noise", &AugmenterSpec::noise)
        .def_readwrite("edit_rate", &AugmenterSpec::edit_rate)
        .def_readwrite("endpoint", &AugmenterSpec::endpoint)
        .def_readwrite("timeout_ms", &AugmenterSpec::timeout_ms)
        .def_readwrite("max_in_flight", &AugmenterSpec::max_in_flight)
        .def_readwrite("featurizer_dim", &AugmenterSpec::featurizer_dim)
        .def_readwrite("seed", &AugmenterSpec::seed);
    m.def("featurize", &featurize, py::arg("text"), py::arg("dim"));

    py::class_<MarsConfig>(m, "MarsConfig")
        .def(py::init<>())
        .def_readwrite("epochs_T", &MarsConfig::epochs_T)
        .def_readwrite("budget_B", &MarsConfig::budget_B)
        .def_readwrite("tau", &MarsConfig::tau)
        .def_readwrite("split_policy", &MarsConfig::split_policy)
        .def_readwrite("cumulative", &MarsConfig::cumulative)
        .def_readwrite("augment_synthetic", &MarsConfig::augment_synthetic)
        .def_readwrite("seed", &MarsConfig::seed);

    py::class_<PlanRecord>(m, "PlanRecord")
        .def_readonly("tuple_id", &PlanRecord::tuple_id)
        .def_readonly("delta", &PlanRecord::delta)
        .def_readonly("q", &PlanRecord::q)
        .def_readonly("b", &PlanRecord::b)
        .def_readonly("n_plus", &PlanRecord::n_plus)
        .def_readonly("n_minus", &PlanRecord::n_minus);
    py::class_<AugmentationPlan>(m, "AugmentationPlan")
        .def_readonly("budget_B", &AugmentationPlan::budget_B)
        .def_readonly("records", &AugmentationPlan::records)
        .def("total_counts", &AugmentationPlan::total_counts);
    py::class_<EpochReport>(m, "EpochReport")
        .def_readonly("epoch", &EpochReport::epoch)
        .def_readonly("margins", &EpochReport::margins)
        .def_readonly("dataset_size_before", &EpochReport::dataset_size_before)
        .def_readonly("dataset_size_after", &EpochReport::dataset_size_after)
        .def_readonly("synthetic_added", &EpochReport::synthetic_added)
        .def_readonly("loss_before", &EpochReport::loss_before)
        .def_readonly("loss_after", &EpochReport::loss_after)
        .def_readonly("snr", &EpochReport::snr)
        .def_readonly("plan", &EpochReport::plan);
    py::class_<MarsResult>(m, "MarsResult")
        .def_readonly("params", &MarsResult::params)
        .def_readonly("reports", &MarsResult::reports)
        .def_readonly("final_dataset", &MarsResult::final_dataset);

    m.def("allocate", [](const std::vector<double>& margins, double tau) { return allocate(margins, tau).q; },
          py::arg("margins"), py::arg("tau"));
    m.def("round_budget", [](const std::vector<double>& q, std::uint64_t b) { return round_budget(q, b); }, py::arg("q"),
          py::arg("budget_B"));
    m.def("split_counts", [](std::uint64_t b, SplitPolicy p) {
              const SplitCounts s = split_counts(b, p);
              return py::make_tuple(s.n_plus, s.n_minus);
          },
          py::arg("b"), py::arg("policy") = SplitPolicy::balanced);
    m.def("run_mars",
          [](const Dataset& data, const RewardParams& init, const MarsConfig& cfg, const TrainConfig& tc,
             const AugmenterSpec& spec, bool uniform) {
              const auto aug = make_augmenter(spec);
              py::gil_scoped_release release;
              return run_refinement(data, init, cfg, tc, *aug, uniform ? AllocationMode::uniform : AllocationMode::margin_softmax);
          },
          py::arg("data"), py::arg("init"), py::arg("config"), py::arg("train_config") = TrainConfig{},
          py::arg("augmenter") = AugmenterSpec{}, py::arg("uniform") = false);

    py::class_<SnrResult>(m, "SnrResult")
        .def_readonly("mean", &SnrResult::mean)
        .def_readonly("std", &SnrResult::std)
        .def_readonly("snr", &SnrResult::snr)
        .def_readonly("degenerate", &SnrResult::degenerate);
    m.def("pairwise_accuracy", [](const RewardParams& p, const Dataset& d) { return pairwise_accuracy(p, d); },
          py::arg("params"), py::arg("data"));
    m.def("margin_snr", [](const std::vector<double>& margins) { return margin_snr(margins); }, py::arg("margins"));

    py::class_<MarginBin>(m, "MarginBin")
        .def_readonly("index", &MarginBin::index)
        .def_readonly("tuple_ids", &MarginBin::tuple_ids)
        .def_readonly("lo", &MarginBin::lo)
        .def_readonly("hi", &MarginBin::hi)
        .def_readonly("mean_curvature_weight", &MarginBin::mean_curvature_weight)
        .def_readonly("min_eigenvalue", &MarginBin::min_eigenvalue);
    m.def("empirical_fisher",
          [](const RewardParams& p, const Dataset& d) { return to_rows(empirical_fisher(p, d).entries); },
          py::arg("params"), py::arg("data"));
    m.def("bin_by_margin", [](const RewardParams& p, const Dataset& d, std::size_t n) { return bin_by_margin(p, d, n); },
          py::arg("params"), py::arg("data"), py::arg("n_bins") = 5);

    py::class_<AlphaCheck>(m, "AlphaCheck")
        .def_readonly("alpha", &AlphaCheck::alpha)
        .def_readonly("factor", &AlphaCheck::factor)
        .def_readonly("psd_slack", &AlphaCheck::psd_slack)
        .def_readonly("eig_bound_slack", &AlphaCheck::eig_bound_slack)
        .def_readonly("lambda_min_R", &AlphaCheck::lambda_min_R)
        .def_readonly("passed", &AlphaCheck::pass);
    py::class_<CurvatureReport>(m, "CurvatureReport")
        .def_readonly("beta", &CurvatureReport::beta)
        .def_readonly("gamma_curv", &CurvatureReport::gamma_curv)
        .def_readonly("lambda_min_P", &CurvatureReport::lambda_min_P)
        .def_readonly("checks", &CurvatureReport::checks)
        .def_readonly("passed", &CurvatureReport::pass);
    m.def("verify_theorem",
          [](std::size_t n_p, std::size_t n_q, double gamma_org, double gamma_aug, std::size_t dim, std::uint64_t seed,
             const std::vector<double>& alpha_grid) {
              const AssumptionDataset ad =
                  make_assumption_dataset(MixtureSpec::from_counts(n_p, n_q, gamma_org, gamma_aug), dim, seed);
              return verify_theorem(ad.p_tuples, ad.q_tuples, ad.params, ad.spec, alpha_grid);
          },
          py::arg("n_p") = 200, py::arg("n_q") = 200, py::arg("gamma_org") = 2.0, py::arg("gamma_aug") = 0.5,
          py::arg("dim") = 16, py::arg("seed") = 0,
          py::arg("alpha_grid") = std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});

    py::class_<SyntheticSpec>(m, "SyntheticSpec")
        .def(py::init<>())
        .def_readwrite("dim", &SyntheticSpec::dim)
        .def_readwrite("n", &SyntheticSpec::n)
        .def_readwrite("margin_lo", &SyntheticSpec::margin_lo)
        .def_readwrite("margin_hi", &SyntheticSpec::margin_hi)
        .def_readwrite("labels", &SyntheticSpec::labels)
        .def_readwrite("orth_scale", &SyntheticSpec::orth_scale)
        .def_readwrite("id_prefix", &SyntheticSpec::id_prefix)
        .def_readwrite("seed", &SyntheticSpec::seed);
    m.def("random_params", &random_params, py::arg("dim"), py::arg("norm") = 1.0, py::arg("seed") = 0);
    m.def("generate_synthetic", &generate_synthetic, py::arg("spec"), py::arg("theta_true"));
    m.def("load_dataset", &load_dataset, py::arg("path"), py::arg("mode") = DatasetMode::feature,
          py::arg("featurizer_dim") = 64);
    m.def("save_dataset", &save_dataset, py::arg("data"), py::arg("path"));
}
