#include <doctest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <random>

#include "mars/bt_core.hpp"
#include "mars/error.hpp"
#include "test_support.hpp"

using namespace mars;
using testing::rel_error;
using testing::tuple_with_psi;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

Big big_sigmoid(double t) { return Big(1) / (Big(1) + boost::multiprecision::exp(-Big(t))); }

// Newton's method on the regularized loss, as an independent minimizer.
RewardParams newton_minimize(const Dataset& data, double l2) {
    const std::size_t d = data.front().dim();
    std::vector<double> th(d, 0.0);
    for (int it = 0; it < 100; ++it) {
        std::vector<double> g(d, 0.0);
        std::vector<std::vector<double>> h(d, std::vector<double>(d, 0.0));
        for (const auto& z : data) {
            double m = 0;
            for (std::size_t i = 0; i < d; ++i) m += th[i] * z.psi[i];
            const double s = 1.0 / (1.0 + std::exp(-m));
            for (std::size_t i = 0; i < d; ++i) {
                g[i] += (s - 1.0) * z.psi[i] / data.size();
                for (std::size_t j = 0; j < d; ++j) h[i][j] += s * (1 - s) * z.psi[i] * z.psi[j] / data.size();
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            g[i] += l2 * th[i];
            h[i][i] += l2;
        }
        // Solve h x = g by Gaussian elimination.
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t i = k + 1; i < d; ++i) {
                const double f = h[i][k] / h[k][k];
                for (std::size_t j = k; j < d; ++j) h[i][j] -= f * h[k][j];
                g[i] -= f * g[k];
            }
        std::vector<double> x(d);
        for (std::size_t k = d; k-- > 0;) {
            double s = g[k];
            for (std::size_t j = k + 1; j < d; ++j) s -= h[k][j] * x[j];
            x[k] = s / h[k][k];
        }
        for (std::size_t i = 0; i < d; ++i) th[i] -= x[i];
    }
    return RewardParams{th};
}

}  // namespace

TEST_CASE("sigmoid values") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(std::abs(sigmoid(800.0) - 1.0) < 1e-12);
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(std::isfinite(sigmoid(-800.0)));
    const Big oracle = big_sigmoid(2.0);
    CHECK(std::abs(sigmoid(2.0) - oracle.convert_to<double>()) < 1e-12);
    CHECK(std::abs(sigmoid(2.0) - 0.88079707797788244405972914130239679520638429862897) < 1e-15);
}

TEST_CASE("sigmoid symmetry and monotonicity") {
    double prev = 0.0;
    for (double t = -50; t <= 50; t += 0.25) {
        CHECK(std::abs(sigmoid(-t) - (1.0 - sigmoid(t))) < 1e-15);
        CHECK(sigmoid(t) >= prev);
        prev = sigmoid(t);
    }
}

TEST_CASE("curvature weight") {
    CHECK(curvature_weight(0.0) == 0.25);
    CHECK(curvature_weight(3.7) == curvature_weight(-3.7));
    const Big s = big_sigmoid(2.0);
    const Big c = s * (Big(1) - s);
    CHECK(rel_error(curvature_weight(2.0), c.convert_to<double>()) < 1e-14);
    CHECK(std::abs(curvature_weight(2.0) - 0.10499358540350651734862418476042536122929668205769) < 1e-15);
    double prev = 0.25;
    for (double t = 0.01; t < 40; t += 0.01) {
        CHECK(curvature_weight(t) < prev);
        prev = curvature_weight(t);
    }
    CHECK(curvature_weight(700.0) > 0.0);
}

TEST_CASE("margin") {
    std::mt19937_64 gen(1);
    const auto z = PreferenceTuple::make("a", testing::random_vector(gen, 4), testing::random_vector(gen, 4));
    CHECK(margin(RewardParams::zeros(4), z) == 0.0);
    CHECK(margin(RewardParams{z.psi}, z) >= 0.0);
    CHECK(margin(RewardParams{z.psi}, z) == doctest::Approx(dot(z.psi, z.psi)));

    const auto theta = testing::random_vector(gen, 4);
    double naive = 0;
    for (int i = 0; i < 4; ++i) naive += theta[i] * (z.chosen_feat[i] - z.rejected_feat[i]);
    CHECK(margin(RewardParams{theta}, z) == doctest::Approx(naive).epsilon(1e-14));
    CHECK(margin(RewardParams{theta}, z) ==
          doctest::Approx(dot(theta, z.chosen_feat) - dot(theta, z.rejected_feat)).epsilon(1e-12));
    CHECK_THROWS_AS(margin(RewardParams::zeros(3), z), DimensionError);
}

TEST_CASE("bt probability") {
    const auto z = tuple_with_psi("a", {1.0, 1.0});
    CHECK(bt_prob(RewardParams::zeros(2), z) == 0.5);
    CHECK(std::abs(bt_prob(RewardParams{{1.0, 1.0}}, z) - big_sigmoid(2.0).convert_to<double>()) < 1e-12);
    const RewardParams p{{0.3, -1.2}};
    CHECK(bt_prob(p, z.swapped()) == doctest::Approx(1.0 - bt_prob(p, z)).epsilon(1e-15));
}

TEST_CASE("tuple construction validates") {
    CHECK_THROWS_AS(PreferenceTuple::make("a", {1.0, 2.0}, {1.0}), DimensionError);
    CHECK_THROWS_AS(PreferenceTuple::make("a", {1.0, NAN}, {1.0, 2.0}), ConfigError);
    CHECK_THROWS_AS(PreferenceTuple::make("a", {}, {}), ConfigError);
    const auto s = PreferenceTuple::make_synthetic("a~1", "a", {1.0}, {0.5});
    CHECK(s.origin == Origin::synthetic);
    CHECK(s.parent_id == std::optional<std::string>("a"));
    CHECK(s.psi == std::vector<double>{0.5});
    CHECK_THROWS_AS(dataset_dim(Dataset{}), EmptyInputError);
    CHECK_THROWS_AS(dataset_dim(Dataset{tuple_with_psi("a", {1.0}), tuple_with_psi("b", {1.0, 2.0})}), DimensionError);
}

TEST_CASE("nll loss") {
    std::mt19937_64 gen(2);
    const Dataset data = testing::random_dataset(gen, 7, 3);
    CHECK(nll_loss(RewardParams::zeros(3), data) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(nll_loss(RewardParams::zeros(1), Dataset{tuple_with_psi("a", {1.0})}) == std::log(2.0));

    const Dataset one{tuple_with_psi("a", {2.0})};
    const Big oracle = -boost::multiprecision::log(big_sigmoid(2.0));
    CHECK(rel_error(nll_loss(RewardParams{{1.0}}, one), oracle.convert_to<double>()) < 1e-14);

    // Relabeling symmetry.
    const RewardParams p{testing::random_vector(gen, 3)};
    RewardParams neg = p;
    for (double& x : neg.theta) x = -x;
    Dataset swapped;
    for (const auto& z : data) swapped.push_back(z.swapped());
    CHECK(nll_loss(neg, swapped) == doctest::Approx(nll_loss(p, data)).epsilon(1e-14));

    CHECK(nll_loss(p, data, 0.5) == doctest::Approx(nll_loss(p, data) + 0.25 * dot(p.theta, p.theta)).epsilon(1e-14));
    CHECK_THROWS_AS(nll_loss(p, Dataset{}), EmptyInputError);
}

TEST_CASE("gradient closed forms") {
    const auto z = tuple_with_psi("a", {1.0, -2.0, 0.5});
    const Vector g = grad(RewardParams::zeros(3), Dataset{z});
    for (int i = 0; i < 3; ++i) CHECK(g[i] == -0.5 * z.psi[i]);

    const Vector g2 = grad(RewardParams::zeros(3), Dataset{z, z.swapped()});
    for (double x : g2) CHECK(x == 0.0);

    // Saturated margin: per-sample gradient vanishes.
    const Vector gs = sample_grad(RewardParams{{700.0, 0.0, 0.0}}, z);
    for (double x : gs) CHECK(std::abs(x) < 1e-300);
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 gen(3);
    std::uniform_int_distribution<int> dd(1, 8), nn(1, 50);
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t d = dd(gen), n = nn(gen);
        const Dataset data = testing::random_dataset(gen, n, d);
        RewardParams p{testing::random_vector(gen, d, 0.5)};
        const double l2 = inst % 2 ? 0.1 : 0.0;
        const Vector g = grad(p, data, l2);
        const double h = 1e-5;
        double num = 0, den = 0;
        for (std::size_t i = 0; i < d; ++i) {
            RewardParams a = p, b = p;
            a.theta[i] += h;
            b.theta[i] -= h;
            const double fd = (nll_loss(a, data, l2) - nll_loss(b, data, l2)) / (2 * h);
            num += (fd - g[i]) * (fd - g[i]);
            den += g[i] * g[i];
        }
        CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-8) < 1e-6);
    }
}

TEST_CASE("per-sample hessian") {
    const auto z = tuple_with_psi("a", {1.0, 2.0});
    const Matrix h0 = per_sample_hessian(RewardParams::zeros(2), z);
    CHECK(h0 == Matrix::outer(z.psi, 0.25));
    const Matrix hz = per_sample_hessian(RewardParams{{1.0, 1.0}}, tuple_with_psi("b", {0.0, 0.0}));
    CHECK(hz == Matrix::zeros(2));

    const RewardParams p{{0.4, -0.3}};
    const Matrix h = per_sample_hessian(p, z);
    CHECK(h.trace() == doctest::Approx(curvature_weight(margin(p, z)) * dot(z.psi, z.psi)).epsilon(1e-14));
    CHECK(min_eigenvalue(h) > -1e-15);
}

TEST_CASE("hessian matches finite differences of the gradient") {
    std::mt19937_64 gen(4);
    std::uniform_int_distribution<int> dd(1, 8);
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t d = dd(gen);
        const auto z = PreferenceTuple::make("z", testing::random_vector(gen, d), testing::random_vector(gen, d));
        RewardParams p{testing::random_vector(gen, d, 0.5)};
        const Matrix h = per_sample_hessian(p, z);
        const double step = 1e-5;
        double num = 0, den = 0;
        for (std::size_t j = 0; j < d; ++j) {
            RewardParams a = p, b = p;
            a.theta[j] += step;
            b.theta[j] -= step;
            const Vector ga = sample_grad(a, z), gb = sample_grad(b, z);
            for (std::size_t i = 0; i < d; ++i) {
                const double fd = (ga[i] - gb[i]) / (2 * step);
                num += (fd - h(i, j)) * (fd - h(i, j));
                den += h(i, j) * h(i, j);
            }
        }
        CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-8) < 1e-5);
    }
}

TEST_CASE("numerical stability for large margins") {
    for (double m : {-700.0, -300.0, 300.0, 700.0}) {
        const auto z = tuple_with_psi("a", {1.0});
        const RewardParams p{{m}};
        CHECK(std::isfinite(nll_loss(p, Dataset{z})));
        CHECK(std::isfinite(grad(p, Dataset{z})[0]));
        CHECK(std::isfinite(per_sample_hessian(p, z)(0, 0)));
    }
    CHECK(nll_loss(RewardParams{{-700.0}}, Dataset{tuple_with_psi("a", {1.0})}) == doctest::Approx(700.0));
}

TEST_CASE("training") {
    SUBCASE("separable toy: theta[0] increases every step") {
        const Dataset data{tuple_with_psi("a", {1.0, 0.0}), tuple_with_psi("b", {1.0, 0.0})};
        TrainConfig cfg;
        cfg.epochs_inner = 1;
        RewardParams p = RewardParams::zeros(2);
        for (int step = 0; step < 50; ++step) {
            const RewardParams next = train(p, data, cfg);
            CHECK(next.theta[0] > p.theta[0]);
            p = next;
        }
    }
    SUBCASE("zero learning rate leaves parameters unchanged") {
        std::mt19937_64 gen(6);
        const Dataset data = testing::random_dataset(gen, 10, 3);
        const RewardParams p{{0.1, 0.2, 0.3}};
        TrainConfig cfg;
        cfg.learning_rate = 0.0;
        CHECK(train(p, data, cfg) == p);
    }
    SUBCASE("converges to the regularized minimizer") {
        std::mt19937_64 gen(7);
        const Dataset data = testing::random_dataset(gen, 50, 3);
        TrainConfig cfg;
        cfg.l2 = 0.1;
        const RewardParams trained = train(RewardParams::zeros(3), data, cfg);
        const RewardParams oracle = newton_minimize(data, 0.1);
        CHECK(std::abs(nll_loss(trained, data, 0.1) - nll_loss(oracle, data, 0.1)) < 1e-6);
        CHECK(nll_loss(trained, data, 0.1) <= nll_loss(RewardParams::zeros(3), data, 0.1));
    }
    SUBCASE("deterministic") {
        std::mt19937_64 gen(8);
        const Dataset data = testing::random_dataset(gen, 20, 4);
        const TrainConfig cfg;
        CHECK(train(RewardParams::zeros(4), data, cfg) == train(RewardParams::zeros(4), data, cfg));
    }
    SUBCASE("divergence names the step") {
        const Dataset data{tuple_with_psi("a", {1e200})};
        TrainConfig cfg;
        cfg.learning_rate = 1e300;
        try {
            train(RewardParams::zeros(1), data, cfg);
            FAIL("expected divergence");
        } catch (const DivergenceError& e) {
            CHECK(e.step() <= 2);
            CHECK(std::string(e.what()).find("step") != std::string::npos);
        }
    }
    SUBCASE("invalid config") {
        const Dataset data{tuple_with_psi("a", {1.0})};
        TrainConfig cfg;
        cfg.l2 = -1.0;
        CHECK_THROWS_AS(train(RewardParams::zeros(1), data, cfg), ConfigError);
        cfg = TrainConfig{};
        cfg.epochs_inner = 0;
        CHECK_THROWS_AS(train(RewardParams::zeros(1), data, cfg), ConfigError);
        cfg = TrainConfig{};
        cfg.learning_rate = -0.1;
        CHECK_THROWS_AS(train(RewardParams::zeros(1), data, cfg), ConfigError);
        CHECK_THROWS_AS(train(RewardParams::zeros(2), data, TrainConfig{}), DimensionError);
        CHECK_THROWS_AS(train(RewardParams::zeros(1), Dataset{}, TrainConfig{}), EmptyInputError);
    }
}
