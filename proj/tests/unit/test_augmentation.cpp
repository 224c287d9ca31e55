#include <doctest.h>

#include <cmath>
#include <random>

#include "mars/augmentation.hpp"
#include "mars/error.hpp"
#include "test_support.hpp"

using namespace mars;

namespace {

// FNV-1a, 64 bit, written out independently of the library.
std::uint64_t fnv(const std::string& s, std::uint64_t h) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Payload features(std::vector<double> f) { return Payload{std::move(f), std::nullopt}; }

double linf(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("feature jitter basics") {
    const FeatureJitterAugmenter aug(0.1, 42);
    const Payload p = features({1.0, 2.0, 3.0});

    CHECK(aug.augment(p, "z", Side::chosen, 0).variants.empty());

    const VariantBatch b = aug.augment(p, "z", Side::chosen, 5);
    REQUIRE(b.variants.size() == 5);
    CHECK(b.parent_tuple_id == "z");
    CHECK(b.side == Side::chosen);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(b.variants[i].index == i + 1);
        CHECK(b.variants[i].payload.features != p.features);
        CHECK(linf(b.variants[i].payload.features, p.features) <= 0.1);
    }
    CHECK(aug.augment(p, "z", Side::chosen, 5) == b);
    // A prefix of a larger request is the smaller request.
    const VariantBatch b3 = aug.augment(p, "z", Side::chosen, 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(b3.variants[i] == b.variants[i]);
}

TEST_CASE("feature jitter keys") {
    const FeatureJitterAugmenter aug(0.1, 42);
    const Payload p = features({1.0, 2.0, 3.0});
    const auto base = aug.augment(p, "z", Side::chosen, 1).variants[0];
    CHECK(aug.augment(p, "y", Side::chosen, 1).variants[0] != base);
    CHECK(aug.augment(p, "z", Side::rejected, 1).variants[0] != base);
    CHECK(aug.augment(p, "z", Side::chosen, 1, 2).variants[0] != base);
    CHECK(FeatureJitterAugmenter(0.1, 43).augment(p, "z", Side::chosen, 1).variants[0] != base);
}

TEST_CASE("feature jitter scale zero is the identity") {
    const FeatureJitterAugmenter aug(0.0, 1);
    const Payload p = features({1.0, -2.0});
    for (const auto& v : aug.augment(p, "z", Side::rejected, 4).variants) CHECK(v.payload == p);
}

TEST_CASE("feature jitter locality over many draws") {
    std::mt19937_64 gen(9);
    for (double scale : {0.01, 0.1, 1.0}) {
        const FeatureJitterAugmenter aug(scale, 3);
        const Payload p = features(testing::random_vector(gen, 8));
        double worst = 0;
        for (const auto& v : aug.augment(p, "z", Side::chosen, 200).variants)
            worst = std::max(worst, linf(v.payload.features, p.features));
        CHECK(worst <= scale);
        CHECK(worst > 0.9 * scale);
    }
}

TEST_CASE("gaussian jitter is zero mean with the requested scale") {
    const FeatureJitterAugmenter aug(0.5, 7, NoiseKind::gaussian);
    const Payload p = features(std::vector<double>(4, 0.0));
    double s = 0, s2 = 0;
    std::size_t n = 0;
    for (const auto& v : aug.augment(p, "z", Side::chosen, 2000).variants)
        for (double x : v.payload.features) {
            s += x;
            s2 += x * x;
            ++n;
        }
    CHECK(std::abs(s / n) < 0.03);
    CHECK(std::sqrt(s2 / n) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("augmenter isolation") {
    const auto z = PreferenceTuple::make("z", {1.0, 2.0}, {3.0, 4.0});
    const PreferenceTuple before = z;
    const FeatureJitterAugmenter aug(0.1, 1);
    const auto b = aug.augment(payload_of(z, Side::chosen), z.id, Side::chosen, 3);
    CHECK(z == before);
    for (const auto& v : b.variants) CHECK(linf(v.payload.features, z.chosen_feat) <= 0.1);
}

TEST_CASE("augmenter spec validation") {
    CHECK_THROWS_AS(FeatureJitterAugmenter(-0.1, 0), ConfigError);
    AugmenterSpec s;
    s.jitter_scale = -1;
    CHECK_THROWS_AS(make_augmenter(s), ConfigError);
    s = AugmenterSpec{};
    s.kind = AugmenterKind::token_perturb;
    s.edit_rate = 1.5;
    CHECK_THROWS_AS(make_augmenter(s), ConfigError);
    s = AugmenterSpec{};
    s.kind = AugmenterKind::external_service;
    CHECK_THROWS_AS(make_augmenter(s), ConfigError);
    CHECK(augmenter_kind_from_string("token_perturb") == AugmenterKind::token_perturb);
    CHECK(std::string(to_string(AugmenterKind::external_service)) == "external_service");
    CHECK_THROWS_AS(augmenter_kind_from_string("dropout"), ConfigError);
    CHECK_THROWS_AS(noise_kind_from_string("laplace"), ConfigError);
}

TEST_CASE("featurizer") {
    CHECK(featurize("", 8) == std::vector<double>(8, 0.0));
    CHECK(featurize("!!! ...", 8) == std::vector<double>(8, 0.0));
    CHECK(featurize("The cat sat", 16) == featurize("The cat sat", 16));
    CHECK(featurize("The CAT sat", 16) == featurize("the cat, sat!", 16));
    CHECK(norm2(featurize("one two three four", 16)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(featurize("x", 0), ConfigError);
    CHECK(tokenize("Hello, World-42 x") == std::vector<std::string>{"hello", "world", "42", "x"});
}

TEST_CASE("featurizer hand-hash oracle") {
    const std::size_t dim = 16;
    const std::uint64_t basis = 14695981039346656037ULL;
    for (const std::string tok : {"alpha", "beta"}) {
        const std::size_t bucket = fnv(tok, basis) % dim;
        const double sign = (mix(fnv(tok, 0x84222325cbf29ce4ULL)) >> 63) ? -1.0 : 1.0;
        const TokenHash h = hash_token(tok, dim);
        CHECK(h.bucket == bucket);
        CHECK(h.sign == sign);
        std::vector<double> expected(dim, 0.0);
        expected[bucket] = sign;
        CHECK(featurize(tok, dim) == expected);
    }

    // "alpha alpha" vs "alpha beta": raw counts differ in at most the buckets of
    // the changed token, and by exactly one per bucket.
    const auto a = hash_token("alpha", dim), b = hash_token("beta", dim);
    std::vector<double> raw1(dim, 0.0), raw2(dim, 0.0);
    raw1[a.bucket] += 2 * a.sign;
    raw2[a.bucket] += a.sign;
    raw2[b.bucket] += b.sign;
    std::size_t differing = 0;
    for (std::size_t i = 0; i < dim; ++i) differing += raw1[i] != raw2[i];
    CHECK(differing <= 2);
    const auto f1 = featurize("alpha alpha", dim), f2 = featurize("alpha beta", dim);
    for (std::size_t i = 0; i < dim; ++i) {
        CHECK(f1[i] == doctest::Approx(raw1[i] / norm2(raw1)).epsilon(1e-15));
        CHECK(f2[i] == doctest::Approx(raw2[i] / norm2(raw2)).epsilon(1e-15));
    }
}

TEST_CASE("token perturbation") {
    const TokenPerturbAugmenter aug(0.3, 5, 32);
    const std::string text = "the quick brown fox jumps over the lazy dog";
    Payload p{featurize(text, 32), text};

    const VariantBatch b = aug.augment(p, "z", Side::chosen, 6);
    REQUIRE(b.variants.size() == 6);
    for (const auto& v : b.variants) {
        REQUIRE(v.payload.text.has_value());
        CHECK(*v.payload.text != text);
        CHECK(v.payload.features == featurize(*v.payload.text, 32));
    }
    CHECK(aug.augment(p, "z", Side::chosen, 6) == b);

    // Every edit is drop, swap, or duplicate, so only words of the source appear.
    const auto source = tokenize(text);
    for (const auto& v : b.variants)
        for (const auto& w : tokenize(*v.payload.text))
            CHECK(std::find(source.begin(), source.end(), w) != source.end());

    CHECK_THROWS_AS(aug.augment(features({1.0}), "z", Side::chosen, 1), AugmentError);
    CHECK(aug.augment(features({1.0}), "z", Side::chosen, 0).variants.empty());
}

TEST_CASE("token perturbation edge cases") {
    const TokenPerturbAugmenter aug(0.5, 1, 8);
    for (std::uint64_t k = 0; k < 200; ++k) {
        CHECK(aug.perturb("a a b", k) != "a a b");
        CHECK(aug.perturb("word", k) != "word");
    }
    CHECK(aug.perturb("", 3) == "_");
    const TokenPerturbAugmenter none(0.0, 1, 8);
    CHECK(none.perturb("keep  this text", 1) == "keep this text");
}
