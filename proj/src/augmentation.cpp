#include "mars/augmentation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "mars/error.hpp"
#include "mars/rng.hpp"

namespace mars {

const char* to_string(Side s) { return s == Side::chosen ? "chosen" : "rejected"; }

const char* to_string(AugmenterKind k) {
    switch (k) {
        case AugmenterKind::feature_jitter: return "feature_jitter";
        case AugmenterKind::token_perturb: return "token_perturb";
        case AugmenterKind::external_service: return "external_service";
    }
    return "?";
}

AugmenterKind augmenter_kind_from_string(const std::string& s) {
    if (s == "feature_jitter") return AugmenterKind::feature_jitter;
    if (s == "token_perturb") return AugmenterKind::token_perturb;
    if (s == "external_service") return AugmenterKind::external_service;
    throw ConfigError("unknown augmenter '" + s + "' (expected feature_jitter|token_perturb|external_service)");
}

const char* to_string(NoiseKind k) { return k == NoiseKind::uniform ? "uniform" : "gaussian"; }

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "uniform") return NoiseKind::uniform;
    if (s == "gaussian") return NoiseKind::gaussian;
    throw ConfigError("unknown noise '" + s + "' (expected uniform|gaussian)");
}

void AugmenterSpec::validate() const {
    switch (kind) {
        case AugmenterKind::feature_jitter:
            if (!(jitter_scale >= 0.0) || !std::isfinite(jitter_scale))
                throw ConfigError("jitter_scale must be finite and >= 0");
            break;
        case AugmenterKind::token_perturb:
            if (!(edit_rate >= 0.0 && edit_rate <= 1.0)) throw ConfigError("edit_rate must lie in [0, 1]");
            if (featurizer_dim == 0) throw ConfigError("featurizer_dim must be >= 1");
            break;
        case AugmenterKind::external_service:
            if (endpoint.empty()) throw ConfigError("external_service augmenter requires an endpoint");
            if (timeout_ms <= 0) throw ConfigError("timeout_ms must be > 0");
            if (max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
            if (featurizer_dim == 0) throw ConfigError("featurizer_dim must be >= 1");
            break;
    }
}

Payload payload_of(const PreferenceTuple& z, Side side) {
    Payload p;
    p.features = side == Side::chosen ? z.chosen_feat : z.rejected_feat;
    if (z.text) p.text = side == Side::chosen ? z.text->chosen : z.text->rejected;
    return p;
}

namespace {

std::uint64_t variant_key(std::int64_t seed, std::string_view parent_id, Side side, std::uint64_t round,
                          std::size_t index) {
    std::uint64_t k = rng::combine(static_cast<std::uint64_t>(seed), rng::fnv1a(parent_id));
    k = rng::combine(k, side == Side::chosen ? 0x43ULL : 0x52ULL);
    k = rng::combine(k, round);
    return rng::combine(k, index);
}

}  // namespace

// ---------------------------------------------------------------------------
// featurizer

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

TokenHash hash_token(std::string_view token, std::size_t dim) {
    const std::uint64_t h = rng::fnv1a(token);
    // Second, independent hash for the sign.
    const std::uint64_t g = rng::splitmix64(rng::fnv1a(token, 0x84222325cbf29ce4ULL));
    return {static_cast<std::size_t>(h % dim), (g >> 63) ? -1.0 : 1.0};
}

FeatureVec featurize(std::string_view text, std::size_t dim) {
    if (dim == 0) throw ConfigError("featurize: dim must be >= 1");
    FeatureVec v(dim, 0.0);
    for (const auto& tok : tokenize(text)) {
        const auto [bucket, sign] = hash_token(tok, dim);
        v[bucket] += sign;
    }
    const double n = norm2(v);
    if (n > 0.0)
        for (double& x : v) x /= n;
    return v;
}

// ---------------------------------------------------------------------------
// feature jitter

FeatureJitterAugmenter::FeatureJitterAugmenter(double scale, std::int64_t seed, NoiseKind noise)
    : scale_(scale), seed_(seed), noise_(noise) {
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigError("jitter_scale must be finite and >= 0");
}

VariantBatch FeatureJitterAugmenter::do_augment(const Payload& payload, std::string_view parent_id, Side side,
                                                std::size_t count, std::uint64_t round) const {
    VariantBatch batch{std::string(parent_id), side, {}};
    batch.variants.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) {
        rng::Stream stream(variant_key(seed_, parent_id, side, round, i));
        Variant v{i, Payload{payload.features, std::nullopt}};
        for (double& x : v.payload.features) {
            const double eps = noise_ == NoiseKind::uniform ? stream.uniform(-1.0, 1.0) : stream.normal();
            x += scale_ * eps;
        }
        batch.variants.push_back(std::move(v));
    }
    return batch;
}

// ---------------------------------------------------------------------------
// token perturbation

namespace {

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

}  // namespace

TokenPerturbAugmenter::TokenPerturbAugmenter(double edit_rate, std::int64_t seed, std::size_t featurizer_dim)
    : edit_rate_(edit_rate), seed_(seed), dim_(featurizer_dim) {
    if (!(edit_rate >= 0.0 && edit_rate <= 1.0)) throw ConfigError("edit_rate must lie in [0, 1]");
    if (featurizer_dim == 0) throw ConfigError("featurizer_dim must be >= 1");
}

std::string TokenPerturbAugmenter::perturb(std::string_view text, std::uint64_t key) const {
    const std::vector<std::string> words = split_words(text);
    if (edit_rate_ == 0.0) return join_words(words);

    rng::Stream stream(key);
    std::vector<std::string> out;
    out.reserve(words.size() + 4);
    bool edited = false;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (stream.uniform() >= edit_rate_) {
            out.push_back(words[i]);
            continue;
        }
        switch (stream.below(3)) {
            case 0:  // drop
                edited = true;
                break;
            case 1:  // swap with the next word
                if (i + 1 < words.size() && words[i] != words[i + 1]) {
                    out.push_back(words[i + 1]);
                    out.push_back(words[i]);
                    ++i;
                    edited = true;
                } else {
                    out.push_back(words[i]);
                }
                break;
            default:  // duplicate
                out.push_back(words[i]);
                out.push_back(words[i]);
                edited = true;
                break;
        }
    }
    // A variant must differ from its source; fall back to one duplication.
    if (!edited || out == words) {
        if (words.empty()) return "_";
        const std::size_t pos = stream.below(words.size());
        out = words;
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), words[pos]);
    }
    return join_words(out);
}

VariantBatch TokenPerturbAugmenter::do_augment(const Payload& payload, std::string_view parent_id, Side side,
                                               std::size_t count, std::uint64_t round) const {
    VariantBatch batch{std::string(parent_id), side, {}};
    if (count == 0) return batch;
    if (!payload.text) throw AugmentError(std::string(parent_id), "token_perturb requires a text payload");
    batch.variants.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) {
        std::string text = perturb(*payload.text, variant_key(seed_, parent_id, side, round, i));
        FeatureVec feats = featurize(text, dim_);
        batch.variants.push_back(Variant{i, Payload{std::move(feats), std::move(text)}});
    }
    return batch;
}

// ---------------------------------------------------------------------------
// external paraphrase service

struct ExternalServiceAugmenter::Impl {
    std::string endpoint;
    std::int64_t timeout_ms;
    std::int64_t seed;
    std::size_t dim;
    std::size_t max_in_flight;

    mutable std::mutex mu;
    mutable std::condition_variable cv;
    mutable std::size_t in_flight = 0;

    httplib::Client client() const {
        httplib::Client c(endpoint);
        const auto sec = static_cast<time_t>(timeout_ms / 1000);
        const auto usec = static_cast<time_t>((timeout_ms % 1000) * 1000);
        c.set_connection_timeout(sec, usec);
        c.set_read_timeout(sec, usec);
        c.set_write_timeout(sec, usec);
        return c;
    }

    // Bounds the number of concurrent requests.
    struct Slot {
        const Impl& impl;
        explicit Slot(const Impl& i) : impl(i) {
            std::unique_lock lock(impl.mu);
            impl.cv.wait(lock, [&] { return impl.in_flight < impl.max_in_flight; });
            ++impl.in_flight;
        }
        ~Slot() {
            {
                std::lock_guard lock(impl.mu);
                --impl.in_flight;
            }
            impl.cv.notify_one();
        }
    };
};

ExternalServiceAugmenter::ExternalServiceAugmenter(std::string endpoint, std::int64_t timeout_ms,
                                                   std::int64_t seed, std::size_t featurizer_dim,
                                                   std::size_t max_in_flight)
    : impl_(std::make_unique<Impl>()) {
    if (endpoint.empty()) throw ConfigError("external_service augmenter requires an endpoint");
    if (timeout_ms <= 0) throw ConfigError("timeout_ms must be > 0");
    if (featurizer_dim == 0) throw ConfigError("featurizer_dim must be >= 1");
    if (max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
    impl_->endpoint = std::move(endpoint);
    impl_->timeout_ms = timeout_ms;
    impl_->seed = seed;
    impl_->dim = featurizer_dim;
    impl_->max_in_flight = max_in_flight;
}

ExternalServiceAugmenter::~ExternalServiceAugmenter() = default;

bool ExternalServiceAugmenter::healthy() const {
    Impl::Slot slot(*impl_);
    auto res = impl_->client().Get("/healthz");
    return res && res->status == 200;
}

VariantBatch ExternalServiceAugmenter::do_augment(const Payload& payload, std::string_view parent_id, Side side,
                                                  std::size_t count, std::uint64_t round) const {
    const std::string id(parent_id);
    VariantBatch batch{id, side, {}};
    if (count == 0) return batch;
    if (!payload.text) throw AugmentError(id, "external_service requires a text payload");

    const auto request_seed = static_cast<std::int64_t>(variant_key(impl_->seed, parent_id, side, round, 0) >> 1);
    const nlohmann::json body = {{"text", *payload.text}, {"n", count}, {"seed", request_seed}};

    httplib::Result res = [&] {
        Impl::Slot slot(*impl_);
        return impl_->client().Post("/paraphrase", body.dump(), "application/json");
    }();
    if (!res) throw AugmentError(id, "paraphrase request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
        std::string reason = "paraphrase service returned status " + std::to_string(res->status);
        const auto err = nlohmann::json::parse(res->body, nullptr, false);
        if (err.is_object() && err.contains("error") && err["error"].is_string())
            reason += ": " + err["error"].get<std::string>();
        throw AugmentError(id, reason);
    }

    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) throw AugmentError(id, "malformed paraphrase reply: not a JSON object");
    if (!reply.contains("variants") || !reply["variants"].is_array())
        throw AugmentError(id, "malformed paraphrase reply: missing 'variants' array");
    const auto& variants = reply["variants"];
    if (variants.size() != count)
        throw AugmentError(id, "paraphrase reply has " + std::to_string(variants.size()) + " variants, expected " +
                                   std::to_string(count));

    batch.variants.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!variants[i].is_string() || variants[i].get_ref<const std::string&>().empty())
            throw AugmentError(id, "malformed paraphrase reply: variant " + std::to_string(i) + " is not a non-empty string");
        std::string text = variants[i].get<std::string>();
        if (text == *payload.text)
            throw AugmentError(id, "paraphrase reply: variant " + std::to_string(i) + " repeats the original response");
        FeatureVec feats = featurize(text, impl_->dim);
        batch.variants.push_back(Variant{i + 1, Payload{std::move(feats), std::move(text)}});
    }
    return batch;
}

std::unique_ptr<Augmenter> make_augmenter(const AugmenterSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case AugmenterKind::feature_jitter:
            return std::make_unique<FeatureJitterAugmenter>(spec.jitter_scale, spec.seed, spec.noise);
        case AugmenterKind::token_perturb:
            return std::make_unique<TokenPerturbAugmenter>(spec.edit_rate, spec.seed, spec.featurizer_dim);
        case AugmenterKind::external_service:
            return std::make_unique<ExternalServiceAugmenter>(spec.endpoint, spec.timeout_ms, spec.seed,
                                                              spec.featurizer_dim, spec.max_in_flight);
    }
    throw ConfigError("unknown augmenter kind");
}

}  // namespace mars
