#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mars/bt_core.hpp"

namespace mars {

enum class Side { chosen, rejected };
const char* to_string(Side s);

// One response of a comparison as seen by an augmenter.
struct Payload {
    FeatureVec features;
    std::optional<std::string> text;

    friend bool operator==(const Payload&, const Payload&) = default;
};

Payload payload_of(const PreferenceTuple& z, Side side);

struct Variant {
    std::size_t index = 0;  // 1-based; 0 is reserved for the original response
    Payload payload;

    friend bool operator==(const Variant&, const Variant&) = default;
};

struct VariantBatch {
    std::string parent_tuple_id;
    Side side = Side::chosen;
    std::vector<Variant> variants;

    friend bool operator==(const VariantBatch&, const VariantBatch&) = default;
};

enum class AugmenterKind { feature_jitter, token_perturb, external_service };
enum class NoiseKind { uniform, gaussian };

const char* to_string(AugmenterKind k);
AugmenterKind augmenter_kind_from_string(const std::string& s);
const char* to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

struct AugmenterSpec {
    AugmenterKind kind = AugmenterKind::feature_jitter;
    double jitter_scale = 0.1;
    NoiseKind noise = NoiseKind::uniform;
    double edit_rate = 0.15;
    std::string endpoint;  // e.g. http://127.0.0.1:8080
    std::int64_t timeout_ms = 30000;
    std::size_t max_in_flight = 4;
    std::size_t featurizer_dim = 64;
    std::int64_t seed = 0;

    void validate() const;
};

// Produces `count` variants of one side of a tuple. Implementations are
// stateless after construction and deterministic in their inputs. Random
// streams are keyed by (seed, parent_id, side, round, variant index); the
// engine passes the epoch as `round` so each epoch draws fresh variants.
class Augmenter {
public:
    virtual ~Augmenter() = default;

    VariantBatch augment(const Payload& payload, std::string_view parent_id, Side side, std::size_t count,
                         std::uint64_t round = 0) const {
        return do_augment(payload, parent_id, side, count, round);
    }

private:
    virtual VariantBatch do_augment(const Payload& payload, std::string_view parent_id, Side side,
                                    std::size_t count, std::uint64_t round) const = 0;
};

class FeatureJitterAugmenter final : public Augmenter {
public:
    FeatureJitterAugmenter(double scale, std::int64_t seed, NoiseKind noise = NoiseKind::uniform);

private:
    VariantBatch do_augment(const Payload& payload, std::string_view parent_id, Side side, std::size_t count,
                            std::uint64_t round) const override;

    double scale_;
    std::int64_t seed_;
    NoiseKind noise_;
};

// Token drop/swap/duplicate edits on the response text, then re-featurized.
class TokenPerturbAugmenter final : public Augmenter {
public:
    TokenPerturbAugmenter(double edit_rate, std::int64_t seed, std::size_t featurizer_dim);

    // The edit applied to produce one variant; exposed for testing.
    std::string perturb(std::string_view text, std::uint64_t key) const;

private:
    VariantBatch do_augment(const Payload& payload, std::string_view parent_id, Side side, std::size_t count,
                            std::uint64_t round) const override;

    double edit_rate_;
    std::int64_t seed_;
    std::size_t dim_;
};

// Client for the paraphrase sidecar:
//   POST /paraphrase {"text", "n", "seed"} -> 200 {"variants": [n strings]}
class ExternalServiceAugmenter final : public Augmenter {
public:
    ExternalServiceAugmenter(std::string endpoint, std::int64_t timeout_ms, std::int64_t seed,
                             std::size_t featurizer_dim, std::size_t max_in_flight = 4);
    ~ExternalServiceAugmenter() override;

    // GET /healthz == 200
    bool healthy() const;

private:
    VariantBatch do_augment(const Payload& payload, std::string_view parent_id, Side side, std::size_t count,
                            std::uint64_t round) const override;

    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Augmenter> make_augmenter(const AugmenterSpec& spec);

// Deterministic hashed bag-of-tokens embedding, L2-normalized.
FeatureVec featurize(std::string_view text, std::size_t dim);

// Lowercased alphanumeric tokens, in order.
std::vector<std::string> tokenize(std::string_view text);

// Bucket and sign the featurizer assigns to a token.
struct TokenHash {
    std::size_t bucket;
    double sign;
};
TokenHash hash_token(std::string_view token, std::size_t dim);

}  // namespace mars
