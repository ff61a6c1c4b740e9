#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ragchat/retry.hpp"

namespace ragchat {

struct EmbeddingVector {
    std::vector<float> values;
    std::string provider_tag;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

/// Scales to unit L2 norm in place. Throws ArgumentError on a zero or
/// non-finite vector.
void normalize(EmbeddingVector& v);

double l2_norm(const EmbeddingVector& v);

/// dot(a,b) / (|a| |b|), clamped to [-1, 1].
/// Throws ArgumentError on dimension mismatch or a zero vector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct EmbedderConfig {
    enum class Kind { remote, local_deterministic };

    Kind kind = Kind::local_deterministic;
    std::string model_name = "text-embedding-ada-002";
    std::string base_url;
    std::string api_key_env;  // name of the environment variable holding the key
    std::size_t local_dim = 256;
    std::uint64_t seed = 0;
    bool normalize_case = false;
    std::size_t max_in_flight = 4;
    std::size_t batch_size = 64;
    int timeout_seconds = 60;
    RetryPolicy retry;

    /// Throws ConfigError on an invalid combination.
    void validate() const;
};

class Embedder {
public:
    virtual ~Embedder() = default;

    /// One normalized vector per input, same order. Inputs must be non-empty.
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;

    virtual std::string provider_tag() const = 0;

    EmbeddingVector embed_one(const std::string& text) const;
};

/// Signed hashed character trigrams. Pure function of (text, seed, dim).
class LocalEmbedder final : public Embedder {
public:
    LocalEmbedder(std::size_t dim, std::uint64_t seed, bool normalize_case = false);

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
    std::string provider_tag() const override;

    /// Unnormalized signed bucket counts; exposed for fixtures.
    std::vector<std::int32_t> bucket_counts(const std::string& text) const;

private:
    std::size_t dim_;
    std::uint64_t seed_;
    bool normalize_case_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config, Sleeper sleeper = real_sleeper());

/// Convenience form of make_embedder(config)->embed(texts).
std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts,
                                         const EmbedderConfig& config);

}  // namespace ragchat
