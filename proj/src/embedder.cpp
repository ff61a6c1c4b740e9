#include "ragchat/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <semaphore>

#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "ragchat/errors.hpp"
#include "ragchat/text.hpp"

namespace ragchat {

namespace {

constexpr char kTextBegin = '\x02';
constexpr char kTextEnd = '\x03';

std::uint64_t seeded_hash(std::uint64_t seed, std::string_view bytes) {
    char seed_bytes[8];
    for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<char>((seed >> (8 * i)) & 0xFF);
    std::uint64_t h = text::fnv1a64(std::string_view(seed_bytes, 8));
    h = text::fnv1a64(bytes, h);
    return text::splitmix64(h);
}

class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(EmbedderConfig config, Sleeper sleeper)
        : config_(std::move(config)),
          sleeper_(std::move(sleeper)),
          in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {}

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
        if (texts.empty()) throw ArgumentError("embed requires at least one text");
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        const std::size_t batch = std::max<std::size_t>(1, config_.batch_size);
        for (std::size_t i = 0; i < texts.size(); i += batch) {
            auto part = texts.subspan(i, std::min(batch, texts.size() - i));
            auto vectors = embed_batch(part);
            for (auto& v : vectors) out.push_back(std::move(v));
        }
        if (!out.empty()) {
            const std::size_t dim = out.front().dim();
            for (const auto& v : out) {
                if (v.dim() != dim) throw ProtocolError("embedding provider returned vectors of differing dimension");
            }
        }
        return out;
    }

    std::string provider_tag() const override { return "remote:" + config_.model_name; }

private:
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const {
        nlohmann::json body;
        body["model"] = config_.model_name;
        body["input"] = nlohmann::json::array();
        for (const auto& t : texts) {
            if (t.empty()) throw ArgumentError("cannot embed an empty text");
            body["input"].push_back(config_.normalize_case ? text::ascii_lower(t) : t);
        }
        detail::PostSpec spec{config_.base_url, "/embeddings", body.dump(), config_.api_key_env,
                              config_.timeout_seconds};
        std::string response;
        {
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            response = detail::post_json_with_retry(spec, config_.retry, sleeper_);
        }

        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(response);
        } catch (const nlohmann::json::parse_error& e) {
            throw ProtocolError(std::string("embedding response is not JSON: ") + e.what());
        }
        if (!parsed.contains("data") || !parsed["data"].is_array()) {
            throw ProtocolError("embedding response lacks a data array");
        }
        const auto& data = parsed["data"];
        if (data.size() != texts.size()) {
            throw ProtocolError("embedding provider returned " + std::to_string(data.size()) + " vectors for " +
                                std::to_string(texts.size()) + " inputs");
        }
        // Providers may reorder; honour "index" when present.
        std::vector<EmbeddingVector> out(texts.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& item = data[i];
            std::size_t slot = i;
            if (item.contains("index")) {
                if (!item["index"].is_number_unsigned() || item["index"].get<std::size_t>() >= texts.size()) {
                    throw ProtocolError("embedding item has an invalid index");
                }
                slot = item["index"].get<std::size_t>();
            }
            if (!item.contains("embedding") || !item["embedding"].is_array() || item["embedding"].empty()) {
                throw ProtocolError("embedding item lacks an embedding array");
            }
            EmbeddingVector v;
            v.provider_tag = provider_tag();
            for (const auto& x : item["embedding"]) {
                if (!x.is_number()) throw ProtocolError("embedding contains a non-number");
                v.values.push_back(x.get<float>());
            }
            if (!out[slot].values.empty()) throw ProtocolError("embedding response repeats an index");
            try {
                normalize(v);
            } catch (const ArgumentError& e) {
                throw ProtocolError(std::string("embedding provider returned an unusable vector: ") + e.what());
            }
            out[slot] = std::move(v);
        }
        return out;
    }

    EmbedderConfig config_;
    Sleeper sleeper_;
    mutable std::counting_semaphore<> in_flight_;
};

}  // namespace

double l2_norm(const EmbeddingVector& v) {
    double s = 0.0;
    for (float x : v.values) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

void normalize(EmbeddingVector& v) {
    for (float x : v.values) {
        if (!std::isfinite(x)) throw ArgumentError("vector contains a non-finite value");
    }
    const double n = l2_norm(v);
    if (n == 0.0) throw ArgumentError("cannot normalize a zero vector");
    for (float& x : v.values) x = static_cast<float>(static_cast<double>(x) / n);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw ArgumentError("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    }
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw ArgumentError("cosine similarity of a zero vector");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
    }
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

void EmbedderConfig::validate() const {
    if (kind == Kind::remote) {
        if (base_url.empty()) throw ConfigError("remote embedder requires base_url");
        if (api_key_env.empty()) throw ConfigError("remote embedder requires api_key_env");
        if (model_name.empty()) throw ConfigError("remote embedder requires model_name");
        (void)detail::parse_base_url(base_url);
    } else if (local_dim < 16) {
        throw ConfigError("local embedder requires local_dim >= 16");
    }
}

EmbeddingVector Embedder::embed_one(const std::string& text) const {
    auto v = embed(std::span<const std::string>(&text, 1));
    return std::move(v.front());
}

LocalEmbedder::LocalEmbedder(std::size_t dim, std::uint64_t seed, bool normalize_case)
    : dim_(dim), seed_(seed), normalize_case_(normalize_case) {
    if (dim_ < 16) throw ConfigError("local embedder requires local_dim >= 16");
}

std::string LocalEmbedder::provider_tag() const {
    return "local-trigram:d" + std::to_string(dim_) + ":s" + std::to_string(seed_);
}

std::vector<std::int32_t> LocalEmbedder::bucket_counts(const std::string& input) const {
    std::string framed;
    framed.reserve(input.size() + 2);
    framed.push_back(kTextBegin);
    framed += normalize_case_ ? text::ascii_lower(input) : input;
    framed.push_back(kTextEnd);

    std::vector<std::int32_t> counts(dim_, 0);
    for (std::size_t i = 0; i + 3 <= framed.size(); ++i) {
        const std::uint64_t h = seeded_hash(seed_, std::string_view(framed).substr(i, 3));
        const std::size_t bucket = static_cast<std::size_t>((h >> 1) % dim_);
        counts[bucket] += (h & 1U) ? -1 : 1;
    }
    if (std::all_of(counts.begin(), counts.end(), [](std::int32_t c) { return c == 0; })) {
        // every trigram cancelled out; fall back to one bucket from the whole text
        const std::uint64_t h = seeded_hash(seed_, framed);
        counts[static_cast<std::size_t>((h >> 1) % dim_)] = 1;
    }
    return counts;
}

std::vector<EmbeddingVector> LocalEmbedder::embed(std::span<const std::string> texts) const {
    if (texts.empty()) throw ArgumentError("embed requires at least one text");
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        if (t.empty()) throw ArgumentError("cannot embed an empty text");
        const auto counts = bucket_counts(t);
        EmbeddingVector v;
        v.provider_tag = provider_tag();
        v.values.resize(dim_);
        std::int64_t sum_sq = 0;
        for (std::int32_t c : counts) sum_sq += static_cast<std::int64_t>(c) * c;
        const double norm = std::sqrt(static_cast<double>(sum_sq));
        for (std::size_t i = 0; i < dim_; ++i) v.values[i] = static_cast<float>(counts[i] / norm);
        out.push_back(std::move(v));
    }
    return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config, Sleeper sleeper) {
    config.validate();
    if (config.kind == EmbedderConfig::Kind::remote) {
        return std::make_unique<RemoteEmbedder>(config, std::move(sleeper));
    }
    return std::make_unique<LocalEmbedder>(config.local_dim, config.seed, config.normalize_case);
}

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts, const EmbedderConfig& config) {
    return make_embedder(config)->embed(texts);
}

}  // namespace ragchat
