#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragchat/embedder.hpp"

namespace ragchat {

inline constexpr std::size_t kDefaultTopK = 5;

struct EmbeddedDocument {
    std::string chunk_id;
    std::string text;
    EmbeddingVector vector;
    std::map<std::string, std::string> metadata;

    bool operator==(const EmbeddedDocument&) const = default;
};

struct RetrievalResult {
    std::string chunk_id;
    std::string text;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based

    bool operator==(const RetrievalResult&) const = default;
};

struct UpsertCounts {
    std::size_t inserted = 0;
    std::size_t replaced = 0;

    bool operator==(const UpsertCounts&) const = default;
};

/// Exact cosine top-k over an in-memory table, optionally mirrored to a
/// single binary file. Readers share; upsert is exclusive.
///
/// File layout (little-endian):
///   "RVS1" | u32 dim | u64 count |
///   count x { str chunk_id | str text | str provider_tag |
///             u32 n_meta | n_meta x { str key | str value } |
///             dim x f32 }
/// where str = u32 byte length followed by the bytes.
class VectorStore {
public:
    VectorStore() = default;

    /// Store that rewrites `path` (write-temp-then-rename) after every upsert.
    explicit VectorStore(std::filesystem::path persist_path);

    VectorStore(const VectorStore&) = delete;
    VectorStore& operator=(const VectorStore&) = delete;

    /// Inserts or replaces by chunk_id. The first document fixes the store
    /// dimension. On persistence failure the in-memory state is left unchanged
    /// and StorageError is thrown.
    UpsertCounts upsert(const std::vector<EmbeddedDocument>& docs);

    /// Top min(k, size) by cosine similarity, ties by smaller chunk_id.
    /// Throws EmptyStoreError on an empty store, ArgumentError on k == 0 or a
    /// dimension mismatch.
    std::vector<RetrievalResult> search(const EmbeddingVector& query, std::size_t k = kDefaultTopK) const;

    std::size_t size() const;
    std::size_t dim() const;
    std::optional<EmbeddedDocument> get(const std::string& chunk_id) const;

    /// All documents ordered by chunk_id.
    std::vector<EmbeddedDocument> documents() const;

    void persist(const std::filesystem::path& path) const;

    /// Throws MigrationError on an unknown major version, ParseError on
    /// corruption, StorageError if the file cannot be read.
    static std::unique_ptr<VectorStore> load(const std::filesystem::path& path);

    /// Loads `path` if it exists, else starts empty; either way later upserts
    /// are persisted to `path`.
    static std::unique_ptr<VectorStore> open(const std::filesystem::path& path);

    static std::vector<char> encode(const std::vector<EmbeddedDocument>& docs, std::size_t dim);
    static std::vector<EmbeddedDocument> decode(const std::vector<char>& bytes, std::size_t* dim_out = nullptr);

private:
    using Table = std::unordered_map<std::string, EmbeddedDocument>;

    static void write_atomically(const std::filesystem::path& path, const std::vector<char>& bytes);
    std::vector<EmbeddedDocument> sorted_docs(const Table& table) const;

    mutable std::shared_mutex mutex_;
    Table table_;
    std::size_t dim_ = 0;
    std::optional<std::filesystem::path> persist_path_;
};

}  // namespace ragchat
