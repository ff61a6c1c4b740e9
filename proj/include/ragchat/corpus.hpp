#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ragchat {

inline constexpr std::size_t kDefaultMaxChunkChars = 1500;
inline constexpr std::size_t kMinChunkChars = 64;

struct SourceDocument {
    std::string source_id;  // path relative to the corpus root, '/'-separated
    std::string title;
    std::string body;
    std::string fetched_at;
};

/// A contiguous, non-overlapping slice of a normalized document body.
/// `joiner` is the exact text that separated this chunk from the previous one
/// (empty for seq 0), so joining `joiner + text` over all chunks reproduces
/// the normalized body.
struct Chunk {
    std::string chunk_id;
    std::string source_id;
    std::size_t seq = 0;
    std::string text;
    std::string joiner;

    bool operator==(const Chunk&) const = default;
};

struct CorpusIssue {
    enum class Kind { skipped, error };
    Kind kind;
    std::string path;
    std::string message;
};

struct CorpusLoad {
    std::vector<SourceDocument> documents;
    std::vector<CorpusIssue> issues;
};

/// Reads every .txt/.md file under `directory` (recursively, lexicographic by
/// relative path). Throws StorageError if the directory itself cannot be read.
CorpusLoad load_corpus(const std::filesystem::path& directory);

/// CRLF/CR to LF, trailing whitespace stripped per line, outer whitespace trimmed.
std::string normalize_body(std::string_view body);

/// Greedy paragraph accumulation. Paragraphs are separated by runs of
/// whitespace containing at least two newlines; oversized paragraphs are cut
/// at the last sentence end before the limit, else at the limit itself.
/// Lengths are UTF-8 bytes. Throws ArgumentError if max_chunk_chars < 64.
std::vector<Chunk> chunk_document(const SourceDocument& doc,
                                  std::size_t max_chunk_chars = kDefaultMaxChunkChars);

/// Inverse of chunk_document: joiners and texts concatenated in seq order.
std::string reassemble(const std::vector<Chunk>& chunks);

}  // namespace ragchat
