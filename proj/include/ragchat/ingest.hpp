#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "ragchat/clock.hpp"
#include "ragchat/corpus.hpp"
#include "ragchat/embedder.hpp"
#include "ragchat/vector_store.hpp"

namespace ragchat {

struct IngestReport {
    std::size_t documents = 0;
    std::size_t chunks = 0;
    UpsertCounts counts;
    std::vector<CorpusIssue> issues;
};

/// load_corpus -> chunk_document -> embed -> upsert.
IngestReport ingest_directory(const std::filesystem::path& directory, const Embedder& embedder,
                              VectorStore& store, std::size_t max_chunk_chars, const Clock& clock);

}  // namespace ragchat
