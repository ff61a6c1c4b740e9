#include "ragchat/ingest.hpp"

namespace ragchat {

IngestReport ingest_directory(const std::filesystem::path& directory, const Embedder& embedder, VectorStore& store,
                              std::size_t max_chunk_chars, const Clock& clock) {
    CorpusLoad corpus = load_corpus(directory);
    IngestReport report;
    report.documents = corpus.documents.size();
    report.issues = std::move(corpus.issues);

    const std::string ingested_at = format_timestamp(clock ? clock() : 0);
    std::vector<EmbeddedDocument> docs;
    std::vector<std::string> texts;
    for (const auto& doc : corpus.documents) {
        for (auto& chunk : chunk_document(doc, max_chunk_chars)) {
            EmbeddedDocument ed;
            ed.chunk_id = chunk.chunk_id;
            ed.text = chunk.text;
            ed.metadata = {{"source_id", doc.source_id}, {"title", doc.title}, {"ingested_at", ingested_at}};
            texts.push_back(chunk.text);
            docs.push_back(std::move(ed));
        }
    }
    report.chunks = docs.size();
    if (docs.empty()) return report;

    auto vectors = embedder.embed(texts);
    for (std::size_t i = 0; i < docs.size(); ++i) docs[i].vector = std::move(vectors[i]);
    report.counts = store.upsert(docs);
    return report;
}

}  // namespace ragchat
