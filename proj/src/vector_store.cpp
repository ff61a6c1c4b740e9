#include "ragchat/vector_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <system_error>

#include "ragchat/errors.hpp"

namespace ragchat {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'R', 'V', 'S', '1'};

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void str(const std::string& s) {
        if (s.size() > 0xFFFFFFFFu) throw StorageError("string too long to persist");
        u32(static_cast<std::uint32_t>(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }
    void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }

    std::vector<char> out;
};

class Reader {
public:
    explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::string str(const char* what) {
        const std::size_t at = pos_;
        const std::uint32_t len = u32(what);
        if (len > remaining()) {
            throw ParseError(std::string("truncated ") + what + " (declared " + std::to_string(len) + " bytes)", at);
        }
        std::string s(bytes_.data() + pos_, len);
        pos_ += len;
        return s;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

private:
    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw ParseError(std::string("truncated ") + what, pos_);
    }

    const std::vector<char>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

VectorStore::VectorStore(fs::path persist_path) : persist_path_(std::move(persist_path)) {}

UpsertCounts VectorStore::upsert(const std::vector<EmbeddedDocument>& docs) {
    std::unique_lock lock(mutex_);
    std::size_t dim = dim_;
    for (const auto& d : docs) {
        if (d.chunk_id.empty()) throw ArgumentError("chunk_id must not be empty");
        if (d.vector.dim() == 0) throw ArgumentError("vector of " + d.chunk_id + " is empty");
        if (dim == 0) dim = d.vector.dim();
        if (d.vector.dim() != dim) {
            throw ArgumentError("dimension mismatch for " + d.chunk_id + ": store is " + std::to_string(dim) +
                                ", document is " + std::to_string(d.vector.dim()));
        }
        for (float x : d.vector.values) {
            if (!std::isfinite(x)) throw ArgumentError("vector of " + d.chunk_id + " is not finite");
        }
        if (l2_norm(d.vector) == 0.0) throw ArgumentError("vector of " + d.chunk_id + " is zero");
    }

    Table next = table_;
    UpsertCounts counts;
    for (const auto& d : docs) {
        auto [it, inserted] = next.insert_or_assign(d.chunk_id, d);
        (void)it;
        if (inserted) {
            ++counts.inserted;
        } else {
            ++counts.replaced;
        }
    }
    if (persist_path_) write_atomically(*persist_path_, encode(sorted_docs(next), dim));
    table_ = std::move(next);
    dim_ = dim;
    return counts;
}

std::vector<RetrievalResult> VectorStore::search(const EmbeddingVector& query, std::size_t k) const {
    if (k == 0) throw ArgumentError("k must be at least 1");
    std::shared_lock lock(mutex_);
    if (table_.empty()) throw EmptyStoreError();
    if (query.dim() != dim_) {
        throw ArgumentError("query dimension " + std::to_string(query.dim()) + " does not match store dimension " +
                            std::to_string(dim_));
    }
    const double qn = l2_norm(query);
    if (qn == 0.0 || !std::isfinite(qn)) throw ArgumentError("query vector is zero or not finite");

    struct Scored {
        double score;
        const EmbeddedDocument* doc;
    };
    std::vector<Scored> scored;
    scored.reserve(table_.size());
    for (const auto& [id, doc] : table_) {
        double dot = 0.0;
        const auto& v = doc.vector.values;
        for (std::size_t i = 0; i < dim_; ++i) dot += static_cast<double>(v[i]) * static_cast<double>(query.values[i]);
        const double score = std::clamp(dot / (qn * l2_norm(doc.vector)), -1.0, 1.0);
        scored.push_back({score, &doc});
    }
    const std::size_t take = std::min(k, scored.size());
    auto better = [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc->chunk_id < b.doc->chunk_id;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);

    std::vector<RetrievalResult> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back({scored[i].doc->chunk_id, scored[i].doc->text, scored[i].score, i + 1});
    }
    return out;
}

std::size_t VectorStore::size() const {
    std::shared_lock lock(mutex_);
    return table_.size();
}

std::size_t VectorStore::dim() const {
    std::shared_lock lock(mutex_);
    return dim_;
}

std::optional<EmbeddedDocument> VectorStore::get(const std::string& chunk_id) const {
    std::shared_lock lock(mutex_);
    auto it = table_.find(chunk_id);
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

std::vector<EmbeddedDocument> VectorStore::documents() const {
    std::shared_lock lock(mutex_);
    return sorted_docs(table_);
}

std::vector<EmbeddedDocument> VectorStore::sorted_docs(const Table& table) const {
    std::vector<EmbeddedDocument> docs;
    docs.reserve(table.size());
    for (const auto& [id, d] : table) docs.push_back(d);
    std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.chunk_id < b.chunk_id; });
    return docs;
}

void VectorStore::persist(const fs::path& path) const {
    std::shared_lock lock(mutex_);
    write_atomically(path, encode(sorted_docs(table_), dim_));
}

std::vector<char> VectorStore::encode(const std::vector<EmbeddedDocument>& docs, std::size_t dim) {
    Writer w;
    w.out.insert(w.out.end(), std::begin(kMagic), std::end(kMagic));
    w.u32(static_cast<std::uint32_t>(dim));
    w.u64(docs.size());
    for (const auto& d : docs) {
        w.str(d.chunk_id);
        w.str(d.text);
        w.str(d.vector.provider_tag);
        w.u32(static_cast<std::uint32_t>(d.metadata.size()));
        for (const auto& [k, v] : d.metadata) {
            w.str(k);
            w.str(v);
        }
        for (float f : d.vector.values) w.f32(f);
    }
    return std::move(w.out);
}

std::vector<EmbeddedDocument> VectorStore::decode(const std::vector<char>& bytes, std::size_t* dim_out) {
    if (bytes.size() < 4) throw ParseError("truncated header", 0);
    if (std::memcmp(bytes.data(), kMagic, 3) != 0) throw ParseError("not a vector store file (bad magic)", 0);
    if (bytes[3] != kMagic[3]) {
        throw MigrationError(std::string("vector store format version RVS") + bytes[3] +
                             " is not supported by this build (expects RVS1); re-ingest or migrate the store");
    }
    Reader r(bytes);
    (void)r.u32("magic");
    const std::uint32_t dim = r.u32("dimension");
    const std::size_t count_at = r.offset();
    const std::uint64_t count = r.u64("record count");
    if (count > 0 && dim == 0) throw ParseError("records present but dimension is zero", count_at);

    std::vector<EmbeddedDocument> docs;
    // each record needs at least 4 length prefixes plus the vector
    const std::uint64_t min_record = 16 + 4ULL * dim;
    if (count > r.remaining() / min_record + 1) throw ParseError("record count exceeds file size", count_at);
    docs.reserve(static_cast<std::size_t>(count));
    std::unordered_map<std::string, bool> seen;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::size_t record_at = r.offset();
        EmbeddedDocument d;
        d.chunk_id = r.str("chunk_id");
        d.text = r.str("text");
        d.vector.provider_tag = r.str("provider_tag");
        const std::uint32_t n_meta = r.u32("metadata count");
        for (std::uint32_t m = 0; m < n_meta; ++m) {
            std::string key = r.str("metadata key");
            d.metadata[std::move(key)] = r.str("metadata value");
        }
        d.vector.values.resize(dim);
        for (std::uint32_t j = 0; j < dim; ++j) d.vector.values[j] = r.f32("vector");
        if (!seen.emplace(d.chunk_id, true).second) throw ParseError("duplicate chunk_id " + d.chunk_id, record_at);
        docs.push_back(std::move(d));
    }
    if (r.remaining() != 0) throw ParseError("trailing bytes after last record", r.offset());
    if (dim_out) *dim_out = dim;
    return docs;
}

void VectorStore::write_atomically(const fs::path& path, const std::vector<char>& bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    if (path.has_parent_path()) {
        std::error_code mk;
        fs::create_directories(path.parent_path(), mk);
    }
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw StorageError("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw StorageError("cannot replace " + path.string() + ": " + ec.message());
    }
}

std::unique_ptr<VectorStore> VectorStore::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open vector store " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw StorageError("failed reading " + path.string());
    std::size_t dim = 0;
    auto docs = decode(bytes, &dim);
    auto store = std::make_unique<VectorStore>();
    for (auto& d : docs) store->table_.emplace(d.chunk_id, std::move(d));
    store->dim_ = store->table_.empty() ? 0 : dim;
    return store;
}

std::unique_ptr<VectorStore> VectorStore::open(const fs::path& path) {
    std::unique_ptr<VectorStore> store;
    std::error_code ec;
    if (fs::exists(path, ec)) {
        store = load(path);
    } else {
        store = std::make_unique<VectorStore>();
    }
    store->persist_path_ = path;
    return store;
}

}  // namespace ragchat
