#include "ragchat/corpus.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <system_error>

#include "ragchat/clock.hpp"
#include "ragchat/errors.hpp"
#include "ragchat/text.hpp"

namespace ragchat {

namespace fs = std::filesystem;

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_text_extension(const fs::path& p) {
    const std::string ext = text::ascii_lower(p.extension().string());
    return ext == ".txt" || ext == ".md";
}

std::string derive_title(std::string_view body, const fs::path& path) {
    std::size_t pos = 0;
    while (pos <= body.size()) {
        std::size_t nl = body.find('\n', pos);
        if (nl == std::string_view::npos) nl = body.size();
        std::string_view line = text::trim(body.substr(pos, nl - pos));
        while (!line.empty() && line.front() == '#') line.remove_prefix(1);
        line = text::trim(line);
        if (!line.empty()) {
            return std::string(line.substr(0, text::utf8_floor(line, 120)));
        }
        pos = nl + 1;
    }
    return path.stem().string();
}

std::string mtime_of(const fs::path& path) {
    struct stat st {};
    if (::stat(path.c_str(), &st) != 0) return {};
    return format_timestamp(static_cast<std::int64_t>(st.st_mtime) * 1000);
}

struct Span {
    std::size_t begin;
    std::size_t end;
};

// Paragraphs are the non-whitespace stretches between whitespace runs that
// contain at least two newlines.
std::vector<Span> split_paragraphs(std::string_view body) {
    std::vector<Span> out;
    std::size_t i = 0;
    std::size_t para_begin = 0;
    while (i < body.size()) {
        if (!is_space(body[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        int newlines = 0;
        while (j < body.size() && is_space(body[j])) {
            if (body[j] == '\n') ++newlines;
            ++j;
        }
        if (newlines >= 2) {
            out.push_back({para_begin, i});
            para_begin = j;
        }
        i = j;
    }
    if (para_begin < body.size()) out.push_back({para_begin, body.size()});
    return out;
}

bool ends_sentence(char c) { return c == '.' || c == '!' || c == '?'; }

// End (exclusive) of the next hard-split piece starting at `begin`, no later
// than `limit`: just past the last sentence terminator that is followed by
// whitespace, or the UTF-8-safe limit itself.
std::size_t hard_cut(std::string_view body, std::size_t begin, std::size_t limit) {
    for (std::size_t q = limit; q > begin; --q) {
        if (ends_sentence(body[q - 1]) && (q == body.size() || is_space(body[q]))) return q;
    }
    std::size_t cut = begin + text::utf8_floor(body.substr(begin), limit - begin);
    return cut > begin ? cut : limit;
}

}  // namespace

CorpusLoad load_corpus(const fs::path& directory) {
    std::error_code ec;
    if (!fs::is_directory(directory, ec)) {
        throw StorageError("corpus directory is not readable: " + directory.string());
    }

    std::vector<fs::path> files;
    try {
        for (const auto& entry : fs::recursive_directory_iterator(directory)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
    } catch (const fs::filesystem_error& e) {
        throw StorageError(std::string("cannot list corpus directory: ") + e.what());
    }

    std::vector<std::pair<std::string, fs::path>> ordered;
    ordered.reserve(files.size());
    for (const auto& f : files) {
        ordered.emplace_back(fs::relative(f, directory).generic_string(), f);
    }
    std::sort(ordered.begin(), ordered.end());

    CorpusLoad result;
    for (const auto& [rel, path] : ordered) {
        if (!is_text_extension(path)) {
            result.issues.push_back({CorpusIssue::Kind::skipped, rel, "not a .txt or .md file"});
            continue;
        }
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            result.issues.push_back({CorpusIssue::Kind::error, rel, "cannot open file"});
            continue;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        if (in.bad()) {
            result.issues.push_back({CorpusIssue::Kind::error, rel, "read failed"});
            continue;
        }
        std::string body = std::move(buf).str();
        if (body.empty()) {
            result.issues.push_back({CorpusIssue::Kind::skipped, rel, "empty file"});
            continue;
        }
        if (!text::is_valid_utf8(body)) {
            result.issues.push_back({CorpusIssue::Kind::error, rel, "not valid UTF-8"});
            continue;
        }
        if (text::is_blank(body)) {
            result.issues.push_back({CorpusIssue::Kind::skipped, rel, "whitespace-only file"});
            continue;
        }
        SourceDocument doc;
        doc.source_id = rel;
        doc.title = derive_title(body, path);
        doc.fetched_at = mtime_of(path);
        doc.body = std::move(body);
        result.documents.push_back(std::move(doc));
    }
    return result;
}

std::string normalize_body(std::string_view body) {
    std::string out;
    out.reserve(body.size());
    std::string line;
    auto flush_line = [&] {
        std::size_t e = line.size();
        while (e > 0 && is_space(line[e - 1])) --e;
        out.append(line, 0, e);
        line.clear();
    };
    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < body.size() && body[i + 1] == '\n') ++i;
            flush_line();
            out.push_back('\n');
        } else {
            line.push_back(c);
        }
    }
    flush_line();
    return std::string(text::trim(out));
}

std::vector<Chunk> chunk_document(const SourceDocument& doc, std::size_t max_chunk_chars) {
    if (max_chunk_chars < kMinChunkChars) {
        throw ArgumentError("max_chunk_chars must be at least " + std::to_string(kMinChunkChars));
    }
    const std::string body = normalize_body(doc.body);
    std::vector<Chunk> chunks;
    std::size_t last_end = 0;

    auto emit = [&](std::size_t b, std::size_t e) {
        Chunk c;
        c.source_id = doc.source_id;
        c.seq = chunks.size();
        c.chunk_id = doc.source_id + ":" + std::to_string(c.seq);
        c.text = body.substr(b, e - b);
        c.joiner = body.substr(last_end, b - last_end);
        chunks.push_back(std::move(c));
        last_end = e;
    };

    std::optional<Span> current;
    for (const Span& para : split_paragraphs(body)) {
        if (current && para.end - current->begin <= max_chunk_chars) {
            current->end = para.end;
            continue;
        }
        if (current) {
            emit(current->begin, current->end);
            current.reset();
        }
        std::size_t begin = para.begin;
        while (para.end - begin > max_chunk_chars) {
            const std::size_t cut = hard_cut(body, begin, begin + max_chunk_chars);
            std::size_t piece_end = cut;
            while (piece_end > begin && is_space(body[piece_end - 1])) --piece_end;
            emit(begin, piece_end);
            begin = cut;
            while (begin < para.end && is_space(body[begin])) ++begin;
        }
        current = Span{begin, para.end};
    }
    if (current) emit(current->begin, current->end);
    return chunks;
}

std::string reassemble(const std::vector<Chunk>& chunks) {
    std::string out;
    for (const auto& c : chunks) {
        out += c.joiner;
        out += c.text;
    }
    return out;
}

}  // namespace ragchat
