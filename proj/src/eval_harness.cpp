#include "ragchat/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ragchat/errors.hpp"
#include "ragchat/json_io.hpp"
#include "ragchat/text.hpp"

namespace ragchat {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

// Unbiased draw in [0, bound) (Lemire's multiply-and-reject).
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(rng()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(rng()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

std::string metric_key(std::string_view s) {
    std::string k = text::ascii_lower(text::trim(s));
    std::replace(k.begin(), k.end(), '-', '_');
    if (k == "humanlike") k = "human_like";
    return k;
}

std::vector<std::string> split_csv_line(std::string_view line, std::size_t offset) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", offset);
    fields.push_back(std::move(cur));
    return fields;
}

std::int64_t parse_int(const std::string& s, const char* what, std::size_t offset) {
    const std::string_view t = text::trim(s);
    if (t.empty()) throw ParseError(std::string("empty ") + what, offset);
    std::int64_t v = 0;
    bool neg = false;
    std::size_t i = 0;
    if (t[0] == '-') {
        neg = true;
        i = 1;
    }
    if (i == t.size()) throw ParseError(std::string("bad ") + what + ": " + std::string(t), offset);
    for (; i < t.size(); ++i) {
        if (t[i] < '0' || t[i] > '9') throw ParseError(std::string("bad ") + what + ": " + std::string(t), offset);
        v = v * 10 + (t[i] - '0');
        if (v > (std::int64_t{1} << 52)) throw ParseError(std::string(what) + " out of range", offset);
    }
    return neg ? -v : v;
}

}  // namespace

// ---- test sets -----------------------------------------------------------

std::string_view to_string(TestCategory c) {
    switch (c) {
        case TestCategory::general: return "general";
        case TestCategory::provocation: return "provocation";
        case TestCategory::retrieval: return "retrieval";
        case TestCategory::multilingual: return "multilingual";
    }
    return "general";
}

TestCategory category_from_string(std::string_view s) {
    if (s == "general") return TestCategory::general;
    if (s == "provocation") return TestCategory::provocation;
    if (s == "retrieval") return TestCategory::retrieval;
    if (s == "multilingual") return TestCategory::multilingual;
    throw ConfigError("unknown test set category: " + std::string(s));
}

TestSet TestSet::from_json(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("test set is not valid JSON: ") + e.what());
    }
    try {
        TestSet ts;
        ts.name = j.at("name").get<std::string>();
        ts.category = category_from_string(j.at("category").get<std::string>());
        std::unordered_set<std::string> ids;
        for (const auto& item : j.at("items")) {
            TestItem t;
            t.query_id = item.at("query_id").get<std::string>();
            t.query_text = item.at("query_text").get<std::string>();
            t.language = item.value("language", "en");
            t.notes = item.value("notes", "");
            if (t.query_id.empty()) throw ConfigError("test item with empty query_id");
            if (!ids.insert(t.query_id).second) throw ConfigError("duplicate query_id " + t.query_id);
            ts.items.push_back(std::move(t));
        }
        return ts;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed test set: ") + e.what());
    }
}

TestSet TestSet::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

std::vector<TranscriptRecord> run_testset(const TestSet& testset, const RagPipeline& pipeline,
                                          const RunOptions& options) {
    std::vector<TranscriptRecord> records(testset.items.size());
    auto run_item = [&](std::size_t i, MemoryState& memory, const std::string& session_id) {
        const TestItem& item = testset.items[i];
        TranscriptRecord& rec = records[i];
        rec.testset = testset.name;
        rec.category = testset.category;
        rec.query_id = item.query_id;
        rec.query = item.query_text;
        rec.language = item.language;
        const PipelineTrace trace = pipeline.run_query(memory, session_id, item.query_text, {std::nullopt, i});
        rec.trace_id = trace.trace_id;
        rec.status = trace.ok() ? "ok" : "error";
        rec.final_answer = trace.final_answer;
        rec.error = trace.error;
    };

    if (!options.parallel) {
        MemoryState memory = options.initial_memory;
        const std::string session_id = "eval:" + testset.name;
        for (std::size_t i = 0; i < testset.items.size(); ++i) run_item(i, memory, session_id);
        return records;
    }

    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, testset.items.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < testset.items.size(); i = next.fetch_add(1)) {
                MemoryState memory = options.initial_memory;
                run_item(i, memory, "eval:" + testset.name + ":" + testset.items[i].query_id);
            }
        });
    }
    for (auto& t : pool) t.join();
    return records;
}

std::string to_jsonl(const std::vector<TranscriptRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

// ---- ratings -------------------------------------------------------------

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::quality: return "quality";
        case Metric::relevance: return "relevance";
        case Metric::correctness: return "correctness";
        case Metric::formality: return "formality";
        case Metric::human_like: return "human_like";
    }
    return "quality";
}

std::string_view display_name(Metric m) {
    switch (m) {
        case Metric::quality: return "Quality";
        case Metric::relevance: return "Relevance";
        case Metric::correctness: return "Correctness";
        case Metric::formality: return "Formality";
        case Metric::human_like: return "Human-Like";
    }
    return "Quality";
}

Metric metric_from_string(std::string_view s) {
    const std::string k = metric_key(s);
    for (Metric m : kReportMetricOrder) {
        if (k == to_string(m)) return m;
    }
    throw ArgumentError("unknown metric: " + std::string(s));
}

std::vector<LikertRecord> parse_ratings_csv(std::string_view csv) {
    static const std::vector<std::string> kColumns = {"evaluation_id", "rater_id", "rater_type", "query_id",
                                                      "metric",        "score",    "duration_seconds"};
    std::vector<LikertRecord> out;
    std::map<std::string, std::size_t> column;
    std::unordered_set<std::string> ids;
    std::size_t pos = 0;
    bool header_seen = false;
    if (csv.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
    while (pos < csv.size()) {
        std::size_t nl = csv.find('\n', pos);
        if (nl == std::string_view::npos) nl = csv.size();
        std::string_view line = csv.substr(pos, nl - pos);
        const std::size_t line_at = pos;
        pos = nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (text::is_blank(line)) continue;
        auto fields = split_csv_line(line, line_at);
        if (!header_seen) {
            for (std::size_t i = 0; i < fields.size(); ++i) column[std::string(text::trim(fields[i]))] = i;
            for (const auto& c : kColumns) {
                if (!column.count(c)) throw ParseError("ratings header lacks column " + c, line_at);
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != column.size()) {
            throw ParseError("expected " + std::to_string(column.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_at);
        }
        auto field = [&](const std::string& name) { return std::string(text::trim(fields[column[name]])); };
        LikertRecord r;
        r.evaluation_id = field("evaluation_id");
        r.rater_id = field("rater_id");
        r.query_id = field("query_id");
        if (r.evaluation_id.empty()) throw ParseError("empty evaluation_id", line_at);
        if (!ids.insert(r.evaluation_id).second) throw ParseError("duplicate evaluation_id " + r.evaluation_id, line_at);
        const std::string rater_type = text::ascii_lower(field("rater_type"));
        if (rater_type == "national") {
            r.rater_type = RaterType::national;
        } else if (rater_type == "international") {
            r.rater_type = RaterType::international;
        } else {
            throw ParseError("unknown rater_type " + rater_type, line_at);
        }
        try {
            r.metric = metric_from_string(field("metric"));
        } catch (const ArgumentError& e) {
            throw ParseError(e.what(), line_at);
        }
        const std::int64_t score = parse_int(field("score"), "score", line_at);
        if (score < 1 || score > 5) throw ParseError("score must be within 1..5", line_at);
        r.score = static_cast<int>(score);
        r.duration_seconds = parse_int(field("duration_seconds"), "duration_seconds", line_at);
        if (r.duration_seconds < 0) throw ParseError("duration_seconds must be nonnegative", line_at);
        out.push_back(std::move(r));
    }
    if (!header_seen) throw ParseError("ratings file has no header", 0);
    return out;
}

std::vector<LikertRecord> load_ratings_csv(const std::filesystem::path& path) {
    return parse_ratings_csv(read_file(path));
}

RatingPartition filter_ratings(const std::vector<LikertRecord>& records) {
    RatingPartition p;
    for (const auto& r : records) {
        (r.duration_seconds >= kMinRatingDurationSeconds ? p.kept : p.dropped).push_back(r);
    }
    return p;
}

// ---- bootstrap -----------------------------------------------------------

double interpolated_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ArgumentError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile level must be within [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_ci(std::span<const double> scores, std::size_t resamples, double confidence,
                             std::uint64_t seed) {
    if (scores.empty()) throw ArgumentError("bootstrap needs at least one score");
    if (!(confidence > 0.0 && confidence < 1.0)) throw ArgumentError("confidence must be within (0, 1)");
    if (resamples == 0) throw ArgumentError("resamples must be positive");
    for (double s : scores) {
        if (!std::isfinite(s)) throw ArgumentError("scores must be finite");
    }
    const std::size_t n = scores.size();
    const auto [min_it, max_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo_bound = *min_it;
    const double hi_bound = *max_it;

    double sum = 0.0;
    for (double s : scores) sum += s;

    std::mt19937_64 rng(seed);
    std::vector<double> means(resamples);
    for (std::size_t r = 0; r < resamples; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += scores[bounded(rng, n)];
        means[r] = std::clamp(acc / static_cast<double>(n), lo_bound, hi_bound);
    }
    std::sort(means.begin(), means.end());

    const double alpha = (1.0 - confidence) / 2.0;
    BootstrapResult res;
    res.n = n;
    res.point = sum / static_cast<double>(n);
    res.lower = interpolated_quantile(means, alpha);
    res.upper = interpolated_quantile(means, 1.0 - alpha);
    res.resamples = resamples;
    res.confidence = confidence;
    res.seed = seed;
    return res;
}

std::vector<BootstrapResult> bootstrap_by_metric(const std::vector<LikertRecord>& ratings, std::size_t resamples,
                                                 double confidence, std::uint64_t seed) {
    const auto kept = filter_ratings(ratings).kept;
    std::vector<BootstrapResult> out;
    for (Metric m : kReportMetricOrder) {
        std::vector<double> scores;
        for (const auto& r : kept) {
            if (r.metric == m) scores.push_back(r.score);
        }
        if (scores.empty()) continue;
        auto res = bootstrap_ci(scores, resamples, confidence, seed);
        res.metric = m;
        out.push_back(res);
    }
    return out;
}

// ---- report --------------------------------------------------------------

std::string format_interval(double lower, double upper, std::string_view dash) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "[%.2f %.*s %.2f]", lower, static_cast<int>(dash.size()), dash.data(), upper);
    return buf;
}

Report report(const std::vector<BootstrapResult>& results) {
    std::map<Metric, const BootstrapResult*> by_metric;
    for (const auto& r : results) {
        if (!r.metric) throw ArgumentError("report rows need a metric");
        if (!by_metric.emplace(*r.metric, &r).second) {
            throw ArgumentError("metric " + std::string(to_string(*r.metric)) + " appears twice");
        }
    }
    const double confidence = results.empty() ? kDefaultConfidence : results.front().confidence;
    char ci_header[64];
    std::snprintf(ci_header, sizeof ci_header, "%g%% Confidence Interval", confidence * 100.0);

    std::ostringstream table;
    char line[256];
    std::snprintf(line, sizeof line, "%-18s %5s %6s  %s\n", "Evaluation Metric", "n", "Mean", ci_header);
    table << line;
    nlohmann::json rows = nlohmann::json::array();
    for (Metric m : kReportMetricOrder) {
        auto it = by_metric.find(m);
        if (it == by_metric.end()) continue;
        const BootstrapResult& r = *it->second;
        std::snprintf(line, sizeof line, "%-18s %5zu %6.2f  %s\n", std::string(display_name(m)).c_str(), r.n, r.point,
                      format_interval(r.lower, r.upper, "\xE2\x80\x93").c_str());
        table << line;
        auto row = to_json(r);
        row["display_name"] = std::string(display_name(m));
        rows.push_back(std::move(row));
    }
    nlohmann::json doc = {{"confidence", confidence}, {"rows", std::move(rows)}};
    return Report{table.str(), doc.dump(2) + "\n"};
}

}  // namespace ragchat
