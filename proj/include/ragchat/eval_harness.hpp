#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragchat/rag_pipeline.hpp"

namespace ragchat {

enum class TestCategory { general, provocation, retrieval, multilingual };

std::string_view to_string(TestCategory c);
TestCategory category_from_string(std::string_view s);

struct TestItem {
    std::string query_id;
    std::string query_text;
    std::string language = "en";
    std::string notes;
};

struct TestSet {
    std::string name;
    TestCategory category = TestCategory::general;
    std::vector<TestItem> items;

    /// Throws ConfigError on duplicate query ids or an unknown category.
    static TestSet from_json(std::string_view json_text);
    static TestSet load(const std::filesystem::path& path);
};

struct TranscriptRecord {
    std::string testset;
    TestCategory category = TestCategory::general;
    std::string query_id;
    std::string query;
    std::string language;
    std::string status;  // "ok" | "error"
    std::string final_answer;
    std::string trace_id;
    std::optional<StageError> error;
};

struct RunOptions {
    /// false: items run in order through one shared session.
    /// true: each item gets a fresh session and items run concurrently.
    bool parallel = false;
    std::size_t workers = 4;
    MemoryState initial_memory;  // copied into every session the run creates
};

/// One record per item, in input order. Item failures are recorded, not thrown.
std::vector<TranscriptRecord> run_testset(const TestSet& testset, const RagPipeline& pipeline,
                                          const RunOptions& options = {});

/// JSON-lines, one object per record, keys sorted.
std::string to_jsonl(const std::vector<TranscriptRecord>& records);

enum class Metric { quality, relevance, correctness, formality, human_like };

inline constexpr std::array<Metric, 5> kReportMetricOrder = {
    Metric::quality, Metric::relevance, Metric::formality, Metric::correctness, Metric::human_like};

std::string_view to_string(Metric m);       // "quality", "human_like", ...
std::string_view display_name(Metric m);    // "Quality", "Human-Like", ...
Metric metric_from_string(std::string_view s);

enum class RaterType { national, international };

struct LikertRecord {
    std::string evaluation_id;
    std::string rater_id;
    RaterType rater_type = RaterType::national;
    std::string query_id;
    Metric metric = Metric::quality;
    int score = 0;
    std::int64_t duration_seconds = 0;
};

/// CSV with header evaluation_id,rater_id,rater_type,query_id,metric,score,duration_seconds.
/// Throws ParseError (byte offset of the offending line) on bad rows.
std::vector<LikertRecord> parse_ratings_csv(std::string_view csv);
std::vector<LikertRecord> load_ratings_csv(const std::filesystem::path& path);

inline constexpr std::int64_t kMinRatingDurationSeconds = 120;

struct RatingPartition {
    std::vector<LikertRecord> kept;
    std::vector<LikertRecord> dropped;
};

/// Keeps ratings that took at least two minutes.
RatingPartition filter_ratings(const std::vector<LikertRecord>& records);

inline constexpr std::size_t kDefaultResamples = 20000;
inline constexpr double kDefaultConfidence = 0.95;

struct BootstrapResult {
    std::optional<Metric> metric;
    std::size_t n = 0;
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t resamples = 0;
    double confidence = 0.0;
    std::uint64_t seed = 0;

    bool operator==(const BootstrapResult&) const = default;
};

/// Percentile bootstrap of the mean, linear interpolation between order
/// statistics. Resample indices come from mt19937_64(seed) with unbiased
/// bounded draws, so results are bit-identical across platforms.
BootstrapResult bootstrap_ci(std::span<const double> scores, std::size_t resamples = kDefaultResamples,
                             double confidence = kDefaultConfidence, std::uint64_t seed = 0);

/// Empirical quantile of sorted data, linear interpolation at (n - 1) * q.
double interpolated_quantile(std::span<const double> sorted, double q);

/// Per-metric bootstrap over filtered ratings, in report order.
std::vector<BootstrapResult> bootstrap_by_metric(const std::vector<LikertRecord>& ratings,
                                                 std::size_t resamples = kDefaultResamples,
                                                 double confidence = kDefaultConfidence,
                                                 std::uint64_t seed = 0);

struct Report {
    std::string table;  // human-readable, Unicode en dash in intervals
    std::string json;   // machine-readable, ASCII "[a - b]" intervals
};

/// Rows follow kReportMetricOrder; metrics without a result are omitted.
/// Throws ArgumentError if a metric appears twice.
Report report(const std::vector<BootstrapResult>& results);

std::string format_interval(double lower, double upper, std::string_view dash);

}  // namespace ragchat
