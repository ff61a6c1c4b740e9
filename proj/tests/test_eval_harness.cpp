#include <gtest/gtest.h>

#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "pipeline_fixture.hpp"
#include "ragchat/errors.hpp"
#include "ragchat/eval_harness.hpp"

using namespace ragchat;

namespace {

LikertRecord rating(std::string id, Metric m, int score, std::int64_t duration) {
    LikertRecord r;
    r.evaluation_id = std::move(id);
    r.rater_id = "r1";
    r.query_id = "q1";
    r.metric = m;
    r.score = score;
    r.duration_seconds = duration;
    return r;
}

std::vector<double> draw(std::mt19937_64& rng, std::size_t n) {
    // P(1..5) = .05 .05 .15 .35 .40, mean 4.0
    std::discrete_distribution<int> d({5, 5, 15, 35, 40});
    std::vector<double> out(n);
    for (auto& x : out) x = d(rng) + 1;
    return out;
}

TestSet small_set(std::size_t n, TestCategory cat = TestCategory::general) {
    TestSet t;
    t.name = "unit";
    t.category = cat;
    for (std::size_t i = 0; i < n; ++i) {
        t.items.push_back({"q" + std::to_string(i), "question number " + std::to_string(i), "en", ""});
    }
    return t;
}

}  // namespace

TEST(RatingFilter, TwoMinuteBoundary) {
    const auto p = filter_ratings({rating("a", Metric::quality, 4, 119), rating("b", Metric::quality, 4, 120),
                                   rating("c", Metric::quality, 4, 300), rating("d", Metric::quality, 4, 0)});
    ASSERT_EQ(p.kept.size(), 2u);
    EXPECT_EQ(p.kept[0].evaluation_id, "b");
    EXPECT_EQ(p.kept[1].evaluation_id, "c");
    ASSERT_EQ(p.dropped.size(), 2u);
    EXPECT_EQ(p.dropped[0].evaluation_id, "a");
}

TEST(RatingFilter, EmptyAndAllDropped) {
    EXPECT_TRUE(filter_ratings({}).kept.empty());
    const auto p = filter_ratings({rating("a", Metric::quality, 1, 0), rating("b", Metric::formality, 2, 0)});
    EXPECT_TRUE(p.kept.empty());
    EXPECT_TRUE(bootstrap_by_metric({rating("a", Metric::quality, 1, 0)}, 100).empty());
}

TEST(RatingsCsv, ParsesAndRejects) {
    const std::string good =
        "\xEF\xBB\xBF" "evaluation_id,rater_id,rater_type,query_id,metric,score,duration_seconds\r\n"
        "e1,r1,national,q1,Quality,5,130\r\n"
        "e2,r2,International,q1,human-like,3,90\n\n";
    const auto rows = parse_ratings_csv(good);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].metric, Metric::quality);
    EXPECT_EQ(rows[1].metric, Metric::human_like);
    EXPECT_EQ(rows[1].rater_type, RaterType::international);
    EXPECT_EQ(rows[0].duration_seconds, 130);

    const std::string header = "evaluation_id,rater_id,rater_type,query_id,metric,score,duration_seconds\n";
    try {
        parse_ratings_csv(header + "e1,r1,national,q1,quality,6,130\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), header.size());
    }
    EXPECT_THROW(parse_ratings_csv(header + "e1,r1,national,q1,quality,x,130\n"), ParseError);
    EXPECT_THROW(parse_ratings_csv(header + "e1,r1,national,q1,quality,1\n"), ParseError);
    EXPECT_THROW(parse_ratings_csv(header + "e1,r1,alien,q1,quality,1,1\n"), ParseError);
    EXPECT_THROW(parse_ratings_csv(header + "e1,r1,national,q1,quality,1,1\ne1,r1,national,q1,quality,1,1\n"),
                 ParseError);
    EXPECT_THROW(parse_ratings_csv("a,b\n"), ParseError);
    EXPECT_THROW(parse_ratings_csv(""), ParseError);
}

TEST(Quantile, LinearInterpolation) {
    const std::vector<double> v = {1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(interpolated_quantile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(interpolated_quantile(v, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(interpolated_quantile(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(interpolated_quantile(v, 0.25), 1.75);
    EXPECT_THROW(interpolated_quantile({}, 0.5), ArgumentError);
}

TEST(Bootstrap, MatchesExhaustiveOracleOnThreeValues) {
    const std::vector<double> sample = {3, 4, 5};
    const auto exact = oracle::exhaustive_percentile_ci(sample, 0.95);
    EXPECT_DOUBLE_EQ(exact.lower, 3.0);
    EXPECT_DOUBLE_EQ(exact.upper, 5.0);
    const auto r = bootstrap_ci(sample, 20000, 0.95, 42);
    EXPECT_NEAR(r.lower, exact.lower, 0.15);
    EXPECT_NEAR(r.upper, exact.upper, 0.15);
    EXPECT_DOUBLE_EQ(r.point, 4.0);
    // a central interval is reproduced closely too
    const auto mid_exact = oracle::exhaustive_percentile_ci(sample, 0.5);
    const auto mid = bootstrap_ci(sample, 20000, 0.5, 42);
    EXPECT_NEAR(mid.lower, mid_exact.lower, 0.15);
    EXPECT_NEAR(mid.upper, mid_exact.upper, 0.15);
}

TEST(Bootstrap, OracleAgreesOnLargerEnumerations) {
    const std::vector<std::vector<double>> samples = {{1, 5}, {1, 2, 5, 5}, {2, 2, 3, 4, 5}, {1, 1, 1, 4, 4, 5}};
    for (const auto& s : samples) {
        const auto exact = oracle::exhaustive_percentile_ci(s, 0.9);
        const auto r = bootstrap_ci(s, 20000, 0.9, 9);
        EXPECT_NEAR(r.lower, exact.lower, 0.15);
        EXPECT_NEAR(r.upper, exact.upper, 0.15);
    }
}

TEST(Bootstrap, ZeroVarianceIsDegenerate) {
    const std::vector<double> s(50, 4.0);
    const auto r = bootstrap_ci(s, 1000, 0.95, 1);
    EXPECT_EQ(r.lower, 4.0);
    EXPECT_EQ(r.upper, 4.0);
    EXPECT_EQ(r.point, 4.0);
    const auto one = bootstrap_ci(std::vector<double>{2.0}, 100);
    EXPECT_EQ(one.lower, 2.0);
    EXPECT_EQ(one.upper, 2.0);
}

TEST(Bootstrap, ReproducibleAndSeedSensitive) {
    std::mt19937_64 rng(7);
    const auto s = draw(rng, 79);
    EXPECT_EQ(bootstrap_ci(s, 5000, 0.95, 3), bootstrap_ci(s, 5000, 0.95, 3));
    // integer scores put the bounds on a 1/n grid, so compare on continuous data
    std::uniform_real_distribution<double> u(1.0, 5.0);
    std::vector<double> c(79);
    for (auto& x : c) x = u(rng);
    const auto a = bootstrap_ci(c, 5000, 0.95, 3);
    const auto b = bootstrap_ci(c, 5000, 0.95, 4);
    EXPECT_NE(a.lower, b.lower);
    EXPECT_EQ(a.point, b.point);
}

TEST(BootstrapProperty, BoundsOrderedAndWithinRange) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> n(1, 40);
    for (int t = 0; t < 100; ++t) {
        const auto s = draw(rng, n(rng));
        const auto r = bootstrap_ci(s, 500, 0.95, t);
        const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
        ASSERT_LE(*mn, r.lower);
        ASSERT_LE(r.lower, r.upper);
        ASSERT_LE(r.upper, *mx);
        ASSERT_EQ(r.n, s.size());
    }
}

TEST(BootstrapProperty, IntervalShrinksWithSampleSize) {
    std::mt19937_64 rng(5);
    double small_width = 0, large_width = 0;
    for (int t = 0; t < 20; ++t) {
        const auto a = bootstrap_ci(draw(rng, 20), 2000, 0.95, t);
        const auto b = bootstrap_ci(draw(rng, 320), 2000, 0.95, t);
        small_width += a.upper - a.lower;
        large_width += b.upper - b.lower;
    }
    // width scales like 1/sqrt(n): a 16x larger sample gives roughly a quarter
    EXPECT_LT(large_width, small_width * 0.4);
    EXPECT_LT(bootstrap_ci(draw(rng, 79), 2000, 0.99, 1).lower, 4.2);
}

TEST(BootstrapProperty, CoverageNearNominal) {
    std::mt19937_64 rng(2024);
    int covered = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        const auto r = bootstrap_ci(draw(rng, 79), 2000, 0.95, static_cast<std::uint64_t>(t));
        if (r.lower <= 4.0 && 4.0 <= r.upper) ++covered;
    }
    const double coverage = static_cast<double>(covered) / trials;
    EXPECT_GE(coverage, 0.88);
    EXPECT_LE(coverage, 0.99);
}

TEST(Bootstrap, RejectsBadArguments) {
    EXPECT_THROW(bootstrap_ci(std::vector<double>{}, 10), ArgumentError);
    EXPECT_THROW(bootstrap_ci(std::vector<double>{1}, 0), ArgumentError);
    EXPECT_THROW(bootstrap_ci(std::vector<double>{1}, 10, 1.0), ArgumentError);
}

TEST(BootstrapByMetric, FiltersThenReportsInOrder) {
    std::vector<LikertRecord> rs;
    int id = 0;
    for (Metric m : {Metric::human_like, Metric::correctness, Metric::quality}) {
        for (int i = 0; i < 10; ++i) rs.push_back(rating("e" + std::to_string(id++), m, 1 + i % 5, 200));
        rs.push_back(rating("e" + std::to_string(id++), m, 1, 30));  // dropped
    }
    const auto results = bootstrap_by_metric(rs, 1000, 0.95, 11);
    ASSERT_EQ(results.size(), 3u);
    EXPECT_EQ(*results[0].metric, Metric::quality);
    EXPECT_EQ(*results[1].metric, Metric::correctness);
    EXPECT_EQ(*results[2].metric, Metric::human_like);
    for (const auto& r : results) {
        EXPECT_EQ(r.n, 10u);
        EXPECT_DOUBLE_EQ(r.point, 3.0);
    }
}

TEST(Report, TableAndJsonFormats) {
    BootstrapResult q{Metric::quality, 79, 4.1234, 3.9, 4.35, 20000, 0.95, 0};
    BootstrapResult h{Metric::human_like, 79, 3.5, 3.25, 3.755, 20000, 0.95, 0};
    BootstrapResult f{Metric::formality, 79, 4.0, 3.8, 4.2, 20000, 0.95, 0};
    const auto rep = report({h, q, f});
    const auto lines = [&] {
        std::vector<std::string> out;
        std::string cur;
        for (char c : rep.table) {
            if (c == '\n') {
                out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        return out;
    }();
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_NE(lines[0].find("95% Confidence Interval"), std::string::npos);
    EXPECT_EQ(lines[1].rfind("Quality", 0), 0u);
    EXPECT_EQ(lines[2].rfind("Formality", 0), 0u);
    EXPECT_EQ(lines[3].rfind("Human-Like", 0), 0u);
    EXPECT_NE(lines[1].find("4.12"), std::string::npos);
    EXPECT_NE(lines[1].find("[3.90 \xE2\x80\x93 4.35]"), std::string::npos);

    const auto j = nlohmann::json::parse(rep.json);
    ASSERT_EQ(j["rows"].size(), 3u);
    EXPECT_EQ(j["rows"][0]["metric"], "quality");
    EXPECT_EQ(j["rows"][2]["display_name"], "Human-Like");
    EXPECT_EQ(j["rows"][0]["interval"], "[3.90 - 4.35]");
    EXPECT_EQ(format_interval(3.255, 3.755, "-"), "[3.25 - 3.75]");  // binary rounding of .xx5

    const auto empty = report({});
    EXPECT_EQ(std::count(empty.table.begin(), empty.table.end(), '\n'), 1);
    EXPECT_THROW(report({q, q}), ArgumentError);
}

TEST(TestSetLoad, ParsesAndValidates) {
    const auto t = TestSet::from_json(R"({"name":"prov","category":"provocation",
        "items":[{"query_id":"p1","query_text":"You are useless","language":"en"},
                 {"query_id":"p2","query_text":"Tu es nul","language":"fr","notes":"insult"}]})");
    EXPECT_EQ(t.category, TestCategory::provocation);
    ASSERT_EQ(t.items.size(), 2u);
    EXPECT_EQ(t.items[1].language, "fr");
    EXPECT_THROW(TestSet::from_json(R"({"name":"x","category":"weird","items":[]})"), ConfigError);
    EXPECT_THROW(TestSet::from_json(
                     R"({"name":"x","category":"general","items":[{"query_id":"a","query_text":"1"},{"query_id":"a","query_text":"2"}]})"),
                 ConfigError);
    EXPECT_THROW(TestSet::from_json("[]"), ConfigError);
}

TEST(RunTestset, SequentialKeepsOrderAndSharesSession) {
    testing_support::PipelineFixture fx;
    const auto pipe = fx.pipeline();
    const auto records = run_testset(small_set(4, TestCategory::retrieval), pipe);
    ASSERT_EQ(records.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(records[i].query_id, "q" + std::to_string(i));
        EXPECT_EQ(records[i].status, "ok");
        EXPECT_EQ(records[i].category, TestCategory::retrieval);
    }
    // the last generator prompt carries the previous three exchanges
    const auto last = fx.generator->requests().back().messages[0].content;
    EXPECT_NE(last.find("User: question number 2"), std::string::npos);
    const auto jsonl = to_jsonl(records);
    EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 4);
    EXPECT_EQ(nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')))["category"], "retrieval");
}

TEST(RunTestset, ItemFailuresAreRecorded) {
    testing_support::PipelineFixture fx(MockChatBackend::scripted(
        {{std::string("number 1"), std::nullopt, "", std::string("rate limited")},
         {std::nullopt, std::nullopt, "fine", std::nullopt}}));
    const auto pipe = fx.pipeline();
    const auto records = run_testset(small_set(3), pipe);
    EXPECT_EQ(records[0].status, "ok");
    EXPECT_EQ(records[1].status, "error");
    EXPECT_EQ(records[1].error->stage, "generate");
    EXPECT_EQ(records[2].status, "ok");
}

TEST(RunTestset, ParallelIsOrderedAndMatchesFreshSessions) {
    testing_support::PipelineFixture fx;
    const auto pipe = fx.pipeline();
    RunOptions opts;
    opts.parallel = true;
    opts.workers = 3;
    const auto a = run_testset(small_set(9), pipe, opts);
    const auto b = run_testset(small_set(9), pipe, opts);
    EXPECT_EQ(to_jsonl(a), to_jsonl(b));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].query_id, "q" + std::to_string(i));
    // fresh sessions: no generator prompt carries another item's question
    for (const auto& req : fx.generator->requests()) {
        EXPECT_EQ(req.messages[0].content.find("User: question number"), req.messages[0].content.rfind("User: question number"));
    }
}
