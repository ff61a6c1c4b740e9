#include <gtest/gtest.h>

#include "ragchat/config.hpp"
#include "ragchat/errors.hpp"
#include "ragchat/runtime.hpp"
#include "test_support.hpp"

using namespace ragchat;

TEST(AppConfig, DefaultsMatchPipelineConstants) {
    const auto c = AppConfig::from_json("{}");
    EXPECT_EQ(c.pipeline.top_k, 5u);
    EXPECT_EQ(c.pipeline.models.generator_model, "gpt-3.5-turbo");
    EXPECT_EQ(c.pipeline.models.verifier_model, "gpt-4-turbo");
    EXPECT_DOUBLE_EQ(c.pipeline.generator_temperature, 0.7);
    EXPECT_DOUBLE_EQ(c.pipeline.verifier_temperature, 0.0);
    EXPECT_EQ(c.memory_token_threshold, 1000);
    EXPECT_EQ(c.memory_keep_recent, 4u);
    EXPECT_EQ(c.max_chunk_chars, 1500u);
    EXPECT_EQ(c.session_ttl_seconds, 3600);
    EXPECT_EQ(c.max_message_chars, 4000u);
    EXPECT_EQ(c.backend.kind, BackendConfig::Kind::mock);
    EXPECT_EQ(c.embedder.kind, EmbedderConfig::Kind::local_deterministic);
}

TEST(AppConfig, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(AppConfig::from_json(R"({"prot": 1})"), ConfigError);
    EXPECT_THROW(AppConfig::from_json(R"({"pipeline": {"topk": 3}})"), ConfigError);
    EXPECT_THROW(AppConfig::from_json(R"({"pipeline": {"top_k": 0}})"), ConfigError);
    EXPECT_THROW(AppConfig::from_json(R"({"chunking": {"max_chunk_chars": 10}})"), ConfigError);
    EXPECT_THROW(AppConfig::from_json(R"({"port": "eighty"})"), ConfigError);
    EXPECT_THROW(AppConfig::from_json(R"({"backend": {"kind": "remote"}})"), ConfigError);
    EXPECT_THROW(AppConfig::from_json(R"({"embedder": {"kind": "remote"}})"), ConfigError);
    EXPECT_THROW(AppConfig::from_json("not json"), ConfigError);
    EXPECT_THROW(AppConfig::from_json(R"({"pipeline": {"verifier_failure_policy": "maybe"}})"), ConfigError);
}

TEST(AppConfig, RelativePathsResolveAgainstConfigFile) {
    testing_support::TempDir dir;
    testing_support::write_file(dir / "cfg/mock.json", R"({"mode":"fixed","response":"hi"})");
    testing_support::write_file(dir / "cfg/app.json", R"({"store_path":"data/s.rvs","templates_dir":"/abs/t",
        "backend":{"kind":"mock","mock_script_file":"mock.json"},
        "pipeline":{"verifier_failure_policy":"fallback","fallback_answer":"Later."}})");
    const auto c = AppConfig::load(dir / "cfg/app.json");
    EXPECT_EQ(c.store_path, dir / "cfg/data/s.rvs");
    EXPECT_EQ(c.templates_dir, "/abs/t");
    EXPECT_EQ(c.backend.mock_script, R"({"mode":"fixed","response":"hi"})");
    EXPECT_EQ(c.pipeline.verifier_failure_policy, PipelineConfig::VerifierFailurePolicy::fallback_to_generator);
    EXPECT_EQ(*c.pipeline.fallback_answer, "Later.");
    EXPECT_THROW(AppConfig::load(dir / "missing.json"), ConfigError);
}

TEST(AppConfig, SampleConfigLoadsAndWires) {
    const auto c = AppConfig::load(std::string(RAGCHAT_TEMPLATES_DIR) + "/../sample/ragchat.json");
    Runtime rt(c, std::make_unique<VectorStore>());
    EXPECT_EQ(rt.generator_backend().kind(), "mock");
    EXPECT_EQ(rt.prompts().generator.data_slots(), 5u);
    EXPECT_EQ(rt.fresh_memory().token_threshold, 1000);
    const auto remote = AppConfig::load(std::string(RAGCHAT_TEMPLATES_DIR) + "/../sample/ragchat.remote.json");
    EXPECT_EQ(remote.backend.kind, BackendConfig::Kind::remote);
    EXPECT_EQ(remote.embedder.api_key_env, "OPENAI_API_KEY");
}

TEST(Runtime, WritesTracesWhenDirectoryConfigured) {
    testing_support::TempDir dir;
    auto c = AppConfig::from_json("{}");
    c.templates_dir = RAGCHAT_TEMPLATES_DIR;
    c.traces_dir = dir / "traces";
    c.pipeline.fallback_answer = "Fallback.";
    Runtime rt(c, std::make_unique<VectorStore>());
    auto memory = rt.fresh_memory();
    const auto trace = rt.pipeline().run_query(memory, "s", "hello");
    ASSERT_TRUE(trace.ok());
    const auto written = testing_support::read_file(c.traces_dir / (trace.trace_id + ".json"));
    EXPECT_NE(written.find("\"final_answer\": \"Fallback.\""), std::string::npos);
}
