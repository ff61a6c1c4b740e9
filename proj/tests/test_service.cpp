#include <gtest/gtest.h>

#include <cstdlib>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ragchat/service.hpp"
#include "test_support.hpp"

using namespace ragchat;
using nlohmann::json;

namespace {

const char* kAdminEnv = "RAGCHAT_TEST_ADMIN_TOKEN";

AppConfig service_config(const std::string& mock_script = R"({"mode":"fixed","response":"Here is what I know."})") {
    AppConfig c = AppConfig::from_json("{}");
    c.templates_dir = RAGCHAT_TEMPLATES_DIR;
    c.backend.mock_script = mock_script;
    c.verifier_backend = BackendConfig{};  // echo: passes the generator answer through
    c.admin_token_env = kAdminEnv;
    c.embedder.seed = 7;
    c.session_ttl_seconds = 60;
    c.max_message_chars = 20;
    return c;
}

std::unique_ptr<VectorStore> seeded_store(const AppConfig& c) {
    auto store = std::make_unique<VectorStore>();
    LocalEmbedder e(c.embedder.local_dim, c.embedder.seed);
    std::vector<EmbeddedDocument> docs;
    for (int i = 0; i < 7; ++i) {
        EmbeddedDocument d;
        d.chunk_id = "doc.txt:" + std::to_string(i);
        d.text = "Fact number " + std::to_string(i) + " about exchange life.";
        d.vector = e.embed_one(d.text);
        docs.push_back(d);
    }
    store->upsert(docs);
    return store;
}

struct ServiceFixture {
    ManualClock clock{1'000'000};
    AppConfig config;
    Runtime runtime;
    ChatService service;

    explicit ServiceFixture(AppConfig c = service_config(), bool populate = true)
        : config(c),
          runtime(c, populate ? seeded_store(c) : std::make_unique<VectorStore>(), clock.as_clock()),
          service(runtime) {}

    std::string session() {
        const auto r = service.create_session();
        EXPECT_EQ(r.status, 201);
        return r.body["session_id"];
    }
};

std::string msg(const std::string& text) { return json{{"text", text}}.dump(); }

}  // namespace

TEST(ChatService, SessionsHaveDistinctIds) {
    ServiceFixture fx;
    std::set<std::string> ids;
    for (int i = 0; i < 50; ++i) ids.insert(fx.session());
    EXPECT_EQ(ids.size(), 50u);
    EXPECT_EQ(fx.service.session_count(), 50u);
    EXPECT_EQ(ids.begin()->size(), 32u);
}

TEST(ChatService, MessageReplyAndTraceSchema) {
    ServiceFixture fx;
    const auto sid = fx.session();
    const auto reply = fx.service.post_message(sid, msg("housing?"));
    ASSERT_EQ(reply.status, 200) << reply.body.dump();
    EXPECT_EQ(reply.body["answer"], "Here is what I know.");
    const std::string trace_id = reply.body["trace_id"];

    const auto trace = fx.service.get_trace(sid, trace_id);
    ASSERT_EQ(trace.status, 200);
    const auto& t = trace.body;
    for (const char* key : {"trace_id", "session_id", "query", "retrieved", "generator_prompt", "generator_answer",
                            "verifier_prompt", "verifier_answer", "final_answer", "token_estimates", "latencies_ms",
                            "status"}) {
        EXPECT_TRUE(t.contains(key)) << key;
    }
    EXPECT_EQ(t["retrieved"].size(), 5u);
    EXPECT_NE(t["verifier_prompt"], nullptr);
    EXPECT_EQ(t["status"], "ok");
    EXPECT_EQ(t["session_id"], sid);
    EXPECT_EQ(*fx.service.message_count(sid), 1u);
    EXPECT_EQ(fx.service.memory_snapshot(sid)->recent.size(), 2u);
}

TEST(ChatService, VerifierDisabledTraceHasNullVerifierFields) {
    auto c = service_config();
    c.pipeline.verifier_enabled = false;
    ServiceFixture fx(c);
    const auto sid = fx.session();
    const auto reply = fx.service.post_message(sid, msg("visa?"));
    const auto t = fx.service.get_trace(sid, reply.body["trace_id"]).body;
    EXPECT_EQ(t["verifier_prompt"], nullptr);
    EXPECT_EQ(t["verifier_answer"], nullptr);
}

TEST(ChatService, MessageValidation) {
    ServiceFixture fx;
    const auto sid = fx.session();
    EXPECT_EQ(fx.service.post_message(sid, msg(std::string(20, 'x'))).status, 200);
    EXPECT_EQ(fx.service.post_message(sid, msg(std::string(21, 'x'))).status, 422);
    // limit counts characters, not bytes
    std::string accents;
    for (int i = 0; i < 20; ++i) accents += "é";
    EXPECT_EQ(fx.service.post_message(sid, msg(accents)).status, 200);
    EXPECT_EQ(fx.service.post_message(sid, msg("   ")).status, 422);
    EXPECT_EQ(fx.service.post_message(sid, "{not json").status, 400);
    EXPECT_EQ(fx.service.post_message(sid, R"({"text": 5})").status, 422);
    EXPECT_EQ(fx.service.post_message(sid, R"({"text": "hi", "language_hint": 3})").status, 422);
    EXPECT_EQ(fx.service.post_message("nope", msg("hi")).status, 404);
    const auto err = fx.service.post_message(sid, msg(""));
    EXPECT_EQ(err.body["error"]["code"], "invalid_message");
    EXPECT_EQ(*fx.service.message_count(sid), 2u);
}

TEST(ChatService, LanguageHintReachesGeneratorPrompt) {
    ServiceFixture fx;
    const auto sid = fx.session();
    const auto reply = fx.service.post_message(sid, R"({"text": "Bonjour", "language_hint": "fr"})");
    ASSERT_EQ(reply.status, 200);
    const auto t = fx.service.get_trace(sid, reply.body["trace_id"]).body;
    EXPECT_NE(t["generator_prompt"].get<std::string>().find("(Please answer in fr.)"), std::string::npos);
    EXPECT_EQ(t["language_hint"], "fr");
    EXPECT_EQ(t["query"], "Bonjour");
}

TEST(ChatService, TracesAreScopedToTheirSession) {
    ServiceFixture fx;
    const auto a = fx.session();
    const auto b = fx.session();
    const std::string tid = fx.service.post_message(a, msg("visa?")).body["trace_id"];
    EXPECT_EQ(fx.service.get_trace(a, tid).status, 200);
    EXPECT_EQ(fx.service.get_trace(b, tid).status, 404);
    EXPECT_EQ(fx.service.get_trace(a, "tr-0000").status, 404);
}

TEST(ChatService, IdleSessionsExpireWith410) {
    ServiceFixture fx;
    const auto sid = fx.session();
    const std::string tid = fx.service.post_message(sid, msg("visa?")).body["trace_id"];
    fx.clock.advance(60'000);  // exactly at the TTL is still alive
    EXPECT_EQ(fx.service.post_message(sid, msg("again")).status, 200);
    fx.clock.advance(60'001);
    const auto gone = fx.service.post_message(sid, msg("hello?"));
    EXPECT_EQ(gone.status, 410);
    EXPECT_EQ(gone.body["error"]["code"], "session_expired");
    EXPECT_EQ(fx.service.get_trace(sid, tid).status, 410);
    EXPECT_FALSE(fx.service.memory_snapshot(sid).has_value());
}

TEST(ChatService, BackendFailureIs502WithStage) {
    ServiceFixture fx(service_config(R"({"mode":"rules","rules":[{"fail":"provider down"}]})"));
    const auto sid = fx.session();
    const auto r = fx.service.post_message(sid, msg("visa?"));
    EXPECT_EQ(r.status, 502);
    EXPECT_EQ(r.body["error"]["stage"], "generate");
    EXPECT_EQ(fx.service.memory_snapshot(sid)->recent.size(), 0u);
}

TEST(ChatService, EmptyStoreIsDegraded) {
    ServiceFixture fx(service_config(), /*populate=*/false);
    const auto h = fx.service.health();
    EXPECT_EQ(h.body["status"], "degraded");
    EXPECT_EQ(h.body["store_size"], 0);
    EXPECT_EQ(h.body["backend"], "mock");
    EXPECT_EQ(fx.service.create_session().status, 503);

    auto c = service_config();
    c.pipeline.fallback_answer = "Please contact the international office.";
    ServiceFixture with_fallback(c, false);
    const auto sid = with_fallback.session();
    const auto r = with_fallback.service.post_message(sid, msg("visa?"));
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body["answer"], "Please contact the international office.");
}

TEST(ChatService, IngestRequiresTokenAndIsIdempotent) {
    testing_support::TempDir dir;
    testing_support::write_file(dir / "corpus/a.txt", "Visa rules.\n\nHousing rules.");
    testing_support::write_file(dir / "corpus/b.md", "# Clubs\n\nThere are forty clubs.");
    ::unsetenv(kAdminEnv);
    ServiceFixture fx(service_config(), false);
    const std::string body = json{{"directory", (dir / "corpus").string()}}.dump();
    EXPECT_EQ(fx.service.ingest(body, "").status, 403);
    ::setenv(kAdminEnv, "admin-secret", 1);
    EXPECT_EQ(fx.service.ingest(body, "Bearer wrong").status, 401);

    const auto first = fx.service.ingest(body, "Bearer admin-secret");
    ASSERT_EQ(first.status, 200) << first.body.dump();
    EXPECT_EQ(first.body["documents"], 2);
    EXPECT_EQ(first.body["inserted"], 2);
    const auto second = fx.service.ingest(body, "Bearer admin-secret");
    EXPECT_EQ(second.body["inserted"], 0);
    EXPECT_EQ(second.body["replaced"], 2);
    EXPECT_EQ(fx.runtime.store().size(), 2u);
    EXPECT_EQ(fx.service.health().body["status"], "ok");

    const auto missing = fx.service.ingest(json{{"directory", "/no/such/dir"}}.dump(), "Bearer admin-secret");
    EXPECT_EQ(missing.status, 422);
    EXPECT_EQ(missing.body["error"]["stage"], "load");
    for (const auto& reply : {first, second, missing}) {
        EXPECT_EQ(reply.body.dump().find("admin-secret"), std::string::npos);
    }
}

TEST(ChatService, MessagesInOneSessionAreProcessedInArrivalOrder) {
    ServiceFixture fx(service_config(R"({"mode":"echo"})"));
    const auto sid = fx.session();
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&, i] { fx.service.post_message(sid, msg("m" + std::to_string(i))); });
    }
    for (auto& t : threads) t.join();
    const auto mem = fx.service.memory_snapshot(sid);
    ASSERT_TRUE(mem);
    EXPECT_EQ(*fx.service.message_count(sid), 8u);
    // user turns alternate with their own answers: nothing interleaved
    std::size_t users = 0;
    for (std::size_t i = 0; i + 1 < mem->recent.size(); i += 2) {
        EXPECT_EQ(mem->recent[i].role, Role::user);
        EXPECT_EQ(mem->recent[i + 1].role, Role::assistant);
        ++users;
    }
    EXPECT_GT(users, 0u);
}

TEST(FifoGate, AdmitsInTicketOrder) {
    FifoGate gate;
    std::mutex order_mutex;
    std::vector<int> order;
    gate.lock();
    std::vector<std::thread> waiters;
    for (int i = 0; i < 4; ++i) {
        waiters.emplace_back([&, i] {
            gate.lock();
            {
                std::lock_guard lock(order_mutex);
                order.push_back(i);
            }
            gate.unlock();
        });
        // give each waiter time to take its ticket before the next arrives
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
    }
    gate.unlock();
    for (auto& t : waiters) t.join();
    EXPECT_EQ(order, (std::vector<int>{0, 1, 2, 3}));
}

TEST(ChatServiceHttp, EndToEndOverLoopback) {
    ServiceFixture fx;
    const int port = fx.service.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    auto created = client.Post("/api/sessions", "", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    const std::string sid = json::parse(created->body)["session_id"];
    auto reply = client.Post(("/api/sessions/" + sid + "/messages").c_str(), msg("visa?"), "application/json");
    ASSERT_TRUE(reply);
    EXPECT_EQ(reply->status, 200);
    const std::string tid = json::parse(reply->body)["trace_id"];
    auto trace = client.Get(("/api/sessions/" + sid + "/traces/" + tid).c_str());
    EXPECT_EQ(trace->status, 200);
    auto health = client.Get("/api/health");
    EXPECT_EQ(json::parse(health->body)["status"], "ok");
    auto missing = client.Get("/api/nothing");
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(json::parse(missing->body)["error"]["code"], "not_found");
    fx.service.stop();
}
