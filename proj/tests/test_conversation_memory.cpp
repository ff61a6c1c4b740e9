#include <gtest/gtest.h>

#include <random>
#include <string>

#include "ragchat/conversation_memory.hpp"
#include "ragchat/errors.hpp"

using namespace ragchat;

namespace {

// A rendered "User: ..." line of exactly 120 code points, i.e. 30 tokens.
Turn user_turn(char fill) { return {Role::user, std::string(114, fill), 0}; }
Turn assistant_turn(char fill) { return {Role::assistant, std::string(109, fill), 0}; }

Summarizer with(ChatBackend& backend) {
    Summarizer s;
    s.backend = &backend;
    s.model = "gpt-3.5-turbo";
    s.instructions = "Condense the conversation.";
    return s;
}

MemoryState small_memory() {
    MemoryState m;
    m.token_threshold = 50;
    m.keep_recent = 2;
    return m;
}

}  // namespace

TEST(RenderHistory, ExactForms) {
    MemoryState m;
    EXPECT_EQ(render_history(m), "");
    m.recent = {{Role::user, "Hi", 0}, {Role::assistant, "Hello!", 0}};
    EXPECT_EQ(render_history(m), "User: Hi\nAssistant: Hello!");
    m.summary = "Asked about visas.";
    EXPECT_EQ(render_history(m), "Conversation summary:\nAsked about visas.\nUser: Hi\nAssistant: Hello!");
    m.recent.clear();
    EXPECT_EQ(render_history(m), "Conversation summary:\nAsked about visas.");
}

// Hand replay: 30-token turns against threshold 50 and keep_recent 2.
//   append 1: 30 tokens            -> under threshold
//   append 2: 241 chars = 61 tokens -> over, but only 2 turns held
//   append 3: over and 3 turns     -> fold the oldest turn into the summary
TEST(ConversationMemory, HandReplayCompactsOnThirdAppend) {
    auto backend = MockChatBackend::fixed("S");
    const auto summarizer = with(*backend);
    MemoryState m = small_memory();

    EXPECT_FALSE(append_turn(m, user_turn('a'), summarizer).compaction_fired);
    EXPECT_EQ(history_tokens(m), 30);
    EXPECT_FALSE(append_turn(m, assistant_turn('b'), summarizer).compaction_fired);
    EXPECT_EQ(history_tokens(m), 61);
    EXPECT_EQ(backend->call_count(), 0u);

    const auto third = append_turn(m, user_turn('c'), summarizer);
    EXPECT_TRUE(third.compaction_fired);
    EXPECT_EQ(third.summarization_calls, 1);
    EXPECT_EQ(m.summary, "S");
    ASSERT_EQ(m.recent.size(), 2u);
    EXPECT_EQ(m.recent[0].content, std::string(109, 'b'));
    EXPECT_EQ(m.compactions, 1u);
    // the summarizer saw exactly the folded turn
    const auto req = backend->requests().at(0);
    EXPECT_EQ(req.messages.at(0).role, Role::system);
    EXPECT_EQ(req.messages.at(1).content, "User: " + std::string(114, 'a'));
    EXPECT_EQ(req.model, "gpt-3.5-turbo");
}

TEST(ConversationMemory, FailedSummarizationKeepsEveryTurn) {
    auto failing = MockChatBackend::scripted({{std::nullopt, std::nullopt, "", std::string("down")}});
    const auto summarizer = with(*failing);
    MemoryState m = small_memory();
    append_turn(m, user_turn('a'), summarizer);
    append_turn(m, assistant_turn('b'), summarizer);
    EXPECT_THROW(append_turn(m, user_turn('c'), summarizer), BackendError);
    ASSERT_EQ(m.recent.size(), 3u);
    EXPECT_EQ(m.recent[2].content, std::string(114, 'c'));
    EXPECT_TRUE(m.needs_compaction);
    EXPECT_TRUE(m.summary.empty());

    auto healthy = MockChatBackend::fixed("S");
    append_turn(m, assistant_turn('d'), with(*healthy));
    EXPECT_FALSE(m.needs_compaction);
    EXPECT_EQ(m.recent.size(), 2u);
}

TEST(ConversationMemory, LongSummaryTriggersSingleResummarization) {
    // first summary is long, the second condenses it
    auto backend = MockChatBackend::scripted(
        {{std::string("Conversation summary:"), std::nullopt, "short", std::nullopt},
         {std::nullopt, std::nullopt, std::string(400, 'L'), std::nullopt}});
    MemoryState m = small_memory();
    const auto s = with(*backend);
    append_turn(m, user_turn('a'), s);
    append_turn(m, assistant_turn('b'), s);
    const auto out = append_turn(m, user_turn('c'), s);
    EXPECT_EQ(out.summarization_calls, 2);
    EXPECT_EQ(m.summary, "short");
    EXPECT_FALSE(m.recent.empty());
    EXPECT_EQ(m.recent.back().content, std::string(114, 'c'));
}

TEST(ConversationMemory, RejectsBadTurns) {
    auto backend = MockChatBackend::fixed("S");
    MemoryState m;
    EXPECT_THROW(append_turn(m, {Role::user, "", 0}, with(*backend)), ArgumentError);
    EXPECT_THROW(append_turn(m, {Role::system, "x", 0}, with(*backend)), ArgumentError);
}

// Bounded context: more than keep_recent turns are only held under the
// threshold, and a compaction always lands within the threshold plus the
// newest turn and a short summary header. Up to keep_recent turns are
// kept verbatim whatever their size.
TEST(ConversationMemoryProperty, HistoryStaysBounded) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> len(1, 600);
    std::uniform_int_distribution<int> thr(20, 300);
    std::uniform_int_distribution<int> keep(1, 6);
    for (int trial = 0; trial < 60; ++trial) {
        auto backend = MockChatBackend::fixed("summary of earlier talk");
        const auto s = with(*backend);
        MemoryState m;
        m.token_threshold = thr(rng);
        m.keep_recent = static_cast<std::size_t>(keep(rng));
        std::size_t appended = 0;
        for (int i = 0; i < 40; ++i) {
            Turn t{i % 2 ? Role::assistant : Role::user, std::string(len(rng), 'x'), i};
            const auto newest = estimate_tokens((i % 2 ? "Assistant: " : "User: ") + t.content);
            const auto outcome = append_turn(m, t, s);
            ++appended;
            ASSERT_FALSE(m.recent.empty());
            ASSERT_EQ(m.recent.back().at_ms, i);
            const auto summary_block = estimate_tokens("Conversation summary:\n" + m.summary + "\n");
            if (outcome.compaction_fired) {
                ASSERT_LE(history_tokens(m), m.token_threshold + newest + summary_block)
                    << "trial " << trial << " turn " << i;
            }
            if (m.recent.size() > m.keep_recent) ASSERT_LE(history_tokens(m), m.token_threshold);
        }
        // nothing is lost without being summarized
        ASSERT_TRUE(m.compactions == 0 || !m.summary.empty());
        ASSERT_LE(m.recent.size(), appended);
    }
}
