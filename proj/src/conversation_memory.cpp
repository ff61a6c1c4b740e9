#include "ragchat/conversation_memory.hpp"

#include "ragchat/errors.hpp"
#include "ragchat/text.hpp"

namespace ragchat {

namespace {

std::string render(const std::string& summary, const std::vector<Turn>& turns, std::size_t from = 0) {
    std::string out;
    if (!summary.empty()) {
        out += "Conversation summary:\n";
        out += summary;
    }
    for (std::size_t i = from; i < turns.size(); ++i) {
        if (!out.empty()) out += '\n';
        out += turns[i].role == Role::assistant ? "Assistant: " : "User: ";
        out += turns[i].content;
    }
    return out;
}

std::string summarize(const Summarizer& s, const std::string& transcript) {
    if (s.backend == nullptr) throw ConfigError("conversation memory needs a summarization backend");
    CompletionRequest req;
    req.model = s.model;
    req.temperature = s.temperature;
    req.max_output_tokens = s.max_output_tokens;
    if (!s.instructions.empty()) req.messages.push_back({Role::system, s.instructions});
    req.messages.push_back({Role::user, transcript});
    auto resp = s.backend->complete(req);
    if (s.ledger) s.ledger->record(req.model, resp.usage);
    if (text::is_blank(resp.content)) throw BackendError("summarization returned an empty summary", {}, false);
    return resp.content;
}

}  // namespace

std::string render_history(const MemoryState& state) { return render(state.summary, state.recent); }

std::int64_t history_tokens(const MemoryState& state) { return estimate_tokens(render_history(state)); }

AppendOutcome append_turn(MemoryState& state, Turn turn, const Summarizer& summarizer) {
    if (turn.content.empty()) throw ArgumentError("turn content must not be empty");
    if (turn.role == Role::system) throw ArgumentError("memory turns are user or assistant");
    state.recent.push_back(std::move(turn));

    AppendOutcome outcome;
    const std::int64_t threshold = state.token_threshold;
    if (history_tokens(state) <= threshold) {
        state.needs_compaction = false;
        return outcome;
    }
    if (state.recent.size() <= state.keep_recent) return outcome;

    const std::int64_t newest_tokens = estimate_tokens(render({}, {state.recent.back()}));
    const std::size_t fold = state.recent.size() - state.keep_recent;

    // Work on a copy; `state` only changes once every call has succeeded.
    MemoryState next = state;
    try {
        next.summary = summarize(summarizer, render(state.summary, {state.recent.begin(), state.recent.begin() + fold}));
        next.recent.erase(next.recent.begin(), next.recent.begin() + static_cast<std::ptrdiff_t>(fold));
        outcome.summarization_calls = 1;

        if (estimate_tokens(next.summary) > threshold || history_tokens(next) > threshold + newest_tokens) {
            std::size_t absorb = 0;
            while (next.recent.size() - absorb > 1 &&
                   estimate_tokens(render(next.summary, next.recent, absorb)) > threshold + newest_tokens) {
                ++absorb;
            }
            next.summary = summarize(
                summarizer, render(next.summary, {next.recent.begin(), next.recent.begin() + absorb}));
            next.recent.erase(next.recent.begin(), next.recent.begin() + static_cast<std::ptrdiff_t>(absorb));
            outcome.summarization_calls = 2;
        }
    } catch (...) {
        state.needs_compaction = true;
        throw;
    }

    next.needs_compaction = false;
    ++next.compactions;
    state = std::move(next);
    outcome.compaction_fired = true;
    return outcome;
}

}  // namespace ragchat
