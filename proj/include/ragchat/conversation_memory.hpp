#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ragchat/llm_backend.hpp"

namespace ragchat {

inline constexpr std::int64_t kDefaultMemoryTokenThreshold = 1000;
inline constexpr std::size_t kDefaultKeepRecent = 4;

struct Turn {
    Role role = Role::user;  // user or assistant
    std::string content;
    std::int64_t at_ms = 0;

    bool operator==(const Turn&) const = default;
};

struct MemoryState {
    std::string summary;
    std::vector<Turn> recent;
    std::int64_t token_threshold = kDefaultMemoryTokenThreshold;
    std::size_t keep_recent = kDefaultKeepRecent;
    bool needs_compaction = false;
    std::size_t compactions = 0;
};

/// How overflow turns get summarized.
struct Summarizer {
    ChatBackend* backend = nullptr;
    std::string model;
    std::string instructions;  // system message
    double temperature = 0.0;
    int max_output_tokens = 512;
    UsageLedger* ledger = nullptr;
};

struct AppendOutcome {
    bool compaction_fired = false;
    int summarization_calls = 0;
};

/// Deterministic text form used both in prompts and for the token bound:
///   Conversation summary:\n<summary>\nUser: ...\nAssistant: ...
std::string render_history(const MemoryState& state);

std::int64_t history_tokens(const MemoryState& state);

/// Appends `turn`. When the rendered history estimate exceeds the threshold and
/// more than keep_recent turns are held, everything but the newest keep_recent
/// turns is folded into the summary with one summarization call. A second call
/// is made at most once, when the summary alone exceeds the threshold or the
/// history still exceeds threshold + newest turn; it re-summarizes and absorbs
/// older recent turns as needed (the newest turn is never folded).
///
/// If the backend throws, `state` keeps every turn verbatim, needs_compaction is
/// set, and the exception propagates.
AppendOutcome append_turn(MemoryState& state, Turn turn, const Summarizer& summarizer);

}  // namespace ragchat
