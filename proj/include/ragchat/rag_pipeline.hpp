#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragchat/clock.hpp"
#include "ragchat/conversation_memory.hpp"
#include "ragchat/embedder.hpp"
#include "ragchat/llm_backend.hpp"
#include "ragchat/prompt_template.hpp"
#include "ragchat/vector_store.hpp"

namespace ragchat {

inline constexpr std::string_view kNoFurtherData = "(no further data)";

struct PipelineConfig {
    enum class VerifierFailurePolicy { fail, fallback_to_generator };

    std::size_t top_k = kDefaultTopK;
    bool verifier_enabled = true;
    std::optional<std::string> language_hint;
    ModelRoles models;
    std::string data_delimiter = "###";
    VerifierFailurePolicy verifier_failure_policy = VerifierFailurePolicy::fail;
    double generator_temperature = 0.7;
    double verifier_temperature = 0.0;
    int max_output_tokens = 1024;
    std::optional<double> min_score;
    std::optional<std::string> fallback_answer;  // answer used when the store is empty

    /// Throws ConfigError.
    void validate() const;
};

struct StageError {
    std::string stage;  // retrieve | generate | verify | memory
    std::string message;
};

struct PipelineTrace {
    std::string trace_id;
    std::string session_id;
    std::string query;
    std::optional<std::string> language_hint;
    std::vector<RetrievalResult> retrieved;
    std::string generator_prompt;
    std::string generator_answer;
    std::optional<std::string> verifier_prompt;
    std::optional<std::string> verifier_answer;
    std::string final_answer;
    std::map<std::string, std::int64_t> token_estimates;
    std::map<std::string, std::int64_t> latencies_ms;
    bool compaction_fired = false;
    bool verifier_skipped = false;
    bool used_fallback = false;
    std::optional<StageError> error;
    std::optional<std::string> memory_error;  // compaction failed; turns were kept verbatim
    std::int64_t created_at_ms = 0;

    bool ok() const noexcept { return !error.has_value(); }
};

/// Model-facing data blocks: "<delim> text <delim>" per result, padded with
/// the "(no further data)" block up to `slots`.
std::vector<std::string> frame_data_blocks(const std::vector<RetrievalResult>& results,
                                           std::size_t slots, std::string_view delimiter);

/// Fills {data1..dataK} (K = tmpl.data_slots()), {history} and {query}.
/// Throws ConfigError if the template skips a data slot or if more results
/// than slots are given.
std::string assemble_generator_prompt(const PromptTemplate& tmpl, std::string_view history_text,
                                      const std::vector<RetrievalResult>& results, std::string_view query,
                                      std::string_view delimiter = "###");

/// Fills {query}, {data1..dataK} and {generator_answer}. History is never an input.
std::string assemble_verifier_prompt(const PromptTemplate& tmpl, std::string_view query,
                                     const std::vector<std::string>& data_blocks,
                                     std::string_view generator_answer);

struct VerifierCall {
    std::string prompt;
    CompletionResponse response;
};

/// One completion against config.models.verifier_model; its content is the
/// final answer verbatim.
VerifierCall verify_answer(ChatBackend& backend, const PromptTemplate& tmpl, std::string_view query,
                           const std::vector<std::string>& data_blocks, std::string_view generator_answer,
                           const PipelineConfig& config, UsageLedger* ledger = nullptr);

/// Query text as sent to the generator, with the optional "(Please answer in X.)" suffix.
std::string decorate_query(std::string_view query, const std::optional<std::string>& language_hint);

std::string make_trace_id(std::string_view session_id, std::uint64_t sequence, std::string_view query);

using TraceSink = std::function<void(const PipelineTrace&)>;

struct PipelineDeps {
    const VectorStore* store = nullptr;
    const Embedder* embedder = nullptr;
    ChatBackend* generator_backend = nullptr;
    ChatBackend* verifier_backend = nullptr;  // defaults to generator_backend
    const PromptSet* prompts = nullptr;
    UsageLedger* ledger = nullptr;
    Clock clock;
    TraceSink trace_sink;
};

struct QueryOptions {
    std::optional<std::string> language_hint;  // overrides PipelineConfig::language_hint
    std::uint64_t sequence = 0;                // distinguishes trace ids within a session
};

/// Retrieve, generate, verify, then append (user, final answer) to memory.
/// Holds no per-session state; callers serialize calls per MemoryState.
class RagPipeline {
public:
    RagPipeline(PipelineConfig config, PipelineDeps deps);

    /// Never throws for stage failures: the returned trace carries the error
    /// and memory is untouched unless the answer succeeded.
    PipelineTrace run_query(MemoryState& memory, std::string_view session_id, std::string_view query,
                            const QueryOptions& options = {}) const;

    const PipelineConfig& config() const noexcept { return config_; }
    Summarizer summarizer() const;

private:
    std::int64_t now() const;

    PipelineConfig config_;
    PipelineDeps deps_;
};

}  // namespace ragchat
