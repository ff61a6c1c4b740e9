#include "ragchat/json_io.hpp"

namespace ragchat {

namespace {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json to_json(const std::optional<StageError>& e) {
    if (!e) return nullptr;
    return {{"stage", e->stage}, {"message", e->message}};
}

}  // namespace

nlohmann::json to_json(const RetrievalResult& r) {
    return {{"chunk_id", r.chunk_id}, {"text", r.text}, {"score", r.score}, {"rank", r.rank}};
}

nlohmann::json to_json(const PipelineTrace& t) {
    nlohmann::json retrieved = nlohmann::json::array();
    for (const auto& r : t.retrieved) retrieved.push_back(to_json(r));
    return {
        {"trace_id", t.trace_id},
        {"session_id", t.session_id},
        {"query", t.query},
        {"language_hint", optional_json(t.language_hint)},
        {"retrieved", std::move(retrieved)},
        {"generator_prompt", t.generator_prompt},
        {"generator_answer", t.generator_answer},
        {"verifier_prompt", optional_json(t.verifier_prompt)},
        {"verifier_answer", optional_json(t.verifier_answer)},
        {"final_answer", t.final_answer},
        {"token_estimates", t.token_estimates},
        {"latencies_ms", t.latencies_ms},
        {"compaction_fired", t.compaction_fired},
        {"verifier_skipped", t.verifier_skipped},
        {"used_fallback", t.used_fallback},
        {"status", t.ok() ? "ok" : "error"},
        {"error", to_json(t.error)},
        {"memory_error", optional_json(t.memory_error)},
        {"created_at_ms", t.created_at_ms},
    };
}

nlohmann::json to_json(const TranscriptRecord& r) {
    return {
        {"testset", r.testset},
        {"category", std::string(to_string(r.category))},
        {"query_id", r.query_id},
        {"query", r.query},
        {"language", r.language},
        {"status", r.status},
        {"final_answer", r.final_answer},
        {"trace_id", r.trace_id},
        {"error", to_json(r.error)},
    };
}

nlohmann::json to_json(const BootstrapResult& r) {
    return {
        {"metric", r.metric ? nlohmann::json(std::string(to_string(*r.metric))) : nlohmann::json(nullptr)},
        {"n", r.n},
        {"point", r.point},
        {"lower", r.lower},
        {"upper", r.upper},
        {"resamples", r.resamples},
        {"confidence", r.confidence},
        {"seed", r.seed},
        {"interval", format_interval(r.lower, r.upper, "-")},
    };
}

}  // namespace ragchat
