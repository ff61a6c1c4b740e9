#include "ragchat/rag_pipeline.hpp"

#include <exception>

#include "ragchat/errors.hpp"
#include "ragchat/text.hpp"

namespace ragchat {

namespace {

std::string data_key(std::size_t i) { return "data" + std::to_string(i); }

void check_data_slots(const PromptTemplate& tmpl) {
    for (std::size_t i = 1; i <= tmpl.data_slots(); ++i) {
        if (!tmpl.references(data_key(i))) {
            throw ConfigError("template " + tmpl.name() + " skips {" + data_key(i) + "}");
        }
    }
}

}  // namespace

void PipelineConfig::validate() const {
    if (top_k < 1) throw ConfigError("top_k must be at least 1");
    if (data_delimiter.empty()) throw ConfigError("data_delimiter must not be empty");
    if (models.generator_model.empty() || models.verifier_model.empty()) {
        throw ConfigError("generator and verifier model names must not be empty");
    }
    if (!(generator_temperature >= 0.0) || !(verifier_temperature >= 0.0)) {
        throw ConfigError("temperatures must be >= 0");
    }
    if (max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive");
    if (fallback_answer && text::is_blank(*fallback_answer)) throw ConfigError("fallback_answer must not be blank");
}

std::vector<std::string> frame_data_blocks(const std::vector<RetrievalResult>& results, std::size_t slots,
                                           std::string_view delimiter) {
    if (results.size() > slots) {
        throw ConfigError(std::to_string(results.size()) + " retrieved blocks do not fit " + std::to_string(slots) +
                          " template slots");
    }
    const std::string delim(delimiter);
    std::vector<std::string> blocks;
    blocks.reserve(slots);
    for (const auto& r : results) blocks.push_back(delim + " " + r.text + " " + delim);
    while (blocks.size() < slots) blocks.push_back(delim + " " + std::string(kNoFurtherData) + " " + delim);
    return blocks;
}

std::string assemble_generator_prompt(const PromptTemplate& tmpl, std::string_view history_text,
                                      const std::vector<RetrievalResult>& results, std::string_view query,
                                      std::string_view delimiter) {
    check_data_slots(tmpl);
    const auto blocks = frame_data_blocks(results, tmpl.data_slots(), delimiter);
    std::map<std::string, std::string> values;
    for (std::size_t i = 0; i < blocks.size(); ++i) values[data_key(i + 1)] = blocks[i];
    values["history"] = std::string(history_text);
    values["query"] = std::string(query);
    return tmpl.render(values);
}

std::string assemble_verifier_prompt(const PromptTemplate& tmpl, std::string_view query,
                                     const std::vector<std::string>& data_blocks, std::string_view generator_answer) {
    check_data_slots(tmpl);
    if (data_blocks.size() != tmpl.data_slots()) {
        throw ConfigError("verifier template has " + std::to_string(tmpl.data_slots()) + " data slots but " +
                          std::to_string(data_blocks.size()) + " blocks were given");
    }
    std::map<std::string, std::string> values;
    for (std::size_t i = 0; i < data_blocks.size(); ++i) values[data_key(i + 1)] = data_blocks[i];
    values["query"] = std::string(query);
    values["generator_answer"] = std::string(generator_answer);
    return tmpl.render(values);
}

VerifierCall verify_answer(ChatBackend& backend, const PromptTemplate& tmpl, std::string_view query,
                           const std::vector<std::string>& data_blocks, std::string_view generator_answer,
                           const PipelineConfig& config, UsageLedger* ledger) {
    if (generator_answer.empty()) throw ArgumentError("generator answer must not be empty");
    VerifierCall call;
    call.prompt = assemble_verifier_prompt(tmpl, query, data_blocks, generator_answer);
    CompletionRequest req;
    req.model = config.models.verifier_model;
    req.temperature = config.verifier_temperature;
    req.max_output_tokens = config.max_output_tokens;
    req.messages = {{Role::system, call.prompt}, {Role::user, std::string(generator_answer)}};
    call.response = backend.complete(req);
    if (ledger) ledger->record(req.model, call.response.usage);
    return call;
}

std::string decorate_query(std::string_view query, const std::optional<std::string>& language_hint) {
    std::string out(query);
    if (language_hint && !language_hint->empty()) out += " (Please answer in " + *language_hint + ".)";
    return out;
}

std::string make_trace_id(std::string_view session_id, std::uint64_t sequence, std::string_view query) {
    std::string key(session_id);
    key += '\x1f';
    key += std::to_string(sequence);
    key += '\x1f';
    key += query;
    return "tr-" + text::hex64(text::splitmix64(text::fnv1a64(key)));
}

RagPipeline::RagPipeline(PipelineConfig config, PipelineDeps deps) : config_(std::move(config)), deps_(std::move(deps)) {
    config_.validate();
    if (!deps_.store || !deps_.embedder || !deps_.generator_backend || !deps_.prompts) {
        throw ConfigError("pipeline requires a store, an embedder, a generator backend and prompts");
    }
    if (!deps_.verifier_backend) deps_.verifier_backend = deps_.generator_backend;
    check_data_slots(deps_.prompts->generator);
    check_data_slots(deps_.prompts->verifier);
    if (config_.top_k > deps_.prompts->generator.data_slots()) {
        throw ConfigError("top_k " + std::to_string(config_.top_k) + " exceeds the " +
                          std::to_string(deps_.prompts->generator.data_slots()) + " data slots of the generator template");
    }
}

std::int64_t RagPipeline::now() const { return deps_.clock ? deps_.clock() : 0; }

Summarizer RagPipeline::summarizer() const {
    Summarizer s;
    s.backend = deps_.generator_backend;
    s.model = config_.models.generator_model;
    s.instructions = deps_.prompts->summarize_instructions;
    s.temperature = 0.0;
    s.max_output_tokens = 512;
    s.ledger = deps_.ledger;
    return s;
}

PipelineTrace RagPipeline::run_query(MemoryState& memory, std::string_view session_id, std::string_view query,
                                     const QueryOptions& options) const {
    const std::int64_t started = now();
    PipelineTrace trace;
    trace.trace_id = make_trace_id(session_id, options.sequence, query);
    trace.session_id = std::string(session_id);
    trace.query = std::string(query);
    trace.created_at_ms = started;
    trace.language_hint = options.language_hint ? options.language_hint : config_.language_hint;

    const std::string history_text = render_history(memory);
    trace.token_estimates["history"] = estimate_tokens(history_text);

    auto finish = [&]() -> PipelineTrace {
        trace.latencies_ms["total"] = now() - started;
        if (deps_.trace_sink) deps_.trace_sink(trace);
        return trace;
    };
    auto fail = [&](std::string stage, std::string message) -> PipelineTrace {
        trace.error = StageError{std::move(stage), std::move(message)};
        trace.final_answer.clear();
        return finish();
    };

    if (query.empty()) return fail("retrieve", "query must not be empty");

    // retrieve
    const std::int64_t t_retrieve = now();
    bool empty_store = false;
    try {
        if (deps_.store->size() == 0) {
            empty_store = true;
        } else {
            const EmbeddingVector qv = deps_.embedder->embed_one(std::string(query));
            trace.retrieved = deps_.store->search(qv, config_.top_k);
        }
    } catch (const EmptyStoreError&) {
        empty_store = true;
    } catch (const std::exception& e) {
        return fail("retrieve", e.what());
    }
    trace.latencies_ms["retrieve"] = now() - t_retrieve;
    if (config_.min_score) {
        std::erase_if(trace.retrieved, [&](const RetrievalResult& r) { return r.score < *config_.min_score; });
    }

    if (empty_store) {
        if (!config_.fallback_answer) return fail("retrieve", "vector store is empty and no fallback answer is configured");
        trace.used_fallback = true;
        trace.final_answer = *config_.fallback_answer;
    } else {
        // generate
        const std::string decorated = decorate_query(query, trace.language_hint);
        const std::int64_t t_generate = now();
        try {
            trace.generator_prompt = assemble_generator_prompt(deps_.prompts->generator, history_text, trace.retrieved,
                                                               decorated, config_.data_delimiter);
            CompletionRequest req;
            req.model = config_.models.generator_model;
            req.temperature = config_.generator_temperature;
            req.max_output_tokens = config_.max_output_tokens;
            req.messages = {{Role::system, trace.generator_prompt}, {Role::user, decorated}};
            auto resp = deps_.generator_backend->complete(req);
            if (deps_.ledger) deps_.ledger->record(req.model, resp.usage);
            if (text::is_blank(resp.content)) throw ProtocolError("generator returned an empty answer");
            trace.generator_answer = std::move(resp.content);
        } catch (const std::exception& e) {
            trace.latencies_ms["generate"] = now() - t_generate;
            return fail("generate", e.what());
        }
        trace.latencies_ms["generate"] = now() - t_generate;
        trace.token_estimates["generator_prompt"] = estimate_tokens(trace.generator_prompt);
        trace.token_estimates["generator_answer"] = estimate_tokens(trace.generator_answer);
        trace.final_answer = trace.generator_answer;

        // verify
        if (config_.verifier_enabled) {
            const std::int64_t t_verify = now();
            try {
                const auto blocks =
                    frame_data_blocks(trace.retrieved, deps_.prompts->verifier.data_slots(), config_.data_delimiter);
                trace.verifier_prompt =
                    assemble_verifier_prompt(deps_.prompts->verifier, query, blocks, trace.generator_answer);
                auto call = verify_answer(*deps_.verifier_backend, deps_.prompts->verifier, query, blocks,
                                          trace.generator_answer, config_, deps_.ledger);
                if (text::is_blank(call.response.content)) throw ProtocolError("verifier returned an empty answer");
                trace.verifier_answer = call.response.content;
                trace.final_answer = std::move(call.response.content);
                trace.token_estimates["verifier_prompt"] = estimate_tokens(*trace.verifier_prompt);
            } catch (const std::exception& e) {
                trace.latencies_ms["verify"] = now() - t_verify;
                if (config_.verifier_failure_policy == PipelineConfig::VerifierFailurePolicy::fail) {
                    return fail("verify", e.what());
                }
                trace.verifier_skipped = true;
                trace.final_answer = trace.generator_answer;
            }
            trace.latencies_ms["verify"] = now() - t_verify;
        }
    }
    trace.token_estimates["final_answer"] = estimate_tokens(trace.final_answer);

    // memory: both turns are always kept; a failed compaction is only reported
    const Summarizer summarizer = this->summarizer();
    const std::int64_t t_memory = now();
    for (Turn turn : {Turn{Role::user, std::string(query), now()}, Turn{Role::assistant, trace.final_answer, now()}}) {
        try {
            trace.compaction_fired |= append_turn(memory, std::move(turn), summarizer).compaction_fired;
        } catch (const std::exception& e) {
            trace.memory_error = e.what();
        }
    }
    trace.latencies_ms["memory"] = now() - t_memory;
    return finish();
}

}  // namespace ragchat
