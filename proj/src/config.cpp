#include "ragchat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ragchat/errors.hpp"

namespace ragchat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void allow_keys(const json& obj, const char* section, std::set<std::string> allowed) {
    if (!obj.is_object()) throw ConfigError(std::string(section) + " must be an object");
    for (const auto& [k, v] : obj.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown config key " + std::string(section) + "." + k);
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key) && !obj[key].is_null()) out = obj[key].get<T>();
}

RetryPolicy parse_retry(const json& j) {
    allow_keys(j, "retry", {"max_attempts", "initial_backoff_ms", "max_backoff_ms", "multiplier"});
    RetryPolicy p;
    read(j, "max_attempts", p.max_attempts);
    if (j.contains("initial_backoff_ms")) p.initial_backoff = std::chrono::milliseconds(j["initial_backoff_ms"].get<long>());
    if (j.contains("max_backoff_ms")) p.max_backoff = std::chrono::milliseconds(j["max_backoff_ms"].get<long>());
    read(j, "multiplier", p.multiplier);
    if (p.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
    return p;
}

BackendConfig parse_backend(const json& j, const fs::path& base, const char* section) {
    allow_keys(j, section,
               {"kind", "base_url", "api_key_env", "timeout_seconds", "max_in_flight", "retry", "mock_script",
                "mock_script_file"});
    BackendConfig b;
    const std::string kind = j.value("kind", "mock");
    if (kind == "remote") {
        b.kind = BackendConfig::Kind::remote;
    } else if (kind == "mock") {
        b.kind = BackendConfig::Kind::mock;
    } else {
        throw ConfigError(std::string(section) + ".kind must be remote or mock");
    }
    read(j, "base_url", b.remote.base_url);
    read(j, "api_key_env", b.remote.api_key_env);
    read(j, "timeout_seconds", b.remote.timeout_seconds);
    read(j, "max_in_flight", b.remote.max_in_flight);
    if (j.contains("retry")) b.remote.retry = parse_retry(j["retry"]);
    if (j.contains("mock_script")) b.mock_script = j["mock_script"].dump();
    if (j.contains("mock_script_file")) {
        const fs::path p = resolve(base, j["mock_script_file"].get<std::string>());
        std::ifstream in(p);
        if (!in) throw ConfigError("cannot read mock script " + p.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        b.mock_script = buf.str();
    }
    if (b.kind == BackendConfig::Kind::remote && b.remote.base_url.empty()) {
        throw ConfigError(std::string(section) + ".base_url is required for a remote backend");
    }
    return b;
}

}  // namespace

AppConfig AppConfig::from_json(std::string_view json_text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    AppConfig c;
    try {
        allow_keys(j, "config",
                   {"bind_address", "port", "store_path", "templates_dir", "traces_dir", "static_dir",
                    "session_ttl_seconds", "max_message_chars", "admin_token_env", "trace_retention", "chunking",
                    "embedder", "backend", "verifier_backend", "models", "pipeline", "memory"});
        read(j, "bind_address", c.bind_address);
        read(j, "port", c.port);
        if (j.contains("store_path")) c.store_path = resolve(base_dir, j["store_path"].get<std::string>());
        else c.store_path = resolve(base_dir, c.store_path.string());
        if (j.contains("templates_dir")) c.templates_dir = resolve(base_dir, j["templates_dir"].get<std::string>());
        else c.templates_dir = resolve(base_dir, c.templates_dir.string());
        if (j.contains("traces_dir")) c.traces_dir = resolve(base_dir, j["traces_dir"].get<std::string>());
        if (j.contains("static_dir")) c.static_dir = resolve(base_dir, j["static_dir"].get<std::string>());
        read(j, "session_ttl_seconds", c.session_ttl_seconds);
        read(j, "max_message_chars", c.max_message_chars);
        read(j, "admin_token_env", c.admin_token_env);
        read(j, "trace_retention", c.trace_retention);

        if (j.contains("chunking")) {
            allow_keys(j["chunking"], "chunking", {"max_chunk_chars"});
            read(j["chunking"], "max_chunk_chars", c.max_chunk_chars);
        }
        if (j.contains("embedder")) {
            const auto& e = j["embedder"];
            allow_keys(e, "embedder",
                       {"kind", "model_name", "base_url", "api_key_env", "local_dim", "seed", "normalize_case",
                        "max_in_flight", "batch_size", "timeout_seconds", "retry"});
            const std::string kind = e.value("kind", "local-deterministic");
            if (kind == "remote") {
                c.embedder.kind = EmbedderConfig::Kind::remote;
            } else if (kind == "local-deterministic") {
                c.embedder.kind = EmbedderConfig::Kind::local_deterministic;
            } else {
                throw ConfigError("embedder.kind must be remote or local-deterministic");
            }
            read(e, "model_name", c.embedder.model_name);
            read(e, "base_url", c.embedder.base_url);
            read(e, "api_key_env", c.embedder.api_key_env);
            read(e, "local_dim", c.embedder.local_dim);
            read(e, "seed", c.embedder.seed);
            read(e, "normalize_case", c.embedder.normalize_case);
            read(e, "max_in_flight", c.embedder.max_in_flight);
            read(e, "batch_size", c.embedder.batch_size);
            read(e, "timeout_seconds", c.embedder.timeout_seconds);
            if (e.contains("retry")) c.embedder.retry = parse_retry(e["retry"]);
        }
        if (j.contains("backend")) c.backend = parse_backend(j["backend"], base_dir, "backend");
        if (j.contains("verifier_backend") && !j["verifier_backend"].is_null()) {
            c.verifier_backend = parse_backend(j["verifier_backend"], base_dir, "verifier_backend");
        }
        if (j.contains("models")) {
            allow_keys(j["models"], "models", {"generator_model", "verifier_model"});
            read(j["models"], "generator_model", c.pipeline.models.generator_model);
            read(j["models"], "verifier_model", c.pipeline.models.verifier_model);
        }
        if (j.contains("pipeline")) {
            const auto& p = j["pipeline"];
            allow_keys(p, "pipeline",
                       {"top_k", "verifier_enabled", "language_hint", "data_delimiter", "verifier_failure_policy",
                        "generator_temperature", "verifier_temperature", "max_output_tokens", "min_score",
                        "fallback_answer"});
            read(p, "top_k", c.pipeline.top_k);
            read(p, "verifier_enabled", c.pipeline.verifier_enabled);
            if (p.contains("language_hint") && !p["language_hint"].is_null()) {
                c.pipeline.language_hint = p["language_hint"].get<std::string>();
            }
            read(p, "data_delimiter", c.pipeline.data_delimiter);
            if (p.contains("verifier_failure_policy")) {
                const auto policy = p["verifier_failure_policy"].get<std::string>();
                if (policy == "fail") {
                    c.pipeline.verifier_failure_policy = PipelineConfig::VerifierFailurePolicy::fail;
                } else if (policy == "fallback") {
                    c.pipeline.verifier_failure_policy = PipelineConfig::VerifierFailurePolicy::fallback_to_generator;
                } else {
                    throw ConfigError("pipeline.verifier_failure_policy must be fail or fallback");
                }
            }
            read(p, "generator_temperature", c.pipeline.generator_temperature);
            read(p, "verifier_temperature", c.pipeline.verifier_temperature);
            read(p, "max_output_tokens", c.pipeline.max_output_tokens);
            if (p.contains("min_score") && !p["min_score"].is_null()) c.pipeline.min_score = p["min_score"].get<double>();
            if (p.contains("fallback_answer") && !p["fallback_answer"].is_null()) {
                c.pipeline.fallback_answer = p["fallback_answer"].get<std::string>();
            }
        }
        if (j.contains("memory")) {
            allow_keys(j["memory"], "memory", {"token_threshold", "keep_recent"});
            read(j["memory"], "token_threshold", c.memory_token_threshold);
            read(j["memory"], "keep_recent", c.memory_keep_recent);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

AppConfig AppConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str(), path.parent_path());
}

void AppConfig::validate() const {
    if (port < 0 || port > 65535) throw ConfigError("port must be within 0..65535");
    if (session_ttl_seconds <= 0) throw ConfigError("session_ttl_seconds must be positive");
    if (max_message_chars == 0) throw ConfigError("max_message_chars must be positive");
    if (max_chunk_chars < kMinChunkChars) throw ConfigError("chunking.max_chunk_chars must be at least 64");
    if (memory_token_threshold <= 0) throw ConfigError("memory.token_threshold must be positive");
    if (trace_retention == 0) throw ConfigError("trace_retention must be positive");
    embedder.validate();
    pipeline.validate();
}

}  // namespace ragchat
