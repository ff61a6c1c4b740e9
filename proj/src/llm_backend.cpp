#include "ragchat/llm_backend.hpp"

#include <chrono>

#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "ragchat/errors.hpp"
#include "ragchat/text.hpp"

namespace ragchat {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(std::string_view s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw ArgumentError("unknown chat role: " + std::string(s));
}

void CompletionRequest::validate() const {
    if (model.empty()) throw ArgumentError("completion request has no model");
    if (messages.empty()) throw ArgumentError("completion request has no messages");
    for (const auto& m : messages) {
        if (m.content.empty()) throw ArgumentError("chat message content must not be empty");
    }
    if (!(temperature >= 0.0)) throw ArgumentError("temperature must be >= 0");
    if (max_output_tokens <= 0) throw ArgumentError("max_output_tokens must be positive");
}

std::int64_t estimate_tokens(std::string_view text) {
    const auto chars = static_cast<std::int64_t>(text::codepoint_count(text));
    return (chars + 3) / 4;
}

void UsageLedger::record(const std::string& model, const Usage& usage) {
    std::lock_guard lock(mutex_);
    auto& e = entries_[model];
    ++e.calls;
    e.prompt_tokens += usage.prompt_tokens;
    e.completion_tokens += usage.completion_tokens;
}

UsageLedger::Entry UsageLedger::for_model(const std::string& model) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(model);
    return it == entries_.end() ? Entry{} : it->second;
}

std::map<std::string, UsageLedger::Entry> UsageLedger::snapshot() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

// ---- mock ----------------------------------------------------------------

MockChatBackend::MockChatBackend(Mode mode, std::string fixed_response, std::vector<Rule> rules)
    : mode_(mode), fixed_response_(std::move(fixed_response)), rules_(std::move(rules)) {}

std::unique_ptr<MockChatBackend> MockChatBackend::echo() {
    return std::unique_ptr<MockChatBackend>(new MockChatBackend(Mode::echo, {}, {}));
}

std::unique_ptr<MockChatBackend> MockChatBackend::fixed(std::string response) {
    return std::unique_ptr<MockChatBackend>(new MockChatBackend(Mode::fixed, std::move(response), {}));
}

std::unique_ptr<MockChatBackend> MockChatBackend::scripted(std::vector<Rule> rules) {
    return std::unique_ptr<MockChatBackend>(new MockChatBackend(Mode::rules, {}, std::move(rules)));
}

std::unique_ptr<MockChatBackend> MockChatBackend::from_json(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("mock script is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("mock script must be a JSON object");
    const std::string mode = j.value("mode", "rules");
    if (mode == "echo") return echo();
    if (mode == "fixed") {
        if (!j.contains("response") || !j["response"].is_string()) throw ConfigError("fixed mock needs \"response\"");
        return fixed(j["response"].get<std::string>());
    }
    if (mode != "rules") throw ConfigError("unknown mock mode: " + mode);
    if (!j.contains("rules") || !j["rules"].is_array()) throw ConfigError("rules mock needs a \"rules\" array");
    std::vector<Rule> rules;
    for (const auto& r : j["rules"]) {
        Rule rule;
        if (r.contains("contains")) rule.contains = r["contains"].get<std::string>();
        if (r.contains("model")) rule.model = r["model"].get<std::string>();
        if (r.contains("fail")) rule.fail = r["fail"].get<std::string>();
        rule.response = r.value("response", "");
        rule.echo = r.value("echo", false);
        if (!rule.fail && !rule.echo && rule.response.empty()) {
            throw ConfigError("mock rule needs a response, echo or fail");
        }
        rules.push_back(std::move(rule));
    }
    return scripted(std::move(rules));
}

CompletionResponse MockChatBackend::complete(const CompletionRequest& request) {
    request.validate();
    {
        std::lock_guard lock(mutex_);
        log_.push_back(request);
    }
    const ChatMessage* probe = &request.messages.back();
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == Role::user) {
            probe = &*it;
            break;
        }
    }

    std::string content;
    switch (mode_) {
        case Mode::echo: content = probe->content; break;
        case Mode::fixed: content = fixed_response_; break;
        case Mode::rules: {
            const Rule* hit = nullptr;
            for (const auto& rule : rules_) {
                if (rule.model && *rule.model != request.model) continue;
                if (rule.contains && probe->content.find(*rule.contains) == std::string::npos) continue;
                hit = &rule;
                break;
            }
            if (hit == nullptr) {
                throw BackendError("mock backend: no rule matched", {"attempt 1: no rule matched"}, false);
            }
            if (hit->fail) throw BackendError("mock backend: " + *hit->fail, {"attempt 1: " + *hit->fail}, false);
            content = hit->echo ? probe->content : hit->response;
            break;
        }
    }

    CompletionResponse resp;
    resp.content = std::move(content);
    resp.model = request.model;
    for (const auto& m : request.messages) resp.usage.prompt_tokens += estimate_tokens(m.content);
    resp.usage.completion_tokens = estimate_tokens(resp.content);
    resp.latency_ms = 0;
    return resp;
}

std::size_t MockChatBackend::call_count() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

std::vector<CompletionRequest> MockChatBackend::requests() const {
    std::lock_guard lock(mutex_);
    return log_;
}

// ---- remote --------------------------------------------------------------

RemoteChatBackend::RemoteChatBackend(RemoteBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)),
      sleeper_(std::move(sleeper)),
      in_flight_(static_cast<std::ptrdiff_t>(config_.max_in_flight == 0 ? 1 : config_.max_in_flight)) {
    if (config_.base_url.empty()) throw ConfigError("remote backend requires base_url");
    (void)detail::parse_base_url(config_.base_url);
}

std::string RemoteChatBackend::request_body(const CompletionRequest& request) {
    nlohmann::json body;
    body["model"] = request.model;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages) {
        body["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output_tokens;
    return body.dump();
}

CompletionResponse RemoteChatBackend::parse_response(std::string_view body, const std::string& requested_model) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("chat completion response is not JSON: ") + e.what());
    }
    const nlohmann::json* content = nullptr;
    if (j.is_object() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& first = j["choices"][0];
        if (first.is_object() && first.contains("message") && first["message"].is_object() &&
            first["message"].contains("content") && first["message"]["content"].is_string()) {
            content = &first["message"]["content"];
        }
    }
    if (content == nullptr) throw ProtocolError("chat completion response lacks choices[0].message.content");

    CompletionResponse resp;
    resp.content = content->get<std::string>();
    resp.model = j.contains("model") && j["model"].is_string() ? j["model"].get<std::string>() : requested_model;
    if (j.contains("usage") && j["usage"].is_object()) {
        const auto& u = j["usage"];
        if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer()) {
            resp.usage.prompt_tokens = std::max<std::int64_t>(0, u["prompt_tokens"].get<std::int64_t>());
        }
        if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer()) {
            resp.usage.completion_tokens = std::max<std::int64_t>(0, u["completion_tokens"].get<std::int64_t>());
        }
    }
    return resp;
}

CompletionResponse RemoteChatBackend::complete(const CompletionRequest& request) {
    request.validate();
    detail::PostSpec spec{config_.base_url, "/chat/completions", request_body(request), config_.api_key_env,
                          config_.timeout_seconds};
    const auto started = std::chrono::steady_clock::now();
    std::string body;
    {
        in_flight_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{in_flight_};
        body = detail::post_json_with_retry(spec, config_.retry, sleeper_);
    }
    auto resp = parse_response(body, request.model);
    resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                          .count();
    return resp;
}

}  // namespace ragchat
