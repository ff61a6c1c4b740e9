#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "ragchat/retry.hpp"

namespace ragchat {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct ChatMessage {
    Role role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct CompletionRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    int max_output_tokens = 1024;

    /// Throws ArgumentError if the request is not well formed.
    void validate() const;
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct CompletionResponse {
    std::string content;
    std::string model;
    Usage usage;
    std::int64_t latency_ms = 0;
};

struct ModelRoles {
    std::string generator_model = "gpt-3.5-turbo";
    std::string verifier_model = "gpt-4-turbo";
};

/// ceil(codepoints / 4).
std::int64_t estimate_tokens(std::string_view text);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual std::string kind() const = 0;
};

/// Calls and token totals per model, shared by everything that talks to a backend.
class UsageLedger {
public:
    struct Entry {
        std::int64_t calls = 0;
        std::int64_t prompt_tokens = 0;
        std::int64_t completion_tokens = 0;
    };

    void record(const std::string& model, const Usage& usage);
    Entry for_model(const std::string& model) const;
    std::map<std::string, Entry> snapshot() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, Entry> entries_;
};

/// Deterministic scripted backend.
///
/// Rules are tried in order against the last user message (or the last message
/// if there is none); the first match wins. A rule may be restricted to a
/// model. A matching rule either answers `response` or, if `fail` is set,
/// throws BackendError with that message. An `echo` rule answers with the
/// probed message unchanged.
class MockChatBackend final : public ChatBackend {
public:
    enum class Mode { rules, echo, fixed };

    struct Rule {
        std::optional<std::string> contains;  // nullopt = always
        std::optional<std::string> model;
        std::string response;
        std::optional<std::string> fail;
        bool echo = false;  // answer with the probed message itself
    };

    static std::unique_ptr<MockChatBackend> echo();
    static std::unique_ptr<MockChatBackend> fixed(std::string response);
    static std::unique_ptr<MockChatBackend> scripted(std::vector<Rule> rules);

    /// {"mode": "rules"|"echo"|"fixed", "response": "...",
    ///  "rules": [{"contains": "...", "model": "...", "response": "...", "fail": "...",
    ///              "echo": true}]}
    static std::unique_ptr<MockChatBackend> from_json(std::string_view json_text);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string kind() const override { return "mock"; }

    std::size_t call_count() const;
    std::vector<CompletionRequest> requests() const;

private:
    MockChatBackend(Mode mode, std::string fixed_response, std::vector<Rule> rules);

    Mode mode_;
    std::string fixed_response_;
    std::vector<Rule> rules_;
    mutable std::mutex mutex_;
    std::vector<CompletionRequest> log_;
};

struct RemoteBackendConfig {
    std::string base_url;     // e.g. https://api.openai.com/v1
    std::string api_key_env;  // environment variable holding the bearer key
    int timeout_seconds = 60;
    std::size_t max_in_flight = 4;
    RetryPolicy retry;
};

/// OpenAI-compatible POST {base_url}/chat/completions.
class RemoteChatBackend final : public ChatBackend {
public:
    explicit RemoteChatBackend(RemoteBackendConfig config, Sleeper sleeper = real_sleeper());

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string kind() const override { return "remote"; }

    /// Wire body for a request; exposed for fixture tests.
    static std::string request_body(const CompletionRequest& request);

    /// Throws ProtocolError if choices[0].message.content is missing.
    static CompletionResponse parse_response(std::string_view body, const std::string& requested_model);

private:
    RemoteBackendConfig config_;
    Sleeper sleeper_;
    std::counting_semaphore<> in_flight_;
};

}  // namespace ragchat
