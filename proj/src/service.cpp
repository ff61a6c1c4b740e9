#include "ragchat/service.hpp"

#include <cstdlib>
#include <filesystem>
#include <random>
#include <thread>

#include <httplib.h>

#include "ragchat/errors.hpp"
#include "ragchat/ingest.hpp"
#include "ragchat/json_io.hpp"
#include "ragchat/text.hpp"

namespace ragchat {

using nlohmann::json;

namespace {

constexpr std::size_t kExpiredMemory = 4096;

class GateLock {
public:
    explicit GateLock(FifoGate& g) : gate_(g) { gate_.lock(); }
    ~GateLock() { gate_.unlock(); }
    GateLock(const GateLock&) = delete;
    GateLock& operator=(const GateLock&) = delete;

private:
    FifoGate& gate_;
};

}  // namespace

void FifoGate::lock() {
    std::unique_lock lock(mutex_);
    const std::uint64_t ticket = next_ticket_++;
    cv_.wait(lock, [&] { return now_serving_ == ticket; });
}

void FifoGate::unlock() {
    {
        std::lock_guard lock(mutex_);
        ++now_serving_;
    }
    cv_.notify_all();
}

struct ChatService::Http {
    httplib::Server server;
    std::thread thread;
};

ChatService::ChatService(Runtime& runtime) : runtime_(runtime) {}

ChatService::~ChatService() { stop(); }

HttpReply ChatService::error_reply(int status, std::string code, std::string message, std::optional<std::string> stage) {
    json err = {{"code", std::move(code)}, {"message", std::move(message)}};
    if (stage) err["stage"] = *stage;
    return {status, json{{"error", std::move(err)}}};
}

std::int64_t ChatService::ttl_ms() const { return runtime_.config().session_ttl_seconds * 1000; }

std::string ChatService::new_session_id() {
    static thread_local std::random_device device;
    std::string id;
    for (int i = 0; i < 2; ++i) {
        const std::uint64_t hi = device();
        const std::uint64_t lo = device();
        id += text::hex64((hi << 32) | (lo & 0xFFFFFFFFULL));
    }
    return id;
}

void ChatService::sweep_expired(std::int64_t now) {
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (now - it->second->last_active_at_ms > ttl_ms()) {
            expired_.insert(it->first);
            expired_order_.push_back(it->first);
            it = sessions_.erase(it);
        } else {
            ++it;
        }
    }
    while (expired_order_.size() > kExpiredMemory) {
        expired_.erase(expired_order_.front());
        expired_order_.pop_front();
    }
}

ChatService::Lookup ChatService::find_session(const std::string& session_id) {
    const std::int64_t now = runtime_.clock()();
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return {nullptr, expired_.count(session_id) > 0};
    if (now - it->second->last_active_at_ms > ttl_ms()) {
        // memory is discarded with the session
        expired_.insert(session_id);
        expired_order_.push_back(session_id);
        sessions_.erase(it);
        return {nullptr, true};
    }
    it->second->last_active_at_ms = now;
    return {it->second, false};
}

HttpReply ChatService::create_session() {
    if (runtime_.store().size() == 0 && !runtime_.config().pipeline.fallback_answer) {
        return error_reply(503, "store_unavailable", "the document store is empty");
    }
    auto session = std::make_shared<Session>();
    session->session_id = new_session_id();
    session->memory = runtime_.fresh_memory();
    session->created_at_ms = runtime_.clock()();
    session->last_active_at_ms.store(session->created_at_ms);
    {
        std::lock_guard lock(sessions_mutex_);
        sweep_expired(session->created_at_ms);
        sessions_.emplace(session->session_id, session);
    }
    return {201, json{{"session_id", session->session_id}}};
}

HttpReply ChatService::post_message(const std::string& session_id, std::string_view body) {
    const Lookup found = find_session(session_id);
    if (found.expired) return error_reply(410, "session_expired", "session has expired");
    if (!found.session) return error_reply(404, "session_not_found", "no such session");

    json request;
    try {
        request = json::parse(body);
    } catch (const json::parse_error&) {
        return error_reply(400, "bad_request", "body must be a JSON object");
    }
    if (!request.is_object() || !request.contains("text") || !request["text"].is_string()) {
        return error_reply(422, "invalid_message", "\"text\" must be a string");
    }
    const std::string message = request["text"].get<std::string>();
    const std::size_t chars = text::codepoint_count(message);
    if (text::is_blank(message)) return error_reply(422, "invalid_message", "message text is empty");
    if (chars > runtime_.config().max_message_chars) {
        return error_reply(422, "invalid_message",
                           "message exceeds " + std::to_string(runtime_.config().max_message_chars) + " characters");
    }
    QueryOptions options;
    if (request.contains("language_hint") && !request["language_hint"].is_null()) {
        if (!request["language_hint"].is_string()) {
            return error_reply(422, "invalid_message", "\"language_hint\" must be a string");
        }
        options.language_hint = request["language_hint"].get<std::string>();
    }

    Session& session = *found.session;
    PipelineTrace trace;
    {
        GateLock gate(session.gate);
        options.sequence = session.sequence++;
        trace = runtime_.pipeline().run_query(session.memory, session.session_id, message, options);
        if (trace.ok()) ++session.message_count;
        session.last_active_at_ms = runtime_.clock()();
    }
    retain_trace(trace);

    if (!trace.ok()) {
        const StageError& e = *trace.error;
        const bool unavailable = e.stage == "retrieve" && runtime_.store().size() == 0;
        return error_reply(unavailable ? 503 : 502, unavailable ? "store_unavailable" : "backend_failure", e.message,
                           e.stage);
    }
    return {200, json{{"answer", trace.final_answer}, {"trace_id", trace.trace_id}}};
}

void ChatService::retain_trace(const PipelineTrace& trace) {
    std::lock_guard lock(traces_mutex_);
    if (traces_.emplace(trace.trace_id, StoredTrace{trace.session_id, to_json(trace)}).second) {
        trace_order_.push_back(trace.trace_id);
    } else {
        traces_[trace.trace_id] = StoredTrace{trace.session_id, to_json(trace)};
    }
    while (trace_order_.size() > runtime_.config().trace_retention) {
        traces_.erase(trace_order_.front());
        trace_order_.pop_front();
    }
}

HttpReply ChatService::get_trace(const std::string& session_id, const std::string& trace_id) {
    const Lookup found = find_session(session_id);
    if (found.expired) return error_reply(410, "session_expired", "session has expired");
    if (!found.session) return error_reply(404, "session_not_found", "no such session");
    std::lock_guard lock(traces_mutex_);
    auto it = traces_.find(trace_id);
    if (it == traces_.end() || it->second.session_id != session_id) {
        return error_reply(404, "trace_not_found", "no such trace");
    }
    return {200, it->second.json};
}

HttpReply ChatService::ingest(std::string_view body, std::string_view authorization_header) {
    const std::string& env = runtime_.config().admin_token_env;
    const char* token = env.empty() ? nullptr : std::getenv(env.c_str());
    if (token == nullptr || *token == '\0') {
        return error_reply(403, "ingest_disabled", "no admin token is configured");
    }
    if (authorization_header != std::string("Bearer ") + token) {
        return error_reply(401, "unauthorized", "admin token required");
    }

    json request;
    try {
        request = json::parse(body);
    } catch (const json::parse_error&) {
        return error_reply(400, "bad_request", "body must be a JSON object");
    }
    if (!request.is_object() || !request.contains("directory") || !request["directory"].is_string()) {
        return error_reply(422, "invalid_request", "\"directory\" must be a string");
    }

    std::unique_lock lock(ingest_mutex_, std::try_to_lock);
    if (!lock.owns_lock()) return error_reply(409, "ingest_in_progress", "another ingest is running");
    try {
        const auto report = ingest_directory(request["directory"].get<std::string>(), runtime_.embedder(),
                                             runtime_.store(), runtime_.config().max_chunk_chars, runtime_.clock());
        json issues = json::array();
        for (const auto& i : report.issues) {
            issues.push_back({{"path", i.path},
                              {"kind", i.kind == CorpusIssue::Kind::skipped ? "skipped" : "error"},
                              {"message", i.message}});
        }
        return {200, json{{"documents", report.documents},
                          {"chunks", report.chunks},
                          {"inserted", report.counts.inserted},
                          {"replaced", report.counts.replaced},
                          {"issues", std::move(issues)}}};
    } catch (const StorageError& e) {
        return error_reply(422, "ingest_failed", e.what(), "load");
    } catch (const ArgumentError& e) {
        return error_reply(422, "ingest_failed", e.what(), "upsert");
    } catch (const std::exception& e) {
        return error_reply(502, "ingest_failed", e.what(), "embed");
    }
}

HttpReply ChatService::health() const {
    const std::size_t size = runtime_.store().size();
    return {200, json{{"status", size > 0 ? "ok" : "degraded"},
                      {"store_size", size},
                      {"backend", runtime_.generator_backend().kind() == "mock" ? "mock" : "configured"}}};
}

std::size_t ChatService::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

std::optional<std::size_t> ChatService::message_count(const std::string& session_id) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return std::nullopt;
    return it->second->message_count;
}

std::optional<MemoryState> ChatService::memory_snapshot(const std::string& session_id) const {
    std::shared_ptr<Session> s;
    {
        std::lock_guard lock(sessions_mutex_);
        auto it = sessions_.find(session_id);
        if (it == sessions_.end()) return std::nullopt;
        s = it->second;
    }
    GateLock gate(s->gate);
    return s->memory;
}

// ---- HTTP ----------------------------------------------------------------

namespace {

void send(httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
}

}  // namespace

int ChatService::start(const std::string& host, int port) {
    if (http_) throw StorageError("service is already listening");
    http_ = std::make_unique<Http>();
    auto& server = http_->server;

    server.Post("/api/sessions", [this](const httplib::Request&, httplib::Response& res) { send(res, create_session()); });
    server.Post(R"(/api/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, post_message(req.matches[1], req.body));
    });
    server.Get(R"(/api/sessions/([^/]+)/traces/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, get_trace(req.matches[1], req.matches[2]));
    });
    server.Post("/api/ingest", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, ingest(req.body, req.get_header_value("Authorization")));
    });
    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        send(res, error_reply(500, "internal", "internal error"));
    });
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.status == 404 && req.path.rfind("/api/", 0) == 0) send(res, error_reply(404, "not_found", "no such endpoint"));
    });

    const auto& static_dir = runtime_.config().static_dir;
    if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) {
        server.set_mount_point("/", static_dir.string());
    }

    int bound = port;
    if (port == 0) {
        bound = server.bind_to_any_port(host);
    } else if (!server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) {
        http_.reset();
        throw StorageError("cannot bind " + host + ":" + std::to_string(port));
    }
    http_->thread = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    return bound;
}

void ChatService::serve_blocking(const std::string& host, int port) {
    start(host, port);
    if (http_ && http_->thread.joinable()) http_->thread.join();
}

void ChatService::stop() {
    if (!http_) return;
    http_->server.stop();
    if (http_->thread.joinable()) http_->thread.join();
    http_.reset();
}

}  // namespace ragchat
