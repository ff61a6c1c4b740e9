#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ragchat/conversation_memory.hpp"
#include "ragchat/rag_pipeline.hpp"
#include "ragchat/runtime.hpp"

namespace ragchat {

struct HttpReply {
    int status = 200;
    nlohmann::json body;
};

/// Admits holders strictly in arrival order.
class FifoGate {
public:
    void lock();
    void unlock();

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::uint64_t next_ticket_ = 0;
    std::uint64_t now_serving_ = 0;
};

struct Session {
    std::string session_id;
    MemoryState memory;
    std::int64_t created_at_ms = 0;
    std::atomic<std::int64_t> last_active_at_ms{0};
    std::size_t message_count = 0;
    std::uint64_t sequence = 0;  // messages processed, successful or not
    FifoGate gate;
};

/// JSON API over a Runtime. The handler methods are transport independent;
/// start()/stop() put them behind an HTTP/1.1 listener.
///
///   POST /api/sessions                        -> 201 {"session_id"}
///   POST /api/sessions/{id}/messages          -> 200 {"answer", "trace_id"}
///   GET  /api/sessions/{id}/traces/{trace_id} -> 200 trace
///   POST /api/ingest {"directory"}            -> 200 {"documents","chunks","inserted","replaced"}
///   GET  /api/health                          -> 200 {"status","store_size","backend"}
///
/// Errors are {"error": {"code", "message", "stage"?}}.
class ChatService {
public:
    explicit ChatService(Runtime& runtime);
    ~ChatService();

    ChatService(const ChatService&) = delete;
    ChatService& operator=(const ChatService&) = delete;

    HttpReply create_session();
    HttpReply post_message(const std::string& session_id, std::string_view body);
    HttpReply get_trace(const std::string& session_id, const std::string& trace_id);
    HttpReply ingest(std::string_view body, std::string_view authorization_header);
    HttpReply health() const;

    std::size_t session_count() const;
    std::optional<std::size_t> message_count(const std::string& session_id) const;
    /// Rendered memory of a live session, for tests and the chat tool.
    std::optional<MemoryState> memory_snapshot(const std::string& session_id) const;

    /// Binds (port 0 = any free port) and serves on a background thread.
    /// Returns the bound port. Throws StorageError if binding fails.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    void serve_blocking(const std::string& host, int port);
    void stop();

    static HttpReply error_reply(int status, std::string code, std::string message,
                                 std::optional<std::string> stage = std::nullopt);

private:
    struct Lookup {
        std::shared_ptr<Session> session;
        bool expired = false;
    };
    struct StoredTrace {
        std::string session_id;
        nlohmann::json json;
    };
    struct Http;

    Lookup find_session(const std::string& session_id);
    void sweep_expired(std::int64_t now);
    void retain_trace(const PipelineTrace& trace);
    std::int64_t ttl_ms() const;
    std::string new_session_id();

    Runtime& runtime_;
    mutable std::mutex sessions_mutex_;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
    std::unordered_set<std::string> expired_;
    std::deque<std::string> expired_order_;

    mutable std::mutex traces_mutex_;
    std::unordered_map<std::string, StoredTrace> traces_;
    std::deque<std::string> trace_order_;

    std::mutex ingest_mutex_;
    std::unique_ptr<Http> http_;
};

}  // namespace ragchat
