#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "ragchat/conversation_memory.hpp"
#include "ragchat/corpus.hpp"
#include "ragchat/embedder.hpp"
#include "ragchat/llm_backend.hpp"
#include "ragchat/rag_pipeline.hpp"

namespace ragchat {

struct BackendConfig {
    enum class Kind { remote, mock };

    Kind kind = Kind::mock;
    RemoteBackendConfig remote;
    std::string mock_script = R"({"mode":"echo"})";  // JSON text, see MockChatBackend::from_json
};

struct AppConfig {
    std::string bind_address = "127.0.0.1";
    int port = 8080;
    std::filesystem::path store_path = "data/store.rvs";
    std::filesystem::path templates_dir = "templates";
    std::filesystem::path traces_dir;  // empty: traces are not written to disk
    std::filesystem::path static_dir;  // empty: nothing served at "/"
    std::int64_t session_ttl_seconds = 3600;
    std::size_t max_message_chars = 4000;
    std::string admin_token_env;
    std::size_t trace_retention = 1000;

    std::size_t max_chunk_chars = kDefaultMaxChunkChars;
    EmbedderConfig embedder;
    BackendConfig backend;
    std::optional<BackendConfig> verifier_backend;
    PipelineConfig pipeline;
    std::int64_t memory_token_threshold = kDefaultMemoryTokenThreshold;
    std::size_t memory_keep_recent = kDefaultKeepRecent;

    /// Relative paths resolve against `base_dir`. Unknown keys are a ConfigError.
    static AppConfig from_json(std::string_view json_text, const std::filesystem::path& base_dir = {});
    static AppConfig load(const std::filesystem::path& path);

    void validate() const;
};

}  // namespace ragchat
