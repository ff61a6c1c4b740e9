#pragma once

#include <memory>

#include "ragchat/clock.hpp"
#include "ragchat/config.hpp"
#include "ragchat/embedder.hpp"
#include "ragchat/llm_backend.hpp"
#include "ragchat/prompt_template.hpp"
#include "ragchat/rag_pipeline.hpp"
#include "ragchat/vector_store.hpp"

namespace ragchat {

/// Everything a pipeline needs, wired from one AppConfig and owned together.
class Runtime {
public:
    explicit Runtime(AppConfig config, Clock clock = system_clock(), Sleeper sleeper = real_sleeper());

    /// Same, but with an already-populated store (no file is opened).
    Runtime(AppConfig config, std::unique_ptr<VectorStore> store, Clock clock = system_clock(),
            Sleeper sleeper = real_sleeper());

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    const AppConfig& config() const noexcept { return config_; }
    VectorStore& store() noexcept { return *store_; }
    const Embedder& embedder() const noexcept { return *embedder_; }
    ChatBackend& generator_backend() noexcept { return *generator_backend_; }
    ChatBackend& verifier_backend() noexcept;
    UsageLedger& ledger() noexcept { return ledger_; }
    const PromptSet& prompts() const noexcept { return *prompts_; }
    const RagPipeline& pipeline() const noexcept { return *pipeline_; }
    const Clock& clock() const noexcept { return clock_; }

    MemoryState fresh_memory() const;

private:
    void wire(Sleeper sleeper);

    AppConfig config_;
    Clock clock_;
    std::unique_ptr<VectorStore> store_;
    std::unique_ptr<Embedder> embedder_;
    std::unique_ptr<ChatBackend> generator_backend_;
    std::unique_ptr<ChatBackend> verifier_backend_;
    std::unique_ptr<PromptSet> prompts_;
    UsageLedger ledger_;
    std::unique_ptr<RagPipeline> pipeline_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config, Sleeper sleeper = real_sleeper());

}  // namespace ragchat
