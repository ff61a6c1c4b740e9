#include "ragchat/runtime.hpp"

#include <fstream>

#include "ragchat/errors.hpp"
#include "ragchat/json_io.hpp"

namespace ragchat {

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config, Sleeper sleeper) {
    if (config.kind == BackendConfig::Kind::mock) return MockChatBackend::from_json(config.mock_script);
    return std::make_unique<RemoteChatBackend>(config.remote, std::move(sleeper));
}

Runtime::Runtime(AppConfig config, Clock clock, Sleeper sleeper)
    : config_(std::move(config)), clock_(std::move(clock)) {
    config_.validate();
    store_ = VectorStore::open(config_.store_path);
    wire(std::move(sleeper));
}

Runtime::Runtime(AppConfig config, std::unique_ptr<VectorStore> store, Clock clock, Sleeper sleeper)
    : config_(std::move(config)), clock_(std::move(clock)), store_(std::move(store)) {
    config_.validate();
    if (!store_) store_ = std::make_unique<VectorStore>();
    wire(std::move(sleeper));
}

ChatBackend& Runtime::verifier_backend() noexcept {
    return verifier_backend_ ? *verifier_backend_ : *generator_backend_;
}

void Runtime::wire(Sleeper sleeper) {
    embedder_ = make_embedder(config_.embedder, sleeper);
    generator_backend_ = make_backend(config_.backend, sleeper);
    if (config_.verifier_backend) verifier_backend_ = make_backend(*config_.verifier_backend, sleeper);
    prompts_ = std::make_unique<PromptSet>(PromptSet::load(config_.templates_dir));

    PipelineDeps deps;
    deps.store = store_.get();
    deps.embedder = embedder_.get();
    deps.generator_backend = generator_backend_.get();
    deps.verifier_backend = verifier_backend_ ? verifier_backend_.get() : generator_backend_.get();
    deps.prompts = prompts_.get();
    deps.ledger = &ledger_;
    deps.clock = clock_;
    if (!config_.traces_dir.empty()) {
        std::filesystem::create_directories(config_.traces_dir);
        deps.trace_sink = [dir = config_.traces_dir](const PipelineTrace& trace) {
            std::ofstream out(dir / (trace.trace_id + ".json"), std::ios::binary | std::ios::trunc);
            out << to_json(trace).dump(2) << '\n';
        };
    }
    pipeline_ = std::make_unique<RagPipeline>(config_.pipeline, std::move(deps));
}

MemoryState Runtime::fresh_memory() const {
    MemoryState m;
    m.token_threshold = config_.memory_token_threshold;
    m.keep_recent = config_.memory_keep_recent;
    return m;
}

}  // namespace ragchat
