#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ragchat/config.hpp"
#include "ragchat/errors.hpp"
#include "ragchat/eval_harness.hpp"
#include "ragchat/ingest.hpp"
#include "ragchat/json_io.hpp"
#include "ragchat/runtime.hpp"
#include "ragchat/service.hpp"

namespace fs = std::filesystem;
using namespace ragchat;

namespace {

std::string g_store_override;

AppConfig load_config(const std::string& path) {
    AppConfig config;
    if (!path.empty()) {
        config = AppConfig::load(path);
    } else if (fs::exists("ragchat.json")) {
        config = AppConfig::load("ragchat.json");
    } else {
#ifdef RAGCHAT_TEMPLATES_DIR
        if (!fs::exists(config.templates_dir)) config.templates_dir = RAGCHAT_TEMPLATES_DIR;
#endif
    }
    if (!g_store_override.empty()) config.store_path = g_store_override;
    return config;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write " + path);
    out << content;
}

int cmd_ingest(const std::string& config_path, const std::string& dir) {
    Runtime runtime(load_config(config_path));
    const auto report = ingest_directory(dir, runtime.embedder(), runtime.store(), runtime.config().max_chunk_chars,
                                         runtime.clock());
    for (const auto& issue : report.issues) {
        std::cerr << (issue.kind == CorpusIssue::Kind::skipped ? "skipped " : "error ") << issue.path << ": "
                  << issue.message << "\n";
    }
    std::cout << "documents=" << report.documents << " chunks=" << report.chunks
              << " inserted=" << report.counts.inserted << " replaced=" << report.counts.replaced
              << " store_size=" << runtime.store().size() << "\n";
    return 0;
}

int cmd_chat(const std::string& config_path, const std::string& language) {
    Runtime runtime(load_config(config_path));
    MemoryState memory = runtime.fresh_memory();
    QueryOptions options;
    if (!language.empty()) options.language_hint = language;
    std::string line;
    std::cout << "> " << std::flush;
    while (std::getline(std::cin, line)) {
        if (line == "/quit" || line == "/exit") break;
        if (!line.empty()) {
            const auto trace = runtime.pipeline().run_query(memory, "chat", line, options);
            if (trace.ok()) {
                std::cout << trace.final_answer << "\n";
            } else {
                std::cout << "[" << trace.error->stage << " failed] " << trace.error->message << "\n";
            }
            ++options.sequence;
        }
        std::cout << "> " << std::flush;
    }
    return 0;
}

int cmd_serve(const std::string& config_path, std::string host, int port) {
    Runtime runtime(load_config(config_path));
    if (host.empty()) host = runtime.config().bind_address;
    if (port < 0) port = runtime.config().port;
    ChatService service(runtime);
    std::cerr << "serving on http://" << host << ":" << port << " (store_size=" << runtime.store().size() << ")\n";
    service.serve_blocking(host, port);
    return 0;
}

int cmd_eval_run(const std::string& config_path, const std::string& testset_path, const std::string& out,
                 bool parallel, std::size_t workers) {
    Runtime runtime(load_config(config_path));
    const TestSet testset = TestSet::load(testset_path);
    RunOptions options;
    options.parallel = parallel;
    options.workers = workers;
    options.initial_memory = runtime.fresh_memory();
    const auto records = run_testset(testset, runtime.pipeline(), options);
    write_output(out, to_jsonl(records));
    std::size_t failed = 0;
    for (const auto& r : records) failed += r.status != "ok";
    std::cerr << records.size() << " items, " << failed << " failed\n";
    return 0;
}

int cmd_eval_bootstrap(const std::string& csv_path, std::size_t resamples, double confidence, std::uint64_t seed,
                       const std::string& json_out) {
    const auto ratings = load_ratings_csv(csv_path);
    const auto partition = filter_ratings(ratings);
    std::cerr << "ratings: " << ratings.size() << " read, " << partition.kept.size() << " kept, "
              << partition.dropped.size() << " dropped (< " << kMinRatingDurationSeconds << " s)\n";
    const auto results = bootstrap_by_metric(ratings, resamples, confidence, seed);
    const Report rep = report(results);
    std::cout << rep.table;
    if (!json_out.empty()) write_output(json_out, rep.json);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-augmented student-support chat engine"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--store", g_store_override, "Vector store file (overrides store_path)");

    std::string ingest_dir;
    auto* ingest = app.add_subcommand("ingest", "Chunk, embed and store a directory of .txt/.md files");
    ingest->add_option("directory", ingest_dir)->required()->check(CLI::ExistingDirectory);

    std::string language;
    auto* chat = app.add_subcommand("chat", "Interactive terminal conversation");
    chat->add_option("--language", language, "Language hint appended to every question");

    std::string host;
    int port = -1;
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    auto* eval = app.add_subcommand("eval", "Evaluation harness");
    eval->require_subcommand(1);

    std::string testset_path;
    std::string out = "-";
    bool parallel = false;
    std::size_t workers = 4;
    auto* run = eval->add_subcommand("run", "Run a test set and write a JSON-lines transcript");
    run->add_option("testset", testset_path)->required()->check(CLI::ExistingFile);
    run->add_option("-o,--out", out, "Transcript path ('-' for stdout)");
    run->add_flag("--parallel", parallel, "Fresh session per item, items run concurrently");
    run->add_option("--workers", workers)->check(CLI::PositiveNumber);

    std::string csv_path;
    std::size_t resamples = kDefaultResamples;
    double confidence = kDefaultConfidence;
    std::uint64_t seed = 0;
    std::string json_out;
    auto* boot = eval->add_subcommand("bootstrap", "Bootstrap confidence intervals from a ratings CSV");
    boot->add_option("ratings", csv_path)->required()->check(CLI::ExistingFile);
    boot->add_option("--resamples", resamples)->check(CLI::PositiveNumber);
    boot->add_option("--confidence", confidence)->check(CLI::Range(0.0, 1.0));
    boot->add_option("--seed", seed);
    boot->add_option("--json-out", json_out, "Also write the machine-readable report here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return cmd_ingest(config_path, ingest_dir);
        if (*chat) return cmd_chat(config_path, language);
        if (*serve) return cmd_serve(config_path, host, port);
        if (*run) return cmd_eval_run(config_path, testset_path, out, parallel, workers);
        if (*boot) return cmd_eval_bootstrap(csv_path, resamples, confidence, seed, json_out);
    } catch (const ragchat::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
