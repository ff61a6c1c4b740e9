#include "ragchat/prompt_template.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ragchat/errors.hpp"

namespace ragchat {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read template " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

std::size_t data_index(std::string_view name) {
    if (name.size() <= 4 || name.substr(0, 4) != "data") return 0;
    std::size_t n = 0;
    for (char c : name.substr(4)) {
        if (c < '0' || c > '9') return 0;
        n = n * 10 + static_cast<std::size_t>(c - '0');
        if (n > 1000) return 0;
    }
    return name[4] == '0' ? 0 : n;
}

}  // namespace

bool PromptTemplate::is_known_placeholder(std::string_view name) {
    return name == "query" || name == "history" || name == "generator_answer" || data_index(name) > 0;
}

PromptTemplate::PromptTemplate(std::string name, std::string body) : name_(std::move(name)), body_(std::move(body)) {
    std::string literal;
    std::size_t i = 0;
    while (i < body_.size()) {
        const char c = body_[i];
        if (c == '{' && i + 1 < body_.size() && body_[i + 1] == '{') {
            literal.push_back('{');
            i += 2;
        } else if (c == '}' && i + 1 < body_.size() && body_[i + 1] == '}') {
            literal.push_back('}');
            i += 2;
        } else if (c == '{') {
            const auto close = body_.find('}', i + 1);
            if (close == std::string::npos) {
                throw ConfigError("template " + name_ + ": unterminated placeholder at offset " + std::to_string(i));
            }
            std::string key = body_.substr(i + 1, close - i - 1);
            if (!is_known_placeholder(key)) {
                throw ConfigError("template " + name_ + ": unknown placeholder {" + key + "}");
            }
            if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
            literal.clear();
            if (std::find(placeholders_.begin(), placeholders_.end(), key) == placeholders_.end()) {
                placeholders_.push_back(key);
            }
            data_slots_ = std::max(data_slots_, data_index(key));
            pieces_.push_back({true, std::move(key)});
            i = close + 1;
        } else if (c == '}') {
            throw ConfigError("template " + name_ + ": stray '}' at offset " + std::to_string(i));
        } else {
            literal.push_back(c);
            ++i;
        }
    }
    if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
    return PromptTemplate(path.stem().string(), read_file(path));
}

bool PromptTemplate::references(std::string_view placeholder) const {
    return std::find(placeholders_.begin(), placeholders_.end(), placeholder) != placeholders_.end();
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    for (const auto& p : pieces_) {
        if (!p.is_placeholder) {
            out += p.text;
            continue;
        }
        auto it = values.find(p.text);
        if (it == values.end()) throw ConfigError("template " + name_ + ": no value for {" + p.text + "}");
        out += it->second;
    }
    return out;
}

PromptSet PromptSet::load(const std::filesystem::path& templates_dir) {
    auto generator = PromptTemplate::from_file(templates_dir / "generator.txt");
    auto verifier = PromptTemplate::from_file(templates_dir / "verifier.txt");
    std::string summarize = read_file(templates_dir / "summarize.txt");
    while (!summarize.empty() && (summarize.back() == '\n' || summarize.back() == '\r')) summarize.pop_back();
    if (!generator.references("query")) throw ConfigError("generator template must reference {query}");
    if (generator.references("generator_answer")) {
        throw ConfigError("generator template cannot reference {generator_answer}");
    }
    if (verifier.references("history")) throw ConfigError("verifier template must not reference {history}");
    if (!verifier.references("generator_answer")) {
        throw ConfigError("verifier template must reference {generator_answer}");
    }
    if (generator.data_slots() != verifier.data_slots()) {
        throw ConfigError("generator and verifier templates must have the same number of data slots");
    }
    return PromptSet{std::move(generator), std::move(verifier), std::move(summarize)};
}

}  // namespace ragchat
