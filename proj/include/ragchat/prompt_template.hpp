#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ragchat {

/// Text with {name} placeholders. "{{" and "}}" are literal braces. Values are
/// substituted in a single pass and never re-expanded.
///
/// Recognized names: query, history, generator_answer, and data1, data2, ...
class PromptTemplate {
public:
    /// Throws ConfigError on an unknown placeholder or an unbalanced brace.
    PromptTemplate(std::string name, std::string body);

    static PromptTemplate from_file(const std::filesystem::path& path);

    const std::string& name() const noexcept { return name_; }
    const std::string& body() const noexcept { return body_; }

    /// Placeholder names in order of first appearance.
    const std::vector<std::string>& placeholders() const noexcept { return placeholders_; }
    bool references(std::string_view placeholder) const;

    /// Highest N such that {dataN} appears, 0 if none.
    std::size_t data_slots() const noexcept { return data_slots_; }

    /// Throws ConfigError if a referenced placeholder has no value.
    std::string render(const std::map<std::string, std::string>& values) const;

    static bool is_known_placeholder(std::string_view name);

private:
    struct Piece {
        bool is_placeholder;
        std::string text;
    };

    std::string name_;
    std::string body_;
    std::vector<Piece> pieces_;
    std::vector<std::string> placeholders_;
    std::size_t data_slots_ = 0;
};

/// The three prompts the pipeline needs, loaded from generator.txt,
/// verifier.txt and summarize.txt in one directory.
struct PromptSet {
    PromptTemplate generator;
    PromptTemplate verifier;
    std::string summarize_instructions;

    static PromptSet load(const std::filesystem::path& templates_dir);
};

}  // namespace ragchat
