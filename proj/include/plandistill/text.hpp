#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace plandistill {

// Version tag of the tokenizer rules below. Reports that count tokens carry it.
inline constexpr std::string_view kTokenizerVersion = "ws-punct-v1";

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
// Replaces every run of whitespace with one space and trims the ends.
std::string collapse_whitespace(std::string_view s);

// Splits on whitespace and punctuation, lowercases ASCII letters and keeps
// hyphens and apostrophes that sit between two word characters
// ("sugar-free", "don't"). Bytes >= 0x80 count as word characters so UTF-8
// text passes through unchanged.
std::vector<std::string> tokenize(std::string_view text);

// Dedup key for generated goals: lowercase, collapsed whitespace, trailing
// punctuation stripped.
std::string normalize_goal_text(std::string_view text);

class StopwordList {
public:
    // The list compiled into the library; identical to data/stopwords.txt.
    static const StopwordList& builtin();
    // One word per line; blank lines and lines starting with '#' are ignored.
    static StopwordList load(const std::filesystem::path& path);
    static StopwordList from_words(const std::vector<std::string>& words,
                                   std::string version = "custom");

    bool contains(std::string_view word) const;
    std::size_t size() const noexcept { return words_.size(); }
    const std::string& version() const noexcept { return version_; }

private:
    std::unordered_set<std::string> words_;
    std::string version_;
};

// Lowercase content words in first-occurrence order, no duplicates, no
// stopwords.
struct KeywordSet {
    std::vector<std::string> keywords;

    bool empty() const noexcept { return keywords.empty(); }
    std::size_t size() const noexcept { return keywords.size(); }
    std::string joined() const;
    bool operator==(const KeywordSet&) const = default;
};

KeywordSet extract_keywords(std::string_view goal_text,
                            const StopwordList& stopwords = StopwordList::builtin());

}  // namespace plandistill
