#include "plandistill/text.hpp"

#include "embedded_data.hpp"
#include "plandistill/error.hpp"

#include <fstream>
#include <sstream>
#include <utility>

namespace plandistill {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') ||
           (u >= 'A' && u <= 'Z');
}

bool is_connector(char c) { return c == '-' || c == '\''; }

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

StopwordList parse_stopwords(std::istream& in, std::string fallback_version) {
    std::vector<std::string> words;
    std::string version = std::move(fallback_version);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            if (first) version = trim(std::string_view(t).substr(1));
            first = false;
            continue;
        }
        first = false;
        words.push_back(to_lower_ascii(t));
    }
    return StopwordList::from_words(words, version);
}

}  // namespace

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = lower(c);
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word_char(text[i])) {
            ++i;
            continue;
        }
        std::string tok;
        while (i < text.size()) {
            const char c = text[i];
            if (is_word_char(c)) {
                tok.push_back(lower(c));
                ++i;
            } else if (is_connector(c) && i + 1 < text.size() && is_word_char(text[i + 1])) {
                tok.push_back(c);
                ++i;
            } else {
                break;
            }
        }
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

std::string normalize_goal_text(std::string_view text) {
    std::string s = collapse_whitespace(to_lower_ascii(text));
    while (!s.empty()) {
        const char c = s.back();
        if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':' || c == ' ') {
            s.pop_back();
        } else {
            break;
        }
    }
    return s;
}

const StopwordList& StopwordList::builtin() {
    static const StopwordList list = [] {
        std::istringstream in{std::string(embedded::kStopwords)};
        return parse_stopwords(in, "builtin");
    }();
    return list;
}

StopwordList StopwordList::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read stopword list: " + path.string());
    return parse_stopwords(in, path.filename().string());
}

StopwordList StopwordList::from_words(const std::vector<std::string>& words,
                                      std::string version) {
    StopwordList list;
    for (const auto& w : words) list.words_.insert(to_lower_ascii(w));
    list.version_ = std::move(version);
    return list;
}

bool StopwordList::contains(std::string_view word) const {
    return words_.find(std::string(word)) != words_.end();
}

std::string KeywordSet::joined() const {
    std::string out;
    for (const auto& k : keywords) {
        if (!out.empty()) out.push_back(' ');
        out += k;
    }
    return out;
}

KeywordSet extract_keywords(std::string_view goal_text, const StopwordList& stopwords) {
    KeywordSet set;
    std::unordered_set<std::string> seen;
    for (auto& tok : tokenize(goal_text)) {
        if (stopwords.contains(tok)) continue;
        if (seen.insert(tok).second) set.keywords.push_back(std::move(tok));
    }
    return set;
}

}  // namespace plandistill
