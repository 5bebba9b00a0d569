#include "plandistill/prompting.hpp"

#include "embedded_data.hpp"
#include "plandistill/error.hpp"
#include "plandistill/random.hpp"
#include "plandistill/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace plandistill {

std::string_view to_string(ConstraintType type) {
    switch (type) {
        case ConstraintType::modifier: return "modifier";
        case ConstraintType::method: return "method";
        case ConstraintType::intent: return "intent";
    }
    return "modifier";
}

std::string_view display_name(ConstraintType type) {
    switch (type) {
        case ConstraintType::modifier: return "Modifier";
        case ConstraintType::method: return "Method";
        case ConstraintType::intent: return "Intent";
    }
    return "Modifier";
}

std::optional<ConstraintType> parse_constraint_type(std::string_view text) {
    const std::string t = to_lower_ascii(trim(text));
    for (auto type : kConstraintTypes) {
        if (t == to_string(type)) return type;
    }
    return std::nullopt;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = nl + 1;
    }
    return lines;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

// Value after "Label:" with surrounding whitespace removed.
std::string after_label(std::string_view line, std::string_view label) {
    return trim(line.substr(label.size()));
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

// ---------------------------------------------------------------------------
// ExamplePool

const ExamplePool& ExamplePool::builtin() {
    static const ExamplePool pool = parse(embedded::kExamplePool);
    return pool;
}

ExamplePool ExamplePool::load(const std::filesystem::path& path) { return parse(read_file(path)); }

ExamplePool ExamplePool::parse(std::string_view text) {
    ExamplePool pool;
    pool.version_ = "unversioned";
    std::optional<ConstraintType> section;
    PoolExample* current = nullptr;
    std::optional<std::string> pending;
    std::size_t line_no = 0;
    const auto fail = [&](const std::string& why) {
        throw ConfigError("example pool line " + std::to_string(line_no) + ": " + why);
    };
    const auto close_example = [&] {
        if (pending) fail("constraint without a specific goal");
    };

    for (std::string_view raw : split_lines(text)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            if (line_no == 1) pool.version_ = trim(std::string_view(line).substr(1));
            continue;
        }
        if (line.front() == '[' && line.back() == ']') {
            close_example();
            section = parse_constraint_type(std::string_view(line).substr(1, line.size() - 2));
            if (!section) fail("unknown constraint type " + line);
            current = nullptr;
            continue;
        }
        if (!section) fail("content before the first [type] header");
        auto& bucket = pool.by_type_[static_cast<std::size_t>(*section)];
        if (starts_with_ci(line, "Abstract Goal:")) {
            close_example();
            bucket.push_back({after_label(line, "Abstract Goal:"), {}});
            current = &bucket.back();
            if (current->abstract_goal.empty()) fail("empty abstract goal");
        } else if (starts_with_ci(line, "Constraint:")) {
            if (!current) fail("constraint outside an example");
            if (pending) fail("two constraints in a row");
            pending = after_label(line, "Constraint:");
            if (pending->empty()) fail("empty constraint");
        } else if (starts_with_ci(line, "Specific Goal:")) {
            if (!pending) fail("specific goal without a constraint");
            std::string goal = after_label(line, "Specific Goal:");
            if (goal.empty()) fail("empty specific goal");
            current->pairs.emplace_back(std::move(*pending), std::move(goal));
            pending.reset();
        } else {
            fail("unrecognized line");
        }
    }
    close_example();

    for (auto type : kConstraintTypes) {
        const auto& bucket = pool.by_type_[static_cast<std::size_t>(type)];
        if (bucket.size() < 3) {
            throw ConfigError("example pool: type " + std::string(to_string(type)) +
                              " needs at least 3 examples");
        }
        for (const auto& ex : bucket) {
            if (ex.pairs.size() < 2) {
                throw ConfigError("example pool: '" + ex.abstract_goal +
                                  "' needs at least 2 constraint/goal pairs");
            }
        }
    }
    return pool;
}

const std::vector<PoolExample>& ExamplePool::examples(ConstraintType type) const {
    return by_type_[static_cast<std::size_t>(type)];
}

std::vector<PoolExample> ExamplePool::sample(ConstraintType type, std::size_t count,
                                             std::uint64_t seed) const {
    const auto& bucket = examples(type);
    Rng rng(seed);
    std::vector<PoolExample> out;
    for (std::size_t i : rng.sample_indices(bucket.size(), count)) out.push_back(bucket[i]);
    return out;
}

// ---------------------------------------------------------------------------
// PromptTemplate

const PromptTemplate& PromptTemplate::builtin_goal() {
    static const PromptTemplate t = parse(embedded::kGoalTemplate);
    return t;
}

const PromptTemplate& PromptTemplate::builtin_script() {
    static const PromptTemplate t = parse(embedded::kScriptTemplate);
    return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    return parse(read_file(path));
}

PromptTemplate PromptTemplate::parse(std::string_view text) {
    PromptTemplate t;
    t.version_ = "unversioned";
    if (!text.empty() && text.front() == '#') {
        const std::size_t nl = text.find('\n');
        t.version_ = trim(text.substr(1, nl == std::string_view::npos ? text.size() - 1 : nl - 1));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    }
    if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    t.body_ = std::string(text);
    for (std::string_view ph : {"{task}", "{examples}", "{target}"}) {
        if (t.body_.find(ph) == std::string::npos) {
            throw ConfigError("prompt template " + t.version_ + " lacks placeholder " + std::string(ph));
        }
    }
    return t;
}

std::string PromptTemplate::render(std::string_view task, std::string_view examples,
                                   std::string_view target) const {
    std::string out;
    out.reserve(body_.size() + task.size() + examples.size() + target.size());
    std::size_t i = 0;
    while (i < body_.size()) {
        if (body_[i] == '{') {
            const std::string_view rest = std::string_view(body_).substr(i);
            if (rest.starts_with("{task}")) {
                out += task;
                i += 6;
                continue;
            }
            if (rest.starts_with("{examples}")) {
                out += examples;
                i += 10;
                continue;
            }
            if (rest.starts_with("{target}")) {
                out += target;
                i += 8;
                continue;
            }
        }
        out.push_back(body_[i++]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::string gerund(std::string verb) {
    const std::size_t n = verb.size();
    if (n == 0) return verb;
    if (verb.ends_with("ing") && n > 4) return verb;
    if (verb.ends_with("ie")) return verb.substr(0, n - 2) + "ying";
    if (verb.ends_with("e") && n > 2 && !verb.ends_with("ee") && !verb.ends_with("ye") &&
        !verb.ends_with("oe")) {
        return verb.substr(0, n - 1) + "ing";
    }
    // Single-syllable consonant-vowel-consonant: double the last letter.
    if (n >= 3) {
        const char a = verb[n - 3], b = verb[n - 2], c = verb[n - 1];
        int vowel_groups = 0;
        bool in_group = false;
        for (char ch : verb) {
            const bool v = is_vowel(ch);
            if (v && !in_group) ++vowel_groups;
            in_group = v;
        }
        if (vowel_groups == 1 && !is_vowel(a) && is_vowel(b) && !is_vowel(c) && c != 'w' &&
            c != 'x' && c != 'y' && std::isalpha(static_cast<unsigned char>(c))) {
            return verb + c + "ing";
        }
    }
    return verb + "ing";
}

}  // namespace

std::string gerund_phrase(std::string_view title) {
    const std::string t = collapse_whitespace(title);
    const std::size_t sp = t.find(' ');
    const std::string first = to_lower_ascii(t.substr(0, sp));
    std::string out = gerund(first);
    if (sp != std::string::npos) out += t.substr(sp);
    return out;
}

std::string format_steps_inline(std::span<const std::string> steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i) out.push_back(' ');
        out += std::to_string(i + 1);
        out += ". ";
        out += steps[i];
    }
    return out;
}

std::string render_goal_prompt(const AbstractGoal& goal, ConstraintType type,
                               std::span<const PoolExample> examples, const PromptTemplate& tmpl) {
    if (examples.empty()) throw InputError("goal prompt needs at least one example");
    const std::string task = "Create possible Specific Goals according to the Abstract Goal when "
                             "the Constraint Type is " +
                             std::string(display_name(type)) + ".";
    std::string body;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i) body += "\n\n";
        body += "Abstract Goal: " + examples[i].abstract_goal;
        for (const auto& [constraint, specific] : examples[i].pairs) {
            body += "\nConstraint: " + constraint;
            body += "\nSpecific Goal: " + specific;
        }
    }
    const std::string target = "Abstract Goal: " + goal.title + "\nConstraint:";
    return tmpl.render(task, body, target);
}

std::string render_script_prompt(const AbstractGoal& parent, const SpecificGoal& goal,
                                 std::span<const AbstractGoal> examples,
                                 const PromptTemplate& tmpl) {
    if (examples.empty()) throw InputError("script prompt needs at least one example");
    if (trim(goal.constraint.text).empty()) throw InputError("script prompt: constraint text is empty");
    const std::string task = "List the steps of " + gerund_phrase(parent.title) +
                             " based on Constraint and Specific Goal.";
    std::string body;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i) body += "\n\n";
        body += "Goal: " + examples[i].title;
        body += "\nSteps: " + format_steps_inline(examples[i].steps);
    }
    const std::string target = "Constraint: " + goal.constraint.text +
                               "\nSpecific Goal: " + goal.text + "\nSteps:";
    return tmpl.render(task, body, target);
}

// ---------------------------------------------------------------------------
// Parsing

GoalParse parse_goal_completion(std::string_view text) {
    static constexpr std::string_view kConstraint = "constraint:";
    static constexpr std::string_view kGoal = "specific goal:";

    GoalParse out;
    std::optional<std::string> pending;
    const auto drop_pending = [&] {
        if (pending) out.diagnostics.push_back("unpaired constraint: '" + *pending + "'");
        pending.reset();
    };
    const auto clean = [](std::string_view v) {
        std::string s = trim(v);
        while (!s.empty() && s.back() == ';') {
            s.pop_back();
            s = trim(s);
        }
        return s;
    };

    for (std::string_view raw : split_lines(text)) {
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (starts_with_ci(line, "Abstract Goal:")) break;

        const std::string lower = to_lower_ascii(line);
        struct Label {
            std::size_t pos;
            bool is_goal;
        };
        std::vector<Label> labels;
        for (std::size_t p = 0; p < lower.size();) {
            const std::size_t c = lower.find(kConstraint, p);
            const std::size_t g = lower.find(kGoal, p);
            if (c == std::string::npos && g == std::string::npos) break;
            if (g == std::string::npos || (c != std::string::npos && c < g)) {
                labels.push_back({c, false});
                p = c + kConstraint.size();
            } else {
                labels.push_back({g, true});
                p = g + kGoal.size();
            }
        }

        const std::string_view lv = line;
        const std::string prefix = clean(lv.substr(0, labels.empty() ? lv.size() : labels[0].pos));
        if (!prefix.empty()) drop_pending();

        for (std::size_t i = 0; i < labels.size(); ++i) {
            const std::size_t start = labels[i].pos + (labels[i].is_goal ? kGoal.size() : kConstraint.size());
            const std::size_t stop = i + 1 < labels.size() ? labels[i + 1].pos : lv.size();
            std::string value = clean(lv.substr(start, stop - start));
            if (!labels[i].is_goal) {
                drop_pending();
                pending = std::move(value);
                continue;
            }
            if (!pending) {
                out.diagnostics.push_back("specific goal without constraint: '" + value + "'");
            } else if (pending->empty() || value.empty()) {
                out.diagnostics.push_back("empty constraint or specific goal: '" + *pending +
                                          "' / '" + value + "'");
            } else {
                out.pairs.push_back({std::move(*pending), std::move(value)});
            }
            pending.reset();
        }
    }
    drop_pending();
    return out;
}

namespace {

struct Marker {
    std::size_t begin;  // first byte of the marker
    std::size_t end;    // first byte after it
    unsigned long value;
};

// Tries to read a marker at `i`, which must follow whitespace or start the text.
std::optional<Marker> marker_at(std::string_view t, std::size_t i) {
    std::size_t p = i;
    if (starts_with_ci(t.substr(p), "step")) {
        p += 4;
        const std::size_t ws = p;
        while (p < t.size() && (t[p] == ' ' || t[p] == '\t')) ++p;
        if (p == ws) return std::nullopt;
    }
    const std::size_t digits = p;
    while (p < t.size() && is_digit(t[p]) && p - digits < 6) ++p;
    if (p == digits || (p < t.size() && is_digit(t[p]))) return std::nullopt;
    const unsigned long value = std::stoul(std::string(t.substr(digits, p - digits)));

    std::size_t q = p;
    if (q < t.size() && (t[q] == '.' || t[q] == ')' || t[q] == ':' || t[q] == '-')) {
        ++q;
    } else {
        // INT ws "-"
        while (q < t.size() && (t[q] == ' ' || t[q] == '\t')) ++q;
        if (q == p || q >= t.size() || t[q] != '-') return std::nullopt;
        ++q;
    }
    if (q < t.size() && !is_space(t[q])) return std::nullopt;
    return Marker{i, q, value};
}

}  // namespace

std::vector<std::string> parse_script_completion(std::string_view text) {
    std::vector<Marker> candidates;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (i > 0 && !is_space(text[i - 1])) continue;
        if (auto m = marker_at(text, i)) {
            candidates.push_back(*m);
            i = m->end - 1;
        }
    }

    std::size_t first = candidates.size();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].value == 1) {
            first = i;
            break;
        }
    }
    if (first == candidates.size() && !candidates.empty()) first = 0;

    std::vector<Marker> chain;
    for (std::size_t i = first; i < candidates.size(); ++i) {
        if (chain.empty() || candidates[i].value == chain.back().value + 1) chain.push_back(candidates[i]);
    }
    if (chain.empty()) throw ParseError("no numbered steps in completion");

    // A new prompt block after the first step ends the script.
    std::size_t limit = text.size();
    for (std::size_t pos = text.find('\n', chain.front().end); pos != std::string_view::npos;
         pos = text.find('\n', pos + 1)) {
        std::size_t s = pos + 1;
        while (s < text.size() && (text[s] == ' ' || text[s] == '\t')) ++s;
        const auto rest = text.substr(s);
        if (starts_with_ci(rest, "Goal:") || starts_with_ci(rest, "Constraint:") ||
            starts_with_ci(rest, "Specific Goal:") || starts_with_ci(rest, "Abstract Goal:")) {
            limit = pos;
            break;
        }
    }

    std::vector<std::string> steps;
    for (std::size_t i = 0; i < chain.size() && chain[i].begin < limit; ++i) {
        const std::size_t stop =
            std::min(limit, i + 1 < chain.size() ? chain[i + 1].begin : text.size());
        std::string step = collapse_whitespace(text.substr(chain[i].end, stop - chain[i].end));
        if (!step.empty()) steps.push_back(std::move(step));
    }
    if (steps.empty()) throw ParseError("numbered markers carry no step text");
    return steps;
}

}  // namespace plandistill
