#pragma once

#include "plandistill/corpus.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace plandistill {

enum class ConstraintType { modifier, method, intent };

inline constexpr std::array<ConstraintType, 3> kConstraintTypes = {
    ConstraintType::modifier, ConstraintType::method, ConstraintType::intent};

// "modifier" | "method" | "intent"
std::string_view to_string(ConstraintType type);
// "Modifier" | "Method" | "Intent", as it appears in prompts.
std::string_view display_name(ConstraintType type);
std::optional<ConstraintType> parse_constraint_type(std::string_view text);

struct Constraint {
    ConstraintType type = ConstraintType::modifier;
    std::string text;

    bool operator==(const Constraint&) const = default;
};

struct SpecificGoal {
    std::string id;
    std::string abstract_goal_id;
    Constraint constraint;
    std::string text;

    bool operator==(const SpecificGoal&) const = default;
};

// ---------------------------------------------------------------------------
// Example pool

struct PoolExample {
    std::string abstract_goal;
    // (constraint, specific goal)
    std::vector<std::pair<std::string, std::string>> pairs;
};

// Handpicked worked examples per constraint type. Text format: a "[type]"
// header line starts each section, then blocks of one "Abstract Goal:" line
// followed by alternating "Constraint:" / "Specific Goal:" lines.
class ExamplePool {
public:
    static const ExamplePool& builtin();
    static ExamplePool load(const std::filesystem::path& path);
    // Throws ConfigError on syntax errors or when a type has fewer than three
    // examples or an example has fewer than two pairs.
    static ExamplePool parse(std::string_view text);

    const std::vector<PoolExample>& examples(ConstraintType type) const;
    // Uniform draw without replacement; returns min(count, pool size) items
    // in draw order.
    std::vector<PoolExample> sample(ConstraintType type, std::size_t count,
                                    std::uint64_t seed) const;
    const std::string& version() const noexcept { return version_; }

private:
    std::array<std::vector<PoolExample>, 3> by_type_;
    std::string version_;
};

// ---------------------------------------------------------------------------
// Templates

// Prompt layout with {task}, {examples} and {target} placeholders. An optional
// leading "# ..." line carries the template version and is not rendered; one
// trailing newline is dropped so prompts end right at the open cue.
class PromptTemplate {
public:
    static const PromptTemplate& builtin_goal();
    static const PromptTemplate& builtin_script();
    static PromptTemplate load(const std::filesystem::path& path);
    static PromptTemplate parse(std::string_view text);

    std::string render(std::string_view task, std::string_view examples,
                       std::string_view target) const;
    const std::string& version() const noexcept { return version_; }

private:
    std::string body_;
    std::string version_;
};

// "Make a cake" -> "making a cake"
std::string gerund_phrase(std::string_view title);
// "1. s1 2. s2 ..."
std::string format_steps_inline(std::span<const std::string> steps);

std::string render_goal_prompt(const AbstractGoal& goal, ConstraintType type,
                               std::span<const PoolExample> examples,
                               const PromptTemplate& tmpl = PromptTemplate::builtin_goal());

// `parent` is the abstract goal the specific goal derives from; it names the
// activity in the task line. Examples render in the order given.
std::string render_script_prompt(const AbstractGoal& parent, const SpecificGoal& goal,
                                 std::span<const AbstractGoal> examples,
                                 const PromptTemplate& tmpl = PromptTemplate::builtin_script());

// ---------------------------------------------------------------------------
// Completion parsing

struct GoalPair {
    std::string constraint;
    std::string specific_goal;

    bool operator==(const GoalPair&) const = default;
};

struct GoalParse {
    std::vector<GoalPair> pairs;
    std::vector<std::string> diagnostics;
};

// Reads "Constraint: X; Specific Goal: Y" pairs, on one line or on two
// consecutive lines. Parsing stops at a line that opens a new
// "Abstract Goal:" block. Unpaired fragments land in diagnostics.
GoalParse parse_goal_completion(std::string_view text);

// Step markers, inline or at line start, each preceded by start of text or
// whitespace:
//
//   marker := ["Step" ws] INT ("." | ")" | ":" | "-") (ws | end)
//   marker := INT ws "-" (ws | end)
//
// The sequence starts at the first marker numbered 1 (or the first marker if
// none is) and then only accepts the next consecutive number, so figures such
// as "350." inside a step are not split. A line opening a new prompt block
// ("Goal:", "Constraint:", "Specific Goal:", "Abstract Goal:") after the first
// step ends the script. Step text is whitespace-collapsed.
// Throws ParseError when no step is found.
std::vector<std::string> parse_script_completion(std::string_view text);

}  // namespace plandistill
