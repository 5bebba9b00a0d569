#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace plandistill {

// A seed goal with its reference script.
struct AbstractGoal {
    std::string id;
    std::string title;
    std::vector<std::string> steps;
    std::string category;

    bool operator==(const AbstractGoal&) const = default;
};

// Ordered, id-unique collection of seed goals. Immutable once built.
class Corpus {
public:
    Corpus() = default;
    // Throws InputError on a duplicate id or an invalid goal.
    explicit Corpus(std::vector<AbstractGoal> goals);

    std::size_t size() const noexcept { return goals_.size(); }
    bool empty() const noexcept { return goals_.empty(); }
    const AbstractGoal& operator[](std::size_t i) const { return goals_[i]; }
    std::span<const AbstractGoal> goals() const noexcept { return goals_; }
    const AbstractGoal* find(std::string_view id) const;

    auto begin() const noexcept { return goals_.begin(); }
    auto end() const noexcept { return goals_.end(); }

private:
    std::vector<AbstractGoal> goals_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// Reads the seed corpus: one JSON object per line with "id" (optional,
// defaults to the 1-based line number), "title", "steps" and "category"
// (optional). Blank lines are skipped.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::istream& in);

// One line per goal, fields in the order id, title, steps, category.
std::string serialize_goal(const AbstractGoal& goal);
void write_corpus(std::ostream& out, const Corpus& corpus);

}  // namespace plandistill
