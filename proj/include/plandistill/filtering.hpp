#pragma once

#include "plandistill/backend.hpp"
#include "plandistill/prompting.hpp"
#include "plandistill/text.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace plandistill {

struct CandidateScript {
    std::string goal_id;
    std::vector<std::string> steps;
    std::uint32_t sample_index = 0;
    std::string raw_text;
    std::string request_digest;
};

// Steps joined by single spaces, without their ordinal markers.
std::string script_text(const CandidateScript& candidate);

// Target goal plus distractor goals derived from the same abstract goal.
struct GoalSet {
    SpecificGoal positive;
    std::vector<SpecificGoal> negatives;
    bool degenerate = false;

    // Member 0 is the positive goal, then the negatives in order.
    std::size_t member_count() const noexcept { return 1 + negatives.size(); }
    const SpecificGoal& member(std::size_t i) const { return i == 0 ? positive : negatives[i - 1]; }
};

// Negatives are the siblings whose normalized text differs from the
// target's, deduplicated by normalized text. Throws InputError when a sibling
// belongs to another abstract goal.
GoalSet build_goal_set(const SpecificGoal& target, const std::vector<SpecificGoal>& siblings);

// True iff every keyword of the constraint occurs as a token of the script.
// An empty keyword set never hits.
bool keyword_hit(const CandidateScript& script, const Constraint& constraint,
                 const StopwordList& stopwords = StopwordList::builtin());

struct CandidateScore {
    std::uint32_t sample_index = 0;
    // One cosine per goal-set member, member 0 first.
    std::vector<double> cosines;
    bool keyword_hit = false;
    double adjusted_positive = 0.0;
    // Winning member, or nullopt when a degenerate set has no keyword hit.
    std::optional<std::size_t> argmax;
    std::string argmax_id;

    bool passes() const noexcept { return argmax && *argmax == 0; }
};

struct ScoreTable {
    std::vector<std::string> member_ids;
    bool degenerate = false;
    double delta = 0.0;
    std::vector<CandidateScore> rows;
};

// Embeds every candidate script and every goal-set member, then for each
// candidate scores cosine against all members, adds `delta` to the positive
// cosine on a keyword hit, and takes the argmax over
// {adjusted positive} and {raw negatives} (ties go to the lower member
// index). A degenerate set passes on keyword hit alone.
ScoreTable score_candidates(const std::vector<CandidateScript>& candidates, const GoalSet& goal_set,
                            Embedder& embedder, double delta,
                            const StopwordList& stopwords = StopwordList::builtin());

// The pure part of score_candidates, over precomputed vectors.
ScoreTable score_embedded(const std::vector<EmbeddingVector>& candidate_vectors,
                          const std::vector<std::uint32_t>& sample_indices,
                          const std::vector<bool>& keyword_hits,
                          const std::vector<EmbeddingVector>& member_vectors,
                          const std::vector<std::string>& member_ids, double delta);

struct FilterOutcome {
    bool accepted = false;
    // Index into the candidate list when accepted.
    std::optional<std::size_t> chosen;
    ScoreTable table;
    std::size_t passing_count = 0;
    // Seeded draw among passing candidates, recorded when more than one passed.
    std::optional<std::size_t> tie_random_draw;
};

FilterOutcome select_script(const std::vector<CandidateScript>& candidates, ScoreTable table,
                            std::uint64_t rng_seed);

}  // namespace plandistill
