#include "plandistill/filtering.hpp"

#include "plandistill/error.hpp"
#include "plandistill/random.hpp"

#include <unordered_set>

namespace plandistill {

std::string script_text(const CandidateScript& candidate) {
    std::string out;
    for (const auto& s : candidate.steps) {
        if (!out.empty()) out.push_back(' ');
        out += s;
    }
    return out;
}

GoalSet build_goal_set(const SpecificGoal& target, const std::vector<SpecificGoal>& siblings) {
    GoalSet set{target, {}, false};
    std::unordered_set<std::string> seen{normalize_goal_text(target.text)};
    for (const auto& s : siblings) {
        if (s.abstract_goal_id != target.abstract_goal_id) {
            throw InputError("goal set: sibling '" + s.id + "' belongs to abstract goal '" +
                             s.abstract_goal_id + "', not '" + target.abstract_goal_id + "'");
        }
        if (seen.insert(normalize_goal_text(s.text)).second) set.negatives.push_back(s);
    }
    set.degenerate = set.negatives.empty();
    return set;
}

bool keyword_hit(const CandidateScript& script, const Constraint& constraint,
                 const StopwordList& stopwords) {
    const KeywordSet keys = extract_keywords(constraint.text, stopwords);
    if (keys.empty()) return false;
    std::unordered_set<std::string> tokens;
    for (const auto& step : script.steps) {
        for (auto& t : tokenize(step)) tokens.insert(std::move(t));
    }
    for (const auto& k : keys.keywords) {
        if (!tokens.count(k)) return false;
    }
    return true;
}

ScoreTable score_embedded(const std::vector<EmbeddingVector>& candidate_vectors,
                          const std::vector<std::uint32_t>& sample_indices,
                          const std::vector<bool>& keyword_hits,
                          const std::vector<EmbeddingVector>& member_vectors,
                          const std::vector<std::string>& member_ids, double delta) {
    if (candidate_vectors.empty()) throw InputError("score: no candidates");
    if (member_vectors.empty()) throw InputError("score: empty goal set");
    if (!(delta >= 0.0)) throw InputError("score: delta must be >= 0");
    if (sample_indices.size() != candidate_vectors.size() ||
        keyword_hits.size() != candidate_vectors.size() || member_ids.size() != member_vectors.size()) {
        throw InputError("score: inconsistent input sizes");
    }

    ScoreTable table;
    table.member_ids = member_ids;
    table.degenerate = member_vectors.size() == 1;
    table.delta = delta;
    for (std::size_t c = 0; c < candidate_vectors.size(); ++c) {
        CandidateScore row;
        row.sample_index = sample_indices[c];
        row.keyword_hit = keyword_hits[c];
        for (const auto& m : member_vectors) row.cosines.push_back(cosine(candidate_vectors[c], m));
        row.adjusted_positive = row.cosines[0] + (row.keyword_hit ? delta : 0.0);

        if (table.degenerate) {
            if (row.keyword_hit) row.argmax = 0;
        } else {
            std::size_t best = 0;
            double best_score = row.adjusted_positive;
            for (std::size_t m = 1; m < row.cosines.size(); ++m) {
                if (row.cosines[m] > best_score) {
                    best = m;
                    best_score = row.cosines[m];
                }
            }
            row.argmax = best;
        }
        if (row.argmax) row.argmax_id = member_ids[*row.argmax];
        table.rows.push_back(std::move(row));
    }
    return table;
}

ScoreTable score_candidates(const std::vector<CandidateScript>& candidates, const GoalSet& goal_set,
                            Embedder& embedder, double delta, const StopwordList& stopwords) {
    if (candidates.empty()) throw InputError("score: no candidates");
    std::vector<std::string> texts;
    std::vector<std::uint32_t> indices;
    std::vector<bool> hits;
    for (const auto& c : candidates) {
        texts.push_back(script_text(c));
        indices.push_back(c.sample_index);
        hits.push_back(keyword_hit(c, goal_set.positive.constraint, stopwords));
    }
    std::vector<std::string> member_ids;
    for (std::size_t m = 0; m < goal_set.member_count(); ++m) {
        texts.push_back(goal_set.member(m).text);
        member_ids.push_back(goal_set.member(m).id);
    }

    auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size()) throw BackendError("embedder returned the wrong count", 200, 1);
    std::vector<EmbeddingVector> candidate_vectors(vectors.begin(),
                                                   vectors.begin() + static_cast<std::ptrdiff_t>(candidates.size()));
    std::vector<EmbeddingVector> member_vectors(vectors.begin() + static_cast<std::ptrdiff_t>(candidates.size()),
                                                vectors.end());
    return score_embedded(candidate_vectors, indices, hits, member_vectors, member_ids, delta);
}

FilterOutcome select_script(const std::vector<CandidateScript>& candidates, ScoreTable table,
                            std::uint64_t rng_seed) {
    if (table.rows.size() != candidates.size()) {
        throw InputError("select: score table does not cover every candidate");
    }
    FilterOutcome out;
    std::vector<std::size_t> passing;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i].passes()) passing.push_back(i);
    }
    out.passing_count = passing.size();
    if (passing.size() == 1) {
        out.chosen = passing[0];
    } else if (passing.size() > 1) {
        Rng rng(rng_seed);
        const std::size_t draw = rng.bounded(passing.size());
        out.tie_random_draw = draw;
        out.chosen = passing[draw];
    }
    out.accepted = out.chosen.has_value();
    out.table = std::move(table);
    return out;
}

}  // namespace plandistill
