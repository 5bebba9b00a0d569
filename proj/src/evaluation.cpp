#include "plandistill/evaluation.hpp"

#include "plandistill/error.hpp"
#include "plandistill/log.hpp"
#include "plandistill/text.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace plandistill {

using nlohmann::json;

namespace {

using NgramCounts = std::map<Tokens, std::size_t>;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
    NgramCounts out;
    if (t.size() < n) return out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
    return out;
}

std::string join_steps(const std::vector<std::string>& steps) {
    std::string s;
    for (const auto& step : steps) {
        if (!s.empty()) s += ' ';
        s += step;
    }
    return s;
}

}  // namespace

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference, double beta) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const std::size_t lcs = lcs_length(candidate, reference);
    if (lcs == 0) return 0.0;
    const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
    const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
    const double b2 = beta * beta;
    return (1.0 + b2) * p * r / (r + b2 * p);
}

double bleu(const Tokens& candidate, const std::vector<Tokens>& references, int max_n, BleuSmoothing smoothing) {
    if (max_n < 1) throw InputError("bleu: max_n must be at least 1");
    if (candidate.empty() || references.empty()) return 0.0;

    double log_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        const auto cand = ngrams(candidate, static_cast<std::size_t>(n));
        NgramCounts max_ref;
        for (const auto& ref : references) {
            for (const auto& [g, c] : ngrams(ref, static_cast<std::size_t>(n))) {
                auto& m = max_ref[g];
                m = std::max(m, c);
            }
        }
        std::size_t matched = 0, total = 0;
        for (const auto& [g, c] : cand) {
            total += c;
            auto it = max_ref.find(g);
            if (it != max_ref.end()) matched += std::min(c, it->second);
        }
        double num = static_cast<double>(matched);
        double den = static_cast<double>(total);
        if (smoothing == BleuSmoothing::add_one && n >= 2) {
            num += 1.0;
            den += 1.0;
        }
        if (num == 0.0 || den == 0.0) return 0.0;
        log_sum += std::log(num / den);
    }

    const std::size_t c = candidate.size();
    std::size_t r = references.front().size();
    for (const auto& ref : references) {
        const auto d = [c](std::size_t len) { return len > c ? len - c : c - len; };
        if (d(ref.size()) < d(r) || (d(ref.size()) == d(r) && ref.size() < r)) r = ref.size();
    }
    const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
    return bp * std::exp(log_sum / max_n);
}

Faithfulness faithfulness_score(const DatasetRecord& record, const std::vector<SpecificGoal>& siblings,
                                Embedder& embedder) {
    const std::string own = normalize_goal_text(record.specific_goal);
    std::vector<std::string> texts = {join_steps(record.steps), record.specific_goal};
    std::set<std::string> seen = {own};
    for (const auto& s : siblings) {
        if (seen.insert(normalize_goal_text(s.text)).second) texts.push_back(s.text);
    }
    const auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size()) throw BackendError("embedder returned the wrong vector count", 0, 0);

    Faithfulness out;
    const double own_cos = cosine(vectors[0], vectors[1]);
    out.score = std::clamp((own_cos + 1.0) / 2.0, 0.0, 1.0);
    out.degenerate = texts.size() == 2;
    out.label = true;
    for (std::size_t i = 2; i < vectors.size(); ++i) {
        if (cosine(vectors[0], vectors[i]) > own_cos) out.label = false;
    }
    return out;
}

ConstraintDistribution constraint_distribution(const std::vector<DatasetRecord>& dataset) {
    ConstraintDistribution d;
    for (const auto& r : dataset) {
        ++d.per_type[static_cast<std::size_t>(r.constraint_type)];
        const auto tokens = tokenize(r.constraint);
        if (!tokens.empty()) ++d.first_words[tokens.front()];
    }
    return d;
}

DatasetStats dataset_stats(const std::vector<DatasetRecord>& dataset) {
    DatasetStats s;
    s.size = dataset.size();
    s.tokenizer_version = std::string(kTokenizerVersion);
    std::set<std::string> vocab;
    std::set<std::string> abstracts;
    std::size_t steps = 0;
    for (const auto& r : dataset) {
        abstracts.insert(r.abstract_goal);
        steps += r.steps.size();
        for (auto& t : tokenize(r.specific_goal)) vocab.insert(std::move(t));
        for (const auto& step : r.steps) {
            for (auto& t : tokenize(step)) vocab.insert(std::move(t));
        }
    }
    s.unique_tokens = vocab.size();
    s.abstract_goals = abstracts.size();
    if (s.size > 0) {
        s.avg_steps = static_cast<double>(steps) / static_cast<double>(s.size);
        s.avg_specific_per_abstract = static_cast<double>(s.size) / static_cast<double>(abstracts.size());
    }
    s.distribution = constraint_distribution(dataset);
    return s;
}

std::string format_stats(const DatasetStats& s) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "size: " << s.size << '\n'
        << "abstract_goals: " << s.abstract_goals << '\n'
        << "unique_tokens: " << s.unique_tokens << " (tokenizer " << s.tokenizer_version << ")\n"
        << "avg_specific_per_abstract: " << s.avg_specific_per_abstract << '\n'
        << "avg_steps: " << s.avg_steps << '\n'
        << "constraint_types:\n";
    for (auto t : kConstraintTypes) {
        out << "  " << to_string(t) << ": " << s.distribution.per_type[static_cast<std::size_t>(t)] << '\n';
    }
    std::vector<std::pair<std::string, std::size_t>> words(s.distribution.first_words.begin(),
                                                           s.distribution.first_words.end());
    std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    out << "constraint_first_words:\n";
    for (const auto& [w, n] : words) out << "  " << w << ": " << n << '\n';
    return out.str();
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read predictions " + path.string());
    std::vector<Prediction> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        const json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw LoadError(n, "record", "not a JSON object");
        auto goal = obj.find("specific_goal");
        if (goal == obj.end() || !goal->is_string()) throw LoadError(n, "specific_goal", "missing or not a string");
        auto steps = obj.find("steps");
        if (steps == obj.end() || !steps->is_array()) throw LoadError(n, "steps", "expected an array of strings");
        Prediction p;
        p.specific_goal = goal->get<std::string>();
        for (const auto& s : *steps) {
            if (!s.is_string()) throw LoadError(n, "steps", "expected an array of strings");
            p.steps.push_back(s.get<std::string>());
        }
        out.push_back(std::move(p));
    }
    return out;
}

EvalSummary evaluate_predictions(const std::vector<Prediction>& predictions,
                                 const std::vector<DatasetRecord>& reference, BleuSmoothing smoothing) {
    std::unordered_map<std::string, const DatasetRecord*> by_goal;
    for (const auto& r : reference) by_goal.try_emplace(normalize_goal_text(r.specific_goal), &r);

    EvalSummary out;
    double rouge_sum = 0.0, bleu_sum = 0.0;
    for (const auto& p : predictions) {
        PredictionResult res;
        res.specific_goal = p.specific_goal;
        auto it = by_goal.find(normalize_goal_text(p.specific_goal));
        if (it == by_goal.end()) {
            log::warn("no reference for prediction '" + p.specific_goal + "'");
        } else {
            const Tokens cand = tokenize(join_steps(p.steps));
            const Tokens ref = tokenize(join_steps(it->second->steps));
            res.matched = true;
            res.metrics.rouge_l = rouge_l(cand, ref);
            res.metrics.bleu = bleu(cand, {ref}, 4, smoothing);
            rouge_sum += *res.metrics.rouge_l;
            bleu_sum += *res.metrics.bleu;
            ++out.matched;
        }
        out.results.push_back(std::move(res));
    }
    if (out.matched > 0) {
        out.mean.rouge_l = rouge_sum / static_cast<double>(out.matched);
        out.mean.bleu = bleu_sum / static_cast<double>(out.matched);
    }
    return out;
}

std::string serialize_metric_report(const MetricReport& r) {
    nlohmann::ordered_json obj;
    const auto put = [&](const char* key, const std::optional<double>& v) {
        obj[key] = v ? json(*v) : json(nullptr);
    };
    put("rouge_l", r.rouge_l);
    put("bleu", r.bleu);
    put("faithfulness", r.faithfulness);
    return obj.dump();
}

}  // namespace plandistill
