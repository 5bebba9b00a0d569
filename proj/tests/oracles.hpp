#pragma once

// Straight-from-definition reference implementations used to cross-check the
// library. They share nothing with it beyond the tokenizer and the types.

#include "plandistill/corpus.hpp"
#include "plandistill/random.hpp"
#include "plandistill/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline std::filesystem::path source_dir() { return PD_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }

// Scores every document directly and sorts by (score desc, id asc).
inline std::vector<std::string> bm25_rank(const plandistill::Corpus& corpus,
                                          const std::vector<std::string>& query, std::size_t k,
                                          double k1 = 1.2, double b = 0.75) {
    std::vector<std::vector<std::string>> docs;
    for (const auto& g : corpus) docs.push_back(plandistill::tokenize(g.title));
    const double n = static_cast<double>(docs.size());
    double total = 0.0;
    for (const auto& d : docs) total += static_cast<double>(d.size());
    const double avgdl = docs.empty() ? 0.0 : total / n;

    std::vector<std::pair<double, std::string>> scored;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0.0;
        for (const auto& q : query) {
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), q));
            if (tf == 0.0) continue;
            double df = 0.0;
            for (const auto& d : docs) df += std::find(d.begin(), d.end(), q) != d.end() ? 1.0 : 0.0;
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double norm = 1.0 - b + b * static_cast<double>(docs[i].size()) / avgdl;
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * norm);
        }
        scored.emplace_back(score, corpus[i].id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) ids.push_back(scored[i].second);
    return ids;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// A candidate passes when its boosted positive cosine is at least every
// negative cosine. A set without negatives passes on keyword hit alone.
inline bool filter_passes(const std::vector<double>& script, const std::vector<std::vector<double>>& members,
                          bool hit, double delta) {
    if (members.size() == 1) return hit;
    const double pos = cosine(script, members[0]) + (hit ? delta : 0.0);
    for (std::size_t m = 1; m < members.size(); ++m) {
        if (cosine(script, members[m]) > pos) return false;
    }
    return true;
}

inline std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = a.size(); i-- > 0;) {
        for (std::size_t j = b.size(); j-- > 0;) {
            t[i][j] = a[i] == b[j] ? 1 + t[i + 1][j + 1] : std::max(t[i + 1][j], t[i][j + 1]);
        }
    }
    return t[0][0];
}

inline double rouge_l_f1(const std::vector<std::string>& c, const std::vector<std::string>& r) {
    if (c.empty() || r.empty()) return 0.0;
    const double l = static_cast<double>(lcs(c, r));
    if (l == 0.0) return 0.0;
    const double p = l / static_cast<double>(c.size());
    const double rec = l / static_cast<double>(r.size());
    return 2.0 * p * rec / (p + rec);
}

inline std::map<std::string, int> ngram_counts(const std::vector<std::string>& t, std::size_t n) {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
        std::string key;
        for (std::size_t j = i; j < i + n; ++j) key += t[j] + '\x1f';
        ++out[key];
    }
    return out;
}

inline double bleu(const std::vector<std::string>& c, const std::vector<std::vector<std::string>>& refs,
                   int max_n = 4) {
    if (c.empty()) return 0.0;
    double product = 1.0;
    for (int n = 1; n <= max_n; ++n) {
        const auto cc = ngram_counts(c, static_cast<std::size_t>(n));
        int clipped = 0, total = 0;
        for (const auto& [g, k] : cc) {
            int best = 0;
            for (const auto& r : refs) {
                const auto rc = ngram_counts(r, static_cast<std::size_t>(n));
                auto it = rc.find(g);
                if (it != rc.end()) best = std::max(best, it->second);
            }
            clipped += std::min(k, best);
            total += k;
        }
        if (total == 0 || clipped == 0) return 0.0;
        product *= static_cast<double>(clipped) / total;
    }
    const double c_len = static_cast<double>(c.size());
    double r_len = static_cast<double>(refs[0].size());
    for (const auto& r : refs) {
        const double len = static_cast<double>(r.size());
        if (std::abs(len - c_len) < std::abs(r_len - c_len) ||
            (std::abs(len - c_len) == std::abs(r_len - c_len) && len < r_len)) {
            r_len = len;
        }
    }
    const double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
    return bp * std::pow(product, 1.0 / max_n);
}

// Step lists with figures, punctuation and step-like words that a marker
// parser must not split on.
inline std::vector<std::string> random_steps(plandistill::Rng& rng) {
    static const std::vector<std::string> words = {
        "Preheat", "the", "oven", "to", "350", "degrees.", "Add", "2.5", "cups", "of", "flour;", "mix",
        "well", "(about", "3", "minutes)", "step", "1-2", "x", "Goal", "don't", "sugar-free", "bake:",
        "10-15", "pans", "crème", "brûlée", "Steps", "#4", "and", "then", "wait.", "12:30", "A-1"};
    std::vector<std::string> steps(1 + rng.bounded(8));
    for (auto& s : steps) {
        const std::size_t len = 1 + rng.bounded(9);
        std::string word;
        for (std::size_t w = 0; w < len; ++w) {
            if (w) s += ' ';
            word = words[rng.bounded(words.size())];
            // A trailing "step" would read as "step 2." with the next marker.
            while (w + 1 == len && word == "step") word = words[rng.bounded(words.size())];
            s += word;
        }
    }
    return steps;
}

}  // namespace oracle
