#pragma once

#include "plandistill/corpus.hpp"
#include "plandistill/text.hpp"

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace plandistill {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct RetrievalHit {
    const AbstractGoal* goal = nullptr;
    double score = 0.0;
};

// Okapi BM25 over tokenized goal titles. The index refers into the corpus it
// was built from, which must outlive it. Read-only after construction.
//
//   idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
//   score(d, q) = sum_t idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
class Bm25Index {
public:
    explicit Bm25Index(const Corpus& corpus, Bm25Params params = {});

    // Top-k by descending score, ties by ascending goal id. Every document is
    // a candidate, so fewer than k hits come back only for small corpora.
    // Throws RetrievalError when the query has no terms.
    std::vector<RetrievalHit> retrieve(const KeywordSet& query, std::size_t k) const;

    std::size_t document_count() const noexcept { return doc_lengths_.size(); }
    double average_length() const noexcept { return avgdl_; }
    std::size_t document_frequency(const std::string& term) const;
    const Bm25Params& params() const noexcept { return params_; }

private:
    struct Posting {
        std::size_t doc;
        std::size_t tf;
    };

    const Corpus* corpus_;
    Bm25Params params_;
    std::vector<std::size_t> doc_lengths_;
    double avgdl_ = 0.0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

}  // namespace plandistill
