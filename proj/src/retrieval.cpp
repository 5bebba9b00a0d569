#include "plandistill/retrieval.hpp"

#include "plandistill/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace plandistill {

Bm25Index::Bm25Index(const Corpus& corpus, Bm25Params params)
    : corpus_(&corpus), params_(params) {
    if (!(params_.k1 > 0.0)) throw InputError("bm25: k1 must be positive");
    if (!(params_.b >= 0.0 && params_.b <= 1.0)) throw InputError("bm25: b must lie in [0, 1]");

    doc_lengths_.reserve(corpus.size());
    double total = 0.0;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const auto tokens = tokenize(corpus[d].title);
        doc_lengths_.push_back(tokens.size());
        total += static_cast<double>(tokens.size());

        std::map<std::string, std::size_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (auto& [term, n] : tf) postings_[term].push_back({d, n});
    }
    avgdl_ = corpus.empty() ? 0.0 : total / static_cast<double>(corpus.size());
}

std::size_t Bm25Index::document_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

std::vector<RetrievalHit> Bm25Index::retrieve(const KeywordSet& query, std::size_t k) const {
    if (query.empty()) throw RetrievalError("retrieval query has no terms");
    if (k == 0) throw InputError("retrieval: k must be at least 1");

    const double n_docs = static_cast<double>(doc_lengths_.size());
    std::vector<double> scores(doc_lengths_.size(), 0.0);
    for (const auto& term : query.keywords) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& p : it->second) {
            const double tf = static_cast<double>(p.tf);
            const double norm =
                1.0 - params_.b +
                params_.b * static_cast<double>(doc_lengths_[p.doc]) / avgdl_;
            scores[p.doc] += idf * (tf * (params_.k1 + 1.0)) / (tf + params_.k1 * norm);
        }
    }

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return (*corpus_)[a].id < (*corpus_)[b].id;
    };
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), better);

    std::vector<RetrievalHit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) hits.push_back({&(*corpus_)[order[i]], scores[order[i]]});
    return hits;
}

}  // namespace plandistill
