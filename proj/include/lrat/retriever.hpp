#pragma once

#include <memory>
#include <string_view>
#include <variant>
#include <vector>

#include "corpus.hpp"
#include "encoder.hpp"
#include "trajectory.hpp"

namespace lrat {

struct Bm25Retriever {
    std::shared_ptr<const Corpus> corpus;
    std::shared_ptr<const Bm25Index> index;
};

struct DenseRetriever {
    std::shared_ptr<const Corpus> corpus;
    std::shared_ptr<const EncoderParams> params;
    std::vector<Embedding> doc_vectors;  // one per corpus position
    std::size_t max_tokens = 512;
};

using RetrieverHandle = std::variant<Bm25Retriever, DenseRetriever>;

inline RetrieverHandle make_bm25_retriever(std::shared_ptr<const Corpus> corpus, Bm25Params params = {}) {
    auto index = std::make_shared<const Bm25Index>(*corpus, params);
    return Bm25Retriever{std::move(corpus), std::move(index)};
}

/// Precomputes one embedding per corpus document.
inline RetrieverHandle export_dense_retriever(std::shared_ptr<const EncoderParams> params, std::shared_ptr<const Corpus> corpus,
                                             std::size_t max_tokens = 512) {
    if (!corpus || corpus->empty()) throw InputError("cannot export a dense retriever over an empty corpus");
    DenseRetriever r{std::move(corpus), std::move(params), {}, max_tokens};
    r.doc_vectors.reserve(r.corpus->size());
    for (const auto& d : r.corpus->documents()) r.doc_vectors.push_back(encode_text(*r.params, d.indexed_text(), max_tokens));
    return r;
}

inline const Corpus& retriever_corpus(const RetrieverHandle& r) {
    return std::visit([](const auto& h) -> const Corpus& { return *h.corpus; }, r);
}

/// Scored top-k. BM25 drops zero-score documents; dense ranks every document
/// with a nonzero vector by cosine, and returns nothing for an empty query.
inline std::vector<ScoredDoc> search_scored(const RetrieverHandle& r, std::string_view query, std::size_t k) {
    if (k == 0) throw InputError("k must be positive");
    if (const auto* bm25 = std::get_if<Bm25Retriever>(&r)) return bm25->index->search(query, k);
    const auto& dense = std::get<DenseRetriever>(r);
    const Embedding q = encode_text(*dense.params, query, dense.max_tokens);
    std::vector<ScoredDoc> scored;
    if (!q.unit) return scored;
    scored.reserve(dense.doc_vectors.size());
    for (std::size_t pos = 0; pos < dense.doc_vectors.size(); ++pos) {
        if (!dense.doc_vectors[pos].unit) continue;
        scored.push_back({pos, similarity(q, dense.doc_vectors[pos])});
    }
    const Corpus& corpus = *dense.corpus;
    const auto by_id = [&](std::size_t pos) -> const std::string& { return corpus.at(pos).doc_id; };
    if (scored.size() > k) {
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                          [&](const ScoredDoc& a, const ScoredDoc& b) {
                              if (a.score != b.score) return a.score > b.score;
                              return by_id(a.position) < by_id(b.position);
                          });
        scored.resize(k);
    } else {
        rank_scored(scored, by_id);
    }
    return scored;
}

/// Ranked result list with 1-based ranks and token-prefix snippets.
inline std::vector<SearchResultItem> search_topk(const RetrieverHandle& r, std::string_view query, std::size_t k,
                                                 std::size_t snippet_tokens = 64) {
    const Corpus& corpus = retriever_corpus(r);
    std::vector<SearchResultItem> items;
    for (const auto& s : search_scored(r, query, k)) {
        const Document& d = corpus.at(s.position);
        items.push_back({d.doc_id, items.size() + 1, make_snippet(d, snippet_tokens)});
    }
    return items;
}

}  // namespace lrat
