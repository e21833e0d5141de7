#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace lrat {

struct Document {
    std::string doc_id;
    std::string title;
    std::string text;

    /// Title and body as one retrievable string.
    std::string indexed_text() const { return title.empty() ? text : title + "\n" + text; }

    friend bool operator==(const Document&, const Document&) = default;
};

class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
        lookup_.reserve(documents_.size());
        for (std::size_t i = 0; i < documents_.size(); ++i) {
            const auto& d = documents_[i];
            if (d.doc_id.empty()) throw InputError("document at position " + std::to_string(i) + " has an empty doc_id");
            if (trim(d.text).empty()) throw InputError("document " + d.doc_id + " has empty text");
            if (!lookup_.emplace(d.doc_id, i).second) throw InputError("duplicate doc_id " + d.doc_id);
        }
    }

    std::size_t size() const { return documents_.size(); }
    bool empty() const { return documents_.empty(); }
    const std::vector<Document>& documents() const { return documents_; }
    const Document& at(std::size_t position) const { return documents_.at(position); }

    std::optional<std::size_t> position(std::string_view doc_id) const {
        auto it = lookup_.find(std::string(doc_id));
        if (it == lookup_.end()) return std::nullopt;
        return it->second;
    }

    const Document* find(std::string_view doc_id) const {
        const auto pos = position(doc_id);
        return pos ? &documents_[*pos] : nullptr;
    }

private:
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

inline Corpus parse_corpus(std::istream& in) {
    std::vector<Document> docs;
    for_each_json_line(in, [&](std::size_t line, const Json& j) {
        docs.push_back({field::string_at(j, "doc_id", line, ""), field::string_at(j, "title", line, ""),
                        field::string_at(j, "text", line, "")});
    });
    return Corpus(std::move(docs));
}

inline Corpus load_corpus(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_corpus(in);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& d : corpus.documents()) {
        Json j;
        j["doc_id"] = d.doc_id;
        j["title"] = d.title;
        j["text"] = d.text;
        out << dump_line(j) << '\n';
    }
}

/// Snippet shown in result lists: the prefix of the document text covering
/// its first `budget` tokens.
inline std::string make_snippet(const Document& d, std::size_t budget = 64) { return token_prefix(d.text, budget); }

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t doc = 0;  // corpus position
    std::uint32_t tf = 0;
};

struct ScoredDoc {
    std::size_t position = 0;
    double score = 0.0;
};

/// Orders by descending score, then ascending doc_id.
template <typename IdOf>
void rank_scored(std::vector<ScoredDoc>& scored, IdOf&& id_of) {
    std::sort(scored.begin(), scored.end(), [&](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return id_of(a.position) < id_of(b.position);
    });
}

/// Okapi BM25 over an in-memory inverted index:
///   score(q, d) = sum over query tokens t of
///       idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avglen))
///   idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
/// Repeated query tokens contribute once per occurrence.
class Bm25Index {
public:
    Bm25Index(const Corpus& corpus, Bm25Params params = {}) : params_(params) {
        if (corpus.empty()) throw InputError("cannot index an empty corpus");
        if (!(params.k1 > 0.0)) throw InputError("bm25 k1 must be positive");
        if (!(params.b >= 0.0 && params.b <= 1.0)) throw InputError("bm25 b must be in [0, 1]");
        doc_ids_.reserve(corpus.size());
        doc_lengths_.reserve(corpus.size());
        std::uint64_t total = 0;
        for (std::size_t pos = 0; pos < corpus.size(); ++pos) {
            const auto& doc = corpus.at(pos);
            doc_ids_.push_back(doc.doc_id);
            const auto tokens = tokenize(doc.indexed_text());
            doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
            total += tokens.size();
            std::unordered_map<std::string, std::uint32_t> tf;
            for (const auto& tok : tokens) ++tf[tok];
            // Map iteration order is unspecified; sort terms so postings are
            // built identically every time.
            std::vector<std::pair<std::string, std::uint32_t>> terms(tf.begin(), tf.end());
            std::sort(terms.begin(), terms.end());
            for (auto& [term, count] : terms) {
                postings_[term].push_back({static_cast<std::uint32_t>(pos), count});
            }
        }
        total_length_ = total;
        average_length_ = static_cast<double>(total) / static_cast<double>(corpus.size());
    }

    const Bm25Params& params() const { return params_; }
    std::size_t size() const { return doc_ids_.size(); }
    double average_length() const { return average_length_; }
    std::uint64_t total_length() const { return total_length_; }
    std::uint32_t doc_length(std::size_t pos) const { return doc_lengths_.at(pos); }
    const std::string& doc_id(std::size_t pos) const { return doc_ids_.at(pos); }
    std::size_t vocabulary_size() const { return postings_.size(); }

    const std::vector<Posting>* postings(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? nullptr : &it->second;
    }

    std::size_t document_frequency(const std::string& term) const {
        const auto* p = postings(term);
        return p ? p->size() : 0;
    }

    double idf(const std::string& term) const {
        const double n = static_cast<double>(doc_ids_.size());
        const double df = static_cast<double>(document_frequency(term));
        return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    }

    /// Scores of every document with a positive score, unordered.
    std::vector<ScoredDoc> score(std::string_view query) const {
        std::vector<double> acc(doc_ids_.size(), 0.0);
        std::vector<char> touched(doc_ids_.size(), 0);
        for (const auto& term : tokenize(query)) {
            const auto* list = postings(term);
            if (!list) continue;
            const double w = idf(term);
            for (const auto& p : *list) {
                const double tf = p.tf;
                const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_lengths_[p.doc] / average_length_);
                acc[p.doc] += w * tf * (params_.k1 + 1.0) / (tf + norm);
                touched[p.doc] = 1;
            }
        }
        std::vector<ScoredDoc> out;
        for (std::size_t pos = 0; pos < acc.size(); ++pos) {
            if (touched[pos] && acc[pos] > 0.0) out.push_back({pos, acc[pos]});
        }
        return out;
    }

    /// Top-k positions by score with the doc_id tie-break; zero scores excluded.
    std::vector<ScoredDoc> search(std::string_view query, std::size_t k) const {
        if (k == 0) throw InputError("k must be positive");
        auto scored = score(query);
        rank_scored(scored, [&](std::size_t pos) -> const std::string& { return doc_ids_[pos]; });
        if (scored.size() > k) scored.resize(k);
        return scored;
    }

private:
    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::uint64_t total_length_ = 0;
    double average_length_ = 0.0;
};

inline Bm25Index build_index(const Corpus& corpus, double k1 = 1.2, double b = 0.75) { return Bm25Index(corpus, {k1, b}); }

}  // namespace lrat
