#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "encoder.hpp"
#include "error.hpp"
#include "hash.hpp"
#include "weighting.hpp"

namespace lrat {

struct TrainConfig {
    double tau = 0.02;
    std::size_t group_size = 10;  // 1 positive + group_size-1 trajectory negatives
    double learning_rate = 3e-4;
    std::size_t epochs = 2;
    std::size_t batch_size = 32;
    std::size_t max_tokens = 512;
    std::uint64_t seed = 2025;
    bool use_in_batch_negatives = true;

    void check() const {
        if (!(tau > 0.0)) throw InputError("tau must be positive");
        if (group_size < 2) throw InputError("group_size must be at least 2");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InputError("learning_rate must be a nonnegative number");
        if (epochs == 0) throw InputError("epochs must be positive");
        if (batch_size == 0) throw InputError("batch_size must be positive");
        if (max_tokens == 0) throw InputError("max_tokens must be positive");
    }
};

/// Hashed feature ids of one text, truncated to max_tokens.
struct EncodedText {
    std::string doc_id;
    std::vector<std::uint32_t> ids;
};

struct TrainingSample {
    EncodedText query;
    EncodedText positive;
    std::vector<EncodedText> negatives;  // trajectory negatives, then padding
    double weight = 1.0;
    std::size_t instance_index = 0;      // reduction order key
    std::size_t padded = 0;              // negatives drawn from the corpus
};

struct TrainingBatch {
    std::size_t id = 0;
    std::vector<TrainingSample> samples;
};

/// Builds the fixed part of one training sample. Trajectory negatives beyond
/// group_size-1 are truncated in rank order; short groups are padded with
/// corpus documents drawn from (seed, instance_index).
inline TrainingSample make_sample(const EncoderParams& params, const WeightedPair& pair, std::size_t instance_index, const TrainConfig& cfg,
                                  const Corpus* padding_corpus) {
    const auto& inst = pair.instance;
    TrainingSample s;
    s.query = {"", feature_ids(params, inst.query, cfg.max_tokens)};
    s.positive = {inst.positive.item.doc_id, feature_ids(params, inst.positive.document.indexed_text(), cfg.max_tokens)};
    s.weight = pair.weight;
    s.instance_index = instance_index;
    const std::size_t want = cfg.group_size - 1;
    std::set<std::string> used{inst.positive.item.doc_id};
    for (const auto& n : inst.negatives) {
        if (s.negatives.size() == want) break;
        if (!used.insert(n.item.doc_id).second) continue;
        s.negatives.push_back({n.item.doc_id, feature_ids(params, n.document.indexed_text(), cfg.max_tokens)});
    }
    if (s.negatives.size() < want) {
        if (!padding_corpus || padding_corpus->size() < want + 1) {
            throw InputError("instance " + std::to_string(instance_index) + " needs " + std::to_string(want - s.negatives.size()) +
                             " padding negatives but no large enough corpus was given");
        }
        Rng rng(mix_seed(cfg.seed, 0x70616464ULL, instance_index));
        std::size_t guard = 0;
        while (s.negatives.size() < want && guard++ < 64 * (want + 1)) {
            const Document& d = padding_corpus->at(rng.below(padding_corpus->size()));
            if (!used.insert(d.doc_id).second) continue;
            s.negatives.push_back({d.doc_id, feature_ids(params, d.indexed_text(), cfg.max_tokens)});
            ++s.padded;
        }
        for (std::size_t pos = 0; s.negatives.size() < want && pos < padding_corpus->size(); ++pos) {
            const Document& d = padding_corpus->at(pos);
            if (!used.insert(d.doc_id).second) continue;
            s.negatives.push_back({d.doc_id, feature_ids(params, d.indexed_text(), cfg.max_tokens)});
            ++s.padded;
        }
    }
    return s;
}

/// Sparse gradient: only rows of features present in the batch.
using SparseGradient = std::map<std::uint32_t, std::vector<double>>;

struct LossResult {
    double loss = 0.0;
    std::vector<double> per_sample;  // weighted terms w_i * l_i, in batch order
};

namespace detail {

// Candidate documents of sample i: positive first, then trajectory negatives,
// then other samples' positives in ascending instance order.
inline std::vector<const EncodedText*> candidates(const TrainingBatch& batch, std::size_t i, const TrainConfig& cfg,
                                                  const std::vector<std::size_t>& order) {
    const TrainingSample& s = batch.samples[i];
    std::vector<const EncodedText*> out;
    out.push_back(&s.positive);
    for (const auto& n : s.negatives) out.push_back(&n);
    if (cfg.use_in_batch_negatives) {
        for (std::size_t k : order) {
            if (k == i) continue;
            const auto& other = batch.samples[k].positive;
            if (!other.doc_id.empty() && other.doc_id == s.positive.doc_id) continue;
            out.push_back(&other);
        }
    }
    return out;
}

inline std::vector<std::size_t> reduction_order(const TrainingBatch& batch) {
    std::vector<std::size_t> order(batch.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return batch.samples[a].instance_index < batch.samples[b].instance_index; });
    return order;
}

struct SampleState {
    Embedding query;
    std::vector<Embedding> docs;
    std::vector<double> probs;
    double term = 0.0;  // w * (logsumexp(z) - z_pos)
};

inline SampleState forward_sample(const EncoderParams& params, const TrainingSample& s, const std::vector<const EncodedText*>& cands,
                                  const TrainConfig& cfg) {
    SampleState st;
    st.query = encode(params, s.query.ids);
    std::vector<double> z;
    z.reserve(cands.size());
    for (const auto* c : cands) {
        st.docs.push_back(encode(params, c->ids));
        z.push_back(similarity(st.query, st.docs.back()) / cfg.tau);
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - zmax);
    const double lse = zmax + std::log(denom);
    st.probs.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) st.probs[j] = std::exp(z[j] - lse);
    st.term = s.weight * (lse - z[0]);
    return st;
}

inline void add_to_rows(SparseGradient& grad, const std::vector<std::uint32_t>& ids, const std::vector<double>& g) {
    for (std::uint32_t id : ids) {
        auto& row = grad[id];
        if (row.empty()) row.assign(g.size(), 0.0);
        for (std::size_t c = 0; c < g.size(); ++c) row[c] += g[c];
    }
}

// d(loss)/d(raw sum) given d(loss)/d(unit vector).
inline std::vector<double> through_normalization(const Embedding& e, const std::vector<double>& g_unit) {
    std::vector<double> out(g_unit.size(), 0.0);
    if (!e.unit) return out;
    const double proj = similarity(g_unit, e.values);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (g_unit[c] - proj * e.values[c]) / e.norm;
    return out;
}

}  // namespace detail

/// Weighted InfoNCE over the batch:
///   loss = -(1/N) sum_i w_i log( exp(s_i+/tau) / sum_{d in {d_i+} ∪ N_i} exp(s(q_i,d)/tau) )
/// with N_i = trajectory negatives ∪ other samples' positives (if enabled).
inline LossResult weighted_infonce(const EncoderParams& params, const TrainingBatch& batch, const TrainConfig& cfg) {
    LossResult r;
    const auto order = detail::reduction_order(batch);
    r.per_sample.resize(batch.samples.size());
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
        const auto cands = detail::candidates(batch, i, cfg, order);
        r.per_sample[i] = detail::forward_sample(params, batch.samples[i], cands, cfg).term;
    }
    double sum = 0.0;
    for (std::size_t i : order) sum += r.per_sample[i];
    r.loss = batch.samples.empty() ? 0.0 : sum / static_cast<double>(batch.samples.size());
    if (!std::isfinite(r.loss)) throw NumericError("non-finite loss in batch " + std::to_string(batch.id));
    return r;
}

struct LossAndGradient {
    LossResult loss;
    SparseGradient gradient;
};

/// Analytic gradient of weighted_infonce with respect to the embedding table,
/// reduced in ascending instance order.
inline LossAndGradient forward_backward(const EncoderParams& params, const TrainingBatch& batch, const TrainConfig& cfg) {
    LossAndGradient out;
    const auto order = detail::reduction_order(batch);
    const double n = static_cast<double>(batch.samples.size());
    out.loss.per_sample.resize(batch.samples.size());
    double sum = 0.0;
    for (std::size_t i : order) {
        const TrainingSample& s = batch.samples[i];
        const auto cands = detail::candidates(batch, i, cfg, order);
        const auto st = detail::forward_sample(params, s, cands, cfg);
        out.loss.per_sample[i] = st.term;
        sum += st.term;
        if (s.weight == 0.0) continue;

        std::vector<double> g_query(params.dim, 0.0);
        for (std::size_t j = 0; j < cands.size(); ++j) {
            const double coef = (s.weight / n) * (st.probs[j] - (j == 0 ? 1.0 : 0.0)) / cfg.tau;
            if (!st.docs[j].unit || !st.query.unit) continue;
            for (std::size_t c = 0; c < params.dim; ++c) g_query[c] += coef * st.docs[j].values[c];
            std::vector<double> g_doc(params.dim);
            for (std::size_t c = 0; c < params.dim; ++c) g_doc[c] = coef * st.query.values[c];
            detail::add_to_rows(out.gradient, cands[j]->ids, detail::through_normalization(st.docs[j], g_doc));
        }
        detail::add_to_rows(out.gradient, s.query.ids, detail::through_normalization(st.query, g_query));
    }
    out.loss.loss = batch.samples.empty() ? 0.0 : sum / n;
    if (!std::isfinite(out.loss.loss)) throw NumericError("non-finite loss in batch " + std::to_string(batch.id));
    return out;
}

inline SparseGradient backward(const EncoderParams& params, const TrainingBatch& batch, const TrainConfig& cfg) {
    return forward_backward(params, batch, cfg).gradient;
}

inline void sgd_step(EncoderParams& params, const SparseGradient& grad, double learning_rate) {
    for (const auto& [row, g] : grad) {
        auto r = params.row(row);
        for (std::size_t c = 0; c < params.dim; ++c) r[c] -= learning_rate * g[c];
    }
}

struct LossRecord {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    double loss = 0.0;
};

struct TrainResult {
    EncoderParams params;
    std::vector<LossRecord> history;  // loss of each batch before its update
    std::vector<double> epoch_loss;   // mean batch loss per epoch
    std::size_t padded_negatives = 0;
};

/// Plain SGD over weighted pairs. Each epoch shuffles instance order with
/// (seed, epoch) and walks fixed-size batches.
inline TrainResult train(EncoderParams params, const std::vector<WeightedPair>& dataset, const TrainConfig& cfg,
                         const Corpus* padding_corpus = nullptr) {
    cfg.check();
    if (dataset.empty()) throw InputError("cannot train on an empty dataset");
    std::vector<TrainingSample> samples;
    samples.reserve(dataset.size());
    TrainResult result;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        samples.push_back(make_sample(params, dataset[i], i, cfg, padding_corpus));
        result.padded_negatives += samples.back().padded;
    }
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t batch_id = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, 0x65706f6368ULL, epoch));
        rng.shuffle(order);
        double epoch_sum = 0.0;
        std::size_t epoch_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            TrainingBatch batch;
            batch.id = batch_id;
            for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) batch.samples.push_back(samples[order[k]]);
            const auto lg = forward_backward(params, batch, cfg);
            result.history.push_back({epoch, batch_id, lg.loss.loss});
            epoch_sum += lg.loss.loss;
            ++epoch_batches;
            sgd_step(params, lg.gradient, cfg.learning_rate);
            for (const auto& [row, g] : lg.gradient) {
                for (double v : params.row(row)) {
                    if (!std::isfinite(v)) throw NumericError("training diverged at batch " + std::to_string(batch_id));
                }
            }
            ++batch_id;
        }
        result.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_batches));
    }
    result.params = std::move(params);
    return result;
}

inline void write_loss_history(std::ostream& out, const std::vector<LossRecord>& history) {
    out << "epoch,batch,loss\n";
    char buf[64];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%.17g", r.loss);
        out << r.epoch << ',' << r.batch << ',' << buf << '\n';
    }
}

}  // namespace lrat
