#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "mining.hpp"

namespace lrat {

// Relevance intensity from post-browse reasoning length. The marginal gain of
// reading further decays exponentially with half-life beta; its integral
// saturates, and dividing by the dataset mean keeps E[w] near 1:
//
//   g(x)   = exp(-ln2 * x / beta)
//   raw(l) = 1 - exp(-ln2 * l / beta)      (the beta/ln2 factor cancels in w)
//   w(l)   = raw(l) / mu_raw

struct WeightingParams {
    double beta = 0.0;    // half-life length scale, in tokens
    double mu_raw = 0.0;  // mean raw score over the fitting set
};

struct WeightedPair {
    CandidateInstance instance;
    double weight = 0.0;
};

inline void check_beta(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InputError("beta must be a positive finite number");
}

inline double marginal_gain(double x, double beta) {
    check_beta(beta);
    return std::exp(-std::numbers::ln2 * x / beta);
}

inline double raw_score(double length, double beta) {
    check_beta(beta);
    // -expm1 keeps raw(0) exactly 0 and is accurate for short traces.
    return -std::expm1(-std::numbers::ln2 * length / beta);
}

/// Lower median of the lengths and the mean raw score under it.
inline WeightingParams fit_params(std::vector<std::size_t> lengths) {
    if (lengths.empty()) throw InputError("cannot fit weighting parameters on an empty dataset");
    std::sort(lengths.begin(), lengths.end());
    const double beta = static_cast<double>(lengths[(lengths.size() - 1) / 2]);
    if (!(beta > 0.0)) throw InputError("median reasoning length is 0; beta is undefined");
    double sum = 0.0;
    for (std::size_t l : lengths) sum += raw_score(static_cast<double>(l), beta);
    return {beta, sum / static_cast<double>(lengths.size())};
}

inline std::vector<std::size_t> reasoning_lengths(const std::vector<CandidateInstance>& instances) {
    std::vector<std::size_t> out;
    out.reserve(instances.size());
    for (const auto& c : instances) out.push_back(c.reasoning_len);
    return out;
}

/// Every post-browse trace in the trajectories (including those of
/// instances later removed by filtering or gating).
inline std::vector<std::size_t> post_browse_lengths(const std::vector<Trajectory>& trajectories) {
    std::vector<std::size_t> out;
    for (const auto& t : trajectories) {
        for (std::size_t i = 0; i < t.turns.size(); ++i) {
            if (!t.turns[i].is_browse()) continue;
            out.push_back(i + 1 < t.turns.size() ? count_tokens(t.turns[i + 1].think) : 0);
        }
    }
    return out;
}

inline double intensity_weight(std::size_t length, const WeightingParams& p) {
    if (!(p.mu_raw > 0.0)) throw InputError("mu_raw must be positive");
    return raw_score(static_cast<double>(length), p.beta) / p.mu_raw;
}

inline std::vector<WeightedPair> apply_weights(std::vector<CandidateInstance> instances, const WeightingParams& p) {
    check_beta(p.beta);
    if (!(p.mu_raw > 0.0)) throw InputError("mu_raw must be positive");
    std::vector<WeightedPair> out;
    out.reserve(instances.size());
    for (auto& c : instances) {
        const double w = intensity_weight(c.reasoning_len, p);
        out.push_back({std::move(c), w});
    }
    return out;
}

inline double mean_weight(const std::vector<WeightedPair>& pairs) {
    if (pairs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& p : pairs) sum += p.weight;
    return sum / static_cast<double>(pairs.size());
}

inline void write_weighted_dataset(std::ostream& out, const std::vector<WeightedPair>& pairs) {
    for (const auto& p : pairs) {
        Json j = instance_to_json(p.instance);
        j["weight"] = p.weight;
        out << dump_line(j) << '\n';
    }
}

/// Reads a mined or weighted dataset. Records without "weight" get weight 1.
inline std::vector<WeightedPair> parse_weighted_dataset(std::istream& in) {
    std::vector<WeightedPair> out;
    for_each_json_line(in, [&](std::size_t line, const Json& j) {
        WeightedPair p{instance_from_json(j, line), 1.0};
        if (j.contains("weight")) {
            p.weight = field::number_at(j, "weight", line, "");
            if (!(p.weight >= 0.0) || !std::isfinite(p.weight)) throw ParseError(line, "field 'weight': expected nonnegative finite number");
        }
        out.push_back(std::move(p));
    });
    return out;
}

inline std::vector<CandidateInstance> parse_dataset(std::istream& in) {
    std::vector<CandidateInstance> out;
    for_each_json_line(in, [&](std::size_t line, const Json& j) { out.push_back(instance_from_json(j, line)); });
    return out;
}

}  // namespace lrat
