#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "text.hpp"
#include "trajectory.hpp"

namespace lrat {

enum class Bucket { correct, incorrect, total };

inline std::string_view to_string(Bucket b) {
    switch (b) {
        case Bucket::correct: return "Correct";
        case Bucket::incorrect: return "Incorrect";
        case Bucket::total: return "Total";
    }
    return "Total";
}

/// Per-bucket trajectory statistics. `browse_search_ratio` is the ratio of
/// means, mean(B) / mean(S); empty when the bucket is empty or never searched.
struct TrajectoryStats {
    Bucket bucket = Bucket::total;
    std::size_t n = 0;
    double avg_search = 0.0;
    double avg_browse = 0.0;
    std::optional<double> browse_search_ratio;
    double avg_steps = 0.0;
};

enum class RatioConvention { ratio_of_means, mean_of_ratios };

/// Stats from bucket totals.
inline TrajectoryStats make_stats(Bucket bucket, std::size_t n, double total_search, double total_browse, double total_steps) {
    TrajectoryStats s;
    s.bucket = bucket;
    s.n = n;
    if (n == 0) return s;
    const double dn = static_cast<double>(n);
    s.avg_search = total_search / dn;
    s.avg_browse = total_browse / dn;
    s.avg_steps = total_steps / dn;
    if (s.avg_search > 0.0) s.browse_search_ratio = s.avg_browse / s.avg_search;
    return s;
}

/// Maps a label to its bucket; nothing excludes the trajectory.
using LabelPartition = std::function<std::optional<Bucket>(Label)>;

/// Correct vs. everything judged wrong (Incorrect and Overflow); Unknown is
/// left out.
inline std::optional<Bucket> default_partition(Label l) {
    switch (l) {
        case Label::correct: return Bucket::correct;
        case Label::incorrect:
        case Label::overflow: return Bucket::incorrect;
        case Label::unknown: return std::nullopt;
    }
    return std::nullopt;
}

/// Correct, Incorrect and Total (= Correct ∪ Incorrect) buckets.
inline std::array<TrajectoryStats, 3> compute_stats(const std::vector<Trajectory>& trajectories, const LabelPartition& partition = default_partition,
                                                    RatioConvention convention = RatioConvention::ratio_of_means) {
    struct Acc {
        std::size_t n = 0;
        double s = 0, b = 0, t = 0, ratio_sum = 0;
        std::size_t ratio_n = 0;
    };
    std::array<Acc, 2> acc{};
    for (const auto& t : trajectories) {
        const auto bucket = partition(t.label);
        if (!bucket || *bucket == Bucket::total) continue;
        auto& a = acc[*bucket == Bucket::correct ? 0 : 1];
        const double s = static_cast<double>(t.count_searches());
        const double b = static_cast<double>(t.count_browses());
        ++a.n;
        a.s += s;
        a.b += b;
        a.t += static_cast<double>(t.turns.size());
        if (s > 0) {
            a.ratio_sum += b / s;
            ++a.ratio_n;
        }
    }
    Acc total;
    for (const auto& a : acc) {
        total.n += a.n;
        total.s += a.s;
        total.b += a.b;
        total.t += a.t;
        total.ratio_sum += a.ratio_sum;
        total.ratio_n += a.ratio_n;
    }
    const auto build = [&](Bucket bucket, const Acc& a) {
        auto st = make_stats(bucket, a.n, a.s, a.b, a.t);
        if (convention == RatioConvention::mean_of_ratios) {
            st.browse_search_ratio = a.ratio_n ? std::optional<double>(a.ratio_sum / static_cast<double>(a.ratio_n)) : std::nullopt;
        }
        return st;
    };
    return {build(Bucket::correct, acc[0]), build(Bucket::incorrect, acc[1]), build(Bucket::total, total)};
}

inline void write_stats_csv(std::ostream& out, const std::array<TrajectoryStats, 3>& stats) {
    out << "Bucket,N,Avg S,Avg B,B/S,Avg T\n";
    char buf[256];
    for (const auto& s : stats) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.4f,", std::string(to_string(s.bucket)).c_str(), s.n, s.avg_search, s.avg_browse);
        out << buf;
        if (s.browse_search_ratio) {
            std::snprintf(buf, sizeof buf, "%.4f", *s.browse_search_ratio);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.4f\n", s.avg_steps);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Action transitions

enum class ActionKind : std::size_t { search = 0, browse = 1, answer = 2 };

inline ActionKind action_kind(const Turn& t) {
    if (t.is_search()) return ActionKind::search;
    if (t.is_browse()) return ActionKind::browse;
    return ActionKind::answer;
}

/// Rows/columns ordered Search, Browse, Answer. A row with no outgoing
/// transitions has no probabilities.
struct TransitionMatrix {
    std::array<std::array<std::size_t, 3>, 3> counts{};
    std::array<std::optional<std::array<double, 3>>, 3> probabilities{};

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& row : counts)
            for (auto c : row) n += c;
        return n;
    }
    std::optional<double> p(ActionKind from, ActionKind to) const {
        const auto& row = probabilities[static_cast<std::size_t>(from)];
        if (!row) return std::nullopt;
        return (*row)[static_cast<std::size_t>(to)];
    }
};

inline TransitionMatrix transition_probabilities(const std::vector<Trajectory>& trajectories) {
    TransitionMatrix m;
    for (const auto& t : trajectories) {
        for (std::size_t i = 1; i < t.turns.size(); ++i) {
            ++m.counts[static_cast<std::size_t>(action_kind(t.turns[i - 1]))][static_cast<std::size_t>(action_kind(t.turns[i]))];
        }
    }
    for (std::size_t r = 0; r < 3; ++r) {
        std::size_t row_total = 0;
        for (auto c : m.counts[r]) row_total += c;
        if (row_total == 0) continue;
        std::array<double, 3> p{};
        for (std::size_t c = 0; c < 3; ++c) p[c] = static_cast<double>(m.counts[r][c]) / static_cast<double>(row_total);
        m.probabilities[r] = p;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Wilson score interval

struct WilsonInterval {
    double point = 0.0;   // k / n
    double center = 0.0;  // Wilson center
    double lower = 0.0;
    double upper = 0.0;
    double z = 1.96;
    std::size_t n = 0;
};

inline WilsonInterval wilson_interval(std::size_t k, std::size_t n, double z = 1.96) {
    if (n == 0) throw InputError("wilson interval needs at least one trial");
    if (k > n) throw InputError("successes exceed trials");
    const double dn = static_cast<double>(n);
    const double p = static_cast<double>(k) / dn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / dn;
    const double center = (p + z2 / (2.0 * dn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / dn + z2 / (4.0 * dn * dn)) / denom;
    WilsonInterval w;
    w.point = p;
    w.center = center;
    w.z = z;
    w.n = n;
    // At p = 0 (or 1) the bound cancels algebraically; pin it exactly.
    w.lower = k == 0 ? 0.0 : std::max(0.0, center - half);
    w.upper = k == n ? 1.0 : std::min(1.0, center + half);
    return w;
}

// ---------------------------------------------------------------------------
// Accuracy versus evidence browsed

using EvidenceMap = std::unordered_map<std::string, std::set<std::string>>;  // question -> evidence doc ids

struct EvidenceBin {
    std::size_t lower = 0;
    std::optional<std::size_t> upper;  // exclusive; empty = open-ended
    std::string label;
    std::size_t successes = 0;
    WilsonInterval interval;
};

inline std::size_t unique_evidence_browsed(const Trajectory& t, const std::set<std::string>& evidence) {
    std::set<std::string> seen;
    for (const auto& turn : t.turns) {
        if (const auto* b = std::get_if<BrowseAction>(&turn.action); b && evidence.count(b->doc_id)) seen.insert(b->doc_id);
    }
    return seen.size();
}

/// `edges` are ascending lower bounds; the last bin is open-ended. The
/// default {0,1,2,3} gives bins 0, 1, 2, 3+. Empty bins are omitted.
inline std::vector<EvidenceBin> accuracy_by_evidence_browsed(const std::vector<Trajectory>& trajectories, const EvidenceMap& evidence,
                                                             std::vector<std::size_t> edges = {0, 1, 2, 3}, double z = 1.96) {
    if (edges.empty() || !std::is_sorted(edges.begin(), edges.end()) || std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
        throw InputError("bin edges must be strictly ascending and non-empty");
    }
    std::vector<std::string> missing;
    for (const auto& t : trajectories) {
        if (!evidence.count(t.question)) missing.push_back(t.id);
    }
    if (!missing.empty()) {
        std::string ids;
        for (const auto& m : missing) ids += (ids.empty() ? "" : ", ") + m;
        throw InputError("no evidence mapping for trajectories: " + ids);
    }
    std::vector<std::size_t> totals(edges.size(), 0), wins(edges.size(), 0);
    for (const auto& t : trajectories) {
        const std::size_t count = unique_evidence_browsed(t, evidence.at(t.question));
        if (count < edges.front()) continue;
        const auto bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), count) - edges.begin()) - 1;
        ++totals[bin];
        if (t.label == Label::correct) ++wins[bin];
    }
    std::vector<EvidenceBin> out;
    for (std::size_t b = 0; b < edges.size(); ++b) {
        if (totals[b] == 0) continue;
        EvidenceBin bin;
        bin.lower = edges[b];
        if (b + 1 < edges.size()) bin.upper = edges[b + 1];
        if (!bin.upper) {
            bin.label = std::to_string(bin.lower) + "+";
        } else if (*bin.upper == bin.lower + 1) {
            bin.label = std::to_string(bin.lower);
        } else {
            bin.label = std::to_string(bin.lower) + "-" + std::to_string(*bin.upper - 1);
        }
        bin.successes = wins[b];
        bin.interval = wilson_interval(wins[b], totals[b], z);
        out.push_back(std::move(bin));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Histograms

struct HistogramReport {
    std::string dimension;           // "rank" or "tokens"
    std::vector<double> edges;       // bin i covers [edges[i], edges[i+1])
    std::vector<std::size_t> counts;
    std::vector<double> frequencies;
    std::size_t samples = 0;

    static HistogramReport from_counts(std::string dimension, std::vector<double> edges, std::vector<std::size_t> counts) {
        HistogramReport h{std::move(dimension), std::move(edges), std::move(counts), {}, 0};
        for (auto c : h.counts) h.samples += c;
        for (auto c : h.counts) h.frequencies.push_back(h.samples ? static_cast<double>(c) / static_cast<double>(h.samples) : 0.0);
        return h;
    }
};

/// Rank of every browsed document in its source result list, bins 1..K with
/// K = max(max_results, highest rank seen). No browses, no bins.
inline HistogramReport browse_rank_distribution(const std::vector<Trajectory>& trajectories, std::size_t max_results = 10) {
    std::vector<std::size_t> ranks;
    for (const auto& t : trajectories) {
        for (const auto& turn : t.turns) {
            const auto* b = std::get_if<BrowseAction>(&turn.action);
            if (!b || b->source_turn >= t.turns.size()) continue;
            const auto* items = t.turns[b->source_turn].results();
            if (!items) continue;
            for (const auto& it : *items) {
                if (it.doc_id == b->doc_id) {
                    ranks.push_back(it.rank);
                    break;
                }
            }
        }
    }
    if (ranks.empty()) return HistogramReport::from_counts("rank", {}, {});
    const std::size_t k = std::max(max_results, *std::max_element(ranks.begin(), ranks.end()));
    std::vector<std::size_t> counts(k, 0);
    for (auto r : ranks) {
        if (r >= 1) ++counts[r - 1];
    }
    std::vector<double> edges;
    for (std::size_t r = 1; r <= k + 1; ++r) edges.push_back(static_cast<double>(r));
    return HistogramReport::from_counts("rank", std::move(edges), std::move(counts));
}

struct LengthPartition {
    Label label = Label::unknown;
    std::optional<bool> evidence;  // empty when no evidence map was given
    std::vector<std::size_t> samples;
    double mean = 0.0;
    double median = 0.0;  // lower median
    HistogramReport histogram;
};

inline double lower_median(std::vector<std::size_t> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return static_cast<double>(v[(v.size() - 1) / 2]);
}

/// Token lengths of post-browse thinks partitioned by trajectory label and,
/// with an evidence map, by whether the browsed document is evidence.
/// Histogram bins have width `bin_width` starting at 0.
inline std::vector<LengthPartition> reasoning_length_report(const std::vector<Trajectory>& trajectories, const EvidenceMap* evidence = nullptr,
                                                            std::size_t bin_width = 10) {
    if (bin_width == 0) throw InputError("bin width must be positive");
    std::map<std::pair<int, int>, LengthPartition> parts;
    for (const auto& t : trajectories) {
        const std::set<std::string>* ev = nullptr;
        if (evidence) {
            auto it = evidence->find(t.question);
            if (it != evidence->end()) ev = &it->second;
        }
        for (std::size_t i = 0; i < t.turns.size(); ++i) {
            const auto* b = std::get_if<BrowseAction>(&t.turns[i].action);
            if (!b) continue;
            const std::size_t len = i + 1 < t.turns.size() ? count_tokens(t.turns[i + 1].think) : 0;
            std::optional<bool> is_evidence;
            if (evidence) is_evidence = ev && ev->count(b->doc_id) > 0;
            const std::pair<int, int> key{static_cast<int>(t.label), is_evidence ? (*is_evidence ? 1 : 0) : -1};
            auto& p = parts[key];
            p.label = t.label;
            p.evidence = is_evidence;
            p.samples.push_back(len);
        }
    }
    std::vector<LengthPartition> out;
    for (auto& [key, p] : parts) {
        double sum = 0.0;
        for (auto s : p.samples) sum += static_cast<double>(s);
        p.mean = sum / static_cast<double>(p.samples.size());
        p.median = lower_median(p.samples);
        const std::size_t top = *std::max_element(p.samples.begin(), p.samples.end());
        const std::size_t bins = top / bin_width + 1;
        std::vector<std::size_t> counts(bins, 0);
        for (auto s : p.samples) ++counts[s / bin_width];
        std::vector<double> edges;
        for (std::size_t b = 0; b <= bins; ++b) edges.push_back(static_cast<double>(b * bin_width));
        p.histogram = HistogramReport::from_counts("tokens", std::move(edges), std::move(counts));
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace lrat
