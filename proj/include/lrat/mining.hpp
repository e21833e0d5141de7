#pragma once

#include <algorithm>
#include <future>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "io.hpp"
#include "judge.hpp"
#include "text.hpp"
#include "trajectory.hpp"

namespace lrat {

/// A result-list entry joined with the document it refers to.
struct ResolvedDoc {
    SearchResultItem item;
    Document document;

    friend bool operator==(const ResolvedDoc&, const ResolvedDoc&) = default;
};

/// One search→browse transition: the query, the browsed document, the
/// unbrowsed siblings of its result list, and the reasoning written right
/// after reading it.
struct CandidateInstance {
    std::string query;
    ResolvedDoc positive;
    std::vector<ResolvedDoc> negatives;
    std::string post_browse_reasoning;
    std::size_t reasoning_len = 0;
    std::string trajectory_id;
    std::size_t search_turn = 0;
    std::size_t browse_turn = 0;
    Label trajectory_label = Label::unknown;
    std::optional<Decision> verdict;  // empty when no judge ran

    friend bool operator==(const CandidateInstance&, const CandidateInstance&) = default;
};

enum class JudgeMode { off, remote, heuristic };

inline std::optional<JudgeMode> parse_judge_mode(std::string_view s) {
    if (s == "off") return JudgeMode::off;
    if (s == "remote") return JudgeMode::remote;
    if (s == "heuristic") return JudgeMode::heuristic;
    return std::nullopt;
}

inline std::string_view to_string(JudgeMode m) {
    switch (m) {
        case JudgeMode::off: return "off";
        case JudgeMode::remote: return "remote";
        case JudgeMode::heuristic: return "heuristic";
    }
    return "off";
}

struct MiningConfig {
    bool require_correct_label = false;
    std::size_t min_negatives = 1;
    JudgeMode judge_mode = JudgeMode::off;
    bool strict = false;                     // drop Undecided instead of keeping them flagged
    bool deduplicate = false;                // keep first (query, positive) per trajectory
    bool recycle_rejected_positives = false; // rejected positives join sibling instances' negatives
    std::size_t max_in_flight = 1;           // concurrent judge calls
    std::size_t max_results = 10;            // K

    void check() const {
        if (max_results > 0 && min_negatives > max_results - 1) {
            throw InputError("min_negatives must be at most K-1 (" + std::to_string(max_results - 1) + ")");
        }
    }
};

/// Resolves doc ids to documents. Ids missing from the corpus (or when no
/// corpus is given) fall back to what the trajectory observed: the full
/// browsed content, or the snippet for unbrowsed results.
class DocumentResolver {
public:
    explicit DocumentResolver(const Corpus* corpus = nullptr) : corpus_(corpus) {}

    Document resolve(const SearchResultItem& item, const Trajectory& t) const {
        if (corpus_) {
            if (const Document* d = corpus_->find(item.doc_id)) return *d;
        }
        for (const auto& turn : t.turns) {
            if (const auto* obs = std::get_if<DocumentObservation>(&turn.observation); obs && obs->doc_id == item.doc_id) {
                return {item.doc_id, "", obs->content};
            }
        }
        return {item.doc_id, "", item.snippet};
    }

private:
    const Corpus* corpus_;
};

/// Naive supervision from one trajectory: one instance per Browse whose
/// source is a Search turn, ordered by browse turn. Negatives are the source
/// result list minus every document browsed from that list anywhere in the
/// trajectory.
inline std::vector<CandidateInstance> mine_naive_instances(const Trajectory& t, const DocumentResolver& resolver = DocumentResolver{}) {
    std::vector<CandidateInstance> out;
    // browsed doc ids per source search turn
    std::vector<std::set<std::string>> browsed(t.turns.size());
    for (const auto& turn : t.turns) {
        if (const auto* b = std::get_if<BrowseAction>(&turn.action); b && b->source_turn < t.turns.size()) {
            browsed[b->source_turn].insert(b->doc_id);
        }
    }
    for (std::size_t i = 0; i < t.turns.size(); ++i) {
        const auto* b = std::get_if<BrowseAction>(&t.turns[i].action);
        if (!b || b->source_turn >= i) continue;
        const Turn& source = t.turns[b->source_turn];
        const auto* search = std::get_if<SearchAction>(&source.action);
        const auto* items = source.results();
        if (!search || !items) continue;
        const auto pos = std::find_if(items->begin(), items->end(), [&](const SearchResultItem& it) { return it.doc_id == b->doc_id; });
        if (pos == items->end()) continue;

        CandidateInstance inst;
        inst.query = search->query;
        inst.positive = {*pos, resolver.resolve(*pos, t)};
        for (const auto& item : *items) {
            if (browsed[b->source_turn].count(item.doc_id)) continue;
            inst.negatives.push_back({item, resolver.resolve(item, t)});
        }
        inst.post_browse_reasoning = i + 1 < t.turns.size() ? t.turns[i + 1].think : std::string();
        inst.reasoning_len = count_tokens(inst.post_browse_reasoning);
        inst.trajectory_id = t.id;
        inst.search_turn = b->source_turn;
        inst.browse_turn = i;
        inst.trajectory_label = t.label;
        out.push_back(std::move(inst));
    }
    return out;
}

/// One line per judge verdict.
class AuditLog {
public:
    explicit AuditLog(std::ostream* out = nullptr) : out_(out) {}

    void record(const CandidateInstance& inst, const JudgeVerdict& v, const std::string& judge, const std::string& template_hash) {
        Json j;
        j["digest"] = v.digest;
        j["template_hash"] = template_hash;
        j["judge"] = judge;
        j["trajectory_id"] = inst.trajectory_id;
        j["browse_turn"] = inst.browse_turn;
        j["doc_id"] = inst.positive.item.doc_id;
        j["verdict"] = std::string(to_string(v.decision));
        j["cached"] = v.cached;
        j["latency_ms"] = v.latency_ms;
        if (!v.error.empty()) j["error"] = v.error;
        std::lock_guard lock(mutex_);
        lines_.push_back(dump_line(j));
        if (out_) *out_ << lines_.back() << '\n';
    }

    const std::vector<std::string>& lines() const { return lines_; }

private:
    std::ostream* out_;
    std::mutex mutex_;
    std::vector<std::string> lines_;
};

/// Keeps the instances the judge labels Relevant, in input order. Undecided
/// instances are kept (flagged) unless `strict`. Mode Off is the identity.
inline std::vector<CandidateInstance> filter_instances(std::vector<CandidateInstance> instances, Judge* judge, const MiningConfig& cfg,
                                                       AuditLog* audit = nullptr) {
    if (cfg.judge_mode == JudgeMode::off) return instances;
    if (!judge) throw InputError("judge mode " + std::string(to_string(cfg.judge_mode)) + " requires a judge");

    std::vector<JudgeVerdict> verdicts(instances.size());
    const auto run = [&](std::size_t i) {
        const auto& inst = instances[i];
        verdicts[i] = judge->judge_relevance(inst.query, inst.positive.document, inst.post_browse_reasoning);
    };
    const std::size_t width = std::max<std::size_t>(1, cfg.max_in_flight);
    if (width == 1) {
        for (std::size_t i = 0; i < instances.size(); ++i) run(i);
    } else {
        for (std::size_t start = 0; start < instances.size(); start += width) {
            std::vector<std::future<void>> wave;
            for (std::size_t i = start; i < std::min(instances.size(), start + width); ++i) wave.push_back(std::async(std::launch::async, run, i));
            for (auto& f : wave) f.get();
        }
    }

    const std::string template_hash = judge->template_hash();
    const std::string judge_name = judge->name();
    std::vector<CandidateInstance> kept;
    std::vector<const CandidateInstance*> rejected;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (audit) audit->record(instances[i], verdicts[i], judge_name, template_hash);
        instances[i].verdict = verdicts[i].decision;
        const bool keep = verdicts[i].decision == Decision::relevant || (verdicts[i].decision == Decision::undecided && !cfg.strict);
        if (keep) {
            kept.push_back(instances[i]);
        } else if (verdicts[i].decision == Decision::irrelevant) {
            rejected.push_back(&instances[i]);
        }
    }
    if (cfg.recycle_rejected_positives) {
        for (auto& inst : kept) {
            for (const auto* r : rejected) {
                if (r->trajectory_id != inst.trajectory_id || r->search_turn != inst.search_turn) continue;
                if (r->positive.item.doc_id == inst.positive.item.doc_id) continue;
                inst.negatives.push_back(r->positive);
            }
        }
    }
    return kept;
}

/// Mines every admitted trajectory in input order, judges, then drops
/// instances with too few negatives.
inline std::vector<CandidateInstance> mine_dataset(const std::vector<Trajectory>& trajectories, const MiningConfig& cfg, Judge* judge,
                                                   const Corpus* corpus = nullptr, AuditLog* audit = nullptr) {
    cfg.check();
    const DocumentResolver resolver(corpus);
    std::vector<CandidateInstance> mined;
    for (const auto& t : trajectories) {
        if (cfg.require_correct_label && t.label != Label::correct) continue;
        auto part = mine_naive_instances(t, resolver);
        if (cfg.deduplicate) {
            std::set<std::pair<std::string, std::string>> seen;
            std::erase_if(part, [&](const CandidateInstance& c) { return !seen.emplace(c.query, c.positive.item.doc_id).second; });
        }
        for (auto& inst : part) mined.push_back(std::move(inst));
    }
    auto filtered = filter_instances(std::move(mined), judge, cfg, audit);
    std::erase_if(filtered, [&](const CandidateInstance& c) { return c.negatives.size() < cfg.min_negatives; });
    return filtered;
}

// ---------------------------------------------------------------------------
// Dataset file

inline Json instance_to_json(const CandidateInstance& c) {
    Json j;
    j["query"] = c.query;
    j["positive"] = Json{{"doc_id", c.positive.item.doc_id}, {"text", c.positive.document.text}};
    j["negatives"] = Json::array();
    for (const auto& n : c.negatives) j["negatives"].push_back(Json{{"doc_id", n.item.doc_id}, {"text", n.document.text}});
    j["reasoning"] = c.post_browse_reasoning;
    j["reasoning_len"] = c.reasoning_len;
    j["label"] = std::string(to_string(c.trajectory_label));
    j["provenance"] = Json{{"trajectory_id", c.trajectory_id}, {"search_turn", c.search_turn}, {"browse_turn", c.browse_turn}};
    j["verdict"] = c.verdict ? Json(std::string(to_string(*c.verdict))) : Json(nullptr);
    return j;
}

inline CandidateInstance instance_from_json(const Json& j, std::size_t line) {
    CandidateInstance c;
    c.query = field::string_at(j, "query", line, "");
    const Json& pos = field::require(j, "positive", line, "");
    c.positive.item.doc_id = field::string_at(pos, "doc_id", line, "positive");
    c.positive.document = {c.positive.item.doc_id, "", field::string_at(pos, "text", line, "positive")};
    const Json& negs = field::require(j, "negatives", line, "");
    if (!negs.is_array()) throw ParseError(line, "field 'negatives': expected array");
    for (std::size_t k = 0; k < negs.size(); ++k) {
        const std::string path = "negatives[" + std::to_string(k) + "]";
        ResolvedDoc n;
        n.item.doc_id = field::string_at(negs[k], "doc_id", line, path);
        n.document = {n.item.doc_id, "", field::string_at(negs[k], "text", line, path)};
        c.negatives.push_back(std::move(n));
    }
    c.post_browse_reasoning = field::string_at(j, "reasoning", line, "");
    c.reasoning_len = field::index_at(j, "reasoning_len", line, "");
    const auto label = parse_label(field::string_at(j, "label", line, ""));
    if (!label) throw ParseError(line, "field 'label': unknown label");
    c.trajectory_label = *label;
    const Json& prov = field::require(j, "provenance", line, "");
    c.trajectory_id = field::string_at(prov, "trajectory_id", line, "provenance");
    c.search_turn = field::index_at(prov, "search_turn", line, "provenance");
    c.browse_turn = field::index_at(prov, "browse_turn", line, "provenance");
    const Json& verdict = field::require(j, "verdict", line, "");
    if (!verdict.is_null()) {
        const auto d = verdict.is_string() ? parse_decision(verdict.get<std::string>()) : std::nullopt;
        if (!d) throw ParseError(line, "field 'verdict': expected relevant, irrelevant, undecided or null");
        c.verdict = *d;
    }
    return c;
}

inline void write_dataset(std::ostream& out, const std::vector<CandidateInstance>& instances) {
    for (const auto& c : instances) out << dump_line(instance_to_json(c)) << '\n';
}

}  // namespace lrat
