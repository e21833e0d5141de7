#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "hash.hpp"
#include "io.hpp"
#include "judge.hpp"
#include "retriever.hpp"
#include "text.hpp"
#include "trajectory.hpp"

namespace lrat {

// A synthetic multi-hop world. Every task is a chain of facts
//   entity_0 --r1--> entity_1 --r2--> ... --rh--> answer
// where fact j lives in its own evidence document as the sentence
// "<entity_j> <relation words> <entity_j+1>". The agent searches for the
// bridging phrase "<entity_j> <relation words>", reads the evidence and
// learns entity_j+1. Relations have canonical wordings (used in documents)
// and synonym wordings the agent sometimes uses instead, so the retriever
// has something to learn.

struct Relation {
    std::string canonical;
    std::vector<std::string> synonyms;
};

struct FactLink {
    std::string evidence_doc_id;
    std::string key_phrase;       // entity revealed by this fact
    std::string bridging_phrase;  // "<entity> <canonical relation>", the sought phrase
    std::string entity;           // subject of the fact
    std::size_t relation = 0;     // index into SyntheticWorld::relations
};

struct SyntheticTask {
    EvalTask task;
    std::vector<FactLink> chain;
    bool held_out = false;
};

struct WorldOptions {
    std::size_t relations = 16;
    std::size_t synonyms_per_relation = 2;
    std::size_t relation_words = 2;
    std::size_t entity_words = 2;
    std::size_t side_facts = 1;      // extra facts per document
    std::size_t filler_tokens = 0;
    std::size_t facts_per_entity = 3;  // chain facts per pooled entity, on average
    double held_out_fraction = 0.25;
};

struct SyntheticWorld {
    std::uint64_t seed = 0;
    std::size_t hops = 0;
    WorldOptions options;
    std::vector<Relation> relations;
    std::shared_ptr<const Corpus> corpus;
    std::vector<SyntheticTask> tasks;

    std::vector<EvalTask> eval_tasks(bool held_out) const {
        std::vector<EvalTask> out;
        for (const auto& t : tasks) {
            if (t.held_out == held_out) out.push_back(t.task);
        }
        return out;
    }
    std::vector<std::size_t> task_indices(bool held_out) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].held_out == held_out) out.push_back(i);
        }
        return out;
    }
};

namespace detail {

class WordFactory {
public:
    explicit WordFactory(Rng& rng) : rng_(rng) {}

    std::string word() {
        static constexpr std::string_view consonants = "bdfgklmnprstvz";
        static constexpr std::string_view vowels = "aeiou";
        for (;;) {
            std::string w;
            const std::size_t syllables = 3;
            for (std::size_t s = 0; s < syllables; ++s) {
                w.push_back(consonants[rng_.below(consonants.size())]);
                w.push_back(vowels[rng_.below(vowels.size())]);
            }
            if (used_.insert(w).second) return w;
        }
    }

    std::string phrase(std::size_t words) {
        std::string p;
        for (std::size_t i = 0; i < words; ++i) p += (i ? " " : "") + word();
        return p;
    }

private:
    Rng& rng_;
    std::unordered_set<std::string> used_;
};

}  // namespace detail

inline std::size_t distractor_floor(std::size_t n_tasks) { return (n_tasks + 3) / 4; }

/// Deterministic in every argument. Documents are numbered d0000...; tasks
/// t000...; a seeded quarter of the tasks is held out for evaluation.
inline SyntheticWorld generate_world(std::uint64_t seed, std::size_t n_docs, std::size_t n_tasks, std::size_t hops, const WorldOptions& opts = {}) {
    if (hops == 0 || n_tasks == 0) throw InputError("world needs at least one task and one hop");
    if (n_docs < hops * n_tasks + distractor_floor(n_tasks)) {
        throw InputError("infeasible world: " + std::to_string(n_docs) + " documents cannot hold " + std::to_string(hops * n_tasks) +
                         " evidence documents plus " + std::to_string(distractor_floor(n_tasks)) + " distractors");
    }
    if (opts.relations < 2) throw InputError("world needs at least two relations");
    if (opts.facts_per_entity == 0 || opts.entity_words == 0 || opts.relation_words == 0) throw InputError("invalid world options");

    Rng rng(mix_seed(seed, 0x776f726c64ULL));
    detail::WordFactory words(rng);
    SyntheticWorld w;
    w.seed = seed;
    w.hops = hops;
    w.options = opts;
    for (std::size_t r = 0; r < opts.relations; ++r) {
        Relation rel{words.phrase(opts.relation_words), {}};
        for (std::size_t s = 0; s < opts.synonyms_per_relation; ++s) rel.synonyms.push_back(words.phrase(opts.relation_words));
        w.relations.push_back(std::move(rel));
    }
    std::vector<std::string> filler;
    for (std::size_t i = 0; i < 120; ++i) filler.push_back(words.word());
    std::vector<std::string> minor;
    for (std::size_t i = 0; i < 200; ++i) minor.push_back(words.phrase(opts.entity_words));

    // Chains draw their subjects from a shared entity pool, so different tasks
    // talk about the same entities through different relations. Each
    // (subject, relation) pair states at most one fact. Answers are fresh and
    // never leave their evidence document.
    const std::size_t pool_size = std::max<std::size_t>(hops + 1, (n_tasks * hops + opts.facts_per_entity - 1) / opts.facts_per_entity);
    std::vector<std::string> pool;
    for (std::size_t i = 0; i < pool_size; ++i) pool.push_back(words.phrase(opts.entity_words));
    std::set<std::pair<std::size_t, std::size_t>> used_pairs;
    std::vector<std::vector<std::size_t>> chain_rel(n_tasks);
    std::vector<std::vector<std::string>> chain_ent(n_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t) {
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt == 1000) throw InputError("world too dense: cannot place distinct facts for task " + std::to_string(t));
            std::vector<std::size_t> ents{rng.below(pool_size)};
            std::vector<std::size_t> rels;
            bool ok = true;
            for (std::size_t h = 0; h < hops && ok; ++h) {
                const std::size_t rel = rng.below(opts.relations);
                ok = !used_pairs.count({ents.back(), rel}) &&
                     std::none_of(ents.begin(), ents.end() - 1, [&](std::size_t e) { return e == ents.back(); });
                rels.push_back(rel);
                if (h + 1 < hops) ents.push_back(rng.below(pool_size));
            }
            if (!ok) continue;
            std::set<std::pair<std::size_t, std::size_t>> mine;
            for (std::size_t h = 0; h < hops; ++h) mine.insert({ents[h], rels[h]});
            if (mine.size() != hops) continue;
            used_pairs.insert(mine.begin(), mine.end());
            for (std::size_t e : ents) chain_ent[t].push_back(pool[e]);
            chain_ent[t].push_back(words.phrase(opts.entity_words));
            chain_rel[t] = std::move(rels);
            break;
        }
    }

    const auto sentence_of = [&](const std::string& a, std::size_t rel, const std::string& b) {
        return a + " " + w.relations[rel].canonical + " " + b + ".";
    };
    const auto side_fact = [&]() {
        for (;;) {
            const std::size_t e = rng.below(pool_size);
            const std::size_t rel = rng.below(opts.relations);
            if (!used_pairs.count({e, rel})) return sentence_of(pool[e], rel, rng.pick(minor));
        }
    };
    const auto filler_sentence = [&]() {
        std::string s;
        for (std::size_t i = 0; i < opts.filler_tokens; ++i) s += (i ? " " : "") + rng.pick(filler);
        return s + ".";
    };
    const auto body = [&](std::string lead) {
        std::vector<std::string> parts;
        for (std::size_t i = 0; i < opts.side_facts; ++i) parts.push_back(side_fact());
        if (opts.filler_tokens > 0) parts.push_back(filler_sentence());
        rng.shuffle(parts);
        std::string text = std::move(lead);
        for (const auto& p : parts) text += (text.empty() ? "" : " ") + p;
        return text;
    };

    // Evidence documents get slots shuffled among distractors so ids carry
    // no information.
    std::vector<std::size_t> slots(n_docs);
    for (std::size_t i = 0; i < n_docs; ++i) slots[i] = i;
    rng.shuffle(slots);
    std::vector<Document> docs(n_docs);
    const auto doc_id = [](std::size_t slot) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "d%04zu", slot);
        return std::string(buf);
    };
    std::size_t next_slot = 0;
    for (std::size_t t = 0; t < n_tasks; ++t) {
        SyntheticTask task;
        char buf[32];
        std::snprintf(buf, sizeof buf, "t%03zu", t);
        task.task.id = buf;
        std::string question = "Starting from " + chain_ent[t][0] + ", follow";
        for (std::size_t h = 0; h < hops; ++h) question += (h ? " then " : " ") + w.relations[chain_rel[t][h]].canonical;
        task.task.question = question + ". Which entity do you reach?";
        task.task.gold_answer = chain_ent[t][hops];
        for (std::size_t h = 0; h < hops; ++h) {
            const std::size_t slot = slots[next_slot++];
            FactLink link;
            link.evidence_doc_id = doc_id(slot);
            link.entity = chain_ent[t][h];
            link.relation = chain_rel[t][h];
            link.key_phrase = chain_ent[t][h + 1];
            link.bridging_phrase = link.entity + " " + w.relations[link.relation].canonical;
            docs[slot] = {link.evidence_doc_id, words.word() + " record", body(sentence_of(link.entity, link.relation, link.key_phrase))};
            task.task.evidence_doc_ids.insert(link.evidence_doc_id);
            task.chain.push_back(std::move(link));
        }
        w.tasks.push_back(std::move(task));
    }
    for (; next_slot < n_docs; ++next_slot) {
        const std::size_t slot = slots[next_slot];
        docs[slot] = {doc_id(slot), words.word() + " record", body("")};
    }
    w.corpus = std::make_shared<const Corpus>(std::move(docs));

    std::vector<std::size_t> order(n_tasks);
    for (std::size_t i = 0; i < n_tasks; ++i) order[i] = i;
    Rng split(mix_seed(seed, 0x73706c6974ULL));
    split.shuffle(order);
    const auto held = static_cast<std::size_t>(static_cast<double>(n_tasks) * opts.held_out_fraction + 0.5);
    for (std::size_t i = 0; i < held && i < n_tasks; ++i) w.tasks[order[i]].held_out = true;
    return w;
}

/// Checks the world invariants; returns human-readable problems.
inline std::vector<std::string> check_world(const SyntheticWorld& w) {
    std::vector<std::string> problems;
    std::set<std::string> evidence_ids;
    for (const auto& t : w.tasks) {
        if (t.chain.empty() || t.chain.back().key_phrase != t.task.gold_answer) problems.push_back(t.task.id + ": last key phrase is not the gold answer");
        for (const auto& link : t.chain) {
            evidence_ids.insert(link.evidence_doc_id);
            const Document* d = w.corpus->find(link.evidence_doc_id);
            if (!d) {
                problems.push_back(t.task.id + ": missing evidence " + link.evidence_doc_id);
            } else if (!answers_match(d->text, link.key_phrase)) {
                problems.push_back(t.task.id + ": evidence " + link.evidence_doc_id + " lacks its key phrase");
            }
        }
    }
    for (const auto& d : w.corpus->documents()) {
        if (evidence_ids.count(d.doc_id)) continue;
        const auto doc = tokenize(d.text);
        for (const auto& t : w.tasks) {
            const auto gold = tokenize(t.task.gold_answer);
            if (std::search(doc.begin(), doc.end(), gold.begin(), gold.end()) != doc.end()) {
                problems.push_back("distractor " + d.doc_id + " contains gold answer of " + t.task.id);
            }
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------
// World directory: corpus.jsonl, tasks.jsonl, heldout_tasks.jsonl, world.json

inline void save_world(const SyntheticWorld& w, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_output(dir / "corpus.jsonl");
        write_corpus(out, *w.corpus);
    }
    {
        auto out = open_output(dir / "tasks.jsonl");
        write_tasks(out, w.eval_tasks(false));
    }
    {
        auto out = open_output(dir / "heldout_tasks.jsonl");
        write_tasks(out, w.eval_tasks(true));
    }
    Json j;
    j["seed"] = w.seed;
    j["hops"] = w.hops;
    j["options"] = Json{{"relations", w.options.relations},
                        {"synonyms_per_relation", w.options.synonyms_per_relation},
                        {"relation_words", w.options.relation_words},
                        {"entity_words", w.options.entity_words},
                        {"side_facts", w.options.side_facts},
                        {"filler_tokens", w.options.filler_tokens},
                        {"facts_per_entity", w.options.facts_per_entity},
                        {"held_out_fraction", w.options.held_out_fraction}};
    j["relations"] = Json::array();
    for (const auto& r : w.relations) j["relations"].push_back(Json{{"canonical", r.canonical}, {"synonyms", r.synonyms}});
    j["tasks"] = Json::array();
    for (const auto& t : w.tasks) {
        Json tj = to_json(t.task);
        tj["held_out"] = t.held_out;
        tj["chain"] = Json::array();
        for (const auto& l : t.chain) {
            tj["chain"].push_back(Json{{"evidence_doc_id", l.evidence_doc_id},
                                       {"key_phrase", l.key_phrase},
                                       {"bridging_phrase", l.bridging_phrase},
                                       {"entity", l.entity},
                                       {"relation", l.relation}});
        }
        j["tasks"].push_back(std::move(tj));
    }
    auto out = open_output(dir / "world.json");
    out << j.dump(1) << '\n';
}

inline SyntheticWorld load_world(const std::filesystem::path& dir) {
    const auto path = dir / "world.json";
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("invalid world file " + path.string() + ": " + e.what());
    }
    SyntheticWorld w;
    try {
        w.seed = j.at("seed").get<std::uint64_t>();
        w.hops = j.at("hops").get<std::size_t>();
        const auto& o = j.at("options");
        w.options.relations = o.at("relations").get<std::size_t>();
        w.options.synonyms_per_relation = o.at("synonyms_per_relation").get<std::size_t>();
        w.options.relation_words = o.at("relation_words").get<std::size_t>();
        w.options.entity_words = o.at("entity_words").get<std::size_t>();
        w.options.side_facts = o.at("side_facts").get<std::size_t>();
        w.options.filler_tokens = o.at("filler_tokens").get<std::size_t>();
        w.options.facts_per_entity = o.at("facts_per_entity").get<std::size_t>();
        w.options.held_out_fraction = o.at("held_out_fraction").get<double>();
        for (const auto& r : j.at("relations")) {
            w.relations.push_back({r.at("canonical").get<std::string>(), r.at("synonyms").get<std::vector<std::string>>()});
        }
        for (const auto& tj : j.at("tasks")) {
            SyntheticTask t;
            t.task.id = tj.at("id").get<std::string>();
            t.task.question = tj.at("question").get<std::string>();
            t.task.gold_answer = tj.at("gold_answer").get<std::string>();
            for (const auto& e : tj.at("evidence_doc_ids")) t.task.evidence_doc_ids.insert(e.get<std::string>());
            t.held_out = tj.at("held_out").get<bool>();
            for (const auto& l : tj.at("chain")) {
                t.chain.push_back({l.at("evidence_doc_id").get<std::string>(), l.at("key_phrase").get<std::string>(),
                                   l.at("bridging_phrase").get<std::string>(), l.at("entity").get<std::string>(),
                                   l.at("relation").get<std::size_t>()});
            }
            w.tasks.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed world file " + path.string() + ": " + e.what());
    }
    w.corpus = std::make_shared<const Corpus>(load_corpus(dir / "corpus.jsonl"));
    return w;
}

// ---------------------------------------------------------------------------
// Scripted agent

struct LengthRange {
    std::size_t min = 0;
    std::size_t max = 0;
};

struct ScriptedAgentConfig {
    std::size_t max_turns = 50;
    std::size_t top_k = 10;
    std::size_t snippet_tokens = 64;
    double browse_threshold = 0.75;      // fraction of sought tokens a snippet must contain
    double explore_threshold = 0.5;      // partial matches browsed with explore_probability
    double explore_probability = 0.25;
    double synonym_probability = 0.6;    // chance the relation is phrased with a synonym
    std::size_t search_budget = 3;       // searches per hop before giving up
    LengthRange high_utility{40, 120};   // post-browse reasoning after useful documents
    LengthRange low_utility{3, 15};
    bool shuffle_results = false;
    std::uint64_t seed = 2025;

    void check() const {
        if (max_turns < 2) throw InputError("max_turns must be at least 2");
        if (top_k == 0) throw InputError("top_k must be positive");
        if (search_budget == 0) throw InputError("search_budget must be positive");
        if (high_utility.min > high_utility.max || low_utility.min > low_utility.max) throw InputError("invalid verbosity range");
    }
};

using SearchFn = std::function<std::vector<SearchResultItem>(std::string_view query)>;

namespace detail {

inline constexpr std::string_view kReasoningWords[] = {
    "the", "document", "states", "that", "so", "next", "i", "should", "look", "for", "which", "means", "confirms",
    "this", "source", "is", "useful", "because", "it", "mentions", "we", "now", "know", "and", "then", "follow",
    "chain", "step", "found", "link", "between", "entity", "relation", "answer", "partial", "progress", "check"};

inline constexpr std::string_view kDismissWords[] = {
    "this", "page", "is", "irrelevant", "not", "what", "i", "need", "moving", "on", "nothing", "useful", "here",
    "wrong", "one", "skip", "back", "to", "results", "no", "help"};

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
    return out;
}

// Reasoning after a useful document: the learned fact first, then a mix of
// document words and generic reasoning words, exactly `length` tokens.
inline std::string useful_reasoning(Rng& rng, const FactLink& link, const std::string& relation_words, const Document& doc, std::size_t length) {
    std::vector<std::string> tokens = tokenize(link.entity + " " + relation_words + " " + link.key_phrase);
    const auto doc_tokens = tokenize(doc.text);
    while (tokens.size() < length) {
        if (rng.chance(0.5) && !doc_tokens.empty()) {
            tokens.push_back(rng.pick(doc_tokens));
        } else {
            tokens.emplace_back(kReasoningWords[rng.below(std::size(kReasoningWords))]);
        }
    }
    tokens.resize(length);
    return join_tokens(tokens) + ".";
}

inline std::string dismissive_reasoning(Rng& rng, std::size_t length) {
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < length; ++i) tokens.emplace_back(kDismissWords[rng.below(std::size(kDismissWords))]);
    return join_tokens(tokens) + ".";
}

inline double sought_fraction(const std::vector<std::string>& sought, std::string_view snippet) {
    if (sought.empty()) return 0.0;
    const auto toks = tokenize(snippet);
    const std::set<std::string> have(toks.begin(), toks.end());
    std::size_t hit = 0;
    for (const auto& s : sought) hit += have.count(s);
    return static_cast<double>(hit) / static_cast<double>(sought.size());
}

}  // namespace detail

/// Scripted policy for one task: search the bridging phrase of the next
/// unresolved hop (relation sometimes phrased with a synonym), browse the
/// first result whose snippet contains enough of the sought phrase, and
/// answer once the chain is resolved. Partial matches are sometimes browsed
/// too and get short dismissive reasoning.
inline Trajectory run_episode(const SyntheticWorld& world, std::size_t task_index, const SearchFn& search, const ScriptedAgentConfig& cfg,
                              const std::string& trajectory_id = {}) {
    cfg.check();
    const SyntheticTask& task = world.tasks.at(task_index);
    Rng rng(mix_seed(cfg.seed, world.seed, task_index));
    Trajectory t;
    t.id = trajectory_id.empty() ? task.task.id : trajectory_id;
    t.question = task.task.question;
    t.gold_answer = task.task.gold_answer;

    std::string pending_think = "I need to resolve " + std::to_string(task.chain.size()) + " linked facts starting from " + task.chain.front().entity + ".";
    std::set<std::string> browsed;
    std::size_t hop = 0;
    std::size_t searches_this_hop = 0;
    bool gave_up = false;

    const auto push = [&](Action a, Observation o) {
        Turn turn{t.turns.size(), std::move(pending_think), std::move(a), std::move(o)};
        t.turns.push_back(std::move(turn));
        pending_think.clear();
    };
    const auto full = [&] { return t.turns.size() >= cfg.max_turns; };

    while (!full() && hop < task.chain.size() && !gave_up) {
        if (searches_this_hop == cfg.search_budget) {
            gave_up = true;
            break;
        }
        const FactLink& link = task.chain[hop];
        const Relation& rel = world.relations.at(link.relation);
        const std::string relation_words = (!rel.synonyms.empty() && rng.chance(cfg.synonym_probability)) ? rng.pick(rel.synonyms) : rel.canonical;
        const std::string query = link.entity + " " + relation_words;
        if (pending_think.empty()) pending_think = "Searching again with a different phrasing for " + link.entity + ".";
        auto items = search(query);
        if (cfg.shuffle_results) {
            rng.shuffle(items);
            for (std::size_t r = 0; r < items.size(); ++r) items[r].rank = r + 1;
        }
        const std::size_t search_turn = t.turns.size();
        push(SearchAction{query}, ResultsObservation{items});
        ++searches_this_hop;

        const auto sought = tokenize(link.bridging_phrase);
        bool advanced = false;
        for (const auto& item : items) {
            if (full()) break;
            if (browsed.count(item.doc_id)) continue;
            const double match = detail::sought_fraction(sought, item.snippet);
            const bool strong = match >= cfg.browse_threshold;
            const bool explore = !strong && match >= cfg.explore_threshold && rng.chance(cfg.explore_probability);
            if (!strong && !explore) continue;
            const Document* doc = world.corpus->find(item.doc_id);
            if (!doc) continue;
            if (pending_think.empty()) pending_think = "Result " + std::to_string(item.rank) + " looks promising.";
            browsed.insert(item.doc_id);
            push(BrowseAction{item.doc_id, search_turn}, DocumentObservation{doc->doc_id, doc->text});
            if (item.doc_id == link.evidence_doc_id) {
                const auto len = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.high_utility.min), static_cast<std::int64_t>(cfg.high_utility.max)));
                pending_think = detail::useful_reasoning(rng, link, rel.canonical, *doc, len);
                advanced = true;
                break;
            }
            const auto len = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.low_utility.min), static_cast<std::int64_t>(cfg.low_utility.max)));
            pending_think = detail::dismissive_reasoning(rng, len);
        }
        if (advanced) {
            ++hop;
            searches_this_hop = 0;
        }
    }

    if (full()) {
        t.label = Label::overflow;
        return t;
    }
    std::string answer;
    if (hop == task.chain.size()) {
        if (pending_think.empty()) pending_think = "The chain is resolved.";
        answer = "The answer is " + task.chain.back().key_phrase + ".";
    } else {
        if (pending_think.empty()) pending_think = "I could not find the next link; I will guess.";
        answer = "The answer is unknown.";
    }
    push(AnswerAction{answer}, std::monostate{});
    t.label = answers_match(answer, task.task.gold_answer) ? Label::correct : Label::incorrect;
    return t;
}

inline SearchFn retriever_search(const RetrieverHandle& r, std::size_t k, std::size_t snippet_tokens) {
    return [&r, k, snippet_tokens](std::string_view q) { return search_topk(r, q, k, snippet_tokens); };
}

inline Trajectory run_episode(const SyntheticWorld& world, std::size_t task_index, const RetrieverHandle& retriever, const ScriptedAgentConfig& cfg,
                              const std::string& trajectory_id = {}) {
    return run_episode(world, task_index, retriever_search(retriever, cfg.top_k, cfg.snippet_tokens), cfg, trajectory_id);
}

}  // namespace lrat
