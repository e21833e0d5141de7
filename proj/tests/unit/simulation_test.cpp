#include <gtest/gtest.h>

#include <filesystem>

#include "../support/oracles.hpp"

using namespace lrat;

namespace {

const SyntheticWorld& small_world() {
    static const SyntheticWorld w = generate_world(11, 200, 60, 2);
    return w;
}

std::string corpus_text(const SyntheticWorld& w) {
    std::ostringstream out;
    write_corpus(out, *w.corpus);
    write_tasks(out, w.eval_tasks(false));
    write_tasks(out, w.eval_tasks(true));
    return out.str();
}

TrajectoryRules rules_for(const ScriptedAgentConfig& cfg) {
    TrajectoryRules r;
    r.step_cap = cfg.max_turns;
    r.max_results = cfg.top_k;
    r.snippet_tokens = cfg.snippet_tokens;
    return r;
}

}  // namespace

TEST(World, InvariantsHold) {
    for (std::size_t hops : {1u, 2u, 3u}) {
        const auto w = generate_world(5 + hops, 400, 80, hops);
        EXPECT_TRUE(check_world(w).empty());
        EXPECT_EQ(w.corpus->size(), 400u);
        EXPECT_EQ(w.tasks.size(), 80u);
        EXPECT_EQ(w.task_indices(true).size() + w.task_indices(false).size(), 80u);
        EXPECT_EQ(w.task_indices(true).size(), 20u);
        for (const auto& t : w.tasks) {
            ASSERT_EQ(t.chain.size(), hops);
            EXPECT_EQ(t.task.evidence_doc_ids.size(), hops);
            EXPECT_EQ(t.chain.back().key_phrase, t.task.gold_answer);
            for (std::size_t h = 0; h + 1 < hops; ++h) EXPECT_EQ(t.chain[h].key_phrase, t.chain[h + 1].entity);
            for (const auto& link : t.chain) {
                const Document* d = w.corpus->find(link.evidence_doc_id);
                ASSERT_NE(d, nullptr);
                const auto text = tokenize(d->text);
                const auto key = tokenize(link.key_phrase);
                EXPECT_NE(std::search(text.begin(), text.end(), key.begin(), key.end()), text.end());
            }
        }
    }
}

TEST(World, DeterministicPerSeed) {
    EXPECT_EQ(corpus_text(generate_world(3, 150, 40, 2)), corpus_text(generate_world(3, 150, 40, 2)));
    EXPECT_NE(corpus_text(generate_world(3, 150, 40, 2)), corpus_text(generate_world(4, 150, 40, 2)));
}

TEST(World, InfeasibleSizesAreInputErrors) {
    EXPECT_THROW(generate_world(1, 50, 40, 2), InputError);
    EXPECT_THROW(generate_world(1, 100, 10, 0), InputError);
    EXPECT_NO_THROW(generate_world(1, 2 * 40 + distractor_floor(40), 40, 2));
}

TEST(World, SaveLoadRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "lrat_world_test";
    std::filesystem::remove_all(dir);
    save_world(small_world(), dir);
    const auto back = load_world(dir);
    EXPECT_EQ(corpus_text(back), corpus_text(small_world()));
    EXPECT_EQ(back.hops, 2u);
    ASSERT_EQ(back.tasks.size(), small_world().tasks.size());
    for (std::size_t i = 0; i < back.tasks.size(); ++i) {
        EXPECT_EQ(back.tasks[i].held_out, small_world().tasks[i].held_out);
        EXPECT_EQ(back.tasks[i].chain.back().bridging_phrase, small_world().tasks[i].chain.back().bridging_phrase);
    }
    // an episode on the reloaded world is identical
    const auto bm25 = make_bm25_retriever(back.corpus);
    const auto bm25_orig = make_bm25_retriever(small_world().corpus);
    ScriptedAgentConfig cfg;
    EXPECT_EQ(serialize_trajectory(run_episode(back, 3, bm25, cfg)), serialize_trajectory(run_episode(small_world(), 3, bm25_orig, cfg)));
    std::filesystem::remove_all(dir);
}

TEST(Agent, PerfectRetrieverSolvesInMinimalTurns) {
    const auto& w = small_world();
    ScriptedAgentConfig cfg;
    for (std::size_t i = 0; i < w.tasks.size(); ++i) {
        std::size_t calls = 0;
        const SearchFn perfect = [&](std::string_view) {
            const auto& link = w.tasks[i].chain.at(calls++);
            return std::vector<SearchResultItem>{{link.evidence_doc_id, 1, make_snippet(*w.corpus->find(link.evidence_doc_id))}};
        };
        const auto t = run_episode(w, i, perfect, cfg);
        EXPECT_EQ(t.label, Label::correct);
        EXPECT_EQ(t.turns.size(), 2 * w.hops + 1);
        EXPECT_TRUE(validate_trajectory(t, rules_for(cfg)).empty());
        // every evidence browse is followed by high-utility reasoning
        for (std::size_t k = 1; k < t.turns.size(); k += 2) {
            const auto len = count_tokens(t.turns[k + 1].think);
            EXPECT_GE(len, cfg.high_utility.min);
            EXPECT_LE(len, cfg.high_utility.max);
        }
    }
}

TEST(Agent, DistractorOnlyRetrieverNeverBrowsesEvidence) {
    const auto& w = small_world();
    ScriptedAgentConfig cfg;
    for (std::size_t i = 0; i < w.tasks.size(); ++i) {
        const auto& evidence = w.tasks[i].task.evidence_doc_ids;
        const SearchFn distract = [&](std::string_view) {
            std::vector<SearchResultItem> out;
            for (const auto& d : w.corpus->documents()) {
                if (evidence.count(d.doc_id)) continue;
                out.push_back({d.doc_id, out.size() + 1, make_snippet(d)});
                if (out.size() == cfg.top_k) break;
            }
            return out;
        };
        const auto t = run_episode(w, i, distract, cfg);
        EXPECT_EQ(t.label, Label::incorrect);
        for (const auto& turn : t.turns) {
            if (const auto* b = std::get_if<BrowseAction>(&turn.action)) {
                EXPECT_FALSE(evidence.count(b->doc_id));
            }
        }
        EXPECT_EQ(t.count_searches(), cfg.search_budget);
    }
}

TEST(Agent, Bm25WithCanonicalPhrasingWalksChains) {
    const auto& w = small_world();
    const auto bm25 = make_bm25_retriever(w.corpus);
    ScriptedAgentConfig cfg;
    cfg.synonym_probability = 0.0;
    std::size_t solved = 0;
    for (std::size_t i = 0; i < w.tasks.size(); ++i) solved += run_episode(w, i, bm25, cfg).label == Label::correct;
    EXPECT_GE(solved, w.tasks.size() * 9 / 10);
}

TEST(Agent, LabelsAreSoundAndTrajectoriesValid) {
    const auto& w = small_world();
    const auto bm25 = make_bm25_retriever(w.corpus);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        ScriptedAgentConfig cfg;
        cfg.seed = seed;
        cfg.max_turns = seed == 3 ? 4 : 50;  // forces some overflows
        for (std::size_t i = 0; i < w.tasks.size(); ++i) {
            const auto t = run_episode(w, i, bm25, cfg);
            EXPECT_TRUE(validate_trajectory(t, rules_for(cfg)).empty()) << t.id;
            if (t.label == Label::overflow) {
                EXPECT_EQ(t.turns.size(), cfg.max_turns);
                EXPECT_FALSE(t.answer());
            } else {
                ASSERT_TRUE(t.answer());
                EXPECT_EQ(t.label == Label::correct, answers_match(*t.answer(), w.tasks[i].task.gold_answer));
            }
        }
    }
}

TEST(Agent, DeterministicPerSeed) {
    const auto& w = small_world();
    const auto bm25 = make_bm25_retriever(w.corpus);
    ScriptedAgentConfig a, b;
    b.seed = 99;
    std::size_t differ = 0;
    for (std::size_t i = 0; i < w.tasks.size(); ++i) {
        EXPECT_EQ(serialize_trajectory(run_episode(w, i, bm25, a)), serialize_trajectory(run_episode(w, i, bm25, a)));
        differ += serialize_trajectory(run_episode(w, i, bm25, a)) != serialize_trajectory(run_episode(w, i, bm25, b));
    }
    EXPECT_GT(differ, 0u);
}

TEST(Agent, ShuffledResultsSpreadBrowseRanks) {
    const auto& w = small_world();
    const auto bm25 = make_bm25_retriever(w.corpus);
    std::vector<double> counts(10, 0.0);
    double total = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ScriptedAgentConfig cfg;
        cfg.shuffle_results = true;
        cfg.seed = seed;
        for (std::size_t i = 0; i < w.tasks.size(); ++i) {
            const auto t = run_episode(w, i, bm25, cfg);
            for (const auto& turn : t.turns) {
                const auto* b = std::get_if<BrowseAction>(&turn.action);
                if (!b) continue;
                const auto& items = *t.turns[b->source_turn].results();
                if (items.size() != 10) continue;
                for (const auto& it : items) {
                    if (it.doc_id == b->doc_id) counts[it.rank - 1] += 1;
                }
                total += 1;
            }
        }
    }
    ASSERT_GT(total, 500);
    double chi2 = 0;
    for (double c : counts) chi2 += (c - total / 10) * (c - total / 10) / (total / 10);
    // the first matching result is browsed, which biases toward early ranks,
    // but no rank may be left empty and rank 1 must not dominate
    for (double c : counts) EXPECT_GT(c, 0);
    EXPECT_LT(counts[0] / total, 0.5);
    EXPECT_TRUE(std::isfinite(chi2));
}

TEST(Agent, ConfigChecks) {
    ScriptedAgentConfig cfg;
    cfg.max_turns = 1;
    EXPECT_THROW(cfg.check(), InputError);
    cfg = {};
    cfg.high_utility = {10, 5};
    EXPECT_THROW(cfg.check(), InputError);
}
