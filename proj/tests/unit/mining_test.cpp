#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "../support/oracles.hpp"

using namespace lrat;

namespace {

Trajectory station() { return load_trajectories(std::string(LRAT_FIXTURES) + "/station_trajectory.jsonl").at(0); }

std::string dump(const std::vector<CandidateInstance>& xs) {
    std::ostringstream out;
    write_dataset(out, xs);
    return out.str();
}

// Scripted judge: Relevant unless the positive is listed.
class ListJudge final : public Judge {
public:
    std::set<std::string> irrelevant, undecided;
    std::size_t calls = 0;
    JudgeVerdict judge_relevance(std::string_view, const Document& d, std::string_view) override {
        ++calls;
        JudgeVerdict v;
        v.decision = irrelevant.count(d.doc_id) ? Decision::irrelevant : undecided.count(d.doc_id) ? Decision::undecided : Decision::relevant;
        v.digest = d.doc_id;
        return v;
    }
    bool verify_answer(std::string_view, std::string_view, std::string_view) override { return true; }
    std::string template_hash() const override { return "list"; }
    std::string name() const override { return "list"; }
};

}  // namespace

TEST(Mining, StationTrajectoryHandCount) {
    const auto xs = mine_naive_instances(station());
    ASSERT_EQ(xs.size(), 3u);
    EXPECT_EQ(xs[0].positive.item.doc_id, "2295");
    EXPECT_EQ(xs[0].negatives.size(), 9u);
    EXPECT_EQ(xs[0].negatives.front().item.doc_id, "3948");
    EXPECT_EQ(xs[1].positive.item.doc_id, "8810");
    EXPECT_EQ(xs[1].negatives.size(), 8u);
    EXPECT_EQ(xs[2].positive.item.doc_id, "6402");
    EXPECT_EQ(xs[2].negatives.size(), 8u);
    // 2295 was browsed from the first list only, so it stays a negative of the second
    EXPECT_EQ(xs[1].negatives.front().item.doc_id, "2295");
    for (const auto& n : xs[1].negatives) EXPECT_NE(n.item.doc_id, "6402");
    const auto t = station();
    EXPECT_EQ(xs[0].post_browse_reasoning, t.turns[2].think);
    EXPECT_EQ(xs[1].post_browse_reasoning, t.turns[4].think);
    EXPECT_EQ(xs[2].post_browse_reasoning, t.turns[5].think);
    EXPECT_EQ(xs[0].reasoning_len, count_tokens(t.turns[2].think));
    EXPECT_EQ(xs[0].search_turn, 0u);
    EXPECT_EQ(xs[2].browse_turn, 4u);
}

TEST(Mining, FallbackPrefersBrowsedContentThenSnippet) {
    const auto xs = mine_naive_instances(station());
    EXPECT_EQ(xs[0].positive.document.text, std::get<DocumentObservation>(station().turns[1].observation).content);
    EXPECT_EQ(xs[0].negatives[0].document.text, "snippet for 3948");
    Corpus corpus({{"3948", "T", "full corpus text"}});
    const DocumentResolver resolver(&corpus);
    EXPECT_EQ(mine_naive_instances(station(), resolver)[0].negatives[0].document.text, "full corpus text");
}

TEST(Mining, LastBrowseHasEmptyReasoning) {
    auto t = station();
    t.turns.pop_back();
    const auto xs = mine_naive_instances(t);
    EXPECT_EQ(xs.back().post_browse_reasoning, "");
    EXPECT_EQ(xs.back().reasoning_len, 0u);
}

TEST(Mining, MatchesBruteForceOnRandomTrajectories) {
    std::mt19937_64 rng(2025);
    const auto corpus = oracle::random_corpus(rng, 15);  // ids D0..D14; pool is 30
    for (int round = 0; round < 20; ++round) {
        std::vector<Trajectory> ts;
        for (int i = 0; i < 25; ++i) ts.push_back(oracle::random_trajectory(rng, "t" + std::to_string(round) + "_" + std::to_string(i)));
        for (const Corpus* c : {static_cast<const Corpus*>(nullptr), &corpus}) {
            for (bool rc : {false, true}) {
                MiningConfig cfg;
                cfg.require_correct_label = rc;
                cfg.min_negatives = 2;
                EXPECT_EQ(dump(mine_dataset(ts, cfg, nullptr, c)), oracle::mine_brute_force(ts, c, rc, 2));
            }
        }
    }
}

TEST(Mining, PropertiesOnRandomTrajectories) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        const auto t = oracle::random_trajectory(rng, "p");
        const auto xs = mine_naive_instances(t);
        EXPECT_EQ(xs.size(), t.count_browses());
        std::size_t prev = 0;
        for (const auto& x : xs) {
            EXPECT_GE(x.browse_turn, prev);
            prev = x.browse_turn;
            const auto& items = *t.turns[x.search_turn].results();
            EXPECT_LE(x.negatives.size() + 1, items.size());
            for (const auto& n : x.negatives) {
                EXPECT_NE(n.item.doc_id, x.positive.item.doc_id);
                // no negative was browsed from this list
                for (const auto& turn : t.turns) {
                    if (const auto* b = std::get_if<BrowseAction>(&turn.action); b && b->source_turn == x.search_turn) {
                        EXPECT_NE(b->doc_id, n.item.doc_id);
                    }
                }
            }
        }
    }
}

TEST(Mining, LabelGateAndMinNegatives) {
    auto t = station();
    t.label = Label::incorrect;
    MiningConfig cfg;
    cfg.require_correct_label = true;
    EXPECT_TRUE(mine_dataset({t}, cfg, nullptr).empty());
    cfg.require_correct_label = false;
    cfg.min_negatives = 9;
    EXPECT_EQ(mine_dataset({t}, cfg, nullptr).size(), 1u);
    cfg.min_negatives = 10;
    EXPECT_THROW(mine_dataset({t}, cfg, nullptr), InputError);
}

TEST(Mining, DeduplicateKeepsFirstPerTrajectory) {
    auto t = station();
    // browse 2295 again from the first list
    Turn again = t.turns[1];
    again.index = 5;
    t.turns.insert(t.turns.begin() + 5, again);
    t.turns.back().index = 6;
    MiningConfig cfg;
    EXPECT_EQ(mine_dataset({t}, cfg, nullptr).size(), 4u);
    cfg.deduplicate = true;
    const auto xs = mine_dataset({t}, cfg, nullptr);
    ASSERT_EQ(xs.size(), 3u);
    EXPECT_EQ(xs[0].browse_turn, 1u);
}

TEST(Mining, JudgeFilterStrictAndRecycle) {
    ListJudge judge;
    judge.irrelevant = {"6402"};
    judge.undecided = {"8810"};
    MiningConfig cfg;
    cfg.judge_mode = JudgeMode::heuristic;
    EXPECT_THROW(mine_dataset({station()}, cfg, nullptr), InputError);

    auto xs = mine_dataset({station()}, cfg, &judge);
    ASSERT_EQ(xs.size(), 2u);
    EXPECT_EQ(xs[1].verdict, Decision::undecided);
    EXPECT_EQ(xs[0].verdict, Decision::relevant);

    cfg.strict = true;
    xs = mine_dataset({station()}, cfg, &judge);
    ASSERT_EQ(xs.size(), 1u);
    EXPECT_EQ(xs[0].positive.item.doc_id, "2295");

    cfg.strict = false;
    cfg.recycle_rejected_positives = true;
    xs = mine_dataset({station()}, cfg, &judge);
    ASSERT_EQ(xs.size(), 2u);
    EXPECT_EQ(xs[1].negatives.size(), 9u);
    EXPECT_EQ(xs[1].negatives.back().item.doc_id, "6402");
    EXPECT_EQ(xs[0].negatives.size(), 9u);  // different list, untouched
}

TEST(Mining, JudgeOffIsIdentityAndAuditRecordsEveryVerdict) {
    ListJudge judge;
    MiningConfig cfg;
    EXPECT_EQ(dump(mine_dataset({station()}, cfg, &judge)), dump(mine_naive_instances(station())));
    EXPECT_EQ(judge.calls, 0u);

    cfg.judge_mode = JudgeMode::heuristic;
    cfg.max_in_flight = 3;
    std::ostringstream audit_out;
    AuditLog audit(&audit_out);
    mine_dataset({station()}, cfg, &judge, nullptr, &audit);
    ASSERT_EQ(audit.lines().size(), 3u);
    const auto first = Json::parse(audit.lines()[0]);
    EXPECT_EQ(first["doc_id"], "2295");
    EXPECT_EQ(first["verdict"], "relevant");
    EXPECT_EQ(first["template_hash"], "list");
}

TEST(Mining, DatasetRoundTrip) {
    ListJudge judge;
    judge.undecided = {"8810"};
    MiningConfig cfg;
    cfg.judge_mode = JudgeMode::heuristic;
    const auto xs = mine_dataset({station()}, cfg, &judge);
    std::istringstream in(dump(xs));
    const auto back = parse_dataset(in);
    EXPECT_EQ(dump(back), dump(xs));
    std::istringstream bad("{\"query\":\"q\"}\n");
    EXPECT_THROW(parse_dataset(bad), ParseError);
}
