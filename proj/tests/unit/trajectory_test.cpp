#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"

using namespace lrat;

namespace {

Trajectory station() { return load_trajectories(std::string(LRAT_FIXTURES) + "/station_trajectory.jsonl").at(0); }

bool has_rule(const std::vector<Violation>& vs, const std::string& rule) {
    return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.rule == rule; });
}

}  // namespace

TEST(Text, TokenizeFoldsCaseAndSplitsPunctuation) {
    EXPECT_EQ(tokenize("WMJR (Nicholasville, KY)"), (std::vector<std::string>{"wmjr", "nicholasville", "ky"}));
    EXPECT_EQ(tokenize(""), std::vector<std::string>{});
    EXPECT_EQ(tokenize("  ...  "), std::vector<std::string>{});
    EXPECT_EQ(count_tokens("one two  three"), 3u);
}

TEST(Text, NonAsciiLettersAreWordCharacters) {
    EXPECT_EQ(tokenize("Café ÉCOLE"), (std::vector<std::string>{"café", "école"}));
    EXPECT_EQ(count_tokens("Москва и мир"), 3u);
}

TEST(Text, TokenPrefixKeepsBudget) {
    EXPECT_EQ(token_prefix("a b c d e", 3), "a b c");
    EXPECT_EQ(token_prefix("a b", 5), "a b");
    EXPECT_EQ(count_tokens(token_prefix("x, y; z. w", 2)), 2u);
}

TEST(Trajectory, FixtureIsValid) {
    const auto t = station();
    EXPECT_TRUE(validate_trajectory(t).empty());
    EXPECT_EQ(t.count_searches(), 2u);
    EXPECT_EQ(t.count_browses(), 3u);
    EXPECT_EQ(t.answer().value(), "The station is WMJR (Nicholasville, KY)");
}

TEST(Trajectory, RoundTripIsByteIdentical) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        const auto t = oracle::random_trajectory(rng, "r" + std::to_string(i));
        const std::string line = serialize_trajectory(t);
        const auto back = parse_trajectories(line + "\n");
        ASSERT_EQ(back.size(), 1u);
        EXPECT_EQ(back[0], t);
        EXPECT_EQ(serialize_trajectory(back[0]), line);
    }
}

TEST(Trajectory, RandomTrajectoriesAreValid) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) EXPECT_TRUE(validate_trajectory(oracle::random_trajectory(rng, "v")).empty());
}

TEST(Trajectory, MissingSourceTurnResolvesToLatestContainingSearch) {
    auto j = to_json(station());
    j["turns"][1]["action"].erase("source_turn");
    j["turns"][4]["action"]["source_turn"] = nullptr;
    const auto t = trajectory_from_json(j);
    EXPECT_EQ(std::get<BrowseAction>(t.turns[1].action).source_turn, 0u);
    EXPECT_EQ(std::get<BrowseAction>(t.turns[4].action).source_turn, 2u);

    // 2295 appears in both lists; a late browse of it resolves to the later one
    auto late = to_json(station());
    late["turns"][3]["action"] = {{"type", "browse"}, {"doc_id", "2295"}};
    late["turns"][3]["observation"]["doc_id"] = "2295";
    EXPECT_EQ(std::get<BrowseAction>(trajectory_from_json(late).turns[3].action).source_turn, 2u);

    auto bad = to_json(station());
    bad["turns"][1]["action"] = {{"type", "browse"}, {"doc_id", "nowhere"}};
    EXPECT_THROW(trajectory_from_json(bad, 4), ParseError);
}

TEST(Trajectory, EachRuleIsDetected) {
    const auto base = station();
    {
        auto t = base;
        t.turns[2].index = 7;
        EXPECT_TRUE(has_rule(validate_trajectory(t), "index-sequence"));
    }
    {
        auto t = base;
        std::get<SearchAction>(t.turns[0].action).query = "   ";
        EXPECT_TRUE(has_rule(validate_trajectory(t), "empty-query"));
    }
    {
        auto t = base;
        t.turns[1].action = AnswerAction{"early"};
        t.turns[1].observation = std::monostate{};
        EXPECT_TRUE(has_rule(validate_trajectory(t), "answer-not-final"));
    }
    {
        auto t = base;
        t.turns[4].action = AnswerAction{"x"};
        t.turns[4].observation = std::monostate{};
        EXPECT_TRUE(has_rule(validate_trajectory(t), "multiple-answers"));
    }
    {
        auto t = base;
        t.turns[0].observation = std::monostate{};
        EXPECT_TRUE(has_rule(validate_trajectory(t), "observation-mismatch"));
    }
    {
        auto t = base;
        std::get<DocumentObservation>(t.turns[1].observation).doc_id = "other";
        EXPECT_TRUE(has_rule(validate_trajectory(t), "document-id-mismatch"));
    }
    {
        auto t = base;
        std::get<BrowseAction>(t.turns[1].action).source_turn = 1;
        EXPECT_TRUE(has_rule(validate_trajectory(t), "browse-source-order"));
    }
    {
        auto t = base;
        std::get<BrowseAction>(t.turns[4].action).source_turn = 3;
        EXPECT_TRUE(has_rule(validate_trajectory(t), "browse-source-not-search"));
    }
    {
        auto t = base;
        std::get<BrowseAction>(t.turns[3].action).source_turn = 0;
        EXPECT_TRUE(has_rule(validate_trajectory(t), "browse-doc-not-in-results"));
    }
    {
        auto t = base;
        std::get<ResultsObservation>(t.turns[0].observation).items[1].rank = 1;
        EXPECT_TRUE(has_rule(validate_trajectory(t), "rank-collision"));
    }
    {
        auto t = base;
        std::get<ResultsObservation>(t.turns[0].observation).items[9].rank = 12;
        EXPECT_TRUE(has_rule(validate_trajectory(t), "rank-gap"));
    }
    {
        auto t = base;
        auto& items = std::get<ResultsObservation>(t.turns[0].observation).items;
        items.push_back({"extra", 11, "s"});
        EXPECT_TRUE(has_rule(validate_trajectory(t), "rank-range"));
    }
    {
        auto t = base;
        TrajectoryRules rules;
        rules.snippet_tokens = 2;
        EXPECT_TRUE(has_rule(validate_trajectory(t, rules), "snippet-too-long"));
    }
    {
        auto t = base;
        t.label = Label::overflow;
        EXPECT_TRUE(has_rule(validate_trajectory(t), "overflow-length"));
        TrajectoryRules rules;
        rules.step_cap = t.turns.size();
        EXPECT_FALSE(has_rule(validate_trajectory(t, rules), "overflow-length"));
    }
}

TEST(Trajectory, ParseErrorNamesLine) {
    const std::string good = serialize_trajectory(station());
    try {
        parse_trajectories(good + "\n" + "{\"id\":\"x\"}\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("question"), std::string::npos);
    }
    try {
        parse_trajectories(good + "\nnot json\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
    }
}

TEST(Trajectory, LoadMissingFileIsInputError) {
    EXPECT_THROW(load_trajectories("/nonexistent/traj.jsonl"), InputError);
}
