#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"

using namespace lrat;

namespace {

Trajectory station() { return load_trajectories(std::string(LRAT_FIXTURES) + "/station_trajectory.jsonl").at(0); }

std::vector<Trajectory> random_set(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_trajectory(rng, "r" + std::to_string(i)));
    return out;
}

}  // namespace

TEST(Stats, PrintedRatioFromRowAggregates) {
    const auto s = make_stats(Bucket::correct, 100, 9.15 * 100, 2.96 * 100, 12.11 * 100);
    ASSERT_TRUE(s.browse_search_ratio);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", *s.browse_search_ratio);
    EXPECT_STREQ(buf, "0.32");
    EXPECT_NEAR(s.avg_search, 9.15, 1e-12);
    EXPECT_FALSE(make_stats(Bucket::total, 3, 0, 0, 3).browse_search_ratio);
}

TEST(Stats, BucketsAgreeWithDirectCounts) {
    const auto ts = random_set(4, 200);
    const auto st = compute_stats(ts);
    double n[2] = {0, 0}, s[2] = {0, 0}, b[2] = {0, 0}, t[2] = {0, 0};
    for (const auto& x : ts) {
        if (x.label != Label::correct && x.label != Label::incorrect) continue;
        const int k = x.label == Label::correct ? 0 : 1;
        n[k] += 1;
        for (const auto& turn : x.turns) {
            s[k] += turn.is_search();
            b[k] += turn.is_browse();
        }
        t[k] += static_cast<double>(x.turns.size());
    }
    for (int k = 0; k < 2; ++k) {
        EXPECT_EQ(st[k].n, static_cast<std::size_t>(n[k]));
        EXPECT_NEAR(st[k].avg_search, s[k] / n[k], 1e-12);
        EXPECT_NEAR(st[k].avg_browse, b[k] / n[k], 1e-12);
        EXPECT_NEAR(*st[k].browse_search_ratio, b[k] / s[k], 1e-12);
        EXPECT_NEAR(st[k].avg_steps, t[k] / n[k], 1e-12);
    }
    EXPECT_EQ(st[2].n, st[0].n + st[1].n);
    EXPECT_NEAR(*st[2].browse_search_ratio, (b[0] + b[1]) / (s[0] + s[1]), 1e-12);
}

TEST(Stats, CsvHeader) {
    std::ostringstream out;
    write_stats_csv(out, compute_stats({station()}));
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "Bucket,N,Avg S,Avg B,B/S,Avg T");
}

TEST(Transitions, StationCountsAndRowsSumToOne) {
    const auto m = transition_probabilities({station()});
    // S B S B B A
    EXPECT_EQ(m.counts[0][1], 2u);
    EXPECT_EQ(m.counts[1][0], 1u);
    EXPECT_EQ(m.counts[1][1], 1u);
    EXPECT_EQ(m.counts[1][2], 1u);
    EXPECT_EQ(m.total(), 5u);
    EXPECT_FALSE(m.p(ActionKind::answer, ActionKind::search));
    EXPECT_NEAR(*m.p(ActionKind::browse, ActionKind::answer), 1.0 / 3, 1e-15);

    const auto r = transition_probabilities(random_set(9, 300));
    for (const auto& row : r.probabilities) {
        if (!row) continue;
        EXPECT_NEAR((*row)[0] + (*row)[1] + (*row)[2], 1.0, 1e-9);
    }
}

TEST(Wilson, ReferenceValues) {
    const auto w = wilson_interval(5, 10);
    EXPECT_NEAR(w.lower, 0.2366, 1e-3);
    EXPECT_NEAR(w.upper, 0.7634, 1e-3);
    EXPECT_NEAR(w.center, 0.5, 1e-15);
    EXPECT_EQ(wilson_interval(0, 7).lower, 0.0);
    EXPECT_EQ(wilson_interval(7, 7).upper, 1.0);
    EXPECT_THROW(wilson_interval(1, 0), InputError);
    EXPECT_THROW(wilson_interval(3, 2), InputError);
}

TEST(Wilson, ContainsPoint) {
    for (std::size_t n = 1; n < 60; ++n) {
        for (std::size_t k = 0; k <= n; ++k) {
            const auto w = wilson_interval(k, n);
            EXPECT_LE(w.lower, w.point + 1e-12);
            EXPECT_GE(w.upper, w.point - 1e-12);
            EXPECT_GE(w.lower, 0.0);
            EXPECT_LE(w.upper, 1.0);
        }
    }
}

TEST(Wilson, ShrinksWithN) {
    const std::pair<std::size_t, std::size_t> pts[] = {{1, 2}, {2, 4}, {4, 8}, {8, 16}, {16, 32}, {32, 64}, {64, 128}};
    double prev = 2.0;
    for (const auto& [k, n] : pts) {
        const auto w = wilson_interval(k, n);
        EXPECT_LT(w.upper - w.lower, prev);
        prev = w.upper - w.lower;
    }
}

TEST(EvidenceBins, CountsUniqueEvidenceBrowses) {
    auto a = station();
    auto b = station();
    b.id = "b";
    b.question = "other";
    b.label = Label::incorrect;
    EvidenceMap ev{{a.question, {"2295", "8810"}}, {"other", {"9999"}}};
    const auto bins = accuracy_by_evidence_browsed({a, b}, ev);
    ASSERT_EQ(bins.size(), 2u);
    EXPECT_EQ(bins[0].label, "0");
    EXPECT_EQ(bins[0].successes, 0u);
    EXPECT_EQ(bins[0].interval.n, 1u);
    EXPECT_EQ(bins[1].label, "2");
    EXPECT_EQ(bins[1].successes, 1u);

    const auto wide = accuracy_by_evidence_browsed({a, b}, ev, {0, 2});
    EXPECT_EQ(wide[0].label, "0-1");
    EXPECT_EQ(wide[1].label, "2+");
    EXPECT_THROW(accuracy_by_evidence_browsed({a}, {}), InputError);
    EXPECT_THROW(accuracy_by_evidence_browsed({a}, ev, {2, 1}), InputError);
}

TEST(Histograms, BrowseRanksAndReasoningLengths) {
    const auto h = browse_rank_distribution({station()});
    ASSERT_EQ(h.counts.size(), 10u);
    EXPECT_EQ(h.counts[1], 2u);  // 2295 and 8810 at rank 2
    EXPECT_EQ(h.counts[3], 1u);  // 6402 at rank 4
    EXPECT_EQ(h.samples, 3u);
    double f = 0;
    for (double x : h.frequencies) f += x;
    EXPECT_NEAR(f, 1.0, 1e-12);
    EXPECT_TRUE(browse_rank_distribution({}).counts.empty());

    const auto t = station();
    EvidenceMap ev{{t.question, {"8810"}}};
    const auto parts = reasoning_length_report({t}, &ev, 5);
    ASSERT_EQ(parts.size(), 2u);
    EXPECT_EQ(parts[0].evidence, false);
    EXPECT_EQ(parts[0].samples.size(), 2u);
    EXPECT_EQ(parts[1].evidence, true);
    EXPECT_EQ(parts[1].samples, std::vector<std::size_t>{count_tokens(t.turns[4].think)});
    EXPECT_THROW(reasoning_length_report({t}, nullptr, 0), InputError);

    const auto all = reasoning_length_report(random_set(2, 100));
    for (const auto& p : all) {
        EXPECT_EQ(p.histogram.samples, p.samples.size());
        EXPECT_FALSE(p.evidence);
    }
}
