#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"

using namespace lrat;

namespace {

std::vector<CandidateInstance> with_lengths(const std::vector<std::size_t>& ls) {
    std::vector<CandidateInstance> out;
    for (auto l : ls) {
        CandidateInstance c;
        c.reasoning_len = l;
        out.push_back(c);
    }
    return out;
}

std::vector<double> weights_of(const std::vector<std::size_t>& ls) {
    std::vector<double> w;
    for (const auto& p : apply_weights(with_lengths(ls), fit_params(ls))) w.push_back(p.weight);
    return w;
}

}  // namespace

TEST(Weighting, RawIsExactAtZeroAndHalfLife) {
    EXPECT_EQ(raw_score(0, 200), 0.0);
    EXPECT_EQ(raw_score(200, 200), 0.5);
    EXPECT_EQ(raw_score(37, 37), 0.5);
    EXPECT_EQ(marginal_gain(0, 10), 1.0);
    EXPECT_NEAR(marginal_gain(10, 10), 0.5, 1e-15);
}

TEST(Weighting, RawMatchesClosedForm) {
    for (double beta : {1.0, 7.0, 200.0}) {
        for (double l : {0.0, 1.0, 3.0, 50.0, 1000.0}) EXPECT_NEAR(raw_score(l, beta), oracle::raw(l, beta), 1e-15);
    }
}

TEST(Weighting, ReferenceFixture) {
    const std::vector<std::size_t> ls{100, 200, 400};
    const auto p = fit_params(ls);
    EXPECT_EQ(p.beta, 200.0);
    const double r[3] = {1 - std::pow(2.0, -0.5), 0.5, 0.75};
    const double mu = (r[0] + r[1] + r[2]) / 3;
    EXPECT_NEAR(p.mu_raw, mu, 1e-12);
    EXPECT_NEAR(p.mu_raw, 0.514298, 5e-7);
    const auto w = weights_of(ls);
    const double printed[3] = {0.5695, 0.9722, 1.4583};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(w[i], r[i] / mu, 1e-12);
        EXPECT_NEAR(w[i], printed[i], 5e-5);
    }
}

TEST(Weighting, LowerMedianAndZeroBeta) {
    EXPECT_EQ(fit_params({1, 2, 3, 4}).beta, 2.0);
    EXPECT_EQ(fit_params({9, 1, 5}).beta, 5.0);
    EXPECT_THROW(fit_params({0, 0, 5}), InputError);
    EXPECT_THROW(fit_params({}), InputError);
    EXPECT_THROW(raw_score(1, 0), InputError);
}

TEST(Weighting, MeanOneOnRandomMultisets) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> size(1, 200), len(0, 2000);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::size_t> ls(size(rng));
        for (auto& l : ls) l = len(rng);
        ls.push_back(len(rng) + 1);
        ls.push_back(len(rng) + 1);  // keeps the median positive
        std::sort(ls.begin(), ls.end());
        if (ls[(ls.size() - 1) / 2] == 0) continue;
        const auto pairs = apply_weights(with_lengths(ls), fit_params(ls));
        EXPECT_NEAR(mean_weight(pairs), 1.0, 1e-9);
        for (const auto& p : pairs) EXPECT_GE(p.weight, 0.0);
    }
}

TEST(Weighting, ScaleAndPermutationInvariance) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> len(1, 500);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> ls(17);
        for (auto& l : ls) l = len(rng);
        const auto w = weights_of(ls);
        for (std::size_t c : {2u, 3u, 10u}) {
            std::vector<std::size_t> scaled;
            for (auto l : ls) scaled.push_back(l * c);
            const auto ws = weights_of(scaled);
            for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(ws[i], w[i], 1e-12);
        }
        std::vector<std::size_t> idx(ls.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<std::size_t> perm;
        for (auto i : idx) perm.push_back(ls[i]);
        const auto wp = weights_of(perm);
        for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_NEAR(wp[k], w[idx[k]], 1e-15);
    }
}

TEST(Weighting, MonotoneAndBounded) {
    const WeightingParams p = fit_params({10, 20, 30});
    double prev = -1;
    for (std::size_t l = 0; l < 500; ++l) {
        const double w = intensity_weight(l, p);
        EXPECT_GE(w, prev);
        EXPECT_LT(w, 1.0 / p.mu_raw);
        prev = w;
    }
}

TEST(Weighting, WeightedDatasetRoundTrip) {
    const auto pairs = apply_weights(with_lengths({5, 9, 12}), fit_params({5, 9, 12}));
    std::ostringstream out;
    write_weighted_dataset(out, pairs);
    std::istringstream in(out.str());
    const auto back = parse_weighted_dataset(in);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back[i].weight, pairs[i].weight);
    std::istringstream bad(std::string(R"({"query":"q","positive":{"doc_id":"a","text":"t"},"negatives":[],"reasoning":"",)") +
                           R"("reasoning_len":0,"label":"correct","provenance":{"trajectory_id":"x","search_turn":0,"browse_turn":1},"verdict":null,"weight":-1})" + "\n");
    EXPECT_THROW(parse_weighted_dataset(bad), ParseError);
}
