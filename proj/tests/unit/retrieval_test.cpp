#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"

using namespace lrat;

TEST(Corpus, RejectsBadDocuments) {
    EXPECT_THROW(Corpus({{"a", "", "x"}, {"a", "", "y"}}), InputError);
    EXPECT_THROW(Corpus({{"", "", "x"}}), InputError);
    EXPECT_THROW(Corpus({{"a", "t", "   "}}), InputError);
    std::istringstream in("{\"doc_id\":\"a\",\"title\":\"T\",\"text\":\"body\"}\n{\"doc_id\":\"b\"}\n");
    EXPECT_THROW(parse_corpus(in), ParseError);
}

TEST(Corpus, RoundTripAndLookup) {
    std::mt19937_64 rng(1);
    const auto c = oracle::random_corpus(rng, 20);
    std::ostringstream out;
    write_corpus(out, c);
    std::istringstream in(out.str());
    const auto back = parse_corpus(in);
    EXPECT_EQ(back.documents(), c.documents());
    EXPECT_EQ(back.find("D7")->text, c.at(7).text);
    EXPECT_EQ(back.find("nope"), nullptr);
}

TEST(Bm25, HandComputedScore) {
    // N=2, "cat" in one doc: idf = ln(1 + 1.5/1.5) = ln 2
    Corpus c({{"a", "", "cat dog"}, {"b", "", "dog dog bird"}});
    const Bm25Index idx(c);
    const auto r = idx.search("cat", 5);
    ASSERT_EQ(r.size(), 1u);
    const double avg = 2.5, norm = 1.2 * (0.25 + 0.75 * 2 / avg);
    EXPECT_NEAR(r[0].score, std::log(2.0) * 2.2 / (1 + norm), 1e-15);
    EXPECT_TRUE(idx.search("zebra", 5).empty());
    EXPECT_THROW(idx.search("cat", 0), InputError);
}

TEST(Bm25, TiesBreakByDocId) {
    Corpus c({{"z", "", "same words"}, {"b", "", "same words"}, {"m", "", "same words"}});
    const auto r = search_topk(make_bm25_retriever(std::make_shared<const Corpus>(c)), "same", 3);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0].doc_id, "b");
    EXPECT_EQ(r[1].doc_id, "m");
    EXPECT_EQ(r[2].doc_id, "z");
    EXPECT_EQ(r[2].rank, 3u);
}

TEST(Bm25, MatchesBruteForceOnRandomCorpora) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> size(1, 400);
    for (int trial = 0; trial < 40; ++trial) {
        auto corpus = std::make_shared<const Corpus>(oracle::random_corpus(rng, size(rng)));
        const auto r = make_bm25_retriever(corpus);
        for (int q = 0; q < 5; ++q) {
            const auto query = oracle::random_text(rng, 1, 5);
            const auto got = search_topk(r, query, 10);
            const auto scored = search_scored(r, query, 10);
            const auto want = oracle::bm25_brute_force(*corpus, query, 10);
            ASSERT_EQ(got.size(), want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                EXPECT_EQ(got[i].doc_id, want[i].doc_id);
                EXPECT_EQ(got[i].rank, i + 1);
                EXPECT_NEAR(scored[i].score, want[i].score, 1e-12);
                EXPECT_EQ(got[i].snippet, make_snippet(*corpus->find(got[i].doc_id)));
            }
        }
    }
}

TEST(Bm25, AlternateParameters) {
    std::mt19937_64 rng(5);
    auto corpus = std::make_shared<const Corpus>(oracle::random_corpus(rng, 60));
    const auto r = make_bm25_retriever(corpus, {2.0, 0.3});
    const auto got = search_scored(r, "radio tower news", 10);
    const auto want = oracle::bm25_brute_force(*corpus, "radio tower news", 10, 2.0, 0.3);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(corpus->at(got[i].position).doc_id, want[i].doc_id);
    EXPECT_THROW(make_bm25_retriever(corpus, {0.0, 0.5}), InputError);
    EXPECT_THROW(make_bm25_retriever(corpus, {1.2, 1.5}), InputError);
}

TEST(Dense, MatchesBruteForceCosine) {
    std::mt19937_64 rng(12);
    auto corpus = std::make_shared<const Corpus>(oracle::random_corpus(rng, 120));
    auto params = std::make_shared<const EncoderParams>(init_encoder(512, 8, 3, 4));
    const auto r = export_dense_retriever(params, corpus);
    for (int q = 0; q < 20; ++q) {
        const auto query = oracle::random_text(rng, 1, 6);
        const auto qv = oracle::embed(*params, feature_ids(*params, query, 512));
        std::vector<oracle::Scored> all;
        for (const auto& d : corpus->documents()) all.push_back({d.doc_id, oracle::dot(qv, oracle::embed(*params, feature_ids(*params, d.indexed_text(), 512)))});
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id; });
        const auto got = search_scored(r, query, 10);
        ASSERT_EQ(got.size(), 10u);
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_NEAR(got[i].score, all[i].score, 1e-12);
            // ids agree except where the oracle sees a near-tie
            if (i + 1 < all.size() && std::abs(all[i].score - all[i + 1].score) > 1e-12 && (i == 0 || std::abs(all[i].score - all[i - 1].score) > 1e-12)) {
                EXPECT_EQ(corpus->at(got[i].position).doc_id, all[i].doc_id);
            }
        }
    }
    EXPECT_TRUE(search_scored(r, "", 10).empty());
    EXPECT_TRUE(search_scored(r, "!!!", 10).empty());
}
