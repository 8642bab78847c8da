#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "deconf/error.hpp"
#include "deconf/lda.hpp"
#include "fixtures.hpp"

using namespace deconf;

namespace {

using deconf::testing::disjoint_fixture;

LdaOptions two_topics(std::uint64_t seed, int iterations = 200) {
    LdaOptions o;
    o.num_topics = 2;
    o.iterations = iterations;
    o.seed = seed;
    return o;
}

}  // namespace

TEST(Lda, SeparatesDisjointVocabularies) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto state = fit_lda(disjoint_fixture(seed), 23, two_topics(seed));
        const auto a = lda_top_words(state, 0, 10);
        const auto b = lda_top_words(state, 1, 10);
        std::set<int> sa(a.begin(), a.end()), sb(b.begin(), b.end());
        std::vector<int> common;
        std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
        EXPECT_TRUE(common.empty()) << "seed " << seed;
    }
}

// With the default 50/K document prior (25 at K=2) 30-token documents barely
// constrain topics; a sparse prior makes each vocabulary one topic.
TEST(Lda, SparseDocumentPriorGivesOneTopicPerVocabulary) {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto o = two_topics(seed);
        o.alpha = 0.1;
        const auto state = fit_lda(disjoint_fixture(seed), 23, o);
        const auto a = lda_top_words(state, 0, 10);
        EXPECT_TRUE(std::all_of(a.begin(), a.end(), [&](int w) { return (w < 13) == (a.front() < 13); }))
            << "seed " << seed;
    }
}

TEST(Lda, CountsAreConsistent) {
    const auto docs = disjoint_fixture(7);
    const auto s = fit_lda(docs, 23, two_topics(7, 30));
    long tokens = 0;
    for (const auto& d : docs) tokens += static_cast<long>(d.size());
    EXPECT_EQ(s.topic_word_counts.sum(), tokens);
    EXPECT_EQ(s.doc_topic_counts.sum(), tokens);
    EXPECT_EQ(s.total_tokens(), tokens);
    EXPECT_GE(s.topic_word_counts.minCoeff(), 0);
    EXPECT_EQ(Eigen::VectorXi(s.topic_word_counts.rowwise().sum()), s.topic_totals);
    Eigen::MatrixXi recount = Eigen::MatrixXi::Zero(2, 23);
    for (std::size_t d = 0; d < docs.size(); ++d)
        for (std::size_t i = 0; i < docs[d].size(); ++i) ++recount(s.assignments[d][i], docs[d][i]);
    EXPECT_EQ(recount, s.topic_word_counts);
}

TEST(Lda, DefaultHyperparameters) {
    LdaOptions o;
    o.iterations = 1;
    const auto s = fit_lda(disjoint_fixture(1, 4, 5), 23, o);
    EXPECT_EQ(s.num_topics, 50);
    EXPECT_DOUBLE_EQ(s.alpha, 1.0);
    EXPECT_DOUBLE_EQ(s.beta, 0.01);
}

TEST(Lda, DeterministicGivenSeed) {
    const auto docs = disjoint_fixture(3);
    const auto a = fit_lda(docs, 23, two_topics(11, 20));
    const auto b = fit_lda(docs, 23, two_topics(11, 20));
    EXPECT_EQ(a.assignments, b.assignments);
}

TEST(Lda, RejectsBadArguments) {
    const auto docs = disjoint_fixture(3);
    EXPECT_THROW(fit_lda(docs, 23, two_topics(1, 0)), Error);
    auto one = two_topics(1);
    one.num_topics = 1;
    EXPECT_THROW(fit_lda(docs, 23, one), Error);
    EXPECT_THROW(fit_lda({}, 23, two_topics(1)), Error);
}

TEST(LdaFoldIn, SymmetricStateIsUniform) {
    TopicModelState s;
    s.num_topics = 4;
    s.vocab_size = 6;
    s.alpha = 12.5;
    s.beta = 0.01;
    s.topic_word_counts = Eigen::MatrixXi::Constant(4, 6, 5);
    s.topic_totals = Eigen::VectorXi::Constant(4, 30);
    const TokenIds doc{3, 4, 5, 1};
    const auto t = lda_document_distribution(s, doc);
    ASSERT_EQ(t.size(), 4);
    for (double p : t.probs) EXPECT_NEAR(p, 0.25, 1e-12);
}

TEST(LdaFoldIn, RecoversTopicOfDisjointDocument) {
    const auto s = fit_lda(disjoint_fixture(5), 23, two_topics(5));
    const TokenIds first{3, 4, 5, 6, 7, 8, 9, 3, 4};
    const TokenIds second{13, 14, 15, 16, 17, 18, 19, 20};
    const auto t1 = lda_document_distribution(s, first);
    const auto t2 = lda_document_distribution(s, second);
    const int topic_of_first = s.topic_word_counts(0, 3) > s.topic_word_counts(1, 3) ? 0 : 1;
    EXPECT_GT(t1.probs[static_cast<std::size_t>(topic_of_first)], 0.5);
    EXPECT_GT(t2.probs[static_cast<std::size_t>(1 - topic_of_first)], 0.5);
    EXPECT_NEAR(std::accumulate(t1.probs.begin(), t1.probs.end(), 0.0), 1.0, 1e-6);
}

TEST(LdaFoldIn, AllUnknownDocumentIsScored) {
    const auto s = fit_lda(disjoint_fixture(5), 23, two_topics(5, 20));
    const TokenIds unk{1, 1, 1};
    const auto t = lda_document_distribution(s, unk);
    EXPECT_EQ(t.size(), 2);
    EXPECT_NEAR(t.probs[0] + t.probs[1], 1.0, 1e-6);
}

TEST(LdaTraining, DistributionsSumToOne) {
    const auto s = fit_lda(disjoint_fixture(5), 23, two_topics(5, 20));
    const auto conf = lda_training_distributions(s);
    ASSERT_EQ(conf.size(), 40u);
    for (const auto& c : conf) EXPECT_NEAR(c.probs[0] + c.probs[1], 1.0, 1e-12);
}
