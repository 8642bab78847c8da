#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "deconf/analyze.hpp"
#include "deconf/error.hpp"

using namespace deconf;

namespace {

Vocabulary small_vocab() {
    Vocabulary v;
    for (const char* w : {"alpha", "beta", "gamma", "delta"}) v.add(w);
    return v;
}

}  // namespace

TEST(LexiconAccumulator, MeanScorePerWordType) {
    const Vocabulary v = small_vocab();  // ids 3..6
    LexiconAccumulator acc;
    acc.add(std::vector<int>{3, 4, 3}, std::vector<double>{0.2, 0.5, 0.4});
    acc.add(std::vector<int>{4, 5, Vocabulary::pad_id}, std::vector<double>{0.1, 0.9, 0.7});
    const auto r = acc.finish(v, LexiconMethod::attention, 10, 1);
    ASSERT_EQ(r.entries.size(), 3u);
    EXPECT_EQ(r.entries[0].word, "gamma");
    EXPECT_DOUBLE_EQ(r.entries[0].mean_score, 0.9);
    EXPECT_EQ(r.entries[1].word, "alpha");
    EXPECT_NEAR(r.entries[1].mean_score, 0.3, 1e-12);
    EXPECT_EQ(r.entries[1].count, 2);
    EXPECT_EQ(r.entries[2].word, "beta");
}

TEST(LexiconAccumulator, MinCountTopKAndTies) {
    const Vocabulary v = small_vocab();
    LexiconAccumulator acc;
    acc.add(std::vector<int>{4, 3, 5, 6, 6}, std::vector<double>{0.5, 0.5, 0.9, 0.1, 0.1});
    const auto r = acc.finish(v, LexiconMethod::saliency, 2, 1);
    ASSERT_EQ(r.entries.size(), 2u);
    EXPECT_EQ(r.entries[0].word, "gamma");
    EXPECT_EQ(r.entries[1].word, "alpha");  // ties lexicographic
    const auto frequent = acc.finish(v, LexiconMethod::saliency, 10, 2);
    ASSERT_EQ(frequent.entries.size(), 1u);
    EXPECT_EQ(frequent.entries[0].word, "delta");
}

TEST(LexiconAccumulator, OrderIndependent) {
    const Vocabulary v = small_vocab();
    LexiconAccumulator a, b;
    const std::vector<int> d1{3, 4, 5}, d2{6, 3};
    const std::vector<double> s1{0.1, 0.2, 0.7}, s2{0.6, 0.4};
    a.add(d1, s1);
    a.add(d2, s2);
    b.add(d2, s2);
    b.add(d1, s1);
    const auto ra = a.finish(v, LexiconMethod::attention, 10, 1);
    const auto rb = b.finish(v, LexiconMethod::attention, 10, 1);
    ASSERT_EQ(ra.entries.size(), rb.entries.size());
    for (std::size_t i = 0; i < ra.entries.size(); ++i) {
        EXPECT_EQ(ra.entries[i].word, rb.entries[i].word);
        EXPECT_NEAR(ra.entries[i].mean_score, rb.entries[i].mean_score, 1e-15);
    }
}

TEST(LexiconAccumulator, ExcludesMaskAndRejectsLengthMismatch) {
    const Vocabulary v = small_vocab();
    LexiconAccumulator acc;
    acc.add(std::vector<int>{Vocabulary::mask_id, 3}, std::vector<double>{0.9, 0.1});
    const auto r = acc.finish(v, LexiconMethod::attention, 10, 1);
    ASSERT_EQ(r.entries.size(), 1u);
    EXPECT_EQ(r.entries[0].word, "alpha");
    EXPECT_THROW(acc.add(std::vector<int>{3}, std::vector<double>{0.1, 0.2}), Error);
}

TEST(Lexicons, FromModel) {
    const Vocabulary v = small_vocab();
    ModelConfig cfg;
    cfg.vocab_size = v.size();
    cfg.embed_dim = 4;
    cfg.hidden_dim = 3;
    cfg.head_hidden = 4;
    cfg.num_classes = 2;
    const Model m = init_params(cfg);
    const std::vector<TokenIds> docs{{3, 4, 5}, {6, 3}, {4, 4, 6}};
    for (const auto& r : {attention_lexicon(m, v, docs, 20, 1), saliency_lexicon(m, v, docs, 20, 1)}) {
        EXPECT_EQ(r.entries.size(), 4u);
        for (std::size_t i = 1; i < r.entries.size(); ++i)
            EXPECT_GE(r.entries[i - 1].mean_score, r.entries[i].mean_score);
    }
    EXPECT_THROW(attention_lexicon(m, v, {}, 20, 1), Error);
}

TEST(Lexicons, WriteFormat) {
    LexiconReport r;
    r.entries = {{"alpha", 0.5, 12}, {"beta", 0.25, 30}};
    std::ostringstream out;
    write_lexicon(out, r);
    EXPECT_EQ(out.str(), "1\talpha\t0.5\t12\n2\tbeta\t0.25\t30\n");
}
