#include <gtest/gtest.h>

#include <sstream>

#include "deconf/error.hpp"
#include "deconf/evaluate.hpp"
#include "fixtures.hpp"

using namespace deconf;
using deconf::testing::doc;

namespace {

const std::vector<std::string> kClasses{"A", "B", "C"};

// Predicts the class named by the first token; ties between classes go low.
std::vector<double> first_token_vote(const Document& d) {
    std::vector<double> p(3, 0.0);
    if (d.tokens.empty()) return p;
    const std::string& t = d.tokens.front();
    if (t == "a") p[0] = 1.0;
    else if (t == "b") p[1] = 1.0;
    else if (t == "c") p[2] = 1.0;
    else p = {0.4, 0.4, 0.2};
    return p;
}

}  // namespace

TEST(EvaluateSplit, AccuracyConfusionAndPerClass) {
    const Corpus docs{doc("a x", "A"), doc("a y", "A"), doc("b x", "B"), doc("c x", "B"), doc("z", "C")};
    const auto r = evaluate_split(first_token_vote, docs, kClasses);
    EXPECT_EQ(r.num_examples, 5);
    EXPECT_DOUBLE_EQ(r.accuracy, 3.0 / 5.0);
    Eigen::MatrixXi expected(3, 3);
    expected << 2, 0, 0,
                0, 1, 1,
                1, 0, 0;  // tie 0.4/0.4 resolves to A
    EXPECT_EQ(r.confusion, expected);
    EXPECT_DOUBLE_EQ(r.per_class_accuracy.at("A"), 1.0);
    EXPECT_DOUBLE_EQ(r.per_class_accuracy.at("B"), 0.5);
    EXPECT_DOUBLE_EQ(r.per_class_accuracy.at("C"), 0.0);
}

TEST(EvaluateSplit, RejectsWrongOutputSize) {
    const Predictor two = [](const Document&) { return std::vector<double>{0.5, 0.5}; };
    EXPECT_THROW(evaluate_split(two, Corpus{doc("a", "A")}, kClasses), Error);
}

TEST(EvaluateAccuracy, EmptyOutSplitWarnsAndOmits) {
    const auto r = evaluate_accuracy(first_token_vote, kClasses, Corpus{doc("a", "A")}, Corpus{});
    ASSERT_TRUE(r.accuracy_in());
    EXPECT_DOUBLE_EQ(*r.accuracy_in(), 1.0);
    EXPECT_FALSE(r.accuracy_out());
    ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(EvaluateAccuracy, PermutationInvariant) {
    Corpus docs{doc("a", "A"), doc("b", "A"), doc("c", "C"), doc("q", "B"), doc("b", "B")};
    const auto r1 = evaluate_accuracy(first_token_vote, kClasses, docs, docs);
    std::reverse(docs.begin(), docs.end());
    const auto r2 = evaluate_accuracy(first_token_vote, kClasses, docs, docs);
    EXPECT_EQ(r1, r2);
}

TEST(MaskedEvaluation, MasksOnlyTheTestCopies) {
    const Corpus train{doc("a a a x", "A"), doc("b b b x", "B"), doc("c c c x", "C")};
    const auto vocab = build_vocabulary(train);
    const auto table = compute_log_odds(train, vocab);
    const Corpus test{doc("a x", "A"), doc("b x", "B"), doc("c x", "C")};
    const std::vector<int> ks{0, 1};
    const auto reports = masked_evaluation(first_token_vote, kClasses, table, test, test, ks);
    ASSERT_EQ(reports.size(), 2u);
    EXPECT_EQ(*reports[0].mask_k, 0);
    EXPECT_DOUBLE_EQ(*reports[0].accuracy_in(), 1.0);
    // k = 1 masks a, b and c, leaving no signal: everything falls to A.
    EXPECT_DOUBLE_EQ(*reports[1].accuracy_in(), 1.0 / 3.0);
    EXPECT_EQ(test[0].tokens.front(), "a");
}

TEST(PromptHoldout, RemovesPromptFromTrainAndDev) {
    auto with_prompt = [](Document d, const std::string& p) {
        d.prompt = p;
        return d;
    };
    const Corpus train{with_prompt(doc("a", "A"), "P1"), with_prompt(doc("b", "B"), "P2"),
                       with_prompt(doc("c", "C"), "P1")};
    const Corpus dev{with_prompt(doc("a", "A"), "P1"), with_prompt(doc("b", "B"), "P2")};
    const auto s = prompt_holdout_splits(train, dev, "P1");
    EXPECT_EQ(s.train.size(), 1u);
    EXPECT_EQ(s.dev.size(), 1u);
    ASSERT_EQ(s.test_out.size(), 1u);
    EXPECT_EQ(s.test_out[0].domain, Domain::out);
    for (const auto& d : s.train) EXPECT_NE(d.prompt, "P1");
    EXPECT_EQ(prompt_ids(train), (std::vector<std::string>{"P1", "P2"}));
    EXPECT_THROW(prompt_holdout_splits(train, dev, "P9"), Error);
}

TEST(MeanOutOfDomain, UnweightedMean) {
    EvalReport a, b, c;
    a.out = SplitReport{0.5, {}, Eigen::MatrixXi(), 10};
    b.out = SplitReport{0.9, {}, Eigen::MatrixXi(), 1000};
    const std::vector<EvalReport> reports{a, b, c};
    EXPECT_DOUBLE_EQ(mean_out_of_domain_accuracy(reports), 0.7);
    EXPECT_THROW(mean_out_of_domain_accuracy(std::vector<EvalReport>{c}), Error);
}

TEST(ReportIo, JsonlRoundTrip) {
    const Corpus docs{doc("a", "A"), doc("b", "C"), doc("c", "C")};
    auto r = evaluate_accuracy(first_token_vote, kClasses, docs, Corpus{});
    r.mask_k = 20;
    std::stringstream ss;
    write_report_jsonl(ss, r);
    write_report_jsonl(ss, r);
    const auto back = read_reports_jsonl(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], r);
}

TEST(ReportIo, TextAndConfusion) {
    const Corpus docs{doc("a", "A"), doc("b", "B")};
    const auto r = evaluate_accuracy(first_token_vote, kClasses, docs, docs);
    std::ostringstream text;
    write_report_text(text, r);
    EXPECT_NE(text.str().find("in.accuracy"), std::string::npos);
    std::ostringstream csv;
    write_confusion_csv(csv, kClasses, r.in->confusion);
    std::istringstream lines(csv.str());
    std::string header;
    std::getline(lines, header);
    EXPECT_NE(header.find("A,B,C"), std::string::npos);
}
