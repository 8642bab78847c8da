#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "deconf/corpus.hpp"
#include "deconf/log_odds.hpp"

namespace deconf {

// Collapsed Gibbs state for latent Dirichlet allocation. Counts are stored as
// integers; assignments are kept so that the counts can be audited.
struct TopicModelState {
    int num_topics = 0;
    int vocab_size = 0;
    double alpha = 0.0;
    double beta = 0.01;
    Eigen::MatrixXi topic_word_counts;  // K x V
    Eigen::MatrixXi doc_topic_counts;   // N x K
    Eigen::VectorXi topic_totals;       // K
    std::vector<std::vector<int>> assignments;

    long total_tokens() const { return topic_totals.sum(); }
};

struct LdaOptions {
    int num_topics = 50;
    int iterations = 1000;
    std::uint64_t seed = 1;
    double alpha = -1.0;  // <= 0 selects 50 / num_topics
    double beta = 0.01;
};

TopicModelState fit_lda(const std::vector<TokenIds>& docs, int vocab_size, const LdaOptions& options);

// Topic proportions of an unseen document with topic-word counts frozen. Uses a
// deterministic zero-order collapsed variational sweep (expected counts in place
// of sampled ones); `iterations` sweeps over the tokens.
ConfoundDistribution lda_document_distribution(const TopicModelState& state, std::span<const int> doc_ids,
                                               int iterations = 50);

// Smoothed topic proportions of each training document from the final sample:
// (n_dk + alpha) / (n_d + K alpha).
std::vector<ConfoundDistribution> lda_training_distributions(const TopicModelState& state);

// Indices of the `k` highest-count words of a topic, ties by lower id.
std::vector<int> lda_top_words(const TopicModelState& state, int topic, int k);

}  // namespace deconf
