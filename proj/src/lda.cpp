#include "deconf/lda.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "deconf/error.hpp"

namespace deconf {

TopicModelState fit_lda(const std::vector<TokenIds>& docs, int vocab_size, const LdaOptions& options) {
    if (docs.empty()) throw Error("empty corpus");
    if (options.num_topics < 2) throw Error("num_topics must be >= 2");
    if (options.iterations < 1) throw Error("iterations must be >= 1");
    if (vocab_size < 1) throw Error("vocab_size must be >= 1");

    const int K = options.num_topics;
    TopicModelState s;
    s.num_topics = K;
    s.vocab_size = vocab_size;
    s.alpha = options.alpha > 0.0 ? options.alpha : 50.0 / K;
    s.beta = options.beta;
    s.topic_word_counts = Eigen::MatrixXi::Zero(K, vocab_size);
    s.doc_topic_counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(docs.size()), K);
    s.topic_totals = Eigen::VectorXi::Zero(K);
    s.assignments.resize(docs.size());

    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<int> any_topic(0, K - 1);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        auto& z = s.assignments[d];
        z.reserve(docs[d].size());
        for (int w : docs[d]) {
            if (w < 0 || w >= vocab_size) throw Error("token id outside vocabulary");
            const int k = any_topic(rng);
            z.push_back(k);
            ++s.topic_word_counts(k, w);
            ++s.doc_topic_counts(static_cast<Eigen::Index>(d), k);
            ++s.topic_totals(k);
        }
    }

    const double vbeta = vocab_size * s.beta;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> cumulative(static_cast<std::size_t>(K));
    for (int it = 0; it < options.iterations; ++it) {
        for (std::size_t d = 0; d < docs.size(); ++d) {
            const auto di = static_cast<Eigen::Index>(d);
            auto& z = s.assignments[d];
            for (std::size_t i = 0; i < docs[d].size(); ++i) {
                const int w = docs[d][i];
                int k = z[i];
                --s.topic_word_counts(k, w);
                --s.doc_topic_counts(di, k);
                --s.topic_totals(k);

                double acc = 0.0;
                for (int t = 0; t < K; ++t) {
                    acc += (s.doc_topic_counts(di, t) + s.alpha) * (s.topic_word_counts(t, w) + s.beta) /
                           (s.topic_totals(t) + vbeta);
                    cumulative[static_cast<std::size_t>(t)] = acc;
                }
                const double u = unit(rng) * acc;
                k = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
                k = std::min(k, K - 1);

                z[i] = k;
                ++s.topic_word_counts(k, w);
                ++s.doc_topic_counts(di, k);
                ++s.topic_totals(k);
            }
        }
    }
    return s;
}

ConfoundDistribution lda_document_distribution(const TopicModelState& state, std::span<const int> doc_ids,
                                               int iterations) {
    const int K = state.num_topics;
    if (K < 1 || state.topic_word_counts.cols() != state.vocab_size) throw Error("topic model is not fitted");
    const double vbeta = state.vocab_size * state.beta;

    // Frozen word likelihoods per token.
    std::vector<Eigen::VectorXd> phi;
    phi.reserve(doc_ids.size());
    for (int w : doc_ids) {
        if (w < 0 || w >= state.vocab_size) throw Error("token id outside vocabulary");
        Eigen::VectorXd p(K);
        for (int k = 0; k < K; ++k)
            p(k) = (state.topic_word_counts(k, w) + state.beta) / (state.topic_totals(k) + vbeta);
        phi.push_back(std::move(p));
    }

    const auto n = doc_ids.size();
    std::vector<Eigen::VectorXd> gamma(n, Eigen::VectorXd::Constant(K, 1.0 / K));
    Eigen::VectorXd expected = Eigen::VectorXd::Constant(K, static_cast<double>(n) / K);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            expected -= gamma[i];
            Eigen::VectorXd g = (expected.array() + state.alpha) * phi[i].array();
            g /= g.sum();
            gamma[i] = g;
            expected += g;
        }
    }

    Eigen::VectorXd theta = (expected.array().max(0.0) + state.alpha).matrix();
    theta /= theta.sum();
    return {std::vector<double>(theta.data(), theta.data() + K)};
}

std::vector<ConfoundDistribution> lda_training_distributions(const TopicModelState& state) {
    const int K = state.num_topics;
    std::vector<ConfoundDistribution> out;
    out.reserve(static_cast<std::size_t>(state.doc_topic_counts.rows()));
    for (Eigen::Index d = 0; d < state.doc_topic_counts.rows(); ++d) {
        const double total = state.doc_topic_counts.row(d).sum() + K * state.alpha;
        ConfoundDistribution t;
        t.probs.resize(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) t.probs[static_cast<std::size_t>(k)] = (state.doc_topic_counts(d, k) + state.alpha) / total;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<int> lda_top_words(const TopicModelState& state, int topic, int k) {
    std::vector<int> ids(static_cast<std::size_t>(state.vocab_size));
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        return state.topic_word_counts(topic, a) > state.topic_word_counts(topic, b);
    });
    ids.resize(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(std::max(k, 0))));
    return ids;
}

}  // namespace deconf
