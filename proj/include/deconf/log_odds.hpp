#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "deconf/corpus.hpp"

namespace deconf {

// A K-simplex attached to a document.
struct ConfoundDistribution {
    std::vector<double> probs;

    int size() const { return static_cast<int>(probs.size()); }
    double entropy() const;
};

// z-scored log-odds with an informative Dirichlet prior, one class against the
// rest of the corpus. Rows are classes, columns are vocabulary ids.
class LogOddsTable {
public:
    LogOddsTable() = default;
    LogOddsTable(Eigen::MatrixXd scores, std::vector<std::string> classes, std::vector<std::string> words,
                 double alpha0);

    const Eigen::MatrixXd& scores() const { return scores_; }
    const std::vector<std::string>& classes() const { return classes_; }
    const std::vector<std::string>& words() const { return words_; }
    double alpha0() const { return alpha0_; }
    int num_classes() const { return static_cast<int>(classes_.size()); }
    int num_words() const { return static_cast<int>(words_.size()); }

    int class_index(const std::string& cls) const;
    double score(int cls, int word) const { return scores_(cls, word); }

private:
    Eigen::MatrixXd scores_;
    std::vector<std::string> classes_;
    std::vector<std::string> words_;
    double alpha0_ = 10.0;
};

inline constexpr double kDefaultAlpha0 = 10.0;
inline constexpr double kLogOddsClamp = 20.0;

// Classes are the sorted label set of `train`.
LogOddsTable compute_log_odds(const Corpus& train, const Vocabulary& vocab, double alpha0 = kDefaultAlpha0);

// Highest scores first, ties lexicographic. Reserved tokens are never returned.
std::vector<std::string> top_k_words(const LogOddsTable& table, const std::string& cls, int k);

// p(w|y) proportional to sigmoid(clamped lo(w,y)), normalised over the vocabulary.
Eigen::MatrixXd word_class_distribution(const LogOddsTable& table);

// Empty when the label histogram is balanced within 1%; otherwise log p(y).
std::vector<double> class_log_prior(const Corpus& train, std::span<const std::string> classes);

// t_y = softmax_y( log p(y) + sum_i log p(w_i|y) ), PAD and MASK skipped.
ConfoundDistribution document_confound_distribution(std::span<const int> doc_ids, const Eigen::MatrixXd& pwy,
                                                     std::span<const double> log_prior = {});

std::vector<ConfoundDistribution> log_odds_confounds(const std::vector<TokenIds>& docs, const LogOddsTable& table,
                                                     std::span<const double> log_prior = {});

// word<TAB>class<TAB>score, by class then descending score.
void write_log_odds(std::ostream& out, const LogOddsTable& table);
// Columns follow the vocabulary's id order; words absent from the file score 0.
LogOddsTable read_log_odds(std::istream& in, const Vocabulary& vocab);

// One line per document, K space-separated reals.
void write_confounds(std::ostream& out, const std::vector<ConfoundDistribution>& confounds);
std::vector<ConfoundDistribution> read_confounds(std::istream& in);

}  // namespace deconf
