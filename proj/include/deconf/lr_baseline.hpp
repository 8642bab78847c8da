#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "deconf/corpus.hpp"

namespace deconf {

// The shipped, versioned list of English function words.
const std::vector<std::string>& default_function_words();
std::string_view function_words_version();
std::vector<std::string> load_function_words(const std::string& path);

// Content-independent features: relative frequency of each function word,
// relative frequency of each POS trigram (documents with tags only) and mean
// sentence length in tokens.
struct StyleFeatureSpace {
    std::vector<std::string> function_words;
    std::vector<std::string> pos_trigrams;  // empty when no training document carries tags

    int size() const { return static_cast<int>(function_words.size() + pos_trigrams.size()) + 1; }
    int length_index() const { return size() - 1; }
    Eigen::VectorXd features(const Document& doc) const;
};

StyleFeatureSpace make_feature_space(const Corpus& train, std::vector<std::string> function_words);
double mean_sentence_length(const std::vector<std::string>& tokens);

struct LinearModel {
    StyleFeatureSpace space;
    std::vector<std::string> classes;
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
    Eigen::MatrixXd weights;  // m x F on standardised features
    Eigen::VectorXd bias;
    double l2 = 0.0;

    std::vector<double> predict_proba(const Document& doc) const;
};

struct LrConfig {
    std::vector<std::string> function_words = default_function_words();
    std::vector<double> l2_grid{1e-4, 1e-3, 1e-2, 1e-1};
    int max_iterations = 2000;
    double tolerance = 1e-6;
};

// Multinomial logistic regression with an L2 penalty; the penalty is chosen
// from the grid by dev accuracy.
LinearModel train_lr_baseline(const Corpus& train, const Corpus& dev, const LrConfig& config = {});

}  // namespace deconf
