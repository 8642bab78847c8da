#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "deconf/corpus.hpp"
#include "deconf/log_odds.hpp"
#include "deconf/model.hpp"

namespace deconf {

// Maps a document to a probability vector over the model's classes.
using Predictor = std::function<std::vector<double>(const Document&)>;

// Refers to `model` and `vocab`, which must outlive the predictor.
Predictor neural_predictor(const Model& model, const Vocabulary& vocab);

struct SplitReport {
    double accuracy = 0.0;
    std::map<std::string, double> per_class_accuracy;
    Eigen::MatrixXi confusion;  // rows gold, columns predicted
    int num_examples = 0;

    bool operator==(const SplitReport& o) const;
};

struct EvalReport {
    std::vector<std::string> classes;
    std::optional<SplitReport> in;
    std::optional<SplitReport> out;
    std::optional<int> mask_k;
    std::vector<std::string> warnings;

    std::optional<double> accuracy_in() const { return in ? std::optional(in->accuracy) : std::nullopt; }
    std::optional<double> accuracy_out() const { return out ? std::optional(out->accuracy) : std::nullopt; }
    bool operator==(const EvalReport&) const = default;
};

// Argmax prediction per document, ties to the lowest class index.
SplitReport evaluate_split(const Predictor& predict, const Corpus& docs, std::span<const std::string> classes);

EvalReport evaluate_accuracy(const Predictor& predict, std::span<const std::string> classes, const Corpus& test_in,
                             const Corpus& test_out);

// Masks the top-k log-odds words in copies of the test splits for each k; the
// model is not retrained.
std::vector<EvalReport> masked_evaluation(const Predictor& predict, std::span<const std::string> classes,
                                          const LogOddsTable& table, const Corpus& test_in, const Corpus& test_out,
                                          std::span<const int> ks);

struct PromptSplit {
    std::string prompt;
    Corpus train;
    Corpus dev;
    Corpus test_out;
};

// The "minus prompt" configuration: documents written to `prompt` are removed
// from train and dev; the removed dev documents form the out-of-domain test.
PromptSplit prompt_holdout_splits(const Corpus& train, const Corpus& dev, const std::string& prompt);
std::vector<std::string> prompt_ids(const Corpus& corpus);

// Unweighted mean over configurations.
double mean_out_of_domain_accuracy(std::span<const EvalReport> reports);

// key: value lines
void write_report_text(std::ostream& out, const EvalReport& report);
// One JSON object per line
void write_report_jsonl(std::ostream& out, const EvalReport& report);
std::vector<EvalReport> read_reports_jsonl(std::istream& in);
// gold,predicted counts with a header row of class names
void write_confusion_csv(std::ostream& out, const std::vector<std::string>& classes, const Eigen::MatrixXi& confusion);

}  // namespace deconf
