#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deconf/corpus.hpp"
#include "deconf/log_odds.hpp"
#include "deconf/model.hpp"
#include "deconf/optimizer.hpp"

namespace deconf {

enum class TrainMode { noadv, alt_lo, alt_lda, gr_lo, lr };

std::string_view to_string(TrainMode m);
TrainMode parse_train_mode(std::string_view s);  // accepts alt-lo and alt_lo spellings
bool is_alternating(TrainMode m);

struct TrainConfig {
    TrainMode mode = TrainMode::noadv;
    int batch_size = 32;
    double learning_rate = 1e-3;
    int adversary_steps = 500;   // t
    int forgetting_steps = 500;  // c
    int outer_iterations = 5;    // T
    double lambda = 0.2;
    int patience = 3;
    int max_epochs = 50;
    std::uint64_t seed = 1;
    double alpha0 = kDefaultAlpha0;
    std::optional<int> mask_k;
    OptimizerKind optimizer = OptimizerKind::adam;
    double entropy_floor = 0.9;  // fraction of ln K
    int lda_topics = 50;
    int lda_iterations = 1000;

    void validate() const;
};

enum class Phase { pretrain, topic_train, topic_forget };
std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

// One line of the training log.
struct LogRecord {
    long step = 0;
    Phase phase = Phase::pretrain;
    int iteration = 0;
    double classification_loss = 0.0;
    double adversary_loss = 0.0;
    double combined_loss = 0.0;
    std::optional<double> dev_accuracy;
    std::optional<double> adversary_entropy;
};

void write_log_record(std::ostream& out, const LogRecord& r);

// Per outer iteration of the alternating schedule.
struct IterationRecord {
    int iteration = 0;
    double dev_accuracy = 0.0;
    double adversary_entropy = 0.0;
    std::uint64_t encoder_checksum = 0;
};

struct TrainState {
    Model model;
    Optimizer encoder_optimizer;
    Optimizer classifier_optimizer;
    Phase phase = Phase::pretrain;
    int iteration = 0;  // completed topic-training phases
    long step = 0;
    double best_dev = -1.0;
    int epochs_without_improvement = 0;
    int epochs = 0;
    int selected_iteration = 0;  // 0 = pretrained parameters
    std::mt19937_64 rng;
    std::vector<LogRecord> log;
    std::vector<IterationRecord> iterations;
};

TrainState make_train_state(const ModelConfig& model_config, const TrainConfig& config);

// Training data encoded against the model vocabulary.
struct Dataset {
    std::vector<TokenIds> docs;
    std::vector<int> labels;

    std::size_t size() const { return docs.size(); }
};

Dataset make_dataset(const Corpus& corpus, const Vocabulary& vocab, std::span<const std::string> classes);

// Documents bucketed by length, shuffled by `rng` each epoch.
std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<TokenIds>& docs, int batch_size,
                                                    std::mt19937_64& rng);

// Endless minibatch stream over repeated epochs.
class BatchStream {
public:
    BatchStream(const std::vector<TokenIds>& docs, int batch_size) : docs_(&docs), batch_size_(batch_size) {}
    const std::vector<std::size_t>& next(std::mt19937_64& rng);

private:
    const std::vector<TokenIds>* docs_;
    int batch_size_;
    std::vector<std::vector<std::size_t>> batches_;
    std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Objectives

enum class AdversaryTarget { none, confound, uniform };

struct Batch {
    std::vector<std::span<const int>> docs;
    std::vector<int> labels;
    std::vector<std::span<const double>> confounds;  // required for AdversaryTarget::confound
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices,
                 const std::vector<ConfoundDistribution>* confounds = nullptr);

// What a step optimises. The adversary's gradient reaches the encoder scaled by
// `encoder_scale`: +1 for the forgetting objective, -lambda through gradient
// reversal, 0 to detach.
struct ObjectiveSpec {
    bool classification = true;
    AdversaryTarget target = AdversaryTarget::none;
    double encoder_scale = 1.0;
};

struct BatchLoss {
    double classification = 0.0;  // mean CE(c(h(x)), y)
    double adversary = 0.0;       // mean CE(adv(h(x)), target)

    double combined() const { return classification + adversary; }
};

struct Gradients {
    EncoderParams encoder;
    HeadParams classifier;
    HeadParams adversary;  // unreversed
};

Gradients zero_gradients(const Model& model, const HeadParams* adversary);

// Mean loss over the batch; when `grads` is non-null, gradients are added to it.
BatchLoss evaluate_objective(const Model& model, const HeadParams* adversary, const ObjectiveSpec& spec,
                             const Batch& batch, Gradients* grads);

// ---------------------------------------------------------------------------
// Training procedures

struct TrainHooks {
    std::ostream* log = nullptr;
    // Called after every phase with the current state.
    std::function<void(const TrainState&)> on_phase_end;
    // Progress lines for humans.
    std::ostream* progress = nullptr;
};

double accuracy(const Model& model, const Dataset& data);
double mean_adversary_entropy(const Model& model, const Dataset& data);

// Minibatch training on classification loss until dev accuracy stops
// improving for `patience` epochs; the best-dev parameters are restored.
void pretrain(TrainState& state, const Dataset& train, const Dataset& dev, const TrainConfig& config,
              const TrainHooks& hooks = {});

// Appends a freshly initialised adversary and trains it for t steps with the
// encoder and classifier frozen.
void topic_training_phase(TrainState& state, const Dataset& train, const std::vector<ConfoundDistribution>& confounds,
                          const TrainConfig& config, const TrainHooks& hooks = {});

// c steps of classification + uniform-adversary loss against a pool member
// drawn uniformly per step; adversaries are frozen.
void topic_forgetting_phase(TrainState& state, const Dataset& train, const TrainConfig& config,
                            const TrainHooks& hooks = {});

// Pretraining followed by T rounds of topic training and topic forgetting.
TrainState run_alternating(const Dataset& train, const Dataset& dev, const std::vector<ConfoundDistribution>& confounds,
                           const ModelConfig& model_config, const TrainConfig& config, const TrainHooks& hooks = {});

// Joint training with a single adversary behind a gradient-reversal layer.
TrainState train_grl(const Dataset& train, const Dataset& dev, const std::vector<ConfoundDistribution>& confounds,
                     const ModelConfig& model_config, const TrainConfig& config, const TrainHooks& hooks = {});

// Classification-only training (noadv and masked-input baselines).
TrainState train_noadv(const Dataset& train, const Dataset& dev, const ModelConfig& model_config,
                       const TrainConfig& config, const TrainHooks& hooks = {});

std::vector<double> predict_proba(const Model& model, std::span<const int> doc_ids);

}  // namespace deconf
