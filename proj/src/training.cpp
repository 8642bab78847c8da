#include "deconf/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deconf/error.hpp"

namespace deconf {

std::string_view to_string(TrainMode m) {
    switch (m) {
        case TrainMode::noadv: return "noadv";
        case TrainMode::alt_lo: return "alt-lo";
        case TrainMode::alt_lda: return "alt-lda";
        case TrainMode::gr_lo: return "gr-lo";
        case TrainMode::lr: return "lr";
    }
    return "?";
}

TrainMode parse_train_mode(std::string_view s) {
    std::string norm(s);
    std::replace(norm.begin(), norm.end(), '_', '-');
    if (norm == "noadv" || norm == "no-adv") return TrainMode::noadv;
    if (norm == "alt-lo") return TrainMode::alt_lo;
    if (norm == "alt-lda") return TrainMode::alt_lda;
    if (norm == "gr-lo") return TrainMode::gr_lo;
    if (norm == "lr") return TrainMode::lr;
    throw Error("unknown training mode \"" + std::string(s) + "\"");
}

bool is_alternating(TrainMode m) { return m == TrainMode::alt_lo || m == TrainMode::alt_lda; }

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::pretrain: return "pretrain";
        case Phase::topic_train: return "topic_train";
        case Phase::topic_forget: return "topic_forget";
    }
    return "?";
}

Phase parse_phase(std::string_view s) {
    if (s == "pretrain") return Phase::pretrain;
    if (s == "topic_train") return Phase::topic_train;
    if (s == "topic_forget") return Phase::topic_forget;
    throw Error("unknown phase \"" + std::string(s) + "\"");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (learning_rate < 0.0) throw Error("learning_rate must be >= 0");
    if (patience < 1 || max_epochs < 1) throw Error("patience and max_epochs must be >= 1");
    if (lambda < 0.0) throw Error("lambda must be >= 0");
    if (is_alternating(mode) && (adversary_steps < 1 || forgetting_steps < 1 || outer_iterations < 1))
        throw Error("alternating modes need t, c, T >= 1");
    if (alpha0 <= 0.0) throw Error("alpha0 must be positive");
    if (mask_k && *mask_k < 0) throw Error("mask_k must be >= 0");
}

void write_log_record(std::ostream& out, const LogRecord& r) {
    nlohmann::json j;
    j["step"] = r.step;
    j["phase"] = std::string(to_string(r.phase));
    j["iteration"] = r.iteration;
    j["classification_loss"] = r.classification_loss;
    j["adversary_loss"] = r.adversary_loss;
    j["combined_loss"] = r.combined_loss;
    j["dev_accuracy"] = r.dev_accuracy ? nlohmann::json(*r.dev_accuracy) : nlohmann::json(nullptr);
    j["adversary_entropy"] = r.adversary_entropy ? nlohmann::json(*r.adversary_entropy) : nlohmann::json(nullptr);
    out << j.dump() << '\n';
}

TrainState make_train_state(const ModelConfig& model_config, const TrainConfig& config) {
    config.validate();
    TrainState s;
    s.model = init_params(model_config);
    s.encoder_optimizer = Optimizer(config.optimizer, config.learning_rate);
    s.classifier_optimizer = Optimizer(config.optimizer, config.learning_rate);
    s.rng.seed(config.seed * 0x2545F4914F6CDD1DULL + 17);
    s.model.adversaries = AdversaryPool(config.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
    return s;
}

Dataset make_dataset(const Corpus& corpus, const Vocabulary& vocab, std::span<const std::string> classes) {
    Dataset d;
    d.docs = encode_corpus(corpus, vocab);
    d.labels = label_indices(corpus, classes);
    return d;
}

std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<TokenIds>& docs, int batch_size,
                                                    std::mt19937_64& rng) {
    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return docs[a].size() < docs[b].size(); });
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    std::shuffle(batches.begin(), batches.end(), rng);
    return batches;
}

const std::vector<std::size_t>& BatchStream::next(std::mt19937_64& rng) {
    if (cursor_ >= batches_.size()) {
        batches_ = epoch_batches(*docs_, batch_size_, rng);
        cursor_ = 0;
        if (batches_.empty()) throw Error("cannot draw a minibatch from an empty dataset");
    }
    return batches_[cursor_++];
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices,
                 const std::vector<ConfoundDistribution>* confounds) {
    Batch b;
    for (std::size_t i : indices) {
        b.docs.emplace_back(data.docs[i]);
        b.labels.push_back(data.labels[i]);
        if (confounds) {
            if (i >= confounds->size()) throw Error("missing confound distribution for training document " +
                                                    std::to_string(i));
            b.confounds.emplace_back((*confounds)[i].probs);
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Objectives

Gradients zero_gradients(const Model& model, const HeadParams* adversary) {
    Gradients g;
    g.encoder = zeros_like(model.encoder);
    g.classifier = zeros_like(model.classifier);
    if (adversary) g.adversary = zeros_like(*adversary);
    return g;
}

namespace {

Matrix stack_outputs(const std::vector<EncoderTrace>& traces) {
    Matrix h(traces.front().output.size(), static_cast<Eigen::Index>(traces.size()));
    for (std::size_t b = 0; b < traces.size(); ++b) h.col(static_cast<Eigen::Index>(b)) = traces[b].output;
    return h;
}

}  // namespace

BatchLoss evaluate_objective(const Model& model, const HeadParams* adversary, const ObjectiveSpec& spec,
                             const Batch& batch, Gradients* grads) {
    const auto B = static_cast<Eigen::Index>(batch.docs.size());
    if (B == 0) throw Error("empty minibatch");
    if (spec.target != AdversaryTarget::none && !adversary) throw Error("objective needs an adversary");

    std::vector<EncoderTrace> traces;
    traces.reserve(batch.docs.size());
    for (auto doc : batch.docs) traces.push_back(encoder_forward(model.encoder, doc, model.config.max_length));
    const Matrix h = stack_outputs(traces);
    Matrix d_h = Matrix::Zero(h.rows(), B);
    BatchLoss loss;

    if (spec.classification) {
        const HeadTrace ht = head_forward(model.classifier, h);
        Matrix d_logits = ht.probs;
        for (Eigen::Index b = 0; b < B; ++b) {
            const int y = batch.labels[static_cast<std::size_t>(b)];
            loss.classification -= std::log(std::max(ht.probs(y, b), 1e-12));
            d_logits(y, b) -= 1.0;
        }
        loss.classification /= static_cast<double>(B);
        d_logits /= static_cast<double>(B);
        if (grads) d_h += head_backward(model.classifier, ht, d_logits, &grads->classifier);
    }

    if (spec.target != AdversaryTarget::none) {
        const HeadTrace at = head_forward(*adversary, h);
        const auto K = at.probs.rows();
        if (spec.target == AdversaryTarget::confound && static_cast<Eigen::Index>(batch.confounds.size()) != B)
            throw Error("missing confound distribution in minibatch");
        Matrix target(K, B);
        for (Eigen::Index b = 0; b < B; ++b) {
            if (spec.target == AdversaryTarget::uniform) {
                target.col(b).setConstant(1.0 / static_cast<double>(K));
            } else {
                const auto t = batch.confounds[static_cast<std::size_t>(b)];
                if (static_cast<Eigen::Index>(t.size()) != K) throw Error("confound length does not match adversary");
                for (Eigen::Index k = 0; k < K; ++k) target(k, b) = t[static_cast<std::size_t>(k)];
            }
            loss.adversary += cross_entropy_dist({at.probs.col(b).data(), static_cast<std::size_t>(K)},
                                                 {target.col(b).data(), static_cast<std::size_t>(K)});
        }
        loss.adversary /= static_cast<double>(B);
        if (grads) {
            const Matrix d_logits = (at.probs - target) / static_cast<double>(B);
            const Matrix d_adv = head_backward(*adversary, at, d_logits, &grads->adversary);
            if (spec.encoder_scale != 0.0) d_h += spec.encoder_scale * d_adv;
        }
    }

    if (grads && (spec.classification || (spec.target != AdversaryTarget::none && spec.encoder_scale != 0.0)))
        for (Eigen::Index b = 0; b < B; ++b)
            encoder_backward(model.encoder, traces[static_cast<std::size_t>(b)], d_h.col(b), &grads->encoder);
    return loss;
}

// ---------------------------------------------------------------------------
// Helpers

std::vector<double> predict_proba(const Model& model, std::span<const int> doc_ids) {
    const Encoding e = encode(model.encoder, doc_ids, model.config.max_length);
    return classify(e.h, model.classifier);
}

namespace {

Matrix encode_all(const Model& model, const Dataset& data) {
    Matrix h(model.config.state_dim(), static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i)
        h.col(static_cast<Eigen::Index>(i)) = encode(model.encoder, data.docs[i], model.config.max_length).h;
    return h;
}

double mean_entropy(const Matrix& probs) {
    double total = 0.0;
    for (Eigen::Index b = 0; b < probs.cols(); ++b)
        total += entropy({probs.col(b).data(), static_cast<std::size_t>(probs.rows())});
    return probs.cols() ? total / static_cast<double>(probs.cols()) : 0.0;
}

void check_finite(double loss, const TrainState& state, std::string_view where) {
    if (std::isfinite(loss)) return;
    std::ostringstream msg;
    msg << "training diverged during " << where << ": non-finite loss at step " << state.step << " (phase "
        << to_string(state.phase) << ", iteration " << state.iteration << ", encoder finite="
        << (all_finite(state.model.encoder) ? "yes" : "no") << ")";
    throw Error(msg.str());
}

void emit(TrainState& state, const TrainHooks& hooks, LogRecord r) {
    r.combined_loss = r.classification_loss + r.adversary_loss;
    if (hooks.log) write_log_record(*hooks.log, r);
    state.log.push_back(r);
}

constexpr long kLogEvery = 50;

}  // namespace

double accuracy(const Model& model, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (argmax(predict_proba(model, data.docs[i])) == data.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_adversary_entropy(const Model& model, const Dataset& data) {
    if (model.adversaries.empty() || data.size() == 0) return 0.0;
    const Matrix h = encode_all(model, data);
    double total = 0.0;
    for (const auto& adv : model.adversaries.heads()) total += mean_entropy(head_forward(adv, h).probs);
    return total / static_cast<double>(model.adversaries.size());
}

// ---------------------------------------------------------------------------
// Pretraining

namespace {

struct Snapshot {
    EncoderParams encoder;
    HeadParams classifier;
};

template <class StepFn>
void early_stopping_loop(TrainState& state, const Dataset& train, const Dataset& dev, const TrainConfig& config,
                         const TrainHooks& hooks, StepFn&& step) {
    if (train.size() == 0) throw Error("empty training set");
    Snapshot best{state.model.encoder, state.model.classifier};
    std::optional<HeadParams> best_adversary;
    if (!state.model.adversaries.empty()) best_adversary = state.model.adversaries.back();
    state.best_dev = -1.0;
    state.epochs_without_improvement = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        BatchLoss total;
        std::size_t n_batches = 0;
        for (const auto& indices : epoch_batches(train.docs, config.batch_size, state.rng)) {
            const BatchLoss l = step(indices);
            total.classification += l.classification;
            total.adversary += l.adversary;
            ++n_batches;
        }
        ++state.epochs;
        const double dev_acc = accuracy(state.model, dev);
        LogRecord r;
        r.step = state.step;
        r.phase = state.phase;
        r.iteration = state.iteration;
        r.classification_loss = total.classification / static_cast<double>(n_batches);
        r.adversary_loss = total.adversary / static_cast<double>(n_batches);
        r.dev_accuracy = dev_acc;
        emit(state, hooks, r);
        if (hooks.progress)
            *hooks.progress << "  epoch " << epoch << " loss " << std::fixed << std::setprecision(4)
                            << r.classification_loss << " dev " << dev_acc << std::defaultfloat << '\n';

        if (dev_acc > state.best_dev) {
            state.best_dev = dev_acc;
            state.epochs_without_improvement = 0;
            best = {state.model.encoder, state.model.classifier};
            if (!state.model.adversaries.empty()) best_adversary = state.model.adversaries.back();
        } else if (++state.epochs_without_improvement >= config.patience) {
            break;
        }
    }
    state.model.encoder = std::move(best.encoder);
    state.model.classifier = std::move(best.classifier);
    if (best_adversary) state.model.adversaries.back() = std::move(*best_adversary);
}

}  // namespace

void pretrain(TrainState& state, const Dataset& train, const Dataset& dev, const TrainConfig& config,
              const TrainHooks& hooks) {
    config.validate();
    state.phase = Phase::pretrain;
    Gradients grads = zero_gradients(state.model, nullptr);
    early_stopping_loop(state, train, dev, config, hooks, [&](const std::vector<std::size_t>& indices) {
        set_zero(grads.encoder);
        set_zero(grads.classifier);
        const Batch batch = make_batch(train, indices);
        const BatchLoss loss = evaluate_objective(state.model, nullptr, {}, batch, &grads);
        check_finite(loss.classification, state, "pretraining");
        state.encoder_optimizer.step(tensors(state.model.encoder), tensors(std::as_const(grads.encoder)));
        state.classifier_optimizer.step(tensors(state.model.classifier), tensors(std::as_const(grads.classifier)));
        ++state.step;
        return loss;
    });
    if (hooks.on_phase_end) hooks.on_phase_end(state);
}

TrainState train_noadv(const Dataset& train, const Dataset& dev, const ModelConfig& model_config,
                       const TrainConfig& config, const TrainHooks& hooks) {
    TrainState state = make_train_state(model_config, config);
    pretrain(state, train, dev, config, hooks);
    return state;
}

// ---------------------------------------------------------------------------
// Alternating schedule

void topic_training_phase(TrainState& state, const Dataset& train, const std::vector<ConfoundDistribution>& confounds,
                          const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    if (confounds.size() != train.size())
        throw Error("missing confound distributions: " + std::to_string(confounds.size()) + " for " +
                    std::to_string(train.size()) + " training documents");
    const int K = state.model.config.num_topics;
    for (const auto& c : confounds)
        if (c.size() != K) throw Error("confound distribution has length " + std::to_string(c.size()) +
                                       ", expected " + std::to_string(K));
    state.phase = Phase::topic_train;

    // The encoder is frozen for the whole phase, so representations are computed once.
    const Matrix h_all = encode_all(state.model, train);
    Matrix targets(K, static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < confounds.size(); ++i)
        for (int k = 0; k < K; ++k) targets(k, static_cast<Eigen::Index>(i)) = confounds[i].probs[static_cast<std::size_t>(k)];

    state.model.adversaries.add(init_head(state.model.config.state_dim(), state.model.config.head_hidden, K, state.rng));
    HeadParams& adv = state.model.adversaries.back();
    Optimizer opt(config.optimizer, config.learning_rate);
    HeadParams grad = zeros_like(adv);
    BatchStream stream(train.docs, config.batch_size);

    double window = 0.0;
    long in_window = 0;
    for (int s = 0; s < config.adversary_steps; ++s) {
        const auto& indices = stream.next(state.rng);
        const auto B = static_cast<Eigen::Index>(indices.size());
        Matrix h(h_all.rows(), B);
        Matrix t(K, B);
        for (Eigen::Index b = 0; b < B; ++b) {
            h.col(b) = h_all.col(static_cast<Eigen::Index>(indices[static_cast<std::size_t>(b)]));
            t.col(b) = targets.col(static_cast<Eigen::Index>(indices[static_cast<std::size_t>(b)]));
        }
        const HeadTrace at = head_forward(adv, h);
        double loss = 0.0;
        for (Eigen::Index b = 0; b < B; ++b)
            loss += cross_entropy_dist({at.probs.col(b).data(), static_cast<std::size_t>(K)},
                                       {t.col(b).data(), static_cast<std::size_t>(K)});
        loss /= static_cast<double>(B);
        check_finite(loss, state, "topic training");
        set_zero(grad);
        head_backward(adv, at, (at.probs - t) / static_cast<double>(B), &grad);
        opt.step(tensors(adv), tensors(std::as_const(grad)));
        ++state.step;
        window += loss;
        ++in_window;
        if (in_window == kLogEvery || s + 1 == config.adversary_steps) {
            LogRecord r;
            r.step = state.step;
            r.phase = Phase::topic_train;
            r.iteration = state.iteration + 1;
            r.adversary_loss = window / static_cast<double>(in_window);
            emit(state, hooks, r);
            window = 0.0;
            in_window = 0;
        }
    }
    ++state.iteration;
    if (hooks.on_phase_end) hooks.on_phase_end(state);
}

void topic_forgetting_phase(TrainState& state, const Dataset& train, const TrainConfig& config,
                            const TrainHooks& hooks) {
    config.validate();
    if (state.model.adversaries.empty()) throw Error("topic forgetting needs a non-empty adversary pool");
    state.phase = Phase::topic_forget;

    Gradients grads = zero_gradients(state.model, &state.model.adversaries[0]);
    BatchStream stream(train.docs, config.batch_size);
    const ObjectiveSpec spec{true, AdversaryTarget::uniform, 1.0};
    BatchLoss window;
    long in_window = 0;
    for (int s = 0; s < config.forgetting_steps; ++s) {
        const std::size_t u = state.model.adversaries.select();
        const auto& indices = stream.next(state.rng);
        const Batch batch = make_batch(train, indices);
        set_zero(grads.encoder);
        set_zero(grads.classifier);
        grads.adversary = zeros_like(state.model.adversaries[u]);
        const BatchLoss loss = evaluate_objective(state.model, &state.model.adversaries[u], spec, batch, &grads);
        check_finite(loss.combined(), state, "topic forgetting");
        state.encoder_optimizer.step(tensors(state.model.encoder), tensors(std::as_const(grads.encoder)));
        state.classifier_optimizer.step(tensors(state.model.classifier), tensors(std::as_const(grads.classifier)));
        ++state.step;
        window.classification += loss.classification;
        window.adversary += loss.adversary;
        ++in_window;
        if (in_window == kLogEvery || s + 1 == config.forgetting_steps) {
            LogRecord r;
            r.step = state.step;
            r.phase = Phase::topic_forget;
            r.iteration = state.iteration;
            r.classification_loss = window.classification / static_cast<double>(in_window);
            r.adversary_loss = window.adversary / static_cast<double>(in_window);
            emit(state, hooks, r);
            window = {};
            in_window = 0;
        }
    }
    if (hooks.on_phase_end) hooks.on_phase_end(state);
}

TrainState run_alternating(const Dataset& train, const Dataset& dev, const std::vector<ConfoundDistribution>& confounds,
                           const ModelConfig& model_config, const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    TrainState state = make_train_state(model_config, config);
    pretrain(state, train, dev, config, hooks);

    const double floor = config.entropy_floor * std::log(static_cast<double>(model_config.num_topics));
    std::vector<Snapshot> snapshots;
    for (int j = 1; j <= config.outer_iterations; ++j) {
        topic_training_phase(state, train, confounds, config, hooks);
        topic_forgetting_phase(state, train, config, hooks);

        IterationRecord rec;
        rec.iteration = state.iteration;
        rec.dev_accuracy = accuracy(state.model, dev);
        rec.adversary_entropy = mean_adversary_entropy(state.model, dev);
        rec.encoder_checksum = checksum(state.model.encoder);
        state.iterations.push_back(rec);
        snapshots.push_back({state.model.encoder, state.model.classifier});

        LogRecord r;
        r.step = state.step;
        r.phase = Phase::topic_forget;
        r.iteration = state.iteration;
        r.dev_accuracy = rec.dev_accuracy;
        r.adversary_entropy = rec.adversary_entropy;
        emit(state, hooks, r);
        if (hooks.progress)
            *hooks.progress << "  iteration " << j << " dev " << rec.dev_accuracy << " adversary entropy "
                            << rec.adversary_entropy << " (floor " << floor << ")\n";
    }

    // Best dev accuracy among iterations that fool the pool, later iterations
    // winning ties; if none clears the entropy floor, the iteration with the
    // highest adversary entropy.
    int chosen = -1;
    for (std::size_t i = 0; i < state.iterations.size(); ++i) {
        const auto& rec = state.iterations[i];
        if (rec.adversary_entropy < floor) continue;
        if (chosen < 0 || rec.dev_accuracy >= state.iterations[static_cast<std::size_t>(chosen)].dev_accuracy)
            chosen = static_cast<int>(i);
    }
    if (chosen < 0) {
        chosen = 0;
        for (std::size_t i = 1; i < state.iterations.size(); ++i)
            if (state.iterations[i].adversary_entropy >
                state.iterations[static_cast<std::size_t>(chosen)].adversary_entropy)
                chosen = static_cast<int>(i);
    }
    state.selected_iteration = state.iterations[static_cast<std::size_t>(chosen)].iteration;
    state.model.encoder = snapshots[static_cast<std::size_t>(chosen)].encoder;
    state.model.classifier = snapshots[static_cast<std::size_t>(chosen)].classifier;
    state.best_dev = state.iterations[static_cast<std::size_t>(chosen)].dev_accuracy;
    return state;
}

// ---------------------------------------------------------------------------
// Gradient reversal baseline

TrainState train_grl(const Dataset& train, const Dataset& dev, const std::vector<ConfoundDistribution>& confounds,
                     const ModelConfig& model_config, const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    if (confounds.size() != train.size()) throw Error("missing confound distributions for gradient reversal");
    TrainState state = make_train_state(model_config, config);
    state.model.adversaries.add(
        init_head(model_config.state_dim(), model_config.head_hidden, model_config.num_topics, state.rng));
    Optimizer adversary_optimizer(config.optimizer, config.learning_rate);
    Gradients grads = zero_gradients(state.model, &state.model.adversaries[0]);
    const ObjectiveSpec spec{true, AdversaryTarget::confound, -config.lambda};

    state.phase = Phase::pretrain;
    early_stopping_loop(state, train, dev, config, hooks, [&](const std::vector<std::size_t>& indices) {
        HeadParams& adv = state.model.adversaries[0];
        set_zero(grads.encoder);
        set_zero(grads.classifier);
        set_zero(grads.adversary);
        const Batch batch = make_batch(train, indices, &confounds);
        const BatchLoss loss = evaluate_objective(state.model, &adv, spec, batch, &grads);
        check_finite(loss.combined(), state, "gradient-reversal training");
        state.encoder_optimizer.step(tensors(state.model.encoder), tensors(std::as_const(grads.encoder)));
        state.classifier_optimizer.step(tensors(state.model.classifier), tensors(std::as_const(grads.classifier)));
        adversary_optimizer.step(tensors(adv), tensors(std::as_const(grads.adversary)));
        ++state.step;
        return loss;
    });
    state.iteration = 1;
    if (hooks.on_phase_end) hooks.on_phase_end(state);
    return state;
}

}  // namespace deconf
