#include "deconf/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "deconf/corpus.hpp"
#include "deconf/error.hpp"

namespace deconf {

void ModelConfig::validate() const {
    if (vocab_size < 1 || embed_dim < 1 || hidden_dim < 1 || head_hidden < 1 || num_classes < 1 || num_topics < 1 ||
        max_length < 1)
        throw Error("model dimensions must all be >= 1");
}

// ---------------------------------------------------------------------------
// Tensor views

namespace {

std::span<double> flat(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> flat(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<const double> flat(const Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<const double> flat(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

template <class Params, class Views>
Views collect_encoder(Params& p) {
    return {flat(p.embedding),
            flat(p.forward.input_weights),
            flat(p.forward.recurrent_weights),
            flat(p.forward.bias),
            flat(p.backward.input_weights),
            flat(p.backward.recurrent_weights),
            flat(p.backward.bias),
            flat(p.attention_proj),
            flat(p.attention_context)};
}

template <class Params, class Views>
Views collect_head(Params& p) {
    return {flat(p.hidden_weights), flat(p.hidden_bias), flat(p.output_weights), flat(p.output_bias)};
}

std::uint64_t fnv1a(const std::vector<std::span<const double>>& views) {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto v : views) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
        for (std::size_t i = 0; i < v.size_bytes(); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    }
    return h;
}

bool finite(const std::vector<std::span<const double>>& views) {
    for (auto v : views)
        for (double x : v)
            if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

std::vector<std::span<double>> tensors(EncoderParams& p) {
    return collect_encoder<EncoderParams, std::vector<std::span<double>>>(p);
}
std::vector<std::span<const double>> tensors(const EncoderParams& p) {
    return collect_encoder<const EncoderParams, std::vector<std::span<const double>>>(p);
}
std::vector<std::span<double>> tensors(HeadParams& p) {
    return collect_head<HeadParams, std::vector<std::span<double>>>(p);
}
std::vector<std::span<const double>> tensors(const HeadParams& p) {
    return collect_head<const HeadParams, std::vector<std::span<const double>>>(p);
}

EncoderParams zeros_like(const EncoderParams& p) {
    EncoderParams z = p;
    set_zero(z);
    return z;
}

HeadParams zeros_like(const HeadParams& p) {
    HeadParams z = p;
    set_zero(z);
    return z;
}

void set_zero(EncoderParams& p) {
    for (auto v : tensors(p)) std::fill(v.begin(), v.end(), 0.0);
}

void set_zero(HeadParams& p) {
    for (auto v : tensors(p)) std::fill(v.begin(), v.end(), 0.0);
}

std::uint64_t checksum(const EncoderParams& p) { return fnv1a(tensors(p)); }
std::uint64_t checksum(const HeadParams& p) { return fnv1a(tensors(p)); }
bool all_finite(const EncoderParams& p) { return finite(tensors(p)); }
bool all_finite(const HeadParams& p) { return finite(tensors(p)); }

// ---------------------------------------------------------------------------
// Initialisation

namespace {

void fill_uniform(std::span<double> v, double fan_in, std::mt19937_64& rng) {
    const double r = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> d(-r, r);
    for (double& x : v) x = d(rng);
}

LstmParams init_lstm(int input_dim, int hidden_dim, std::mt19937_64& rng) {
    LstmParams p;
    p.input_weights.resize(4 * hidden_dim, input_dim);
    p.recurrent_weights.resize(4 * hidden_dim, hidden_dim);
    p.bias.resize(4 * hidden_dim);
    const double fan_in = input_dim + hidden_dim;
    fill_uniform(flat(p.input_weights), fan_in, rng);
    fill_uniform(flat(p.recurrent_weights), fan_in, rng);
    fill_uniform(flat(p.bias), fan_in, rng);
    return p;
}

}  // namespace

EncoderParams init_encoder(const ModelConfig& config, std::mt19937_64& rng) {
    config.validate();
    EncoderParams p;
    p.embedding.resize(config.embed_dim, config.vocab_size);
    fill_uniform(flat(p.embedding), 1.0, rng);
    // MASK never occurs in unmasked training text, so it starts (and stays) neutral.
    if (config.vocab_size > Vocabulary::mask_id) p.embedding.col(Vocabulary::mask_id).setZero();
    p.forward = init_lstm(config.embed_dim, config.hidden_dim, rng);
    p.backward = init_lstm(config.embed_dim, config.hidden_dim, rng);
    p.attention_proj.resize(config.attention_dim(), config.state_dim());
    p.attention_context.resize(config.attention_dim());
    fill_uniform(flat(p.attention_proj), config.state_dim(), rng);
    fill_uniform(flat(p.attention_context), config.attention_dim(), rng);
    return p;
}

HeadParams init_head(int input_dim, int hidden_dim, int output_dim, std::mt19937_64& rng) {
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) throw Error("head dimensions must be >= 1");
    HeadParams h;
    h.hidden_weights.resize(hidden_dim, input_dim);
    h.hidden_bias.resize(hidden_dim);
    h.output_weights.resize(output_dim, hidden_dim);
    h.output_bias.resize(output_dim);
    fill_uniform(flat(h.hidden_weights), input_dim, rng);
    fill_uniform(flat(h.hidden_bias), input_dim, rng);
    fill_uniform(flat(h.output_weights), hidden_dim, rng);
    fill_uniform(flat(h.output_bias), hidden_dim, rng);
    return h;
}

std::size_t AdversaryPool::select() {
    if (heads_.empty()) throw Error("empty adversary pool");
    std::uniform_int_distribution<std::size_t> d(0, heads_.size() - 1);
    return d(rng_);
}

Model init_params(const ModelConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    Model m{config, {}, {}, AdversaryPool(config.seed ^ 0x9e3779b97f4a7c15ULL)};
    m.encoder = init_encoder(config, rng);
    m.classifier = init_head(config.state_dim(), config.head_hidden, config.num_classes, rng);
    return m;
}

// ---------------------------------------------------------------------------
// Encoder

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Runs one direction over the columns of `inputs` in the given order.
LstmTrace lstm_forward(const LstmParams& p, const Matrix& inputs, bool reverse) {
    const Eigen::Index H = p.recurrent_weights.cols();
    const Eigen::Index n = inputs.cols();
    LstmTrace t;
    t.gates.resize(4 * H, n);
    t.cells.resize(H, n);
    t.hidden.resize(H, n);

    Matrix pre = p.input_weights * inputs;
    pre.colwise() += p.bias;
    Vector h = Vector::Zero(H);
    Vector c = Vector::Zero(H);
    for (Eigen::Index step = 0; step < n; ++step) {
        const Eigen::Index col = reverse ? n - 1 - step : step;
        Vector z = pre.col(col) + p.recurrent_weights * h;
        for (Eigen::Index k = 0; k < H; ++k) {
            z(k) = sigmoid(z(k));
            z(H + k) = sigmoid(z(H + k));
            z(2 * H + k) = std::tanh(z(2 * H + k));
            z(3 * H + k) = sigmoid(z(3 * H + k));
        }
        c = z.segment(H, H).cwiseProduct(c) + z.head(H).cwiseProduct(z.segment(2 * H, H));
        h = z.tail(H).cwiseProduct(c.array().tanh().matrix());
        t.gates.col(col) = z;
        t.cells.col(col) = c;
        t.hidden.col(col) = h;
    }
    return t;
}

// Returns dL/d(pre-activation gates), 4H x n; parameter gradients accumulate
// into `grad` when non-null.
Matrix lstm_backward(const LstmParams& p, const LstmTrace& t, const Matrix& inputs, const Matrix& d_hidden,
                     bool reverse, LstmParams* grad) {
    const Eigen::Index H = p.recurrent_weights.cols();
    const Eigen::Index n = inputs.cols();
    Matrix d_pre(4 * H, n);
    Vector dh_next = Vector::Zero(H);
    Vector dc_next = Vector::Zero(H);
    const Vector zero = Vector::Zero(H);

    for (Eigen::Index step = n - 1; step >= 0; --step) {
        const Eigen::Index col = reverse ? n - 1 - step : step;
        const Eigen::Index prev = reverse ? col + 1 : col - 1;
        const bool has_prev = step > 0;

        const auto gi = t.gates.col(col).segment(0, H).array();
        const auto gf = t.gates.col(col).segment(H, H).array();
        const auto gg = t.gates.col(col).segment(2 * H, H).array();
        const auto go = t.gates.col(col).segment(3 * H, H).array();
        const Eigen::ArrayXd tanh_c = t.cells.col(col).array().tanh();
        const Eigen::ArrayXd c_prev = has_prev ? Eigen::ArrayXd(t.cells.col(prev).array()) : Eigen::ArrayXd(zero.array());

        const Eigen::ArrayXd dh = d_hidden.col(col).array() + dh_next.array();
        const Eigen::ArrayXd dc = dc_next.array() + dh * go * (1.0 - tanh_c.square());

        auto dz = d_pre.col(col);
        dz.segment(0, H) = (dc * gg * gi * (1.0 - gi)).matrix();
        dz.segment(H, H) = (dc * c_prev * gf * (1.0 - gf)).matrix();
        dz.segment(2 * H, H) = (dc * gi * (1.0 - gg.square())).matrix();
        dz.segment(3 * H, H) = (dh * tanh_c * go * (1.0 - go)).matrix();

        dc_next = (dc * gf).matrix();
        dh_next.noalias() = p.recurrent_weights.transpose() * dz;
        if (grad && has_prev) grad->recurrent_weights.noalias() += dz * t.hidden.col(prev).transpose();
    }
    if (grad) {
        grad->input_weights.noalias() += d_pre * inputs.transpose();
        grad->bias += d_pre.rowwise().sum();
    }
    return d_pre;
}

}  // namespace

EncoderTrace encoder_forward(const EncoderParams& enc, std::span<const int> doc_ids, int max_length) {
    if (doc_ids.empty()) throw Error("empty input document");
    EncoderTrace tr;
    tr.input_length = doc_ids.size();
    const auto V = enc.embedding.cols();
    for (std::size_t i = 0; i < doc_ids.size() && i < static_cast<std::size_t>(max_length); ++i) {
        const int id = doc_ids[i];
        if (id < 0 || id >= V) throw Error("token id " + std::to_string(id) + " >= vocab_size");
        if (id == Vocabulary::pad_id) continue;
        tr.positions.push_back(i);
        tr.ids.push_back(id);
    }
    if (tr.ids.empty()) throw Error("document has no non-PAD tokens");

    const auto n = static_cast<Eigen::Index>(tr.ids.size());
    tr.inputs.resize(enc.embedding.rows(), n);
    for (Eigen::Index t = 0; t < n; ++t) tr.inputs.col(t) = enc.embedding.col(tr.ids[static_cast<std::size_t>(t)]);

    tr.forward = lstm_forward(enc.forward, tr.inputs, false);
    tr.backward = lstm_forward(enc.backward, tr.inputs, true);
    const auto H = enc.forward.recurrent_weights.cols();
    tr.states.resize(2 * H, n);
    tr.states.topRows(H) = tr.forward.hidden;
    tr.states.bottomRows(H) = tr.backward.hidden;

    tr.attention_hidden = (enc.attention_proj * tr.states).array().tanh().matrix();
    Vector scores = tr.attention_hidden.transpose() * enc.attention_context;
    scores.array() -= scores.maxCoeff();
    tr.attention = scores.array().exp().matrix();
    tr.attention /= tr.attention.sum();
    tr.output = tr.states * tr.attention;
    return tr;
}

Encoding encode(const EncoderParams& enc, std::span<const int> doc_ids, int max_length) {
    const EncoderTrace tr = encoder_forward(enc, doc_ids, max_length);
    Encoding e;
    e.h = tr.output;
    e.attention.assign(tr.input_length, 0.0);
    for (std::size_t t = 0; t < tr.positions.size(); ++t)
        e.attention[tr.positions[t]] = tr.attention(static_cast<Eigen::Index>(t));
    return e;
}

void encoder_backward(const EncoderParams& enc, const EncoderTrace& tr, const Vector& d_output, EncoderParams* grad,
                      Matrix* d_inputs) {
    const auto H = enc.forward.recurrent_weights.cols();

    // h = S a, a = softmax(v^T tanh(W S))
    Matrix d_states = d_output * tr.attention.transpose();
    const Vector d_att = tr.states.transpose() * d_output;
    const double mean = tr.attention.dot(d_att);
    const Vector d_scores = tr.attention.cwiseProduct((d_att.array() - mean).matrix());
    const Matrix d_proj_pre =
        ((enc.attention_context * d_scores.transpose()).array() * (1.0 - tr.attention_hidden.array().square()))
            .matrix();
    d_states.noalias() += enc.attention_proj.transpose() * d_proj_pre;
    if (grad) {
        grad->attention_context.noalias() += tr.attention_hidden * d_scores;
        grad->attention_proj.noalias() += d_proj_pre * tr.states.transpose();
    }

    const Matrix d_fwd = lstm_backward(enc.forward, tr.forward, tr.inputs, d_states.topRows(H), false,
                                       grad ? &grad->forward : nullptr);
    const Matrix d_bwd = lstm_backward(enc.backward, tr.backward, tr.inputs, d_states.bottomRows(H), true,
                                       grad ? &grad->backward : nullptr);
    Matrix d_x = enc.forward.input_weights.transpose() * d_fwd;
    d_x.noalias() += enc.backward.input_weights.transpose() * d_bwd;

    if (grad)
        for (std::size_t t = 0; t < tr.ids.size(); ++t)
            grad->embedding.col(tr.ids[t]) += d_x.col(static_cast<Eigen::Index>(t));
    if (d_inputs) *d_inputs = std::move(d_x);
}

// ---------------------------------------------------------------------------
// Heads

HeadTrace head_forward(const HeadParams& head, const Matrix& inputs) {
    if (inputs.rows() != head.hidden_weights.cols())
        throw Error("head input dimension " + std::to_string(inputs.rows()) + " != " +
                    std::to_string(head.hidden_weights.cols()));
    HeadTrace t;
    t.inputs = inputs;
    Matrix pre = head.hidden_weights * inputs;
    pre.colwise() += head.hidden_bias;
    t.hidden = pre.array().tanh().matrix();
    Matrix logits = head.output_weights * t.hidden;
    logits.colwise() += head.output_bias;
    for (Eigen::Index b = 0; b < logits.cols(); ++b) {
        auto col = logits.col(b);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
    }
    t.probs = std::move(logits);
    return t;
}

std::vector<double> classify(const Vector& h, const HeadParams& head) {
    const HeadTrace t = head_forward(head, h);
    return {t.probs.data(), t.probs.data() + t.probs.size()};
}

Matrix head_backward(const HeadParams& head, const HeadTrace& trace, const Matrix& d_logits, HeadParams* grad) {
    const Matrix d_hidden =
        ((head.output_weights.transpose() * d_logits).array() * (1.0 - trace.hidden.array().square())).matrix();
    if (grad) {
        grad->output_weights.noalias() += d_logits * trace.hidden.transpose();
        grad->output_bias += d_logits.rowwise().sum();
        grad->hidden_weights.noalias() += d_hidden * trace.inputs.transpose();
        grad->hidden_bias += d_hidden.rowwise().sum();
    }
    return head.hidden_weights.transpose() * d_hidden;
}

double cross_entropy_dist(std::span<const double> q, std::span<const double> t) {
    if (q.size() != t.size())
        throw Error("cross-entropy length mismatch (" + std::to_string(q.size()) + " vs " + std::to_string(t.size()) +
                    ")");
    double ce = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) ce -= t[k] * std::log(std::max(q[k], 1e-12));
    return ce;
}

Vector grl_transform(const Vector& upstream, double lambda) { return GradientReversal{lambda}.backward(upstream); }

std::vector<double> saliency_map(std::span<const int> doc_ids, const EncoderParams& enc, const HeadParams& head,
                                 int max_length) {
    const EncoderTrace tr = encoder_forward(enc, doc_ids, max_length);
    const HeadTrace ht = head_forward(head, tr.output);
    const std::span<const double> probs(ht.probs.data(), static_cast<std::size_t>(ht.probs.size()));
    const int predicted = argmax(probs);

    // d p_yhat / d logits = p_yhat (e_yhat - p)
    Matrix d_logits = -probs[static_cast<std::size_t>(predicted)] * ht.probs;
    d_logits(predicted, 0) += probs[static_cast<std::size_t>(predicted)];
    const Matrix d_h = head_backward(head, ht, d_logits, nullptr);
    Matrix d_x;
    encoder_backward(enc, tr, d_h.col(0), nullptr, &d_x);

    std::vector<double> scores(tr.input_length, 0.0);
    double total = 0.0;
    for (std::size_t t = 0; t < tr.positions.size(); ++t) {
        const double s = d_x.col(static_cast<Eigen::Index>(t)).norm();
        scores[tr.positions[t]] = s;
        total += s;
    }
    if (total > 0.0) {
        for (double& s : scores) s /= total;
    } else {
        for (std::size_t p : tr.positions) scores[p] = 1.0 / static_cast<double>(tr.positions.size());
    }
    return scores;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    if (out.empty()) return out;
    const double top = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (double& x : out) total += (x = std::exp(x - top));
    for (double& x : out) x /= total;
    return out;
}

int argmax(std::span<const double> v) {
    if (v.empty()) throw Error("argmax of empty vector");
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

}  // namespace deconf
