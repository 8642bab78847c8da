#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace deconf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ModelConfig {
    int vocab_size = 0;
    int embed_dim = 128;
    int hidden_dim = 128;  // per direction
    int head_hidden = 256;
    int num_classes = 2;
    int num_topics = 2;
    std::uint64_t seed = 1;
    int max_length = 512;

    int state_dim() const { return 2 * hidden_dim; }
    int attention_dim() const { return 2 * hidden_dim; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Gate rows are stacked as input, forget, cell, output.
struct LstmParams {
    Matrix input_weights;      // 4H x D
    Matrix recurrent_weights;  // 4H x H
    Vector bias;               // 4H
};

struct EncoderParams {
    Matrix embedding;  // D x V, one column per token id
    LstmParams forward;
    LstmParams backward;
    Matrix attention_proj;     // A x 2H
    Vector attention_context;  // A
};

// affine -> tanh -> affine -> softmax
struct HeadParams {
    Matrix hidden_weights;  // Hh x In
    Vector hidden_bias;
    Matrix output_weights;  // Out x Hh
    Vector output_bias;

    int input_dim() const { return static_cast<int>(hidden_weights.cols()); }
    int output_dim() const { return static_cast<int>(output_weights.rows()); }
};

// Flat views over every tensor, in a fixed order. Gradients, optimizer moments
// and checkpoints all rely on this order.
std::vector<std::span<double>> tensors(EncoderParams& p);
std::vector<std::span<const double>> tensors(const EncoderParams& p);
std::vector<std::span<double>> tensors(HeadParams& p);
std::vector<std::span<const double>> tensors(const HeadParams& p);

EncoderParams zeros_like(const EncoderParams& p);
HeadParams zeros_like(const HeadParams& p);
void set_zero(EncoderParams& p);
void set_zero(HeadParams& p);

// FNV-1a over the raw bytes of every tensor.
std::uint64_t checksum(const EncoderParams& p);
std::uint64_t checksum(const HeadParams& p);
bool all_finite(const EncoderParams& p);
bool all_finite(const HeadParams& p);

EncoderParams init_encoder(const ModelConfig& config, std::mt19937_64& rng);
HeadParams init_head(int input_dim, int hidden_dim, int output_dim, std::mt19937_64& rng);

class AdversaryPool {
public:
    explicit AdversaryPool(std::uint64_t selection_seed = 1) : rng_(selection_seed) {}

    void add(HeadParams head) { heads_.push_back(std::move(head)); }
    std::size_t size() const { return heads_.size(); }
    bool empty() const { return heads_.empty(); }
    HeadParams& operator[](std::size_t i) { return heads_[i]; }
    const HeadParams& operator[](std::size_t i) const { return heads_[i]; }
    HeadParams& back() { return heads_.back(); }
    const std::vector<HeadParams>& heads() const { return heads_; }

    // Uniform over the pool.
    std::size_t select();

    std::mt19937_64& rng() { return rng_; }
    const std::mt19937_64& rng() const { return rng_; }

private:
    std::vector<HeadParams> heads_;
    std::mt19937_64 rng_;
};

struct Model {
    ModelConfig config;
    EncoderParams encoder;
    HeadParams classifier;
    AdversaryPool adversaries;
};

// Deterministic given config.seed: uniform in [-r, r] with r = 1/sqrt(fan_in).
Model init_params(const ModelConfig& config);

// ---------------------------------------------------------------------------
// Forward / backward passes

struct LstmTrace {
    Matrix gates;  // 4H x n, post-activation
    Matrix cells;  // H x n
    Matrix hidden; // H x n
};

// Activations kept for the backward pass. Only non-PAD positions within
// max_length take part; `positions` maps them back to input indices.
struct EncoderTrace {
    std::size_t input_length = 0;
    std::vector<std::size_t> positions;
    std::vector<int> ids;
    Matrix inputs;   // D x n
    LstmTrace forward;
    LstmTrace backward;  // column t holds the state at position t
    Matrix states;   // 2H x n
    Matrix attention_hidden;  // A x n, tanh(W s)
    Vector attention;         // n
    Vector output;            // 2H
};

struct Encoding {
    Vector h;                        // 2H
    std::vector<double> attention;  // one weight per input position; 0 at PAD
};

EncoderTrace encoder_forward(const EncoderParams& enc, std::span<const int> doc_ids, int max_length = 512);
Encoding encode(const EncoderParams& enc, std::span<const int> doc_ids, int max_length = 512);

// Accumulates parameter gradients into `grad` (when non-null) and, when
// `d_inputs` is non-null, writes dL/d(embedding at each kept position) (D x n).
void encoder_backward(const EncoderParams& enc, const EncoderTrace& trace, const Vector& d_output,
                      EncoderParams* grad, Matrix* d_inputs = nullptr);

struct HeadTrace {
    Matrix inputs;  // In x B
    Matrix hidden;  // Hh x B, post-tanh
    Matrix probs;   // Out x B
};

HeadTrace head_forward(const HeadParams& head, const Matrix& inputs);
std::vector<double> classify(const Vector& h, const HeadParams& head);

// d_logits is dL/d(pre-softmax) per column. Returns dL/d(inputs).
Matrix head_backward(const HeadParams& head, const HeadTrace& trace, const Matrix& d_logits, HeadParams* grad);

// -sum_k t_k log max(q_k, 1e-12)
double cross_entropy_dist(std::span<const double> q, std::span<const double> t);

// Forward pass is the identity; backward multiplies by -lambda.
struct GradientReversal {
    double lambda = 0.2;

    Vector forward(const Vector& v) const { return v; }
    Vector backward(const Vector& upstream) const { return -lambda * upstream; }
};

Vector grl_transform(const Vector& upstream, double lambda);

// Normalised L2 norms of d p(y_hat|x) / d(embedding at position i). PAD and
// truncated positions score 0.
std::vector<double> saliency_map(std::span<const int> doc_ids, const EncoderParams& enc, const HeadParams& head,
                                 int max_length = 512);

std::vector<double> softmax(std::span<const double> logits);
int argmax(std::span<const double> v);  // lowest index on ties
double entropy(std::span<const double> p);

}  // namespace deconf
