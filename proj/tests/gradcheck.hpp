#pragma once

// Central finite-difference checks against the analytic gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "deconf/model.hpp"
#include "deconf/training.hpp"

namespace deconf::testing {

inline constexpr double kFdStep = 1e-5;

// ||a - n|| / max(||a|| + ||n||, 1e-12) over one tensor.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), 1e-12);
}

// Numeric gradient of `loss` with respect to every element of `param`.
inline std::vector<double> numeric_gradient(std::span<double> param, const std::function<double()>& loss) {
    std::vector<double> g(param.size());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + kFdStep;
        const double up = loss();
        param[i] = saved - kFdStep;
        const double down = loss();
        param[i] = saved;
        g[i] = (up - down) / (2.0 * kFdStep);
    }
    return g;
}

struct GradCheckFixture {
    Model model;
    HeadParams adversary;
    Batch batch;
    std::vector<std::vector<int>> docs;
    std::vector<std::vector<double>> confounds;
};

// embed = hidden = 4, two 5-token documents.
inline GradCheckFixture tiny_fixture(std::uint64_t seed = 7) {
    ModelConfig cfg;
    cfg.vocab_size = 12;
    cfg.embed_dim = 4;
    cfg.hidden_dim = 4;
    cfg.head_hidden = 5;
    cfg.num_classes = 3;
    cfg.num_topics = 3;
    cfg.seed = seed;
    GradCheckFixture f{init_params(cfg), {}, {}, {}, {}};
    std::mt19937_64 rng(seed + 1);
    f.adversary = init_head(cfg.state_dim(), cfg.head_hidden, cfg.num_topics, rng);
    f.docs = {{3, 4, 5, 6, 7}, {8, 9, 10, 11, 3}};
    f.confounds = {{0.6, 0.3, 0.1}, {0.2, 0.2, 0.6}};
    for (std::size_t i = 0; i < f.docs.size(); ++i) {
        f.batch.docs.emplace_back(f.docs[i]);
        f.batch.confounds.emplace_back(f.confounds[i]);
    }
    f.batch.labels = {1, 2};
    return f;
}

struct GroupError {
    const char* group;
    std::size_t tensor;
    double error;
};

// Compares analytic and numeric gradients of `spec`'s loss for every tensor of
// the encoder, classifier and (when the objective uses it) adversary. The loss
// differentiated numerically is classification + encoder_scale * adversary for
// encoder tensors, and the plain sum for head tensors.
inline std::vector<GroupError> check_objective(GradCheckFixture& f, const ObjectiveSpec& spec) {
    Gradients g = zero_gradients(f.model, &f.adversary);
    evaluate_objective(f.model, &f.adversary, spec, f.batch, &g);
    const auto loss_with_scale = [&](double scale) {
        return [&f, spec, scale] {
            const BatchLoss l = evaluate_objective(f.model, &f.adversary, spec, f.batch, nullptr);
            return (spec.classification ? l.classification : 0.0) + scale * l.adversary;
        };
    };
    std::vector<GroupError> out;
    const auto enc_params = tensors(f.model.encoder);
    const auto enc_grads = tensors(std::as_const(g.encoder));
    for (std::size_t i = 0; i < enc_params.size(); ++i)
        out.push_back({"encoder", i,
                       relative_error(enc_grads[i], numeric_gradient(enc_params[i], loss_with_scale(spec.encoder_scale)))});
    if (spec.classification) {
        const auto p = tensors(f.model.classifier);
        const auto a = tensors(std::as_const(g.classifier));
        for (std::size_t i = 0; i < p.size(); ++i)
            out.push_back({"classifier", i, relative_error(a[i], numeric_gradient(p[i], loss_with_scale(0.0)))});
    }
    if (spec.target != AdversaryTarget::none) {
        const auto p = tensors(f.adversary);
        const auto a = tensors(std::as_const(g.adversary));
        const auto adv_loss = [&f, spec] {
            return evaluate_objective(f.model, &f.adversary, spec, f.batch, nullptr).adversary;
        };
        for (std::size_t i = 0; i < p.size(); ++i)
            out.push_back({"adversary", i, relative_error(a[i], numeric_gradient(p[i], adv_loss))});
    }
    return out;
}

// Worst relative error between saliency_map and finite differences of
// p(y_hat | x) with respect to each position's embedding column. Tokens in
// `doc` must be distinct so each column belongs to one position.
inline double check_saliency(GradCheckFixture& f, const std::vector<int>& doc) {
    const std::vector<double> analytic = saliency_map(doc, f.model.encoder, f.model.classifier);
    const auto probs = predict_proba(f.model, doc);
    const int yhat = argmax(probs);
    std::vector<double> norms;
    double total = 0.0;
    for (int id : doc) {
        const auto col = f.model.encoder.embedding.col(id);
        std::span<double> view(f.model.encoder.embedding.data() + static_cast<std::ptrdiff_t>(id) * col.size(),
                               static_cast<std::size_t>(col.size()));
        const auto g = numeric_gradient(view, [&] { return predict_proba(f.model, doc)[static_cast<std::size_t>(yhat)]; });
        double n = 0.0;
        for (double x : g) n += x * x;
        norms.push_back(std::sqrt(n));
        total += norms.back();
    }
    for (double& n : norms) n /= total;
    return relative_error(analytic, norms);
}

}  // namespace deconf::testing
