#include "deconf/optimizer.hpp"

#include <cmath>
#include <string>

#include "deconf/error.hpp"

namespace deconf {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw Error("unknown optimizer \"" + std::string(s) + "\"");
}

void Optimizer::step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size()) throw Error("optimizer: parameter/gradient count mismatch");
    ++steps_;
    if (kind_ == OptimizerKind::sgd) {
        for (std::size_t t = 0; t < params.size(); ++t)
            for (std::size_t i = 0; i < params[t].size(); ++i) params[t][i] -= learning_rate_ * grads[t][i];
        return;
    }

    if (m_.empty()) {
        for (auto p : params) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw Error("optimizer: tensor list changed between steps");

    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
    const double step_size = learning_rate_ * std::sqrt(c2) / c1;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto p = params[t];
        auto g = grads[t];
        auto& m = m_[t];
        auto& v = v_[t];
        if (p.size() != m.size() || g.size() != p.size()) throw Error("optimizer: tensor size changed");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            p[i] -= step_size * m[i] / (std::sqrt(v[i]) + epsilon * std::sqrt(c2));
        }
    }
}

void Optimizer::restore(long steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
    if (m.size() != v.size()) throw Error("optimizer: moment lists differ in length");
    steps_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace deconf
