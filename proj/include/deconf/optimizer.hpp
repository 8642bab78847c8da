#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace deconf {

enum class OptimizerKind { adam, sgd };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

// Per-parameter adaptive moments (Adam) or plain gradient descent over a fixed
// list of flat tensors. Moments are sized on the first step.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), learning_rate_(learning_rate) {}

    void step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads);

    OptimizerKind kind() const { return kind_; }
    double learning_rate() const { return learning_rate_; }
    long steps() const { return steps_; }

    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }
    void restore(long steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double epsilon = 1e-8;

private:
    OptimizerKind kind_ = OptimizerKind::adam;
    double learning_rate_ = 1e-3;
    long steps_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace deconf
