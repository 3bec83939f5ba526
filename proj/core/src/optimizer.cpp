#include "promptlab/optimizer.hpp"

#include <cmath>

#include "promptlab/errors.hpp"

namespace promptlab {

double gradient_norm(std::span<const NamedParameter> params) {
    double total = 0.0;
    for (const auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (double g : p.tensor.grad()) total += g * g;
    }
    return std::sqrt(total);
}

Adam::Adam(std::vector<NamedParameter> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    if (!(config_.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    for (const auto& p : params_) {
        first_moment_.emplace_back(p.tensor.size(), 0.0);
        second_moment_.emplace_back(p.tensor.size(), 0.0);
    }
}

double Adam::step() {
    const double norm = gradient_norm(params_);
    if (!std::isfinite(norm)) throw DivergenceError("non-finite gradient norm");
    const double clip =
        config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

    ++step_;
    const double t = static_cast<double>(step_);
    const double bias1 = 1.0 - std::pow(config_.beta1, t);
    const double bias2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& tensor = params_[i].tensor;
        if (!tensor.has_grad()) continue;
        const auto grad = tensor.grad();
        auto values = tensor.mutable_values();
        auto& m = first_moment_[i];
        auto& v = second_moment_[i];
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double g = grad[j] * clip;
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
            const double m_hat = m[j] / bias1;
            const double v_hat = v[j] / bias2;
            values[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
    zero_grad();
    return norm;
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace promptlab
