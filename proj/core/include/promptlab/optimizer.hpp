#pragma once

#include <span>
#include <vector>

#include "promptlab/model.hpp"

namespace promptlab {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Global gradient-norm clip; <= 0 disables clipping.
    double clip_norm = 1.0;
};

/// Global L2 norm of the gradients present on `params`.
double gradient_norm(std::span<const NamedParameter> params);

/// Adam without weight decay over a fixed parameter list. Parameters that
/// received no gradient in a step are left untouched.
class Adam {
public:
    Adam(std::vector<NamedParameter> params, AdamConfig config);

    /// Clips, applies one update, clears gradients. Returns the pre-clip norm.
    double step();
    void zero_grad();

    const std::vector<NamedParameter>& parameters() const noexcept { return params_; }
    std::size_t steps_taken() const noexcept { return step_; }

private:
    std::vector<NamedParameter> params_;
    AdamConfig config_;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
    std::size_t step_ = 0;
};

}  // namespace promptlab
