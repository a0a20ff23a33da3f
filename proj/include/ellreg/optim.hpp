#pragma once

#include <cstdint>
#include <variant>

#include "ellreg/nn.hpp"

namespace ellreg {

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
struct SgdSettings {
    double momentum = 0.0;
    double weight_decay = 0.0;
};

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

using OptimizerKind = std::variant<SgdSettings, AdamSettings>;

/// Optimizer kind plus moment buffers mirroring the model's parameters.
class OptimState {
public:
    OptimState(OptimizerKind kind, const Mlp& model);

    const OptimizerKind& kind() const noexcept { return kind_; }
    std::uint64_t steps() const noexcept { return steps_; }
    const Parameters& first_moment() const noexcept { return m_; }
    const Parameters& second_moment() const noexcept { return v_; }

    /// Applies one update in place. Throws NonFiniteError (model untouched) if any
    /// gradient entry is NaN/Inf and ShapeError on mismatched shapes.
    void step(Mlp& model, const Parameters& grads, double learning_rate);

private:
    OptimizerKind kind_;
    Parameters m_;
    Parameters v_;
    std::uint64_t steps_ = 0;
};

}  // namespace ellreg
