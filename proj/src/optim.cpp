#include "ellreg/optim.hpp"

#include <cmath>
#include <string>

#include "ellreg/error.hpp"

namespace ellreg {

OptimState::OptimState(OptimizerKind kind, const Mlp& model)
    : kind_(kind),
      m_(Parameters::zeros_like(model.params())),
      v_(Parameters::zeros_like(model.params())) {}

void OptimState::step(Mlp& model, const Parameters& grads, double learning_rate) {
    if (!grads.same_shape(model.params()) || !m_.same_shape(model.params())) {
        throw ShapeError("optimizer step: gradient shapes do not mirror the model");
    }
    {
        auto g = grads.blocks();
        for (std::size_t b = 0; b < g.size(); ++b) {
            for (std::size_t i = 0; i < g[b].size(); ++i) {
                if (!std::isfinite(g[b][i])) {
                    throw NonFiniteError("non-finite gradient in parameter block " +
                                         std::to_string(b) + " entry " + std::to_string(i) +
                                         " at step " + std::to_string(steps_ + 1));
                }
            }
        }
    }
    ++steps_;
    auto theta = model.params().blocks();
    auto g = grads.blocks();
    auto m = m_.blocks();
    auto v = v_.blocks();

    if (const auto* sgd = std::get_if<SgdSettings>(&kind_)) {
        for (std::size_t b = 0; b < theta.size(); ++b) {
            for (std::size_t i = 0; i < theta[b].size(); ++i) {
                double d = g[b][i] + sgd->weight_decay * theta[b][i];
                if (sgd->momentum != 0.0) {
                    m[b][i] = steps_ == 1 ? d : sgd->momentum * m[b][i] + d;
                    d = m[b][i];
                }
                theta[b][i] -= learning_rate * d;
            }
        }
        return;
    }

    const auto& adam = std::get<AdamSettings>(kind_);
    const double t = static_cast<double>(steps_);
    const double bc1 = 1.0 - std::pow(adam.beta1, t);
    const double bc2 = 1.0 - std::pow(adam.beta2, t);
    for (std::size_t b = 0; b < theta.size(); ++b) {
        for (std::size_t i = 0; i < theta[b].size(); ++i) {
            const double gi = g[b][i];
            m[b][i] = adam.beta1 * m[b][i] + (1.0 - adam.beta1) * gi;
            v[b][i] = adam.beta2 * v[b][i] + (1.0 - adam.beta2) * gi * gi;
            const double mhat = m[b][i] / bc1;
            const double vhat = v[b][i] / bc2;
            theta[b][i] -= learning_rate * mhat / (std::sqrt(vhat) + adam.epsilon);
        }
    }
}

}  // namespace ellreg
