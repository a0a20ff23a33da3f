#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ellreg/matrix.hpp"
#include "ellreg/nn.hpp"
#include "ellreg/rng.hpp"

namespace ellreg::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Engine& engine, double lo = -1.0,
                            double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = u(engine);
    return m;
}

/// One-hot style soft targets: rows on the probability simplex.
inline Matrix random_simplex_rows(std::size_t rows, std::size_t cols, Engine& engine) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (double& v : m.row(r)) s += (v = u(engine));
        for (double& v : m.row(r)) v /= s;
    }
    return m;
}

/// Straight-line re-evaluation of the layer recurrence, one scalar at a time.
inline std::vector<double> scalar_forward(const Mlp& model, std::span<const double> x) {
    std::vector<double> a(x.begin(), x.end());
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const Matrix& W = model.weight(l);
        const auto& b = model.bias(l);
        std::vector<double> z(W.rows());
        for (std::size_t i = 0; i < W.rows(); ++i) {
            double s = b[i];
            for (std::size_t j = 0; j < W.cols(); ++j) s += W(i, j) * a[j];
            z[i] = s;
        }
        if (l + 1 < model.num_layers()) {
            for (double& v : z) {
                if (v <= 0.0) v = model.activation() == Activation::ReLU ? 0.0 : model.leaky_slope() * v;
            }
        } else if (model.head() == OutputHead::Softmax) {
            double mx = z[0];
            for (double v : z) mx = std::max(mx, v);
            double s = 0.0;
            for (double& v : z) s += (v = std::exp(v - mx));
            for (double& v : z) v /= s;
        }
        a = std::move(z);
    }
    return a;
}

/// Relative error with an absolute floor, for finite-difference comparisons.
inline double rel_err(double a, double b, double floor = 1e-2) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace ellreg::testing
