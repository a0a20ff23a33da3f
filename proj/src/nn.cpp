#include "ellreg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ellreg/error.hpp"

namespace ellreg {

namespace {

constexpr double kSimplexTolerance = 1e-9;

void softmax_inplace(std::span<double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        s += x;
    }
    for (double& x : v) x /= s;
}

// log(sum(exp(z))) computed stably.
double log_sum_exp(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double x : z) s += std::exp(x - m);
    return m + std::log(s);
}

void check_simplex_row(std::span<const double> y, std::size_t row) {
    double sum = 0.0;
    for (double v : y) {
        if (v < -kSimplexTolerance) {
            throw DomainError("cross-entropy target row " + std::to_string(row) +
                              " has a negative entry");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
        throw DomainError("cross-entropy target row " + std::to_string(row) +
                          " does not sum to 1");
    }
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "leaky_relu"; }
std::string to_string(OutputHead h) { return h == OutputHead::Linear ? "linear" : "softmax"; }
std::string to_string(LossKind k) { return k == LossKind::MeanSquaredError ? "mse" : "ce"; }

// ---------------------------------------------------------------------------
// Parameters

Parameters Parameters::zeros_like(const Parameters& other) {
    Parameters p;
    for (const auto& w : other.weights) p.weights.emplace_back(w.rows(), w.cols());
    for (const auto& b : other.biases) p.biases.emplace_back(b.size(), 0.0);
    return p;
}

std::size_t Parameters::count() const noexcept {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
}

bool Parameters::all_finite() const noexcept {
    for (auto block : blocks()) {
        for (double v : block) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

bool Parameters::same_shape(const Parameters& other) const noexcept {
    if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != other.weights[l].rows() ||
            weights[l].cols() != other.weights[l].cols()) {
            return false;
        }
    }
    for (std::size_t l = 0; l < biases.size(); ++l) {
        if (biases[l].size() != other.biases[l].size()) return false;
    }
    return true;
}

std::vector<std::span<double>> Parameters::blocks() {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(weights[l].values());
        out.push_back(biases[l]);
    }
    return out;
}

std::vector<std::span<const double>> Parameters::blocks() const {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(weights[l].values());
        out.push_back(biases[l]);
    }
    return out;
}

void Parameters::add_scaled(const Parameters& other, double scale) {
    if (!same_shape(other)) throw ShapeError("add_scaled: parameter shapes differ");
    auto dst = blocks();
    auto src = other.blocks();
    for (std::size_t b = 0; b < dst.size(); ++b) {
        for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += scale * src[b][i];
    }
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation activation, OutputHead head,
         double leaky_slope)
    : sizes_(std::move(layer_sizes)), activation_(activation), head_(head), slope_(leaky_slope) {
    if (sizes_.size() < 2) throw ShapeError("an Mlp needs at least an input and an output size");
    for (auto s : sizes_) {
        if (s == 0) throw ShapeError("layer sizes must be positive");
    }
    if (activation_ == Activation::LeakyReLU && !(slope_ > 0.0 && slope_ < 1.0)) {
        throw PreconditionError("LeakyReLU slope must lie in (0, 1)");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        params_.weights.emplace_back(sizes_[l + 1], sizes_[l]);
        params_.biases.emplace_back(sizes_[l + 1], 0.0);
    }
}

Mlp Mlp::initialized(std::vector<std::size_t> layer_sizes, Activation activation, OutputHead head,
                     RngStream rng, double leaky_slope) {
    Mlp model(std::move(layer_sizes), activation, head, leaky_slope);
    auto engine = rng.engine();
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(model.sizes_[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& w : model.weight(l).values()) w = u(engine);
        for (double& b : model.bias(l)) b = u(engine);
    }
    return model;
}

double Mlp::activate(double z) const noexcept {
    if (z > 0.0) return z;
    return activation_ == Activation::ReLU ? 0.0 : slope_ * z;
}

double Mlp::activate_derivative(double z) const noexcept {
    if (z > 0.0) return 1.0;
    return activation_ == Activation::ReLU ? 0.0 : slope_;
}

// ---------------------------------------------------------------------------
// Single-sample evaluation

void SampleWorkspace::reserve_for(const Mlp& model) {
    const auto L = model.num_layers();
    if (pre.size() == L && post.size() == L + 1) return;
    const auto& sizes = model.layer_sizes();
    pre.assign(L, {});
    delta.assign(L, {});
    post.assign(L + 1, {});
    post[0].resize(sizes[0]);
    for (std::size_t l = 0; l < L; ++l) {
        pre[l].resize(sizes[l + 1]);
        delta[l].resize(sizes[l + 1]);
        post[l + 1].resize(sizes[l + 1]);
    }
    output.resize(sizes.back());
}

namespace {

void forward_sample(const Mlp& model, std::span<const double> x, SampleWorkspace& ws) {
    ws.reserve_for(model);
    std::copy(x.begin(), x.end(), ws.post[0].begin());
    const auto L = model.num_layers();
    for (std::size_t l = 0; l < L; ++l) {
        const Matrix& W = model.weight(l);
        const auto& b = model.bias(l);
        const auto& in = ws.post[l];
        auto& z = ws.pre[l];
        for (std::size_t r = 0; r < W.rows(); ++r) {
            z[r] = b[r] + dot(W.row(r), in);
        }
        if (l + 1 < L) {
            for (std::size_t r = 0; r < z.size(); ++r) ws.post[l + 1][r] = model.activate(z[r]);
        } else {
            std::copy(z.begin(), z.end(), ws.post[l + 1].begin());
        }
    }
    ws.output = ws.pre.back();
    if (model.head() == OutputHead::Softmax) softmax_inplace(ws.output);
}

}  // namespace

double sample_loss(LossKind kind, const Mlp& model, std::span<const double> x,
                   std::span<const double> y, SampleWorkspace& ws) {
    forward_sample(model, x, ws);
    if (kind == LossKind::MeanSquaredError) {
        double s = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double r = ws.output[j] - y[j];
            s += r * r;
        }
        return s;
    }
    const auto& logits = ws.pre.back();
    const double lse = log_sum_exp(logits);
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        if (y[j] != 0.0) s -= y[j] * (logits[j] - lse);
    }
    return s;
}

void sample_backward(LossKind kind, const Mlp& model, std::span<const double> y,
                     SampleWorkspace& ws, std::span<double> grad_z) {
    const auto L = model.num_layers();
    const std::size_t d = model.input_dim();
    const std::size_t k = model.output_dim();
    auto& top = ws.delta[L - 1];

    if (kind == LossKind::MeanSquaredError) {
        for (std::size_t j = 0; j < k; ++j) {
            const double g = 2.0 * (ws.output[j] - y[j]);
            top[j] = g;
            grad_z[d + j] = -g;
        }
        if (model.head() == OutputHead::Softmax) {
            // Softmax Jacobian: p_j (g_j - p.g)
            double pg = 0.0;
            for (std::size_t j = 0; j < k; ++j) pg += ws.output[j] * top[j];
            for (std::size_t j = 0; j < k; ++j) top[j] = ws.output[j] * (top[j] - pg);
        }
    } else {
        const auto& logits = ws.pre.back();
        const double lse = log_sum_exp(logits);
        double ysum = 0.0;
        for (double v : y) ysum += v;
        for (std::size_t j = 0; j < k; ++j) {
            top[j] = ws.output[j] * ysum - y[j];
            grad_z[d + j] = -(logits[j] - lse);
        }
    }

    for (std::size_t l = L; l-- > 1;) {
        const Matrix& W = model.weight(l);
        auto& below = ws.delta[l - 1];
        std::fill(below.begin(), below.end(), 0.0);
        for (std::size_t r = 0; r < W.rows(); ++r) {
            const double dr = ws.delta[l][r];
            if (dr == 0.0) continue;
            auto wr = W.row(r);
            for (std::size_t c = 0; c < W.cols(); ++c) below[c] += wr[c] * dr;
        }
        for (std::size_t c = 0; c < below.size(); ++c) {
            below[c] *= model.activate_derivative(ws.pre[l - 1][c]);
        }
    }

    const Matrix& W0 = model.weight(0);
    std::fill(grad_z.begin(), grad_z.begin() + static_cast<std::ptrdiff_t>(d), 0.0);
    for (std::size_t r = 0; r < W0.rows(); ++r) {
        const double dr = ws.delta[0][r];
        if (dr == 0.0) continue;
        auto wr = W0.row(r);
        for (std::size_t c = 0; c < d; ++c) grad_z[c] += wr[c] * dr;
    }
}

void accumulate_param_grads(const SampleWorkspace& ws, double weight, Parameters& grads) {
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        Matrix& gW = grads.weights[l];
        auto& gb = grads.biases[l];
        const auto& in = ws.post[l];
        const auto& dl = ws.delta[l];
        for (std::size_t r = 0; r < gW.rows(); ++r) {
            const double dr = weight * dl[r];
            if (dr == 0.0) continue;
            gb[r] += dr;
            auto row = gW.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += dr * in[c];
        }
    }
}

// ---------------------------------------------------------------------------
// Batch operations

void check_loss_inputs(LossKind kind, const Mlp& model, const Matrix& inputs,
                       const Matrix& targets) {
    if (inputs.cols() != model.input_dim()) {
        throw ShapeError("inputs have " + std::to_string(inputs.cols()) +
                         " columns, model expects " + std::to_string(model.input_dim()));
    }
    if (targets.cols() != model.output_dim()) {
        throw ShapeError("targets have " + std::to_string(targets.cols()) +
                         " columns, model outputs " + std::to_string(model.output_dim()));
    }
    if (inputs.rows() != targets.rows()) throw ShapeError("inputs and targets differ in row count");
    if (kind == LossKind::CrossEntropy) {
        if (model.head() != OutputHead::Softmax) {
            throw DomainError("cross-entropy requires a softmax output head");
        }
        for (std::size_t i = 0; i < targets.rows(); ++i) check_simplex_row(targets.row(i), i);
    }
}

Matrix forward(const Mlp& model, const Matrix& inputs) {
    if (inputs.cols() != model.input_dim()) {
        throw ShapeError("inputs have " + std::to_string(inputs.cols()) +
                         " columns, model expects " + std::to_string(model.input_dim()));
    }
    Matrix out(inputs.rows(), model.output_dim());
    SampleWorkspace ws;
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        forward_sample(model, inputs.row(i), ws);
        std::copy(ws.output.begin(), ws.output.end(), out.row(i).begin());
    }
    return out;
}

LossWithInputGrad loss_with_input_grad(LossKind kind, const Mlp& model, const Matrix& inputs,
                                       const Matrix& targets) {
    check_loss_inputs(kind, model, inputs, targets);
    LossWithInputGrad out{std::vector<double>(inputs.rows()),
                          Matrix(inputs.rows(), inputs.cols() + targets.cols())};
    SampleWorkspace ws;
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        out.losses[i] = sample_loss(kind, model, inputs.row(i), targets.row(i), ws);
        sample_backward(kind, model, targets.row(i), ws, out.grad_z.row(i));
    }
    return out;
}

Parameters backward_params(LossKind kind, const Mlp& model, const Matrix& inputs,
                           const Matrix& targets) {
    check_loss_inputs(kind, model, inputs, targets);
    Parameters grads = Parameters::zeros_like(model.params());
    if (inputs.rows() == 0) return grads;
    const double w = 1.0 / static_cast<double>(inputs.rows());
    SampleWorkspace ws;
    std::vector<double> grad_z(inputs.cols() + targets.cols());
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        sample_loss(kind, model, inputs.row(i), targets.row(i), ws);
        sample_backward(kind, model, targets.row(i), ws, grad_z);
        accumulate_param_grads(ws, w, grads);
    }
    return grads;
}

std::vector<double> per_sample_losses(LossKind kind, const Mlp& model, const Matrix& inputs,
                                      const Matrix& targets) {
    check_loss_inputs(kind, model, inputs, targets);
    std::vector<double> out(inputs.rows());
    SampleWorkspace ws;
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        out[i] = sample_loss(kind, model, inputs.row(i), targets.row(i), ws);
    }
    return out;
}

}  // namespace ellreg
