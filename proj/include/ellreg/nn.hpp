#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ellreg/matrix.hpp"
#include "ellreg/rng.hpp"

namespace ellreg {

enum class Activation { ReLU, LeakyReLU };
enum class OutputHead { Linear, Softmax };
enum class LossKind { MeanSquaredError, CrossEntropy };

std::string to_string(Activation a);
std::string to_string(OutputHead h);
std::string to_string(LossKind k);

/// Weights and biases of a dense network, or a gradient set of the same shape.
/// weights[l] is (out x in) for layer l.
struct Parameters {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    static Parameters zeros_like(const Parameters& other);

    std::size_t count() const noexcept;
    bool all_finite() const noexcept;
    bool same_shape(const Parameters& other) const noexcept;

    /// Every weight/bias block as a flat span, weights and biases interleaved per layer.
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;

    void add_scaled(const Parameters& other, double scale);

    friend bool operator==(const Parameters&, const Parameters&) = default;
};

/// Dense feed-forward network: hidden layers use `activation`, the last layer
/// is affine followed by `head`.
class Mlp {
public:
    Mlp(std::vector<std::size_t> layer_sizes, Activation activation = Activation::ReLU,
        OutputHead head = OutputHead::Linear, double leaky_slope = 0.1);

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization of weights and biases.
    static Mlp initialized(std::vector<std::size_t> layer_sizes, Activation activation,
                           OutputHead head, RngStream rng, double leaky_slope = 0.1);

    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    std::size_t num_layers() const noexcept { return sizes_.size() - 1; }
    std::size_t input_dim() const noexcept { return sizes_.front(); }
    std::size_t output_dim() const noexcept { return sizes_.back(); }
    Activation activation() const noexcept { return activation_; }
    double leaky_slope() const noexcept { return slope_; }
    OutputHead head() const noexcept { return head_; }

    Matrix& weight(std::size_t l) { return params_.weights.at(l); }
    const Matrix& weight(std::size_t l) const { return params_.weights.at(l); }
    std::vector<double>& bias(std::size_t l) { return params_.biases.at(l); }
    const std::vector<double>& bias(std::size_t l) const { return params_.biases.at(l); }

    Parameters& params() noexcept { return params_; }
    const Parameters& params() const noexcept { return params_; }

    double activate(double z) const noexcept;
    double activate_derivative(double z) const noexcept;

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::vector<std::size_t> sizes_;
    Activation activation_;
    OutputHead head_;
    double slope_;
    Parameters params_;
};

/// Predictions for every input row.
Matrix forward(const Mlp& model, const Matrix& inputs);

/// Per-row scratch for single-sample evaluation and backpropagation.
struct SampleWorkspace {
    std::vector<std::vector<double>> pre;     // pre-activation of each layer
    std::vector<std::vector<double>> post;    // post[0] = input, post[l+1] = act(pre[l])
    std::vector<std::vector<double>> delta;   // dloss/dpre per layer
    std::vector<double> output;               // head(pre.back())

    void reserve_for(const Mlp& model);
};

/// Loss of one sample. Fills `ws` so that its gradients can be taken afterwards.
double sample_loss(LossKind kind, const Mlp& model, std::span<const double> x,
                   std::span<const double> y, SampleWorkspace& ws);

/// After sample_loss: writes d loss / d(x, y) into grad_z (size d + k) and leaves
/// per-layer deltas in `ws`.
void sample_backward(LossKind kind, const Mlp& model, std::span<const double> y,
                     SampleWorkspace& ws, std::span<double> grad_z);

/// After sample_backward: grads += weight * d loss / d theta.
void accumulate_param_grads(const SampleWorkspace& ws, double weight, Parameters& grads);

/// Throws unless (model, inputs, targets, kind) are mutually consistent; checks simplex
/// targets for cross-entropy.
void check_loss_inputs(LossKind kind, const Mlp& model, const Matrix& inputs,
                       const Matrix& targets);

struct LossWithInputGrad {
    std::vector<double> losses;  // one per sample
    Matrix grad_z;               // n x (d + k): gradient w.r.t. the concatenated point (x, y)
};

LossWithInputGrad loss_with_input_grad(LossKind kind, const Mlp& model, const Matrix& inputs,
                                       const Matrix& targets);

/// Gradient of the mean per-sample loss with respect to every weight and bias.
Parameters backward_params(LossKind kind, const Mlp& model, const Matrix& inputs,
                           const Matrix& targets);

/// Per-sample losses only.
std::vector<double> per_sample_losses(LossKind kind, const Mlp& model, const Matrix& inputs,
                                      const Matrix& targets);

}  // namespace ellreg
