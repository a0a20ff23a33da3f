#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ellreg/kernels.hpp"
#include "ellreg/matrix.hpp"
#include "ellreg/nn.hpp"
#include "ellreg/rng.hpp"

namespace ellreg {

/// How the bridge loss is aggregated along each path.
enum class ObjectiveVariant {
    PathAverage,  // mean of the loss over the time grid
    SourceTerm,   // loss at s = 0 plus the grid mean
};

/// How a partner endpoint is drawn for each anchor.
enum class EndpointMode {
    InverseDistance,  // P(j) proportional to 1 / max(d(i, j), floor)
    Uniform,          // uniform over j != i
    SelfPair,         // partner = anchor (diagnostic; reduces the bridge loss to ERM)
};

struct EllipticConfig {
    std::size_t n_bridges = 20;  // bridges per anchor
    std::size_t n_time = 5;      // grid points on [0, t_end], both endpoints included
    double sigma_b = 0.05;
    double xi = 1.0;             // importance-weight strength
    ObjectiveVariant variant = ObjectiveVariant::PathAverage;
    EndpointMode endpoint_mode = EndpointMode::InverseDistance;
    bool simplex_project = false;
    double t_end = 1.0;

    /// Throws PreconditionError on out-of-range fields.
    void validate() const;
};

struct MixupConfig {
    double alpha = 1.0;
};

/// Discrete partner law over the other members of a batch.
class EndpointSampler {
public:
    static constexpr double kDefaultFloor = 1e-12;

    static EndpointSampler inverse_distance(const Matrix& distances, double floor = kDefaultFloor);
    static EndpointSampler uniform(std::size_t batch_size);
    static EndpointSampler self_pair(std::size_t batch_size);

    /// Builds the sampler the config asks for from a batch's features.
    static EndpointSampler for_batch(const Matrix& features, EndpointMode mode,
                                     ExecPolicy policy = ExecPolicy::Parallel);

    EndpointMode mode() const noexcept { return mode_; }
    std::size_t size() const noexcept { return n_; }

    /// Probability that `anchor` is paired with `partner`.
    double probability(std::size_t anchor, std::size_t partner) const;

    std::size_t sample(std::size_t anchor, Engine& engine) const;
    std::size_t sample(std::size_t anchor, RngStream rng) const;

private:
    EndpointSampler(EndpointMode mode, std::size_t n) : mode_(mode), n_(n) {}

    EndpointMode mode_;
    std::size_t n_;
    Matrix cumulative_;  // row i: cumulative normalised partner weights (InverseDistance)
};

/// |y| / sum|y|, or the uniform vector when y is all zeros.
std::vector<double> simplex_project(std::span<const double> y);

struct ObjectiveResult {
    double value = 0.0;
    Parameters grads;
};

/// Every bridge point of one batch with its quadrature weight.
/// Rows are ordered anchor-major, then bridge, then time.
struct BridgeBatch {
    Matrix inputs;
    Matrix targets;
    std::vector<double> weights;
    std::vector<std::size_t> partners;  // one per (anchor, bridge)
};

/// Samples the bridges of a batch over the joint point z = (x, y). Anchor i draws its
/// partners and noise from rng.child(i), so the result does not depend on threading.
BridgeBatch sample_bridge_batch(const Matrix& X, const Matrix& Y, const EllipticConfig& cfg,
                                const EndpointSampler& sampler, RngStream rng,
                                ExecPolicy policy = ExecPolicy::Parallel);

/// Mean over anchors, bridges and grid points of l(f(X_s), y_s); gradients flow
/// through the network only.
ObjectiveResult bridge_objective(const Mlp& model, const Matrix& X, const Matrix& Y,
                                 LossKind kind, const EllipticConfig& cfg,
                                 const EndpointSampler& sampler, RngStream rng,
                                 ExecPolicy policy = ExecPolicy::Parallel);

/// bridge_objective with each point's loss raised by cfg.xi * |grad_z l|.
ObjectiveResult importance_weighted_objective(const Mlp& model, const Matrix& X, const Matrix& Y,
                                              LossKind kind, const EllipticConfig& cfg,
                                              const EndpointSampler& sampler, RngStream rng,
                                              ExecPolicy policy = ExecPolicy::Parallel);

ObjectiveResult erm_objective(const Mlp& model, const Matrix& X, const Matrix& Y, LossKind kind,
                              ExecPolicy policy = ExecPolicy::Parallel);

/// lambda ~ Beta(alpha, alpha).
double sample_mixup_lambda(double alpha, Engine& engine);

/// Loss on lambda * z_i + (1 - lambda) * z_partners[i].
ObjectiveResult mixup_objective_with(const Mlp& model, const Matrix& X, const Matrix& Y,
                                     LossKind kind, double lambda,
                                     std::span<const std::size_t> partners,
                                     ExecPolicy policy = ExecPolicy::Parallel);

/// One lambda per batch and a random permutation of partners, both from `rng`.
ObjectiveResult mixup_objective(const Mlp& model, const Matrix& X, const Matrix& Y, LossKind kind,
                                const MixupConfig& mix, RngStream rng,
                                ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace ellreg
