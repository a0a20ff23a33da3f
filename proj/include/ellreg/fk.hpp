#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ellreg/data.hpp"
#include "ellreg/kernels.hpp"
#include "ellreg/matrix.hpp"
#include "ellreg/nn.hpp"
#include "ellreg/rng.hpp"
#include "ellreg/sde.hpp"

namespace ellreg {

/// What a stopped walk records.
enum class BoundaryValue {
    CenterLoss,     // loss of the data point whose ball was hit (nearest point on box exit)
    ExitPointLoss,  // loss evaluated at the stopped state itself
};

struct FkSettings {
    double eps = 0.05;
    double sigma = 1.0;
    std::size_t n_paths = 1000;
    double dt = 1e-3;
    double t_max = 10.0;
    double box_margin = 0.1;
    BoundaryValue boundary_value = BoundaryValue::CenterLoss;

    WalkSettings walk() const { return {sigma, eps, dt, t_max, false}; }
};

/// Monte Carlo estimate of u at one query point. Timeouts are censored.
struct LandscapeEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // sample std / sqrt(recorded paths)
    std::size_t n_hit = 0;
    std::size_t n_timeout = 0;
    std::size_t n_boundary = 0;
    bool valid = false;      // false when every path timed out

    std::size_t n_recorded() const noexcept { return n_hit + n_boundary; }
};

using ScalarField = std::function<double(std::span<const double>)>;

/// Harmonic extension of `center_values` into `box` by hitting-time walks from each
/// query row. exit_value is used for BoundaryValue::ExitPointLoss.
std::vector<LandscapeEstimate> estimate_dirichlet(const Matrix& centers,
                                                  std::span<const double> center_values,
                                                  const Box& box, const Matrix& queries,
                                                  const FkSettings& settings, RngStream rng,
                                                  const ScalarField& exit_value = {},
                                                  ExecPolicy policy = ExecPolicy::Parallel);

/// Loss landscape u(x, y) of a trained model with the training losses as Dirichlet
/// data on eps-balls around the joint data points. Queries are joint (x, y) rows inside
/// the data's bounding box widened by settings.box_margin.
std::vector<LandscapeEstimate> estimate_landscape(const Mlp& model, LossKind kind,
                                                  const Dataset& data, const Matrix& queries,
                                                  const FkSettings& settings, RngStream rng,
                                                  ExecPolicy policy = ExecPolicy::Parallel);

/// Domain box used by estimate_landscape.
Box landscape_box(const Dataset& data, double margin);

struct MaxPrincipleReport {
    double min_boundary = 0.0;
    double max_boundary = 0.0;
    double min_interior = 0.0;
    double max_interior = 0.0;
    bool satisfied = false;
    double slack = 0.0;
};

/// Extremes of the boundary losses and of the valid interior estimates.
MaxPrincipleReport max_principle_report(std::span<const double> boundary_losses,
                                        std::span<const LandscapeEstimate> interior, double slack);

/// Same report from raw interior values (e.g. plain losses at held-out points).
MaxPrincipleReport max_principle_report(std::span<const double> boundary_losses,
                                        std::span<const double> interior_values, double slack);

/// Stopping rule for Dynkin checks: a fixed horizon, or first exit from `box`
/// capped at `horizon`.
struct StoppingRule {
    enum class Kind { FixedHorizon, BoxExit } kind = Kind::FixedHorizon;
    double horizon = 1.0;
    Box box;
};

struct DynkinResult {
    double residual = 0.0;
    double std_error = 0.0;
};

/// MC[g(X_tau)] - g(x0) - MC[int_0^tau 1/2 sigma^2 lap_g(X_s) ds] for dX = sigma dW,
/// with left-endpoint quadrature on step dt.
DynkinResult dynkin_residual(const ScalarField& g, const ScalarField& laplacian_g,
                             std::span<const double> x0, double sigma, const StoppingRule& stop,
                             std::size_t n_paths, double dt, RngStream rng,
                             ExecPolicy policy = ExecPolicy::Parallel);

/// 2 (W1 W0)(W1 W0)^T for f(X) = W1 ReLU(W0 X), W0: K x d, W1: 1 x K.
double two_layer_laplacian_bound(const Matrix& W0, const Matrix& W1);

/// f(X) = W1 ReLU(W0 X) for a single point.
double two_layer_relu(const Matrix& W0, const Matrix& W1, std::span<const double> x);

/// Right-hand side of the affine-shift bound:
/// 2 (W1 W0)(W1 W0)^T tau_T + C |D| (|D| + 2 e), D = A x + b - x, e = |f(x) - y|.
double affine_shift_bound(const Matrix& W0, const Matrix& W1, const Matrix& A,
                          std::span<const double> b, std::span<const double> x, double y, double C,
                          double tau_T);

struct HittingTimeEstimate {
    double mean_tau = 0.0;   // over non-censored walks
    double std_error = 0.0;
    double censor_rate = 0.0;
    std::size_t n_stopped = 0;
    bool valid = false;
};

HittingTimeEstimate estimate_hitting_time(std::span<const double> start, const Matrix& centers,
                                          const Box& box, const WalkSettings& settings,
                                          std::size_t n_paths, RngStream rng,
                                          ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace ellreg
