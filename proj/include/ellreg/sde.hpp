#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "ellreg/matrix.hpp"
#include "ellreg/rng.hpp"

namespace ellreg {

/// Time grid plus one state per grid time (states.row(i) at times[i]).
struct Path {
    std::vector<double> times;
    Matrix states;

    std::size_t size() const noexcept { return times.size(); }
    std::span<const double> front() const { return states.row(0); }
    std::span<const double> back() const { return states.row(states.rows() - 1); }
};

/// Brownian bridge from `start` to `end` over [0, t_end] on `n_steps` uniform steps.
struct BridgeSpec {
    std::vector<double> start;
    std::vector<double> end;
    double sigma = 0.0;
    std::size_t n_steps = 1;
    double t_end = 1.0;
};

/// x -> out, both of the state dimension.
using VectorField = std::function<void(std::span<const double> x, std::span<double> out)>;

/// Brownian motion started at 0 with per-coordinate increments N(0, sigma^2 dt).
Path sample_brownian_path(std::size_t dim, std::size_t n_steps, double dt, double sigma,
                          RngStream rng);

/// Brownian bridge, built as W_t + start pinned to `end` by a linear correction.
/// First and last states equal start and end bit-for-bit.
Path sample_brownian_bridge(const BridgeSpec& spec, RngStream rng);
Path sample_brownian_bridge(const BridgeSpec& spec, Engine& engine);

/// Writes bridge states into out (rows = n_steps + 1, cols = dim) without allocating
/// a Path. `noise` must have room for n_steps * dim values.
void sample_bridge_states(std::span<const double> start, std::span<const double> end,
                          double sigma, std::size_t n_steps, double t_end, Engine& engine,
                          std::span<double> noise, std::span<double> out);

/// X_{i+1} = X_i + drift(X_i) dt + sigma sqrt(dt) xi_i over [0, t_end].
/// Throws NonFiniteError naming the state if drift returns NaN/Inf.
Path euler_maruyama(const VectorField& drift, double sigma, std::span<const double> x0,
                    double t_end, std::size_t n_steps, RngStream rng);

/// Left-endpoint discretisation of log dP_mu/dQ along the path:
/// sum_i mu(Z_i).(Z_{i+1} - Z_i) - 1/2 sum_i |mu(Z_i)|^2 dt_i.
double girsanov_log_weight(const Path& path, const VectorField& mu);

/// Axis-aligned box [lo, hi].
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const noexcept { return lo.size(); }
    bool contains(std::span<const double> z) const noexcept;

    /// Bounding box of the rows of `points`, each side widened by margin * extent
    /// (or by margin when a coordinate has zero extent).
    static Box bounding(const Matrix& points, double margin = 0.1);
};

enum class HitOutcome { HitCenter, HitDomainBoundary, Timeout };

struct HitResult {
    HitOutcome outcome = HitOutcome::Timeout;
    std::size_t center = 0;            // valid for HitCenter
    double tau = 0.0;
    std::vector<double> final_state;   // clamped to the box on HitDomainBoundary
    Path path;                         // only filled when recording was requested
};

struct WalkSettings {
    double sigma = 1.0;
    double eps = 0.05;
    double dt = 1e-3;
    double t_max = 10.0;
    bool record_path = false;
};

/// Uniform-grid lookup of the centre nearest to a point within eps. Cells have
/// side eps on the first (up to) three coordinates; the answer equals a linear
/// scan, including the lower-index rule on exact ties.
class CenterIndex {
public:
    CenterIndex(const Matrix& centers, double eps);

    const Matrix& centers() const noexcept { return centers_; }
    double eps() const noexcept { return eps_; }

    /// Index of the nearest centre with |z - c| < eps, or npos.
    std::size_t nearest_within(std::span<const double> z) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::uint64_t key(const long long* cell) const noexcept;

    Matrix centers_;
    double eps_;
    std::size_t grid_dims_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

/// Walks dz = sigma dW from `start` until it is strictly within eps of a row of
/// `centers` (nearest such centre wins, lower index on exact ties), leaves `box`,
/// or runs past t_max. Checks happen on grid points only, starting at t = 0.
HitResult hitting_time_walk(std::span<const double> start, const Matrix& centers, const Box& box,
                            const WalkSettings& settings, RngStream rng);
HitResult hitting_time_walk(std::span<const double> start, const CenterIndex& centers,
                            const Box& box, const WalkSettings& settings, Engine& engine);

/// Index of the nearest centre with |z - c| < eps, or npos.
std::size_t nearest_center_within(std::span<const double> z, const Matrix& centers, double eps);

}  // namespace ellreg
