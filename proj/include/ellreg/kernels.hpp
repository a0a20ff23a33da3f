#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ellreg/matrix.hpp"
#include "ellreg/nn.hpp"
#include "ellreg/rng.hpp"
#include "ellreg/sde.hpp"

namespace ellreg {

/// How a data-parallel kernel runs. Both policies split work into the same fixed
/// chunks and reduce them in chunk order, so results are bit-identical; Serial is
/// the reference the OpenMP path is tested against.
enum class ExecPolicy { Serial, Parallel };

/// Number of OpenMP threads Parallel kernels use (1 without OpenMP).
int max_threads() noexcept;
void set_threads(int n) noexcept;

/// Euclidean distances between all rows of X.
Matrix pairwise_distances(const Matrix& X, ExecPolicy policy = ExecPolicy::Parallel);

struct WeightedLoss {
    double value = 0.0;
    Parameters grads;
};

/// value = sum_r w_r (l_r + xi |grad_z l_r|), grads = sum_r w_r (1 + xi |grad_z l_r|) dl_r/dtheta,
/// with the gradient norm treated as a constant. xi = 0 gives the plain weighted loss.
WeightedLoss weighted_loss_gradient(LossKind kind, const Mlp& model, const Matrix& inputs,
                                    const Matrix& targets, std::span<const double> row_weights,
                                    double xi = 0.0, ExecPolicy policy = ExecPolicy::Parallel);

/// Outcome of one hitting-time walk, without the path.
struct WalkRecord {
    HitOutcome outcome = HitOutcome::Timeout;
    std::size_t center = 0;
    double tau = 0.0;
    std::vector<double> final_state;
};

/// n_paths walks from every row of `starts`. Walk p of start q uses stream
/// rng.child(q).child(p); records are laid out start-major.
std::vector<WalkRecord> run_walks(const Matrix& starts, std::size_t n_paths, const Matrix& centers,
                                  const Box& box, const WalkSettings& settings, RngStream rng,
                                  ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace ellreg
