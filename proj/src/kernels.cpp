#include "ellreg/kernels.hpp"

#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ellreg/error.hpp"

namespace ellreg {

namespace {

constexpr std::size_t kRowsPerChunk = 64;

std::size_t chunk_count(std::size_t n) { return (n + kRowsPerChunk - 1) / kRowsPerChunk; }

}  // namespace

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) noexcept {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

Matrix pairwise_distances(const Matrix& X, ExecPolicy policy) {
    const auto n = static_cast<std::ptrdiff_t>(X.rows());
    Matrix D(X.rows(), X.rows());
#pragma omp parallel for schedule(dynamic, 8) if (policy == ExecPolicy::Parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        for (std::ptrdiff_t j = i + 1; j < n; ++j) {
            const double d = distance(X.row(i), X.row(j));
            D(i, j) = d;
            D(j, i) = d;
        }
    }
    return D;
}

WeightedLoss weighted_loss_gradient(LossKind kind, const Mlp& model, const Matrix& inputs,
                                    const Matrix& targets, std::span<const double> row_weights,
                                    double xi, ExecPolicy policy) {
    check_loss_inputs(kind, model, inputs, targets);
    if (row_weights.size() != inputs.rows()) throw ShapeError("one weight per row required");

    const std::size_t n = inputs.rows();
    const std::size_t n_chunks = chunk_count(n);
    std::vector<double> chunk_values(n_chunks, 0.0);
    std::vector<Parameters> chunk_grads(n_chunks);

#pragma omp parallel for schedule(dynamic, 1) if (policy == ExecPolicy::Parallel)
    for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(n_chunks); ++ci) {
        const auto c = static_cast<std::size_t>(ci);
        SampleWorkspace ws;
        std::vector<double> grad_z(inputs.cols() + targets.cols());
        Parameters grads = Parameters::zeros_like(model.params());
        double value = 0.0;
        const std::size_t end = std::min(n, (c + 1) * kRowsPerChunk);
        for (std::size_t r = c * kRowsPerChunk; r < end; ++r) {
            const double w = row_weights[r];
            const double loss = sample_loss(kind, model, inputs.row(r), targets.row(r), ws);
            sample_backward(kind, model, targets.row(r), ws, grad_z);
            const double gnorm = xi != 0.0 ? norm2(grad_z) : 0.0;
            value += w * (loss + xi * gnorm);
            accumulate_param_grads(ws, w * (1.0 + xi * gnorm), grads);
        }
        chunk_values[c] = value;
        chunk_grads[c] = std::move(grads);
    }

    WeightedLoss out{0.0, Parameters::zeros_like(model.params())};
    for (std::size_t c = 0; c < n_chunks; ++c) {
        out.value += chunk_values[c];
        out.grads.add_scaled(chunk_grads[c], 1.0);
    }
    return out;
}

std::vector<WalkRecord> run_walks(const Matrix& starts, std::size_t n_paths, const Matrix& centers,
                                  const Box& box, const WalkSettings& settings, RngStream rng,
                                  ExecPolicy policy) {
    WalkSettings s = settings;
    s.record_path = false;
    if (!(s.eps > 0.0)) throw PreconditionError("eps must be positive");
    if (!(s.dt > 0.0)) throw PreconditionError("dt must be positive");
    if (!(s.sigma > 0.0)) throw PreconditionError("walk sigma must be positive");
    if (box.dim() != starts.cols() || (centers.rows() && centers.cols() != starts.cols())) {
        throw ShapeError("walk starts, box and centres disagree in dimension");
    }
    for (std::size_t q = 0; q < starts.rows(); ++q) {
        if (!box.contains(starts.row(q))) {
            throw PreconditionError("walk start " + std::to_string(q) + " lies outside the domain box");
        }
    }
    const CenterIndex index(centers, s.eps);
    const std::size_t total = starts.rows() * n_paths;
    std::vector<WalkRecord> out(total);
#pragma omp parallel for schedule(dynamic, 16) if (policy == ExecPolicy::Parallel)
    for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(total); ++ti) {
        const auto t = static_cast<std::size_t>(ti);
        const std::size_t q = t / n_paths;
        const std::size_t p = t % n_paths;
        auto engine = rng.child(q).child(p).engine();
        HitResult h = hitting_time_walk(starts.row(q), index, box, s, engine);
        out[t] = WalkRecord{h.outcome, h.center, h.tau, std::move(h.final_state)};
    }
    return out;
}

}  // namespace ellreg
