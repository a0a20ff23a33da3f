#include "ellreg/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ellreg/error.hpp"
#include "ellreg/sde.hpp"

namespace ellreg {

void EllipticConfig::validate() const {
    if (n_bridges < 1) throw PreconditionError("n_bridges must be at least 1");
    if (n_time < 2) throw PreconditionError("n_time must be at least 2 (both endpoints)");
    if (!(sigma_b >= 0.0)) throw PreconditionError("sigma_b must be non-negative");
    if (!(xi >= 0.0)) throw PreconditionError("xi must be non-negative");
    if (!(t_end > 0.0)) throw PreconditionError("t_end must be positive");
}

// ---------------------------------------------------------------------------
// EndpointSampler

EndpointSampler EndpointSampler::inverse_distance(const Matrix& distances, double floor) {
    const std::size_t n = distances.rows();
    if (distances.cols() != n) throw ShapeError("distance matrix must be square");
    if (n < 2) throw PreconditionError("endpoint sampling needs a batch of at least 2");
    if (!(floor > 0.0)) throw PreconditionError("distance floor must be positive");
    EndpointSampler s(EndpointMode::InverseDistance, n);
    s.cumulative_ = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        auto cum = s.cumulative_.row(i);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                const double d = distances(i, j);
                if (!(d >= 0.0)) throw DomainError("distances must be non-negative");
                total += 1.0 / std::max(d, floor);
            }
            cum[j] = total;
        }
        for (double& c : cum) c /= total;
        // The last partner's bin closes at exactly 1.
        for (std::size_t j = (i == n - 1 ? n - 2 : n - 1); j < n; ++j) cum[j] = 1.0;
    }
    return s;
}

EndpointSampler EndpointSampler::uniform(std::size_t batch_size) {
    if (batch_size < 2) throw PreconditionError("endpoint sampling needs a batch of at least 2");
    return EndpointSampler(EndpointMode::Uniform, batch_size);
}

EndpointSampler EndpointSampler::self_pair(std::size_t batch_size) {
    if (batch_size < 1) throw PreconditionError("empty batch");
    return EndpointSampler(EndpointMode::SelfPair, batch_size);
}

EndpointSampler EndpointSampler::for_batch(const Matrix& features, EndpointMode mode,
                                           ExecPolicy policy) {
    switch (mode) {
        case EndpointMode::InverseDistance:
            if (features.rows() < 2) {
                throw PreconditionError("endpoint sampling needs a batch of at least 2");
            }
            return inverse_distance(pairwise_distances(features, policy));
        case EndpointMode::Uniform:
            return uniform(features.rows());
        case EndpointMode::SelfPair:
            return self_pair(features.rows());
    }
    throw PreconditionError("unknown endpoint mode");
}

double EndpointSampler::probability(std::size_t anchor, std::size_t partner) const {
    if (anchor >= n_ || partner >= n_) throw ShapeError("index outside the batch");
    switch (mode_) {
        case EndpointMode::SelfPair:
            return anchor == partner ? 1.0 : 0.0;
        case EndpointMode::Uniform:
            return anchor == partner ? 0.0 : 1.0 / static_cast<double>(n_ - 1);
        case EndpointMode::InverseDistance: {
            const double hi = cumulative_(anchor, partner);
            const double lo = partner == 0 ? 0.0 : cumulative_(anchor, partner - 1);
            return hi - lo;
        }
    }
    return 0.0;
}

std::size_t EndpointSampler::sample(std::size_t anchor, Engine& engine) const {
    switch (mode_) {
        case EndpointMode::SelfPair:
            return anchor;
        case EndpointMode::Uniform: {
            std::uniform_int_distribution<std::size_t> pick(0, n_ - 2);
            const std::size_t j = pick(engine);
            return j >= anchor ? j + 1 : j;
        }
        case EndpointMode::InverseDistance: {
            std::uniform_real_distribution<double> u01(0.0, 1.0);
            const double u = u01(engine);
            auto cum = cumulative_.row(anchor);
            const auto it = std::upper_bound(cum.begin(), cum.end(), u);
            std::size_t j = static_cast<std::size_t>(it - cum.begin());
            if (j >= n_) j = n_ - 1;
            return j;
        }
    }
    return anchor;
}

std::size_t EndpointSampler::sample(std::size_t anchor, RngStream rng) const {
    auto engine = rng.engine();
    return sample(anchor, engine);
}

// ---------------------------------------------------------------------------

std::vector<double> simplex_project(std::span<const double> y) {
    if (y.empty()) throw PreconditionError("simplex projection of an empty vector");
    std::vector<double> out(y.size());
    double total = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        out[j] = std::abs(y[j]);
        total += out[j];
    }
    if (total == 0.0) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(y.size()));
        return out;
    }
    for (double& v : out) v /= total;
    return out;
}

BridgeBatch sample_bridge_batch(const Matrix& X, const Matrix& Y, const EllipticConfig& cfg,
                                const EndpointSampler& sampler, RngStream rng,
                                ExecPolicy policy) {
    cfg.validate();
    const std::size_t n = X.rows();
    if (Y.rows() != n) throw ShapeError("features and targets differ in row count");
    if (n < 2) throw PreconditionError("the bridge objective needs a batch of at least 2");
    if (sampler.size() != n) throw ShapeError("endpoint sampler does not match the batch size");

    const std::size_t d = X.cols();
    const std::size_t k = Y.cols();
    const std::size_t m = d + k;
    const std::size_t nb = cfg.n_bridges;
    const std::size_t nt = cfg.n_time;
    const std::size_t rows = n * nb * nt;

    BridgeBatch out{Matrix(rows, d), Matrix(rows, k), std::vector<double>(rows),
                    std::vector<std::size_t>(n * nb)};

    const double path_w = 1.0 / static_cast<double>(n * nb * nt);
    const double source_w = 1.0 / static_cast<double>(n * nb);
    for (std::size_t r = 0; r < rows; ++r) {
        out.weights[r] = path_w;
        if (cfg.variant == ObjectiveVariant::SourceTerm && r % nt == 0) out.weights[r] += source_w;
    }

#pragma omp parallel for schedule(dynamic, 4) if (policy == ExecPolicy::Parallel)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        auto engine = rng.child(i).engine();
        std::vector<double> start(m), end(m), noise((nt - 1) * m), states(nt * m);
        std::copy(X.row(i).begin(), X.row(i).end(), start.begin());
        std::copy(Y.row(i).begin(), Y.row(i).end(), start.begin() + static_cast<std::ptrdiff_t>(d));
        for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t j = sampler.sample(i, engine);
            out.partners[i * nb + b] = j;
            std::copy(X.row(j).begin(), X.row(j).end(), end.begin());
            std::copy(Y.row(j).begin(), Y.row(j).end(), end.begin() + static_cast<std::ptrdiff_t>(d));
            sample_bridge_states(start, end, cfg.sigma_b, nt - 1, cfg.t_end, engine, noise, states);
            for (std::size_t t = 0; t < nt; ++t) {
                const std::size_t r = (i * nb + b) * nt + t;
                const double* z = states.data() + t * m;
                std::copy(z, z + d, out.inputs.row(r).begin());
                if (cfg.simplex_project) {
                    const auto p = simplex_project(std::span<const double>(z + d, k));
                    std::copy(p.begin(), p.end(), out.targets.row(r).begin());
                } else {
                    std::copy(z + d, z + m, out.targets.row(r).begin());
                }
            }
        }
    }
    return out;
}

namespace {

ObjectiveResult elliptic_objective(const Mlp& model, const Matrix& X, const Matrix& Y,
                                   LossKind kind, const EllipticConfig& cfg,
                                   const EndpointSampler& sampler, RngStream rng, double xi,
                                   ExecPolicy policy) {
    const BridgeBatch bb = sample_bridge_batch(X, Y, cfg, sampler, rng, policy);
    auto wl = weighted_loss_gradient(kind, model, bb.inputs, bb.targets, bb.weights, xi, policy);
    return {wl.value, std::move(wl.grads)};
}

}  // namespace

ObjectiveResult bridge_objective(const Mlp& model, const Matrix& X, const Matrix& Y,
                                 LossKind kind, const EllipticConfig& cfg,
                                 const EndpointSampler& sampler, RngStream rng,
                                 ExecPolicy policy) {
    return elliptic_objective(model, X, Y, kind, cfg, sampler, rng, 0.0, policy);
}

ObjectiveResult importance_weighted_objective(const Mlp& model, const Matrix& X, const Matrix& Y,
                                              LossKind kind, const EllipticConfig& cfg,
                                              const EndpointSampler& sampler, RngStream rng,
                                              ExecPolicy policy) {
    return elliptic_objective(model, X, Y, kind, cfg, sampler, rng, cfg.xi, policy);
}

ObjectiveResult erm_objective(const Mlp& model, const Matrix& X, const Matrix& Y, LossKind kind,
                              ExecPolicy policy) {
    if (X.rows() == 0) throw PreconditionError("empty batch");
    const std::vector<double> w(X.rows(), 1.0 / static_cast<double>(X.rows()));
    auto wl = weighted_loss_gradient(kind, model, X, Y, w, 0.0, policy);
    return {wl.value, std::move(wl.grads)};
}

double sample_mixup_lambda(double alpha, Engine& engine) {
    if (!(alpha > 0.0)) throw PreconditionError("mixup alpha must be positive");
    std::gamma_distribution<double> ga(alpha, 1.0);
    const double a = ga(engine);
    const double b = ga(engine);
    if (a + b == 0.0) return 0.5;
    return a / (a + b);
}

ObjectiveResult mixup_objective_with(const Mlp& model, const Matrix& X, const Matrix& Y,
                                     LossKind kind, double lambda,
                                     std::span<const std::size_t> partners, ExecPolicy policy) {
    const std::size_t n = X.rows();
    if (Y.rows() != n || partners.size() != n) throw ShapeError("mixup: batch shapes disagree");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw PreconditionError("mixup lambda must be in [0, 1]");
    Matrix mx(n, X.cols()), my(n, Y.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = partners[i];
        if (j >= n) throw ShapeError("mixup partner index outside the batch");
        for (std::size_t c = 0; c < X.cols(); ++c) mx(i, c) = lambda * X(i, c) + (1.0 - lambda) * X(j, c);
        for (std::size_t c = 0; c < Y.cols(); ++c) my(i, c) = lambda * Y(i, c) + (1.0 - lambda) * Y(j, c);
    }
    return erm_objective(model, mx, my, kind, policy);
}

ObjectiveResult mixup_objective(const Mlp& model, const Matrix& X, const Matrix& Y, LossKind kind,
                                const MixupConfig& mix, RngStream rng, ExecPolicy policy) {
    if (X.rows() < 2) throw PreconditionError("mixup needs a batch of at least 2");
    auto engine = rng.engine();
    const double lambda = sample_mixup_lambda(mix.alpha, engine);
    std::vector<std::size_t> partners(X.rows());
    std::iota(partners.begin(), partners.end(), std::size_t{0});
    std::shuffle(partners.begin(), partners.end(), engine);
    return mixup_objective_with(model, X, Y, kind, lambda, partners, policy);
}

}  // namespace ellreg
