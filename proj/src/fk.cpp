#include "ellreg/fk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ellreg/error.hpp"
#include "ellreg/objectives.hpp"
#include "ellreg/stats.hpp"

namespace ellreg {

namespace {

std::size_t nearest_center(std::span<const double> z, const Matrix& centers) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.rows(); ++c) {
        const double d = distance(z, centers.row(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace

std::vector<LandscapeEstimate> estimate_dirichlet(const Matrix& centers,
                                                  std::span<const double> center_values,
                                                  const Box& box, const Matrix& queries,
                                                  const FkSettings& settings, RngStream rng,
                                                  const ScalarField& exit_value,
                                                  ExecPolicy policy) {
    if (center_values.size() != centers.rows()) throw ShapeError("one value per centre required");
    if (centers.rows() == 0) throw PreconditionError("no boundary centres");
    if (settings.n_paths < 1) throw PreconditionError("n_paths must be at least 1");
    if (!(settings.eps > 0.0)) throw PreconditionError("eps must be positive");
    if (queries.cols() != centers.cols() || box.dim() != centers.cols()) {
        throw ShapeError("queries, centres and box disagree in dimension");
    }
    if (settings.boundary_value == BoundaryValue::ExitPointLoss && !exit_value) {
        throw PreconditionError("exit-point recording needs an exit value function");
    }
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        if (!box.contains(queries.row(q))) {
            throw PreconditionError("query " + std::to_string(q) + " lies outside the domain box");
        }
    }

    const auto walks =
        run_walks(queries, settings.n_paths, centers, box, settings.walk(), rng, policy);

    std::vector<LandscapeEstimate> out(queries.rows());
    std::vector<double> recorded;
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        LandscapeEstimate& e = out[q];
        recorded.clear();
        for (std::size_t p = 0; p < settings.n_paths; ++p) {
            const WalkRecord& w = walks[q * settings.n_paths + p];
            if (w.outcome == HitOutcome::Timeout) {
                ++e.n_timeout;
                continue;
            }
            if (w.outcome == HitOutcome::HitCenter) {
                ++e.n_hit;
            } else {
                ++e.n_boundary;
            }
            if (settings.boundary_value == BoundaryValue::ExitPointLoss) {
                recorded.push_back(exit_value(w.final_state));
            } else if (w.outcome == HitOutcome::HitCenter) {
                recorded.push_back(center_values[w.center]);
            } else {
                recorded.push_back(center_values[nearest_center(w.final_state, centers)]);
            }
        }
        e.valid = !recorded.empty();
        if (e.valid) {
            e.mean = mean(recorded);
            e.std_error = sample_std(recorded) / std::sqrt(static_cast<double>(recorded.size()));
        }
    }
    return out;
}

Box landscape_box(const Dataset& data, double margin) { return Box::bounding(data.joint(), margin); }

std::vector<LandscapeEstimate> estimate_landscape(const Mlp& model, LossKind kind,
                                                  const Dataset& data, const Matrix& queries,
                                                  const FkSettings& settings, RngStream rng,
                                                  ExecPolicy policy) {
    const Matrix centers = data.joint();
    const auto losses = per_sample_losses(kind, model, data.features, data.targets);
    const Box box = landscape_box(data, settings.box_margin);
    const std::size_t d = data.feature_dim();
    const std::size_t k = data.target_dim();

    ScalarField exit_value = [&model, kind, d, k](std::span<const double> z) {
        SampleWorkspace ws;
        auto x = z.first(d);
        auto y = z.subspan(d, k);
        if (kind == LossKind::CrossEntropy) {
            const auto p = simplex_project(y);
            return sample_loss(kind, model, x, p, ws);
        }
        return sample_loss(kind, model, x, y, ws);
    };
    return estimate_dirichlet(centers, losses, box, queries, settings, rng, exit_value, policy);
}

MaxPrincipleReport max_principle_report(std::span<const double> boundary_losses,
                                        std::span<const double> interior_values, double slack) {
    if (boundary_losses.empty() || interior_values.empty()) {
        throw PreconditionError("max-principle report needs boundary and interior values");
    }
    MaxPrincipleReport r;
    r.slack = slack;
    const auto [bmin, bmax] = std::minmax_element(boundary_losses.begin(), boundary_losses.end());
    const auto [imin, imax] = std::minmax_element(interior_values.begin(), interior_values.end());
    r.min_boundary = *bmin;
    r.max_boundary = *bmax;
    r.min_interior = *imin;
    r.max_interior = *imax;
    r.satisfied = r.max_interior <= r.max_boundary * (1.0 + slack) &&
                  r.min_interior >= r.min_boundary * (1.0 - slack) - slack;
    return r;
}

MaxPrincipleReport max_principle_report(std::span<const double> boundary_losses,
                                        std::span<const LandscapeEstimate> interior, double slack) {
    std::vector<double> values;
    for (const auto& e : interior) {
        if (e.valid) values.push_back(e.mean);
    }
    if (values.empty()) throw PreconditionError("no valid interior estimate");
    return max_principle_report(boundary_losses, std::span<const double>(values), slack);
}

DynkinResult dynkin_residual(const ScalarField& g, const ScalarField& laplacian_g,
                             std::span<const double> x0, double sigma, const StoppingRule& stop,
                             std::size_t n_paths, double dt, RngStream rng, ExecPolicy policy) {
    if (n_paths < 1) throw PreconditionError("n_paths must be at least 1");
    if (!(dt > 0.0) || !(stop.horizon >= 0.0)) throw PreconditionError("bad time discretisation");
    if (stop.kind == StoppingRule::Kind::BoxExit &&
        (stop.box.dim() != x0.size() || !stop.box.contains(x0))) {
        throw PreconditionError("Dynkin start must lie inside the stopping box");
    }
    const std::size_t dim = x0.size();
    const auto max_steps = static_cast<std::size_t>(std::llround(stop.horizon / dt));
    const double g0 = g(x0);
    const double half_var = 0.5 * sigma * sigma;
    const double scale = sigma * std::sqrt(dt);
    std::vector<double> per_path(n_paths);

#pragma omp parallel for schedule(dynamic, 16) if (policy == ExecPolicy::Parallel)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(n_paths); ++pi) {
        const auto p = static_cast<std::size_t>(pi);
        auto engine = rng.child(p).engine();
        std::normal_distribution<double> normal;
        std::vector<double> z(x0.begin(), x0.end());
        double integral = 0.0;
        for (std::size_t step = 0; step < max_steps; ++step) {
            integral += half_var * laplacian_g(z) * dt;
            for (std::size_t j = 0; j < dim; ++j) z[j] += scale * normal(engine);
            if (stop.kind == StoppingRule::Kind::BoxExit && !stop.box.contains(z)) break;
        }
        per_path[p] = g(z) - g0 - integral;
    }
    return {mean(per_path), sample_std(per_path) / std::sqrt(static_cast<double>(n_paths))};
}

double two_layer_laplacian_bound(const Matrix& W0, const Matrix& W1) {
    if (W1.rows() != 1 || W1.cols() != W0.rows()) {
        throw ShapeError("expected W0: K x d and W1: 1 x K");
    }
    double s = 0.0;
    for (std::size_t c = 0; c < W0.cols(); ++c) {
        double v = 0.0;
        for (std::size_t r = 0; r < W0.rows(); ++r) v += W1(0, r) * W0(r, c);
        s += v * v;
    }
    return 2.0 * s;
}

double two_layer_relu(const Matrix& W0, const Matrix& W1, std::span<const double> x) {
    if (W1.rows() != 1 || W1.cols() != W0.rows() || x.size() != W0.cols()) {
        throw ShapeError("two-layer network shape mismatch");
    }
    double f = 0.0;
    for (std::size_t r = 0; r < W0.rows(); ++r) f += W1(0, r) * std::max(0.0, dot(W0.row(r), x));
    return f;
}

double affine_shift_bound(const Matrix& W0, const Matrix& W1, const Matrix& A,
                          std::span<const double> b, std::span<const double> x, double y, double C,
                          double tau_T) {
    const std::size_t d = x.size();
    if (A.rows() != d || A.cols() != d || b.size() != d) throw ShapeError("A_T must be d x d, b_T of size d");
    if (!(tau_T >= 0.0) || !(C >= 0.0)) throw PreconditionError("tau_T and C must be non-negative");
    std::vector<double> shift(d);
    for (std::size_t i = 0; i < d; ++i) shift[i] = dot(A.row(i), x) + b[i] - x[i];
    const double delta = norm2(shift);
    const double e = std::abs(two_layer_relu(W0, W1, x) - y);
    return two_layer_laplacian_bound(W0, W1) * tau_T + C * delta * (delta + 2.0 * e);
}

HittingTimeEstimate estimate_hitting_time(std::span<const double> start, const Matrix& centers,
                                          const Box& box, const WalkSettings& settings,
                                          std::size_t n_paths, RngStream rng, ExecPolicy policy) {
    if (n_paths < 1) throw PreconditionError("n_paths must be at least 1");
    if (!box.contains(start)) throw PreconditionError("start lies outside the domain box");
    Matrix starts(1, start.size(), std::vector<double>(start.begin(), start.end()));
    const auto walks = run_walks(starts, n_paths, centers, box, settings, rng, policy);
    std::vector<double> taus;
    for (const auto& w : walks) {
        if (w.outcome != HitOutcome::Timeout) taus.push_back(w.tau);
    }
    HittingTimeEstimate h;
    h.n_stopped = taus.size();
    h.censor_rate = 1.0 - static_cast<double>(taus.size()) / static_cast<double>(n_paths);
    h.valid = !taus.empty();
    if (h.valid) {
        h.mean_tau = mean(taus);
        h.std_error = sample_std(taus) / std::sqrt(static_cast<double>(taus.size()));
    }
    return h;
}

}  // namespace ellreg
