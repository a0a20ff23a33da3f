#include "ellreg/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "ellreg/error.hpp"

namespace ellreg {

namespace {

std::vector<double> uniform_times(std::size_t n_steps, double t_end) {
    std::vector<double> t(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) {
        t[i] = t_end * static_cast<double>(i) / static_cast<double>(n_steps);
    }
    t[n_steps] = t_end;
    return t;
}

std::string format_state(std::span<const double> x) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ')';
    return os.str();
}

}  // namespace

Path sample_brownian_path(std::size_t dim, std::size_t n_steps, double dt, double sigma,
                          RngStream rng) {
    if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
    Path p;
    p.times.resize(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) p.times[i] = dt * static_cast<double>(i);
    p.states = Matrix(n_steps + 1, dim);
    auto engine = rng.engine();
    std::normal_distribution<double> normal;
    const double scale = sigma * std::sqrt(dt);
    for (std::size_t i = 1; i <= n_steps; ++i) {
        auto prev = p.states.row(i - 1);
        auto cur = p.states.row(i);
        for (std::size_t j = 0; j < dim; ++j) cur[j] = prev[j] + scale * normal(engine);
    }
    return p;
}

void sample_bridge_states(std::span<const double> start, std::span<const double> end,
                          double sigma, std::size_t n_steps, double t_end, Engine& engine,
                          std::span<double> noise, std::span<double> out) {
    const std::size_t dim = start.size();
    const std::size_t M = n_steps;
    std::normal_distribution<double> normal;
    const double scale = sigma * std::sqrt(t_end / static_cast<double>(M));

    // noise holds the running Brownian motion W_1..W_M, row-major.
    if (sigma != 0.0) {
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = 0; j < dim; ++j) {
                const double prev = i == 0 ? 0.0 : noise[(i - 1) * dim + j];
                noise[i * dim + j] = prev + scale * normal(engine);
            }
        }
    }

    std::copy(start.begin(), start.end(), out.begin());
    for (std::size_t i = 1; i < M; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(M);
        for (std::size_t j = 0; j < dim; ++j) {
            const double w = sigma != 0.0 ? noise[(i - 1) * dim + j] : 0.0;
            const double wM = sigma != 0.0 ? noise[(M - 1) * dim + j] : 0.0;
            out[i * dim + j] = start[j] + w + frac * (end[j] - start[j] - wM);
        }
    }
    std::copy(end.begin(), end.end(), out.begin() + static_cast<std::ptrdiff_t>(M * dim));
}

Path sample_brownian_bridge(const BridgeSpec& spec, Engine& engine) {
    if (spec.start.size() != spec.end.size()) throw ShapeError("bridge endpoints differ in dimension");
    if (!(spec.sigma >= 0.0)) throw PreconditionError("bridge sigma must be non-negative");
    if (spec.n_steps < 1) throw PreconditionError("bridge needs at least one step");
    if (!(spec.t_end > 0.0)) throw PreconditionError("bridge horizon must be positive");
    const std::size_t dim = spec.start.size();
    Path p;
    p.times = uniform_times(spec.n_steps, spec.t_end);
    p.states = Matrix(spec.n_steps + 1, dim);
    std::vector<double> noise(spec.n_steps * dim);
    sample_bridge_states(spec.start, spec.end, spec.sigma, spec.n_steps, spec.t_end, engine, noise,
                         p.states.values());
    return p;
}

Path sample_brownian_bridge(const BridgeSpec& spec, RngStream rng) {
    auto engine = rng.engine();
    return sample_brownian_bridge(spec, engine);
}

Path euler_maruyama(const VectorField& drift, double sigma, std::span<const double> x0,
                    double t_end, std::size_t n_steps, RngStream rng) {
    if (!(t_end > 0.0)) throw PreconditionError("horizon must be positive");
    if (n_steps < 1) throw PreconditionError("need at least one step");
    const std::size_t dim = x0.size();
    const double dt = t_end / static_cast<double>(n_steps);
    const double scale = sigma * std::sqrt(dt);
    Path p;
    p.times = uniform_times(n_steps, t_end);
    p.states = Matrix(n_steps + 1, dim);
    std::copy(x0.begin(), x0.end(), p.states.row(0).begin());
    std::vector<double> b(dim);
    auto engine = rng.engine();
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < n_steps; ++i) {
        auto cur = p.states.row(i);
        drift(cur, b);
        for (double v : b) {
            if (!std::isfinite(v)) {
                throw NonFiniteError("drift is non-finite at state " + format_state(cur) +
                                     " (step " + std::to_string(i) + ")");
            }
        }
        auto next = p.states.row(i + 1);
        for (std::size_t j = 0; j < dim; ++j) {
            next[j] = cur[j] + b[j] * dt + (sigma != 0.0 ? scale * normal(engine) : 0.0);
        }
    }
    return p;
}

double girsanov_log_weight(const Path& path, const VectorField& mu) {
    if (path.size() < 2) throw PreconditionError("path needs at least two states");
    const std::size_t dim = path.states.cols();
    std::vector<double> m(dim);
    double stochastic = 0.0;
    double quadratic = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        auto z = path.states.row(i);
        auto zn = path.states.row(i + 1);
        mu(z, m);
        const double dt = path.times[i + 1] - path.times[i];
        double mm = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            stochastic += m[j] * (zn[j] - z[j]);
            mm += m[j] * m[j];
        }
        quadratic += mm * dt;
    }
    return stochastic - 0.5 * quadratic;
}

bool Box::contains(std::span<const double> z) const noexcept {
    for (std::size_t j = 0; j < lo.size(); ++j) {
        if (z[j] < lo[j] || z[j] > hi[j]) return false;
    }
    return true;
}

Box Box::bounding(const Matrix& points, double margin) {
    if (points.rows() == 0) throw PreconditionError("bounding box of an empty point set");
    Box b;
    b.lo.assign(points.cols(), std::numeric_limits<double>::infinity());
    b.hi.assign(points.cols(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        auto r = points.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            b.lo[j] = std::min(b.lo[j], r[j]);
            b.hi[j] = std::max(b.hi[j], r[j]);
        }
    }
    for (std::size_t j = 0; j < b.lo.size(); ++j) {
        const double extent = b.hi[j] - b.lo[j];
        const double pad = extent > 0.0 ? margin * extent : margin;
        b.lo[j] -= pad;
        b.hi[j] += pad;
    }
    return b;
}

std::size_t nearest_center_within(std::span<const double> z, const Matrix& centers, double eps) {
    const double eps2 = eps * eps;
    std::size_t best = static_cast<std::size_t>(-1);
    double best_d2 = eps2;
    for (std::size_t c = 0; c < centers.rows(); ++c) {
        auto row = centers.row(c);
        double d2 = 0.0;
        for (std::size_t j = 0; j < z.size() && d2 < best_d2; ++j) {
            const double d = z[j] - row[j];
            d2 += d * d;
        }
        if (d2 < best_d2) {
            best_d2 = d2;
            best = c;
        }
    }
    return best;
}

CenterIndex::CenterIndex(const Matrix& centers, double eps)
    : centers_(centers), eps_(eps), grid_dims_(std::min<std::size_t>(centers.cols(), 3)) {
    if (!(eps > 0.0)) throw PreconditionError("eps must be positive");
    long long cell[3] = {0, 0, 0};
    for (std::size_t c = 0; c < centers_.rows(); ++c) {
        auto row = centers_.row(c);
        for (std::size_t j = 0; j < grid_dims_; ++j) {
            cell[j] = static_cast<long long>(std::floor(row[j] / eps_));
        }
        cells_[key(cell)].push_back(c);
    }
}

std::uint64_t CenterIndex::key(const long long* cell) const noexcept {
    std::uint64_t h = 0x51ED27A9C3B1F0E5ULL;
    for (std::size_t j = 0; j < grid_dims_; ++j) {
        h = splitmix64(h ^ static_cast<std::uint64_t>(cell[j]));
    }
    return h;
}

std::size_t CenterIndex::nearest_within(std::span<const double> z) const {
    if (centers_.rows() == 0) return npos;
    long long base[3] = {0, 0, 0};
    for (std::size_t j = 0; j < grid_dims_; ++j) {
        base[j] = static_cast<long long>(std::floor(z[j] / eps_));
    }
    const double eps2 = eps_ * eps_;
    std::size_t best = npos;
    double best_d2 = eps2;
    std::size_t n_offsets = 1;
    for (std::size_t j = 0; j < grid_dims_; ++j) n_offsets *= 3;
    long long cell[3] = {0, 0, 0};
    for (std::size_t o = 0; o < n_offsets; ++o) {
        std::size_t rem = o;
        for (std::size_t j = 0; j < grid_dims_; ++j) {
            cell[j] = base[j] + static_cast<long long>(rem % 3) - 1;
            rem /= 3;
        }
        const auto it = cells_.find(key(cell));
        if (it == cells_.end()) continue;
        for (std::size_t c : it->second) {
            auto row = centers_.row(c);
            double d2 = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) {
                const double d = z[j] - row[j];
                d2 += d * d;
            }
            if (d2 < best_d2 || (d2 == best_d2 && best != npos && c < best)) {
                best_d2 = d2;
                best = c;
            }
        }
    }
    return best;
}

HitResult hitting_time_walk(std::span<const double> start, const CenterIndex& index,
                            const Box& box, const WalkSettings& s, Engine& engine) {
    const Matrix& centers = index.centers();
    if (!(s.eps > 0.0)) throw PreconditionError("eps must be positive");
    if (s.eps != index.eps()) throw PreconditionError("centre index was built for a different eps");
    if (!(s.dt > 0.0)) throw PreconditionError("dt must be positive");
    if (!(s.sigma > 0.0)) throw PreconditionError("walk sigma must be positive");
    if (box.dim() != start.size() || (centers.rows() && centers.cols() != start.size())) {
        throw ShapeError("walk start, box and centres disagree in dimension");
    }
    if (!box.contains(start)) throw PreconditionError("walk must start inside the domain box");

    const std::size_t dim = start.size();
    HitResult res;
    res.final_state.assign(start.begin(), start.end());
    std::vector<double> recorded_times;
    std::vector<double> recorded;
    auto record = [&](double t) {
        if (!s.record_path) return;
        recorded_times.push_back(t);
        recorded.insert(recorded.end(), res.final_state.begin(), res.final_state.end());
    };
    auto finish = [&](HitOutcome o, std::size_t step) {
        res.outcome = o;
        res.tau = static_cast<double>(step) * s.dt;
        if (s.record_path) {
            res.path.times = std::move(recorded_times);
            res.path.states = Matrix(res.path.times.size(), dim, std::move(recorded));
        }
        return std::move(res);
    };

    record(0.0);
    if (auto c = index.nearest_within(res.final_state); c != CenterIndex::npos) {
        res.center = c;
        return finish(HitOutcome::HitCenter, 0);
    }

    const auto max_steps = static_cast<std::size_t>(std::floor(s.t_max / s.dt + 1e-9));
    std::normal_distribution<double> normal;
    const double scale = s.sigma * std::sqrt(s.dt);
    auto& z = res.final_state;
    for (std::size_t step = 1; step <= max_steps; ++step) {
        for (std::size_t j = 0; j < dim; ++j) z[j] += scale * normal(engine);
        if (auto c = index.nearest_within(z); c != CenterIndex::npos) {
            res.center = c;
            record(static_cast<double>(step) * s.dt);
            return finish(HitOutcome::HitCenter, step);
        }
        if (!box.contains(z)) {
            for (std::size_t j = 0; j < dim; ++j) z[j] = std::clamp(z[j], box.lo[j], box.hi[j]);
            record(static_cast<double>(step) * s.dt);
            return finish(HitOutcome::HitDomainBoundary, step);
        }
        record(static_cast<double>(step) * s.dt);
    }
    return finish(HitOutcome::Timeout, max_steps);
}

HitResult hitting_time_walk(std::span<const double> start, const Matrix& centers, const Box& box,
                            const WalkSettings& settings, RngStream rng) {
    auto engine = rng.engine();
    const CenterIndex index(centers, settings.eps);
    return hitting_time_walk(start, index, box, settings, engine);
}

}  // namespace ellreg
