#include "ellreg/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ellreg/checkpoint.hpp"
#include "ellreg/error.hpp"
#include "ellreg/stats.hpp"

namespace ellreg {

namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

fs::path out_dir(const RunConfig& cfg) {
    fs::path dir = cfg.str("out");
    fs::create_directories(dir);
    return dir;
}

fs::path checkpoint_path(const RunConfig& cfg) {
    const std::string& c = cfg.str("checkpoint");
    return c.empty() ? fs::path(cfg.str("out")) / "model.ckpt" : fs::path(c);
}

Mlp load_model(const RunConfig& cfg) {
    const fs::path p = checkpoint_path(cfg);
    if (!fs::exists(p)) throw std::runtime_error("checkpoint not found: " + p.string());
    return load_checkpoint(p);
}

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "leaky_relu") return Activation::LeakyReLU;
    throw UsageError("config key 'model.activation': unknown activation '" + s + "'");
}

ObjectiveVariant parse_variant(const std::string& s) {
    if (s == "path_average") return ObjectiveVariant::PathAverage;
    if (s == "source_term") return ObjectiveVariant::SourceTerm;
    throw UsageError("config key 'elliptic.variant': unknown variant '" + s + "'");
}

EndpointMode parse_endpoint(const std::string& s) {
    if (s == "inverse_distance") return EndpointMode::InverseDistance;
    if (s == "uniform") return EndpointMode::Uniform;
    if (s == "self_pair") return EndpointMode::SelfPair;
    throw UsageError("config key 'elliptic.endpoint': unknown endpoint mode '" + s + "'");
}

Matrix read_query_file(const fs::path& path, std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open query file " + path.string());
    std::vector<double> values;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t cols = 0;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": not a number");
            }
            values.push_back(v);
            ++cols;
        }
        if (cols != dim) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " columns");
        }
        ++rows;
    }
    return Matrix(rows, dim, std::move(values));
}

std::map<std::string, double> test_metrics(const Mlp& model, const Dataset& test) {
    std::map<std::string, double> m;
    if (test.task == TaskKind::Classification) {
        m["test.accuracy"] = accuracy(model, test);
        m["test.worst_class_accuracy"] = worst_class_accuracy(model, test);
    } else {
        m["test.rmse"] = rmse(model, test);
    }
    return m;
}

void write_report(std::ostream& out, const std::string& record, const MaxPrincipleReport& r) {
    out << "record=" << record << " min_boundary=" << format_real(r.min_boundary)
        << " max_boundary=" << format_real(r.max_boundary)
        << " min_interior=" << format_real(r.min_interior)
        << " max_interior=" << format_real(r.max_interior) << " slack=" << format_real(r.slack)
        << " satisfied=" << (r.satisfied ? "true" : "false") << '\n';
}

struct TrainOutcome {
    Mlp model;
    TrainHistory history;
    std::map<std::string, double> metrics;
};

TrainOutcome train_once(const RunConfig& cfg, const ExperimentData& data) {
    Mlp model = make_model(cfg, data.train);
    const LossKind kind = resolve_loss(cfg, data.train);
    const TrainSettings settings = make_train_settings(cfg, data.train);
    TrainHistory history = train(model, kind, data.train, settings);
    auto metrics = test_metrics(model, data.test);
    return {std::move(model), std::move(history), std::move(metrics)};
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentData load_experiment_data(const RunConfig& cfg, std::size_t train_size) {
    const std::uint64_t seed = cfg.u64("seed");
    const std::string& name = cfg.str("dataset");
    const std::size_t n = train_size ? train_size : cfg.count("data.n");
    if (name == "two_moons") {
        return {two_moons(n, cfg.real("data.noise"), {seed, 10}),
                two_moons(cfg.count("data.test_n"), cfg.real("data.test_noise"), {seed, 11})};
    }
    if (name == "sine") {
        return {synthetic_sine(n, cfg.real("data.noise"), {seed, 10}),
                synthetic_sine(cfg.count("data.test_n"), cfg.real("data.test_noise"), {seed, 11})};
    }
    if (name == "csv") {
        if (cfg.str("csv.path").empty()) throw UsageError("config key 'csv.path' is required for dataset=csv");
        CsvOptions opts;
        opts.target_columns = cfg.list("csv.targets");
        if (opts.target_columns.empty()) throw UsageError("config key 'csv.targets' is required for dataset=csv");
        opts.normalize = cfg.flag("csv.normalize");
        opts.mean_pad = cfg.flag("csv.mean_pad");
        const Dataset all = load_csv(cfg.str("csv.path"), opts);
        const auto fractions = cfg.reals("data.split");
        if (fractions.size() < 2) throw UsageError("config key 'data.split' needs at least two fractions");
        auto parts = split(all, fractions, {seed, 12});
        return {std::move(parts.front()), std::move(parts.back())};
    }
    throw UsageError("config key 'dataset': unknown dataset '" + name + "'");
}

LossKind resolve_loss(const RunConfig& cfg, const Dataset& data) {
    const std::string& s = cfg.str("loss");
    if (s == "mse") return LossKind::MeanSquaredError;
    if (s == "ce") {
        if (data.task != TaskKind::Classification) {
            throw UsageError("config key 'loss': ce requires a classification dataset");
        }
        return LossKind::CrossEntropy;
    }
    if (s == "auto") {
        return data.task == TaskKind::Classification ? LossKind::CrossEntropy : LossKind::MeanSquaredError;
    }
    throw UsageError("config key 'loss': unknown loss '" + s + "'");
}

Mlp make_model(const RunConfig& cfg, const Dataset& data) {
    std::vector<std::size_t> sizes{data.feature_dim()};
    for (const auto& h : cfg.list("model.hidden")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(h.c_str(), &end, 10);
        if (*end != '\0' || v == 0) {
            throw UsageError("config key 'model.hidden': '" + h + "' is not a positive width");
        }
        sizes.push_back(static_cast<std::size_t>(v));
    }
    sizes.push_back(data.target_dim());
    const LossKind kind = resolve_loss(cfg, data);
    const OutputHead head = kind == LossKind::CrossEntropy ? OutputHead::Softmax : OutputHead::Linear;
    return Mlp::initialized(sizes, parse_activation(cfg.str("model.activation")), head,
                            {cfg.u64("seed"), 20}, cfg.real("model.slope"));
}

TrainSettings make_train_settings(const RunConfig& cfg, const Dataset& data) {
    TrainSettings s;
    s.objective = parse_objective(cfg.str("objective"));
    s.elliptic.n_bridges = cfg.count("elliptic.n_b");
    s.elliptic.n_time = cfg.count("elliptic.n_t");
    s.elliptic.sigma_b = cfg.real("elliptic.sigma_b");
    s.elliptic.xi = cfg.real("elliptic.xi");
    s.elliptic.variant = parse_variant(cfg.str("elliptic.variant"));
    s.elliptic.endpoint_mode = parse_endpoint(cfg.str("elliptic.endpoint"));
    s.elliptic.t_end = cfg.real("elliptic.t_end");
    if (cfg.str("elliptic.simplex_project") == "auto") {
        s.elliptic.simplex_project = resolve_loss(cfg, data) == LossKind::CrossEntropy;
    } else {
        s.elliptic.simplex_project = cfg.flag("elliptic.simplex_project");
    }
    s.elliptic.validate();
    s.mixup.alpha = cfg.real("mixup.alpha");
    const std::string& opt = cfg.str("optim");
    if (opt == "adam") {
        s.optimizer = AdamSettings{cfg.real("adam.beta1"), cfg.real("adam.beta2"),
                                   cfg.real("adam.epsilon")};
    } else if (opt == "sgd") {
        s.optimizer = SgdSettings{cfg.real("momentum"), cfg.real("weight_decay")};
    } else {
        throw UsageError("config key 'optim': unknown optimizer '" + opt + "'");
    }
    s.learning_rate = cfg.real("lr");
    s.epochs = cfg.count("epochs");
    s.batch_size = cfg.count("batch_size");
    if (s.batch_size == 0) throw UsageError("config key 'batch_size' must be positive");
    s.seed = cfg.u64("seed");
    s.policy = ExecPolicy::Parallel;
    return s;
}

FkSettings make_fk_settings(const RunConfig& cfg) {
    FkSettings s;
    s.eps = cfg.real("fk.eps");
    s.sigma = cfg.real("fk.sigma");
    s.n_paths = cfg.count("fk.n_paths");
    s.dt = cfg.real("fk.dt");
    s.t_max = cfg.real("fk.t_max");
    s.box_margin = cfg.real("fk.margin");
    const std::string& bv = cfg.str("fk.boundary_value");
    if (bv == "center_loss") {
        s.boundary_value = BoundaryValue::CenterLoss;
    } else if (bv == "exit_point_loss") {
        s.boundary_value = BoundaryValue::ExitPointLoss;
    } else {
        throw UsageError("config key 'fk.boundary_value': unknown value '" + bv + "'");
    }
    return s;
}

void MetricsRecord::write(std::ostream& out) const {
    out << config_echo << '\n';
    out << "record=run seed=" << seed << " objective=" << objective
        << " epochs=" << epoch_objective.size() << '\n';
    for (std::size_t e = 0; e < epoch_objective.size(); ++e) {
        out << "record=epoch index=" << e << " objective=" << format_real(epoch_objective[e]) << '\n';
    }
    out << "record=final";
    for (const auto& [k, v] : final_metrics) out << ' ' << k << '=' << format_real(v);
    out << '\n';
}

// ---------------------------------------------------------------------------

MetricsRecord cmd_train(const RunConfig& cfg) {
    const fs::path dir = out_dir(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentData data = load_experiment_data(cfg);
    TrainOutcome run = train_once(cfg, data);
    const auto t1 = std::chrono::steady_clock::now();

    MetricsRecord rec;
    rec.config_echo = cfg.echo();
    rec.seed = cfg.u64("seed");
    rec.objective = cfg.str("objective");
    rec.epoch_objective = std::move(run.history.epoch_objective);
    rec.final_metrics = std::move(run.metrics);
    rec.wall_clock_seconds = std::chrono::duration<double>(t1 - t0).count();

    {
        auto out = open_output(dir / "metrics.txt");
        rec.write(out);
    }
    save_checkpoint(dir / "model.ckpt", run.model);
    {
        auto out = open_output(dir / "timing.txt");
        out << "record=timing wall_clock_seconds=" << format_real(rec.wall_clock_seconds) << '\n';
    }
    return rec;
}

std::map<std::string, double> cmd_eval(const RunConfig& cfg) {
    const fs::path dir = out_dir(cfg);
    const Mlp model = load_model(cfg);
    const ExperimentData data = load_experiment_data(cfg);
    if (model.input_dim() != data.test.feature_dim() || model.output_dim() != data.test.target_dim()) {
        throw ShapeError("checkpoint does not match the dataset dimensions");
    }
    const LossKind kind = resolve_loss(cfg, data.test);
    auto metrics = test_metrics(model, data.test);
    const auto losses = per_sample_losses(kind, model, data.test.features, data.test.targets);
    metrics["test.mean_loss"] = mean(losses);
    metrics["test.max_loss"] = *std::max_element(losses.begin(), losses.end());
    auto out = open_output(dir / "eval.txt");
    out << cfg.echo() << '\n' << "record=eval";
    for (const auto& [k, v] : metrics) out << ' ' << k << '=' << format_real(v);
    out << '\n';
    return metrics;
}

fs::path cmd_fk_verify(const RunConfig& cfg) {
    const fs::path dir = out_dir(cfg);
    const Mlp model = load_model(cfg);
    const ExperimentData data = load_experiment_data(cfg);
    const Dataset& train = data.train;
    if (model.input_dim() != train.feature_dim() || model.output_dim() != train.target_dim()) {
        throw ShapeError("checkpoint does not match the dataset dimensions");
    }
    const LossKind kind = resolve_loss(cfg, train);
    const FkSettings fk = make_fk_settings(cfg);
    const Box box = landscape_box(train, fk.box_margin);
    const std::size_t m = train.feature_dim() + train.target_dim();

    Matrix candidates = cfg.str("fk.queries").empty() ? data.test.joint()
                                                     : read_query_file(cfg.str("fk.queries"), m);
    const std::size_t cap = cfg.count("fk.max_queries");
    std::vector<std::size_t> kept;
    std::size_t skipped = 0;
    for (std::size_t q = 0; q < candidates.rows() && (cap == 0 || kept.size() < cap); ++q) {
        if (box.contains(candidates.row(q))) {
            kept.push_back(q);
        } else {
            ++skipped;
        }
    }
    if (kept.empty()) throw PreconditionError("no query lies inside the domain box");
    const Matrix queries = candidates.select_rows(kept);

    const std::uint64_t seed = cfg.u64("seed");
    const auto est = estimate_landscape(model, kind, train, queries, fk, {seed, 30});
    const auto boundary = per_sample_losses(kind, model, train.features, train.targets);
    const double slack = cfg.real("fk.slack");
    const auto report = max_principle_report(boundary, est, slack);

    Matrix qx(queries.rows(), train.feature_dim()), qy(queries.rows(), train.target_dim());
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        for (std::size_t j = 0; j < qx.cols(); ++j) qx(q, j) = queries(q, j);
        for (std::size_t j = 0; j < qy.cols(); ++j) qy(q, j) = queries(q, qx.cols() + j);
    }
    if (kind == LossKind::CrossEntropy) {
        for (std::size_t q = 0; q < queries.rows(); ++q) {
            const auto p = simplex_project(qy.row(q));
            std::copy(p.begin(), p.end(), qy.row(q).begin());
        }
    }
    const auto raw = per_sample_losses(kind, model, qx, qy);
    const auto raw_report = max_principle_report(boundary, std::span<const double>(raw), slack);

    const std::size_t dyn_paths = cfg.count("fk.dynkin_paths");
    const StoppingRule horizon{StoppingRule::Kind::FixedHorizon, 1.0, {}};
    const auto quad = dynkin_residual(
        [](std::span<const double> z) { return dot(z, z); },
        [m](std::span<const double>) { return 2.0 * static_cast<double>(m); }, queries.row(0),
        fk.sigma, horizon, dyn_paths, fk.dt, {seed, 31});
    const StoppingRule exit{StoppingRule::Kind::BoxExit, fk.t_max, box};
    const auto lin = dynkin_residual(
        [](std::span<const double> z) {
            double s = 0.0;
            for (double v : z) s += v;
            return s;
        },
        [](std::span<const double>) { return 0.0; }, queries.row(0), fk.sigma, exit, dyn_paths,
        fk.dt, {seed, 32});

    const fs::path path = dir / "fk_report.txt";
    auto out = open_output(path);
    out << cfg.echo() << '\n';
    out << "record=summary n_queries=" << queries.rows() << " n_skipped=" << skipped
        << " n_boundary=" << boundary.size() << '\n';
    for (std::size_t q = 0; q < est.size(); ++q) {
        out << "record=query index=" << q << " mean=" << format_real(est[q].mean)
            << " std_error=" << format_real(est[q].std_error) << " n_hit=" << est[q].n_hit
            << " n_boundary=" << est[q].n_boundary << " n_timeout=" << est[q].n_timeout
            << " valid=" << (est[q].valid ? "true" : "false") << " raw_loss=" << format_real(raw[q])
            << '\n';
    }
    write_report(out, "max_principle", report);
    write_report(out, "max_principle_raw", raw_report);
    out << "record=dynkin g=quadratic stop=fixed_horizon residual=" << format_real(quad.residual)
        << " std_error=" << format_real(quad.std_error) << '\n';
    out << "record=dynkin g=linear stop=box_exit residual=" << format_real(lin.residual)
        << " std_error=" << format_real(lin.std_error) << '\n';
    return path;
}

fs::path cmd_surface(const RunConfig& cfg) {
    const fs::path dir = out_dir(cfg);
    const Mlp model = load_model(cfg);
    const ExperimentData data = load_experiment_data(cfg);
    const Dataset& train = data.train;
    if (train.feature_dim() != 2) throw UsageError("surface export needs a 2-D feature space");
    if (model.input_dim() != 2 || model.output_dim() != train.target_dim()) {
        throw ShapeError("checkpoint does not match the dataset dimensions");
    }
    const std::size_t g = cfg.count("surface.grid");
    if (g < 2) throw UsageError("config key 'surface.grid' must be at least 2");
    const LossKind kind = resolve_loss(cfg, train);
    const FkSettings fk = make_fk_settings(cfg);
    const Box box = landscape_box(train, fk.box_margin);
    const std::size_t k = train.target_dim();

    Matrix gx(g * g, 2);
    for (std::size_t a = 0; a < g; ++a) {
        for (std::size_t b = 0; b < g; ++b) {
            const std::size_t r = a * g + b;
            const double ta = static_cast<double>(a) / static_cast<double>(g - 1);
            const double tb = static_cast<double>(b) / static_cast<double>(g - 1);
            gx(r, 0) = a + 1 == g ? box.hi[0] : box.lo[0] + ta * (box.hi[0] - box.lo[0]);
            gx(r, 1) = b + 1 == g ? box.hi[1] : box.lo[1] + tb * (box.hi[1] - box.lo[1]);
        }
    }
    const Matrix pred = forward(model, gx);
    Matrix gy(g * g, k);
    for (std::size_t r = 0; r < g * g; ++r) {
        if (train.task == TaskKind::Classification) {
            const auto row = pred.row(r);
            const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
            gy(r, best) = 1.0;
        } else {
            for (std::size_t j = 0; j < k; ++j) gy(r, j) = pred(r, j);
        }
    }
    const auto losses = per_sample_losses(kind, model, gx, gy);
    const Matrix joint = hconcat(gx, gy);

    std::vector<std::size_t> inside;
    for (std::size_t r = 0; r < joint.rows(); ++r) {
        if (box.contains(joint.row(r))) inside.push_back(r);
    }
    std::vector<LandscapeEstimate> est;
    if (!inside.empty()) {
        est = estimate_landscape(model, kind, train, joint.select_rows(inside), fk, {cfg.u64("seed"), 33});
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> fk_mean(joint.rows(), nan), fk_se(joint.rows(), nan);
    for (std::size_t i = 0; i < inside.size(); ++i) {
        if (!est[i].valid) continue;
        fk_mean[inside[i]] = est[i].mean;
        fk_se[inside[i]] = est[i].std_error;
    }

    const fs::path path = dir / "surface.csv";
    auto out = open_output(path);
    out << "x0,x1,loss,fk_mean,fk_stderr\n";
    for (std::size_t r = 0; r < joint.rows(); ++r) {
        out << format_real(gx(r, 0)) << ',' << format_real(gx(r, 1)) << ',' << format_real(losses[r])
            << ',' << format_real(fk_mean[r]) << ',' << format_real(fk_se[r]) << '\n';
    }
    return path;
}

fs::path cmd_bench(const RunConfig& cfg) {
    const fs::path dir = out_dir(cfg);
    const auto objectives = cfg.list("bench.objectives");
    if (objectives.empty()) throw UsageError("config key 'bench.objectives' lists no objective");
    for (const auto& o : objectives) parse_objective(o);
    const std::size_t n_seeds = cfg.count("bench.seeds");
    if (n_seeds == 0) throw UsageError("config key 'bench.seeds' must be positive");
    const std::uint64_t base_seed = cfg.u64("seed");
    const std::size_t n_baseline = cfg.count("data.n_baseline");

    const fs::path path = dir / "bench.txt";
    auto out = open_output(path);
    out << cfg.echo() << '\n';
    for (const auto& objective : objectives) {
        const ObjectiveKind ok = parse_objective(objective);
        const bool baseline = ok == ObjectiveKind::Erm || ok == ObjectiveKind::Mixup;
        std::map<std::string, std::vector<double>> per_metric;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            RunConfig run = cfg;
            run.set("objective", objective);
            run.set("seed", std::to_string(base_seed + s));
            const ExperimentData data =
                load_experiment_data(run, baseline && n_baseline ? n_baseline : 0);
            const TrainOutcome r = train_once(run, data);
            for (const auto& [metric, value] : r.metrics) {
                out << "record=run objective=" << objective << " seed=" << base_seed + s
                    << " metric=" << metric << " value=" << format_real(value) << '\n';
                per_metric[metric].push_back(value);
            }
        }
        for (const auto& [metric, values] : per_metric) {
            const auto ms = mean_std(values);
            out << "record=aggregate objective=" << objective << " metric=" << metric
                << " mean=" << format_real(ms.mean) << " std=" << format_real(ms.std)
                << " n=" << values.size() << '\n';
        }
    }
    return path;
}

// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
    CLI::App app{"Elliptic loss regularization: training, Feynman-Kac verification and benchmarks"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> assignments;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out, "output directory");
    app.add_option("--set", assignments, "override a config key (key=value), repeatable");
    app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");

    auto* train_cmd = app.add_subcommand("train", "train a model and write metrics + checkpoint");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test data");
    auto* fk_cmd = app.add_subcommand("fk-verify", "Feynman-Kac landscape and maximum-principle report");
    auto* surface_cmd = app.add_subcommand("surface", "export a loss-surface grid (2-D features)");
    auto* bench_cmd = app.add_subcommand("bench", "compare objectives over several seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg.merge_file(config_path);
        for (const auto& a : assignments) cfg.set_assignment(a);
        if (seed) cfg.set("seed", std::to_string(*seed));
        if (out) cfg.set("out", *out);
        if (threads) {
            if (*threads < 0) throw UsageError("--threads must be non-negative");
            cfg.set("threads", std::to_string(*threads));
        }
        set_threads(static_cast<int>(cfg.count("threads")));

        if (*train_cmd) {
            cmd_train(cfg);
        } else if (*eval_cmd) {
            cmd_eval(cfg);
        } else if (*fk_cmd) {
            cmd_fk_verify(cfg);
        } else if (*surface_cmd) {
            cmd_surface(cfg);
        } else if (*bench_cmd) {
            cmd_bench(cfg);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const PreconditionError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace ellreg
