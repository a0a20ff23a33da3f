#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ellreg/data.hpp"
#include "ellreg/fk.hpp"
#include "ellreg/nn.hpp"
#include "ellreg/run_config.hpp"
#include "ellreg/training.hpp"

namespace ellreg {

struct ExperimentData {
    Dataset train;
    Dataset test;
};

/// Training/test data the config describes. `train_size` overrides data.n for
/// generated datasets when non-zero.
ExperimentData load_experiment_data(const RunConfig& cfg, std::size_t train_size = 0);
LossKind resolve_loss(const RunConfig& cfg, const Dataset& data);
Mlp make_model(const RunConfig& cfg, const Dataset& data);
TrainSettings make_train_settings(const RunConfig& cfg, const Dataset& data);
FkSettings make_fk_settings(const RunConfig& cfg);

struct MetricsRecord {
    std::string config_echo;
    std::uint64_t seed = 0;
    std::string objective;
    std::vector<double> epoch_objective;
    std::map<std::string, double> final_metrics;  // e.g. test.rmse, test.accuracy
    double wall_clock_seconds = 0.0;              // written to timing.txt only

    void write(std::ostream& out) const;
};

/// Trains per `cfg`; writes <out>/metrics.txt, <out>/model.ckpt and <out>/timing.txt.
MetricsRecord cmd_train(const RunConfig& cfg);
/// Evaluates a checkpoint on the test data; writes <out>/eval.txt.
std::map<std::string, double> cmd_eval(const RunConfig& cfg);
/// Landscape estimates, max-principle report and Dynkin residuals; writes
/// <out>/fk_report.txt and returns its path.
std::filesystem::path cmd_fk_verify(const RunConfig& cfg);
/// G x G grid of (x0, x1, loss, fk_mean, fk_stderr); writes <out>/surface.csv.
std::filesystem::path cmd_surface(const RunConfig& cfg);
/// Every objective in bench.objectives over bench.seeds seeds; writes <out>/bench.txt.
std::filesystem::path cmd_bench(const RunConfig& cfg);

/// Full command-line entry point. Returns 0, 1 (usage error) or 2 (runtime failure).
int run_cli(int argc, char** argv);

}  // namespace ellreg
