#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ellreg/data.hpp"
#include "ellreg/kernels.hpp"
#include "ellreg/nn.hpp"
#include "ellreg/objectives.hpp"
#include "ellreg/optim.hpp"

namespace ellreg {

enum class ObjectiveKind { Erm, Mixup, Elliptic, EllipticIw };

std::string to_string(ObjectiveKind k);
ObjectiveKind parse_objective(const std::string& name);

struct TrainSettings {
    ObjectiveKind objective = ObjectiveKind::Elliptic;
    EllipticConfig elliptic;
    MixupConfig mixup;
    OptimizerKind optimizer = AdamSettings{};
    double learning_rate = 1e-2;
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    ExecPolicy policy = ExecPolicy::Parallel;
};

struct TrainHistory {
    std::vector<double> epoch_objective;  // mean batch objective per epoch
};

/// Mini-batch training. Epoch e shuffles with stream (seed, 1).child(e); batch b of
/// that epoch draws its bridges / mixup from .child(e).child(b + 1). Batches smaller
/// than two samples are skipped for the pairwise objectives.
TrainHistory train(Mlp& model, LossKind kind, const Dataset& data, const TrainSettings& settings);

/// One objective evaluation on a batch, dispatching on settings.objective.
ObjectiveResult evaluate_objective(const Mlp& model, const Matrix& X, const Matrix& Y,
                                   LossKind kind, const TrainSettings& settings, RngStream rng);

/// sqrt(mean over samples and outputs of (f - y)^2).
double rmse(const Mlp& model, const Dataset& data);
double accuracy(const Mlp& model, const Dataset& data);
/// Minimum per-class accuracy over classes present in the data.
double worst_class_accuracy(const Mlp& model, const Dataset& data);

}  // namespace ellreg
