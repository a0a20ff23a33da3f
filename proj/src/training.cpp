#include "ellreg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ellreg/error.hpp"
#include "ellreg/stats.hpp"

namespace ellreg {

std::string to_string(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::Erm: return "erm";
        case ObjectiveKind::Mixup: return "mixup";
        case ObjectiveKind::Elliptic: return "elliptic";
        case ObjectiveKind::EllipticIw: return "elliptic_iw";
    }
    return "?";
}

ObjectiveKind parse_objective(const std::string& name) {
    if (name == "erm") return ObjectiveKind::Erm;
    if (name == "mixup") return ObjectiveKind::Mixup;
    if (name == "elliptic") return ObjectiveKind::Elliptic;
    if (name == "elliptic_iw") return ObjectiveKind::EllipticIw;
    throw PreconditionError("unknown objective '" + name + "'");
}

ObjectiveResult evaluate_objective(const Mlp& model, const Matrix& X, const Matrix& Y,
                                   LossKind kind, const TrainSettings& settings, RngStream rng) {
    switch (settings.objective) {
        case ObjectiveKind::Erm:
            return erm_objective(model, X, Y, kind, settings.policy);
        case ObjectiveKind::Mixup:
            return mixup_objective(model, X, Y, kind, settings.mixup, rng, settings.policy);
        case ObjectiveKind::Elliptic:
        case ObjectiveKind::EllipticIw: {
            const auto sampler =
                EndpointSampler::for_batch(X, settings.elliptic.endpoint_mode, settings.policy);
            if (settings.objective == ObjectiveKind::Elliptic) {
                return bridge_objective(model, X, Y, kind, settings.elliptic, sampler, rng,
                                        settings.policy);
            }
            return importance_weighted_objective(model, X, Y, kind, settings.elliptic, sampler, rng,
                                                 settings.policy);
        }
    }
    throw PreconditionError("unknown objective");
}

TrainHistory train(Mlp& model, LossKind kind, const Dataset& data, const TrainSettings& settings) {
    if (settings.batch_size < 1) throw PreconditionError("batch_size must be at least 1");
    if (data.size() == 0) throw PreconditionError("empty training set");
    if (settings.objective != ObjectiveKind::Erm) settings.elliptic.validate();
    const bool pairwise = settings.objective != ObjectiveKind::Erm;

    OptimState optim(settings.optimizer, model);
    const RngStream root{settings.seed, 1};
    TrainHistory history;
    std::vector<std::size_t> order(data.size());

    for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
        const RngStream epoch_rng = root.child(epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        {
            auto engine = epoch_rng.engine();
            std::shuffle(order.begin(), order.end(), engine);
        }
        std::vector<double> batch_values;
        for (std::size_t b = 0, begin = 0; begin < order.size(); ++b, begin += settings.batch_size) {
            const std::size_t end = std::min(order.size(), begin + settings.batch_size);
            if (pairwise && end - begin < 2) continue;
            const std::span<const std::size_t> idx(order.data() + begin, end - begin);
            const Matrix X = data.features.select_rows(idx);
            const Matrix Y = data.targets.select_rows(idx);
            auto res = evaluate_objective(model, X, Y, kind, settings, epoch_rng.child(b + 1));
            optim.step(model, res.grads, settings.learning_rate);
            batch_values.push_back(res.value);
        }
        history.epoch_objective.push_back(mean(batch_values));
    }
    return history;
}

double rmse(const Mlp& model, const Dataset& data) {
    const Matrix pred = forward(model, data.features);
    std::vector<double> sq(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred.values()[i] - data.targets.values()[i];
        sq[i] = r * r;
    }
    return std::sqrt(mean(sq));
}

namespace {

std::vector<std::size_t> predicted_labels(const Mlp& model, const Dataset& data) {
    const Matrix pred = forward(model, data.features);
    std::vector<std::size_t> out(pred.rows());
    for (std::size_t i = 0; i < pred.rows(); ++i) {
        auto r = pred.row(i);
        out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

}  // namespace

double accuracy(const Mlp& model, const Dataset& data) {
    const auto pred = predicted_labels(model, data);
    const auto truth = data.labels();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double worst_class_accuracy(const Mlp& model, const Dataset& data) {
    const auto pred = predicted_labels(model, data);
    const auto truth = data.labels();
    const std::size_t k = data.target_dim();
    std::vector<std::size_t> total(k, 0), correct(k, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ++total[truth[i]];
        correct[truth[i]] += pred[i] == truth[i];
    }
    double worst = 1.0;
    for (std::size_t c = 0; c < k; ++c) {
        if (total[c]) {
            worst = std::min(worst, static_cast<double>(correct[c]) / static_cast<double>(total[c]));
        }
    }
    return worst;
}

}  // namespace ellreg
