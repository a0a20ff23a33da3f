#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ellreg/error.hpp"
#include "ellreg/kernels.hpp"
#include "ellreg/objectives.hpp"
#include "ellreg/stats.hpp"
#include "test_support.hpp"

namespace ellreg {
namespace {

Mlp scalar_linear(double w) {
    Mlp m({1, 1}, Activation::ReLU, OutputHead::Linear);
    m.weight(0)(0, 0) = w;
    return m;
}

EllipticConfig deterministic_cfg(std::size_t n_t) {
    EllipticConfig c;
    c.n_bridges = 1;
    c.n_time = n_t;
    c.sigma_b = 0.0;
    return c;
}

TEST(PairwiseDistances, IdenticalRowsAreZero) {
    const Matrix d = pairwise_distances(Matrix{{1.0, 2.0}, {1.0, 2.0}});
    EXPECT_EQ(d(0, 1), 0.0);
    EXPECT_EQ(d(1, 0), 0.0);
}

TEST(PairwiseDistances, OneDimensional) {
    const Matrix d = pairwise_distances(Matrix{{0.0}, {3.0}});
    EXPECT_EQ(d(0, 1), 3.0);
    EXPECT_EQ(d(0, 0), 0.0);
}

TEST(PairwiseDistances, MatchesBruteForce) {
    auto e = RngStream{1, 0}.engine();
    const Matrix x = testing::random_matrix(50, 4, e);
    const Matrix d = pairwise_distances(x);
    for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t j = 0; j < 50; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < 4; ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
            EXPECT_NEAR(d(i, j), std::sqrt(s), 1e-12);
            EXPECT_EQ(d(i, j), d(j, i));
        }
    }
}

TEST(EndpointSampler, BatchOfTwoPicksTheOther) {
    const auto s = EndpointSampler::inverse_distance(Matrix{{0.0, 2.0}, {2.0, 0.0}});
    auto e = RngStream{2, 0}.engine();
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(s.sample(0, e), 1u);
        EXPECT_EQ(s.sample(1, e), 0u);
    }
    EXPECT_EQ(s.probability(0, 1), 1.0);
    EXPECT_EQ(s.probability(0, 0), 0.0);
}

TEST(EndpointSampler, InverseDistanceLaw) {
    const Matrix d{{0.0, 1.0, 2.0}, {1.0, 0.0, 1.0}, {2.0, 1.0, 0.0}};
    const auto s = EndpointSampler::inverse_distance(d);
    EXPECT_NEAR(s.probability(0, 1), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(s.probability(0, 2), 1.0 / 3.0, 1e-15);
    auto e = RngStream{3, 0}.engine();
    const std::size_t n = 100000;
    std::size_t c1 = 0, c2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = s.sample(0, e);
        ASSERT_NE(j, 0u);
        (j == 1 ? c1 : c2) += 1;
    }
    EXPECT_NEAR(static_cast<double>(c1) / static_cast<double>(c2), 2.0, 0.02);
}

TEST(EndpointSampler, UniformLawOverOthers) {
    const auto s = EndpointSampler::uniform(4);
    auto e = RngStream{4, 0}.engine();
    const std::size_t n = 100000;
    std::vector<double> f(4, 0.0);
    for (std::size_t i = 0; i < n; ++i) f[s.sample(2, e)] += 1.0;
    EXPECT_EQ(f[2], 0.0);
    for (std::size_t j : {0u, 1u, 3u}) EXPECT_NEAR(f[j] / n, 1.0 / 3.0, 0.01);
}

TEST(EndpointSampler, ZeroDistanceUsesFloor) {
    const Matrix d{{0.0, 0.0, 1.0}, {0.0, 0.0, 1.0}, {1.0, 1.0, 0.0}};
    const auto s = EndpointSampler::inverse_distance(d);
    EXPECT_GT(s.probability(0, 1), 1.0 - 1e-11);
    EXPECT_TRUE(std::isfinite(s.probability(0, 2)));
}

TEST(EndpointSampler, RejectsTinyBatch) {
    EXPECT_THROW(EndpointSampler::inverse_distance(Matrix{{0.0}}), PreconditionError);
    EXPECT_THROW(EndpointSampler::uniform(1), PreconditionError);
}

TEST(SimplexProject, Examples) {
    const std::vector<double> onehot{0.0, 1.0, 0.0};
    EXPECT_EQ(simplex_project(onehot), onehot);
    const std::vector<double> v{-0.2, 0.8};
    const auto p = simplex_project(v);
    EXPECT_NEAR(p[0], 0.2, 1e-15);
    EXPECT_NEAR(p[1], 0.8, 1e-15);
    const std::vector<double> z(4, 0.0);
    EXPECT_EQ(simplex_project(z), std::vector<double>(4, 0.25));
}

TEST(SimplexProject, AlwaysProbabilityVector) {
    auto e = RngStream{5, 0}.engine();
    for (int i = 0; i < 200; ++i) {
        const Matrix y = testing::random_matrix(1, 5, e, -3.0, 3.0);
        const auto p = simplex_project(y.row(0));
        double s = 0.0;
        for (double v : p) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(BridgeObjective, SelfPairedPerfectFitIsZero) {
    const Mlp m = scalar_linear(2.0);
    const Matrix x{{0.5}, {1.0}, {-1.0}};
    const Matrix y{{1.0}, {2.0}, {-2.0}};
    auto cfg = deterministic_cfg(4);
    const auto r = bridge_objective(m, x, y, LossKind::MeanSquaredError, cfg,
                                    EndpointSampler::self_pair(3), {6, 0});
    EXPECT_EQ(r.value, 0.0);
}

TEST(BridgeObjective, ZeroSigmaSegmentValues) {
    const Mlp m = scalar_linear(1.0);
    const Matrix x{{0.0}, {1.0}};
    const auto sampler = EndpointSampler::inverse_distance(pairwise_distances(x));
    const auto on_line = bridge_objective(m, x, Matrix{{0.0}, {1.0}}, LossKind::MeanSquaredError,
                                          deterministic_cfg(3), sampler, {7, 0});
    EXPECT_EQ(on_line.value, 0.0);
    const auto off_line = bridge_objective(m, x, Matrix{{0.0}, {0.0}}, LossKind::MeanSquaredError,
                                           deterministic_cfg(3), sampler, {7, 0});
    EXPECT_NEAR(off_line.value, 5.0 / 12.0, 1e-15);
}

TEST(BridgeObjective, SourceTermAddsStartLoss) {
    const Mlp m = scalar_linear(1.0);
    const Matrix x{{0.0}, {1.0}};
    auto cfg = deterministic_cfg(3);
    cfg.variant = ObjectiveVariant::SourceTerm;
    const auto r = bridge_objective(m, x, Matrix{{0.0}, {0.0}}, LossKind::MeanSquaredError, cfg,
                                    EndpointSampler::inverse_distance(pairwise_distances(x)), {7, 1});
    EXPECT_NEAR(r.value, 5.0 / 12.0 + 0.5, 1e-15);
}

TEST(BridgeObjective, ZeroSigmaPointsLieOnSegment) {
    auto e = RngStream{8, 0}.engine();
    const Matrix x = testing::random_matrix(6, 2, e);
    const Matrix y = testing::random_matrix(6, 1, e);
    auto cfg = deterministic_cfg(5);
    cfg.n_bridges = 3;
    const auto bb = sample_bridge_batch(x, y, cfg, EndpointSampler::inverse_distance(pairwise_distances(x)),
                                        {8, 1});
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t b = 0; b < 3; ++b) {
            const std::size_t j = bb.partners[i * 3 + b];
            EXPECT_NE(i, j);
            for (std::size_t t = 0; t < 5; ++t) {
                const std::size_t r = (i * 3 + b) * 5 + t;
                const double s = t / 4.0;
                for (std::size_t c = 0; c < 2; ++c) {
                    EXPECT_NEAR(bb.inputs(r, c), x(i, c) + s * (x(j, c) - x(i, c)), 1e-15);
                }
                EXPECT_NEAR(bb.targets(r, 0), y(i, 0) + s * (y(j, 0) - y(i, 0)), 1e-15);
            }
            EXPECT_EQ(bb.inputs((i * 3 + b) * 5, 0), x(i, 0));
            EXPECT_EQ(bb.inputs((i * 3 + b) * 5 + 4, 1), x(j, 1));
        }
    }
}

TEST(BridgeObjective, SimplexProjectionAppliedToBridgedLabels) {
    auto e = RngStream{9, 0}.engine();
    const Matrix x = testing::random_matrix(5, 2, e);
    Matrix y(5, 3);
    for (std::size_t i = 0; i < 5; ++i) y(i, i % 3) = 1.0;
    EllipticConfig cfg;
    cfg.sigma_b = 0.5;
    cfg.simplex_project = true;
    const auto bb = sample_bridge_batch(x, y, cfg, EndpointSampler::uniform(5), {9, 1});
    for (std::size_t r = 0; r < bb.targets.rows(); ++r) {
        double s = 0.0;
        for (double v : bb.targets.row(r)) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

/// E l(s) for f(X) = X, MSE, on the bridge between (0, 0) and (1, 0) with diffusion sigma.
double expected_point_loss(double s, double sigma) { return s * s + 2.0 * sigma * sigma * s * (1.0 - s); }

TEST(BridgeObjective, NoisyBridgeMatchesGridExpectation) {
    const Mlp m = scalar_linear(1.0);
    const Matrix x{{0.0}, {1.0}}, y{{0.0}, {0.0}};
    const auto sampler = EndpointSampler::inverse_distance(pairwise_distances(x));
    const double sigma = 0.3;
    auto cfg = deterministic_cfg(5);
    cfg.sigma_b = sigma;
    const std::size_t n = 10000;
    std::vector<double> v(n);
    for (std::size_t s = 0; s < n; ++s) {
        v[s] = bridge_objective(m, x, y, LossKind::MeanSquaredError, cfg, sampler, {10, s}, ExecPolicy::Serial).value;
    }
    double grid = 0.0;
    for (int t = 0; t < 5; ++t) grid += expected_point_loss(t / 4.0, sigma) / 5.0;
    EXPECT_NEAR(mean(v), grid, 3.0 * sample_std(v) / std::sqrt(static_cast<double>(n)));

    cfg.n_time = 1001;
    std::vector<double> fine(200);
    for (std::size_t s = 0; s < fine.size(); ++s) {
        fine[s] = bridge_objective(m, x, y, LossKind::MeanSquaredError, cfg, sampler, {11, s}, ExecPolicy::Serial).value;
    }
    const double integral = 1.0 / 3.0 + 2.0 * sigma * sigma / 6.0;
    EXPECT_NEAR(mean(fine), integral, 3.0 * sample_std(fine) / std::sqrt(200.0) + 1e-3);
}

TEST(ImportanceWeighted, ZeroXiIsBitIdentical) {
    const auto m = Mlp::initialized({2, 8, 1}, Activation::ReLU, OutputHead::Linear, {12, 0});
    auto e = RngStream{12, 1}.engine();
    const Matrix x = testing::random_matrix(10, 2, e), y = testing::random_matrix(10, 1, e);
    EllipticConfig cfg;
    cfg.xi = 0.0;
    const auto sampler = EndpointSampler::inverse_distance(pairwise_distances(x));
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto a = bridge_objective(m, x, y, LossKind::MeanSquaredError, cfg, sampler, {13, s});
        const auto b = importance_weighted_objective(m, x, y, LossKind::MeanSquaredError, cfg, sampler, {13, s});
        EXPECT_EQ(a.value, b.value);
        EXPECT_EQ(a.grads, b.grads);
    }
}

TEST(ImportanceWeighted, PerfectFitContributesZero) {
    const Mlp m = scalar_linear(2.0);
    const std::vector<double> w{1.0};
    const auto r = weighted_loss_gradient(LossKind::MeanSquaredError, m, Matrix{{1.0}}, Matrix{{2.0}}, w, 5.0);
    EXPECT_EQ(r.value, 0.0);
}

TEST(ImportanceWeighted, HandChainRuleContribution) {
    const Mlp m = scalar_linear(2.0);
    const std::vector<double> w{1.0};
    const double xi = 0.7;
    const auto r = weighted_loss_gradient(LossKind::MeanSquaredError, m, Matrix{{1.0}}, Matrix{{1.0}}, w, xi);
    EXPECT_NEAR(r.value, 1.0 + xi * std::sqrt(20.0), 1e-14);
    const Parameters plain = backward_params(LossKind::MeanSquaredError, m, Matrix{{1.0}}, Matrix{{1.0}});
    EXPECT_NEAR(r.grads.weights[0](0, 0), (1.0 + xi * std::sqrt(20.0)) * plain.weights[0](0, 0), 1e-13);
    EXPECT_NEAR(r.grads.biases[0][0], (1.0 + xi * std::sqrt(20.0)) * plain.biases[0][0], 1e-13);
}

TEST(Erm, MeanOfLosses) {
    const Mlp m = scalar_linear(1.0);
    const auto r = erm_objective(m, Matrix{{1.0}, {0.0}}, Matrix{{0.0}, {std::sqrt(3.0)}}, LossKind::MeanSquaredError);
    EXPECT_NEAR(r.value, 2.0, 1e-15);
    const auto fit = erm_objective(m, Matrix{{1.0}}, Matrix{{1.0}}, LossKind::MeanSquaredError);
    EXPECT_EQ(fit.value, 0.0);
}

TEST(Erm, DegenerateBridgeReducesToErm) {
    const auto m = Mlp::initialized({2, 6, 3}, Activation::ReLU, OutputHead::Softmax, {14, 0});
    auto e = RngStream{14, 1}.engine();
    const Matrix x = testing::random_matrix(9, 2, e), y = testing::random_simplex_rows(9, 3, e);
    auto cfg = deterministic_cfg(2);
    cfg.n_bridges = 4;
    for (auto kind : {LossKind::MeanSquaredError, LossKind::CrossEntropy}) {
        const auto a = bridge_objective(m, x, y, kind, cfg, EndpointSampler::self_pair(9), {15, 0});
        const auto b = erm_objective(m, x, y, kind);
        EXPECT_NEAR(a.value, b.value, 1e-12);
        const auto ga = a.grads.blocks(), gb = b.grads.blocks();
        for (std::size_t k = 0; k < ga.size(); ++k) {
            for (std::size_t i = 0; i < ga[k].size(); ++i) EXPECT_NEAR(ga[k][i], gb[k][i], 1e-12);
        }
    }
}

TEST(BridgeObjective, BatchOfOneIsRejected) {
    const Mlp m = scalar_linear(1.0);
    EXPECT_THROW(bridge_objective(m, Matrix{{1.0}}, Matrix{{1.0}}, LossKind::MeanSquaredError, EllipticConfig{},
                                  EndpointSampler::self_pair(1), {16, 0}),
                 PreconditionError);
}

TEST(Mixup, LambdaOneIsErm) {
    const auto m = Mlp::initialized({2, 5, 1}, Activation::ReLU, OutputHead::Linear, {17, 0});
    auto e = RngStream{17, 1}.engine();
    const Matrix x = testing::random_matrix(6, 2, e), y = testing::random_matrix(6, 1, e);
    const std::vector<std::size_t> partners{5, 4, 3, 2, 1, 0};
    const auto a = mixup_objective_with(m, x, y, LossKind::MeanSquaredError, 1.0, partners);
    const auto b = erm_objective(m, x, y, LossKind::MeanSquaredError);
    EXPECT_EQ(a.value, b.value);
}

TEST(Mixup, HalfMixOfTwoScalars) {
    const Mlp m = scalar_linear(2.0);
    const std::vector<std::size_t> partners{1, 0};
    const auto r = mixup_objective_with(m, Matrix{{1.0}, {3.0}}, Matrix{{1.0}, {2.0}}, LossKind::MeanSquaredError,
                                        0.5, partners);
    EXPECT_NEAR(r.value, 6.25, 1e-14);
}

TEST(Mixup, UniformLambdaForUnitAlpha) {
    auto e = RngStream{18, 0}.engine();
    const std::size_t n = 100000;
    std::vector<double> l(n);
    for (double& v : l) v = sample_mixup_lambda(1.0, e);
    std::sort(l.begin(), l.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d = std::max({d, std::abs(static_cast<double>(i + 1) / n - l[i]), std::abs(l[i] - static_cast<double>(i) / n)});
    }
    EXPECT_LT(d, 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST(Mixup, ShuffledPartnersAreDeterministic) {
    const auto m = Mlp::initialized({2, 5, 1}, Activation::ReLU, OutputHead::Linear, {19, 0});
    auto e = RngStream{19, 1}.engine();
    const Matrix x = testing::random_matrix(8, 2, e), y = testing::random_matrix(8, 1, e);
    const auto a = mixup_objective(m, x, y, LossKind::MeanSquaredError, {0.4}, {20, 0});
    const auto b = mixup_objective(m, x, y, LossKind::MeanSquaredError, {0.4}, {20, 0});
    EXPECT_EQ(a.value, b.value);
    EXPECT_THROW(mixup_objective(m, Matrix{{1.0, 1.0}}, Matrix{{1.0}}, LossKind::MeanSquaredError, {}, {20, 1}),
                 PreconditionError);
}

TEST(EllipticConfig, Validation) {
    EllipticConfig c;
    c.n_time = 1;
    EXPECT_THROW(c.validate(), PreconditionError);
    c = {};
    c.n_bridges = 0;
    EXPECT_THROW(c.validate(), PreconditionError);
    c = {};
    c.sigma_b = -1.0;
    EXPECT_THROW(c.validate(), PreconditionError);
}

}  // namespace
}  // namespace ellreg
