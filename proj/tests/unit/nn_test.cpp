#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ellreg/checkpoint.hpp"
#include "ellreg/error.hpp"
#include "ellreg/nn.hpp"
#include "ellreg/optim.hpp"
#include "test_support.hpp"

namespace ellreg {
namespace {

using testing::random_matrix;
using testing::random_simplex_rows;
using testing::rel_err;
using testing::scalar_forward;

Mlp identity_layer_net() {
    Mlp m({2, 2, 2}, Activation::ReLU, OutputHead::Linear);
    m.weight(0) = Matrix{{1.0, 0.0}, {0.0, 1.0}};
    m.weight(1) = Matrix{{1.0, 0.0}, {0.0, 1.0}};
    return m;
}

Mlp scalar_linear(double w) {
    Mlp m({1, 1}, Activation::ReLU, OutputHead::Linear);
    m.weight(0)(0, 0) = w;
    return m;
}

TEST(Forward, ZeroNetworkGivesZero) {
    const Mlp m({3, 5, 2}, Activation::ReLU, OutputHead::Linear);
    auto e = RngStream{1, 0}.engine();
    const Matrix out = forward(m, random_matrix(4, 3, e));
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ReluOfIdentity) {
    const Matrix out = forward(identity_layer_net(), Matrix{{1.0, -1.0}});
    EXPECT_EQ(out, (Matrix{{1.0, 0.0}}));
}

TEST(Forward, MatchesScalarLoopOracle) {
    const auto m = Mlp::initialized({2, 16, 1}, Activation::ReLU, OutputHead::Linear, {2, 0});
    auto e = RngStream{2, 1}.engine();
    const Matrix x = random_matrix(10, 2, e, -2.0, 2.0);
    const Matrix out = forward(m, x);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_NEAR(out(i, 0), scalar_forward(m, x.row(i))[0], 1e-14);
    }
}

TEST(Forward, LeakyAndSoftmaxMatchOracle) {
    const auto m = Mlp::initialized({3, 8, 8, 4}, Activation::LeakyReLU, OutputHead::Softmax, {3, 0});
    auto e = RngStream{3, 1}.engine();
    const Matrix x = random_matrix(10, 3, e, -2.0, 2.0);
    const Matrix out = forward(m, x);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto ref = scalar_forward(m, x.row(i));
        double s = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_NEAR(out(i, j), ref[j], 1e-14);
            s += out(i, j);
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Forward, IsPure) {
    const auto m = Mlp::initialized({2, 6, 2}, Activation::ReLU, OutputHead::Softmax, {4, 0});
    auto e = RngStream{4, 1}.engine();
    const Matrix x = random_matrix(7, 2, e);
    EXPECT_EQ(forward(m, x), forward(m, x));
}

TEST(Forward, ShapeMismatchThrows) {
    const Mlp m({2, 3, 1});
    EXPECT_THROW(forward(m, Matrix(4, 3)), ShapeError);
}

TEST(Mlp, RejectsBadConstruction) {
    EXPECT_THROW(Mlp({2}), ShapeError);
    EXPECT_THROW(Mlp({2, 0, 1}), ShapeError);
    EXPECT_THROW(Mlp({2, 3, 1}, Activation::LeakyReLU, OutputHead::Linear, 1.5), PreconditionError);
}

TEST(LossWithInputGrad, ExactFitIsZero) {
    const Mlp m = scalar_linear(2.0);
    const auto r = loss_with_input_grad(LossKind::MeanSquaredError, m, Matrix{{1.5}}, Matrix{{3.0}});
    EXPECT_EQ(r.losses[0], 0.0);
    EXPECT_EQ(r.grad_z(0, 0), 0.0);
    EXPECT_EQ(r.grad_z(0, 1), 0.0);
}

TEST(LossWithInputGrad, ScalarLinearHandChainRule) {
    const Mlp m = scalar_linear(2.0);
    const auto r = loss_with_input_grad(LossKind::MeanSquaredError, m, Matrix{{1.0}}, Matrix{{1.0}});
    EXPECT_DOUBLE_EQ(r.losses[0], 1.0);
    EXPECT_DOUBLE_EQ(r.grad_z(0, 0), 4.0);
    EXPECT_DOUBLE_EQ(r.grad_z(0, 1), -2.0);
}

TEST(LossWithInputGrad, CrossEntropyRequiresSimplexTargets) {
    const auto m = Mlp::initialized({2, 4, 2}, Activation::ReLU, OutputHead::Softmax, {5, 0});
    EXPECT_THROW(loss_with_input_grad(LossKind::CrossEntropy, m, Matrix{{0.1, 0.2}}, Matrix{{0.7, 0.7}}),
                 DomainError);
    EXPECT_THROW(loss_with_input_grad(LossKind::CrossEntropy, m, Matrix{{0.1, 0.2}}, Matrix{{-0.5, 1.5}}),
                 DomainError);
    const auto lin = Mlp::initialized({2, 4, 2}, Activation::ReLU, OutputHead::Linear, {5, 0});
    EXPECT_THROW(loss_with_input_grad(LossKind::CrossEntropy, lin, Matrix{{0.1, 0.2}}, Matrix{{0.5, 0.5}}),
                 DomainError);
}

TEST(LossWithInputGrad, CrossEntropyIsNonNegative) {
    const auto m = Mlp::initialized({2, 4, 3}, Activation::ReLU, OutputHead::Softmax, {6, 0});
    auto e = RngStream{6, 1}.engine();
    const auto r = loss_with_input_grad(LossKind::CrossEntropy, m, random_matrix(20, 2, e),
                                        random_simplex_rows(20, 3, e));
    for (double l : r.losses) EXPECT_GE(l, 0.0);
}

struct GradCase {
    LossKind kind;
    OutputHead head;
    Activation act;
};

class InputGradFd : public ::testing::TestWithParam<GradCase> {};

TEST_P(InputGradFd, MatchesCentralDifferences) {
    const auto c = GetParam();
    const auto m = Mlp::initialized({3, 7, 5, 3}, c.act, c.head, {7, 0});
    auto e = RngStream{7, 1}.engine();
    const Matrix x = random_matrix(20, 3, e, -1.5, 1.5);
    const Matrix y = c.kind == LossKind::CrossEntropy ? random_simplex_rows(20, 3, e)
                                                      : random_matrix(20, 3, e);
    const auto r = loss_with_input_grad(c.kind, m, x, y);
    const double h = 1e-5;
    SampleWorkspace ws;
    for (std::size_t i = 0; i < 20; ++i) {
        std::vector<double> xi(x.row(i).begin(), x.row(i).end());
        std::vector<double> yi(y.row(i).begin(), y.row(i).end());
        for (std::size_t j = 0; j < 6; ++j) {
            double& v = j < 3 ? xi[j] : yi[j - 3];
            const double keep = v;
            v = keep + h;
            const double up = sample_loss(c.kind, m, xi, yi, ws);
            v = keep - h;
            const double dn = sample_loss(c.kind, m, xi, yi, ws);
            v = keep;
            EXPECT_LE(rel_err(r.grad_z(i, j), (up - dn) / (2 * h)), 1e-4) << "row " << i << " coord " << j;
        }
    }
}

INSTANTIATE_TEST_SUITE_P(
    Kinds, InputGradFd,
    ::testing::Values(GradCase{LossKind::MeanSquaredError, OutputHead::Linear, Activation::ReLU},
                      GradCase{LossKind::MeanSquaredError, OutputHead::Softmax, Activation::LeakyReLU},
                      GradCase{LossKind::CrossEntropy, OutputHead::Softmax, Activation::ReLU},
                      GradCase{LossKind::CrossEntropy, OutputHead::Softmax, Activation::LeakyReLU}));

double mean_loss(LossKind kind, const Mlp& m, const Matrix& x, const Matrix& y) {
    const auto l = per_sample_losses(kind, m, x, y);
    double s = 0.0;
    for (double v : l) s += v;
    return s / static_cast<double>(l.size());
}

TEST(BackwardParams, MatchesCentralDifferences) {
    for (auto kind : {LossKind::MeanSquaredError, LossKind::CrossEntropy}) {
        auto m = Mlp::initialized({2, 6, 4, 3}, Activation::LeakyReLU, OutputHead::Softmax, {8, 0});
        auto e = RngStream{8, 1}.engine();
        const Matrix x = random_matrix(12, 2, e);
        const Matrix y = random_simplex_rows(12, 3, e);
        const Parameters g = backward_params(kind, m, x, y);
        const auto grads = g.blocks();
        auto blocks = m.params().blocks();
        const double h = 1e-5;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            for (std::size_t i = 0; i < blocks[b].size(); ++i) {
                const double keep = blocks[b][i];
                blocks[b][i] = keep + h;
                const double up = mean_loss(kind, m, x, y);
                blocks[b][i] = keep - h;
                const double dn = mean_loss(kind, m, x, y);
                blocks[b][i] = keep;
                EXPECT_LE(rel_err(grads[b][i], (up - dn) / (2 * h)), 1e-4) << "block " << b << " entry " << i;
            }
        }
    }
}

TEST(BackwardParams, ExactFitIsStationary) {
    const Mlp m = scalar_linear(3.0);
    const Parameters g = backward_params(LossKind::MeanSquaredError, m, Matrix{{1.0}, {2.0}}, Matrix{{3.0}, {6.0}});
    for (auto blk : g.blocks()) {
        for (double v : blk) EXPECT_EQ(v, 0.0);
    }
}

TEST(BackwardParams, DoubledResidualDoublesGradient) {
    Mlp m = scalar_linear(1.5);
    m.bias(0)[0] = 0.25;
    const Matrix x{{1.0}, {-2.0}, {0.5}};
    const Matrix pred = forward(m, x);
    const Matrix y{{0.0}, {1.0}, {2.0}};
    Matrix y2(3, 1);
    for (std::size_t i = 0; i < 3; ++i) y2(i, 0) = pred(i, 0) - 2.0 * (pred(i, 0) - y(i, 0));
    const auto g1 = backward_params(LossKind::MeanSquaredError, m, x, y).blocks();
    const auto g2 = backward_params(LossKind::MeanSquaredError, m, x, y2).blocks();
    for (std::size_t b = 0; b < g1.size(); ++b) {
        for (std::size_t i = 0; i < g1[b].size(); ++i) EXPECT_NEAR(g2[b][i], 2.0 * g1[b][i], 1e-14);
    }
}

TEST(Optimizer, SgdZeroGradientIsFixedPoint) {
    auto m = Mlp::initialized({2, 3, 1}, Activation::ReLU, OutputHead::Linear, {9, 0});
    const Mlp before = m;
    OptimState st(SgdSettings{0.9, 0.0}, m);
    st.step(m, Parameters::zeros_like(m.params()), 0.1);
    EXPECT_EQ(m, before);
    EXPECT_EQ(st.steps(), 1u);
}

TEST(Optimizer, SgdMomentumRecurrence) {
    Mlp m = scalar_linear(1.0);
    OptimState st(SgdSettings{0.5, 0.1}, m);
    Parameters g = Parameters::zeros_like(m.params());
    g.weights[0](0, 0) = 2.0;
    // step 1: d = 2 + 0.1*1 = 2.1, buf = 2.1, w = 1 - 0.1*2.1 = 0.79
    st.step(m, g, 0.1);
    EXPECT_DOUBLE_EQ(m.weight(0)(0, 0), 0.79);
    // step 2: d = 2 + 0.079 = 2.079, buf = 0.5*2.1 + 2.079 = 3.129, w = 0.79 - 0.3129
    st.step(m, g, 0.1);
    EXPECT_DOUBLE_EQ(m.weight(0)(0, 0), 0.79 - 0.1 * 3.129);
}

TEST(Optimizer, FirstAdamStepByHand) {
    Mlp m = scalar_linear(0.0);
    OptimState st(AdamSettings{0.9, 0.999, 1e-8}, m);
    Parameters g = Parameters::zeros_like(m.params());
    g.weights[0](0, 0) = 1.0;
    st.step(m, g, 0.1);
    const double m1 = 0.1 * 1.0, v1 = 0.001 * 1.0;
    const double mhat = m1 / (1 - 0.9), vhat = v1 / (1 - 0.999);
    EXPECT_NEAR(m.weight(0)(0, 0), -0.1 * mhat / (std::sqrt(vhat) + 1e-8), 1e-15);
    EXPECT_NEAR(m.weight(0)(0, 0), -0.1, 1e-8);
    EXPECT_EQ(m.bias(0)[0], 0.0);
    EXPECT_DOUBLE_EQ(st.first_moment().weights[0](0, 0), 0.1);
}

TEST(Optimizer, NonFiniteGradientLeavesModelUntouched) {
    auto m = Mlp::initialized({2, 3, 1}, Activation::ReLU, OutputHead::Linear, {10, 0});
    const Mlp before = m;
    OptimState st(AdamSettings{}, m);
    Parameters g = Parameters::zeros_like(m.params());
    g.biases[1][0] = std::nan("");
    EXPECT_THROW(st.step(m, g, 1e-2), NonFiniteError);
    EXPECT_EQ(m, before);
    EXPECT_EQ(st.steps(), 0u);
}

TEST(Optimizer, ShapeMismatchThrows) {
    auto m = Mlp::initialized({2, 3, 1}, Activation::ReLU, OutputHead::Linear, {10, 0});
    const auto other = Mlp::initialized({2, 4, 1}, Activation::ReLU, OutputHead::Linear, {10, 0});
    OptimState st(SgdSettings{}, m);
    EXPECT_THROW(st.step(m, Parameters::zeros_like(other.params()), 1e-2), ShapeError);
}

TEST(Optimizer, TabularLearningRatesRun) {
    for (double lr : {1e-2, 1e-3, 5e-4}) {
        auto m = Mlp::initialized({5, 8, 1}, Activation::LeakyReLU, OutputHead::Linear, {11, 0});
        OptimState st(AdamSettings{}, m);
        auto e = RngStream{11, 1}.engine();
        const Matrix x = random_matrix(8, 5, e), y = random_matrix(8, 1, e);
        const double before = mean_loss(LossKind::MeanSquaredError, m, x, y);
        for (int i = 0; i < 50; ++i) st.step(m, backward_params(LossKind::MeanSquaredError, m, x, y), lr);
        EXPECT_LT(mean_loss(LossKind::MeanSquaredError, m, x, y), before);
    }
}

TEST(Checkpoint, RoundTripsBitExactly) {
    const auto m = Mlp::initialized({3, 5, 4, 2}, Activation::LeakyReLU, OutputHead::Softmax, {12, 0}, 0.2);
    std::stringstream ss;
    write_checkpoint(ss, m);
    EXPECT_EQ(read_checkpoint(ss), m);
}

TEST(Checkpoint, RejectsMalformedInput) {
    std::stringstream bad("ellreg-mlp 1\nlayer_sizes 2 x\n");
    EXPECT_THROW(read_checkpoint(bad), ParseError);
    std::stringstream wrong("not a checkpoint\n");
    EXPECT_THROW(read_checkpoint(wrong), ParseError);
}

}  // namespace
}  // namespace ellreg
