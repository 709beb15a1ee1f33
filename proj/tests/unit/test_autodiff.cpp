#include "nbrenc/autodiff/gradcheck.hpp"
#include "nbrenc/autodiff/mlp.hpp"
#include "nbrenc/autodiff/param_store.hpp"
#include "nbrenc/autodiff/tape.hpp"
#include "nbrenc/errors.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace nbrenc;
using namespace nbrenc::autodiff;
using Md = Matrix<double>;

namespace {

Md row(std::initializer_list<double> v) {
  Md m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

}  // namespace

TEST(Mlp, IdentityLayerReturnsInput) {
  ParamStore<double> ps;
  ps.add(weight_name("f", 0), Md::Identity(3, 3));
  ps.add(bias_name("f", 0), Md::Zero(1, 3));
  const std::vector<LayerSpec> layers = {{3, Activation::identity}};
  const Md x = fixture::uniform_matrix_d(5, 3, 1, -2, 2);
  Tape<double> tape;
  const NodeId out = mlp_forward(tape, ps, "f", tape.constant(x), layers);
  EXPECT_EQ(tape.value(out), x);
  EXPECT_EQ(mlp_eval(ps, "f", x, layers), x);
}

TEST(Mlp, ReluClipsNegatives) {
  Tape<double> tape;
  const NodeId r = tape.activation(tape.constant(row({-1.0, 2.0})), Activation::relu);
  EXPECT_EQ(tape.value(r), row({0.0, 2.0}));
}

TEST(Mlp, TwoLayerMatchesHandComposition) {
  Rng rng(7);
  ParamStore<double> ps;
  const std::vector<LayerSpec> layers = {{6, Activation::tanh}, {4, Activation::sigmoid}};
  init_mlp(ps, "net", 5, layers, rng);
  ps.at(bias_name("net", 0)) = fixture::uniform_matrix_d(1, 6, 2, -1, 1);
  ps.at(bias_name("net", 1)) = fixture::uniform_matrix_d(1, 4, 3, -1, 1);
  const Md x = fixture::uniform_matrix_d(8, 5, 4, -1, 1);

  const Md& w0 = ps.at(weight_name("net", 0));
  const Md& w1 = ps.at(weight_name("net", 1));
  const Md& b0 = ps.at(bias_name("net", 0));
  const Md& b1 = ps.at(bias_name("net", 1));
  Md expected(8, 4);
  for (int r = 0; r < 8; ++r) {
    std::vector<double> h(6);
    for (int j = 0; j < 6; ++j) {
      double s = b0(0, j);
      for (int i = 0; i < 5; ++i) s += x(r, i) * w0(i, j);
      h[static_cast<std::size_t>(j)] = std::tanh(s);
    }
    for (int j = 0; j < 4; ++j) {
      double s = b1(0, j);
      for (int i = 0; i < 6; ++i) s += h[static_cast<std::size_t>(i)] * w1(i, j);
      expected(r, j) = 1.0 / (1.0 + std::exp(-s));
    }
  }
  Tape<double> tape;
  const Md got = tape.value(mlp_forward(tape, ps, "net", tape.constant(x), layers));
  EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((mlp_eval(ps, "net", x, layers) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mlp, ShapeMismatchNamesLayer) {
  Rng rng(1);
  ParamStore<double> ps;
  const std::vector<LayerSpec> layers = {{4, Activation::relu}, {2, Activation::identity}};
  init_mlp(ps, "enc", 3, layers, rng);
  Tape<double> tape;
  try {
    mlp_forward(tape, ps, "enc", tape.constant(Md::Zero(2, 5)), layers);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("enc.0"), std::string::npos);
  }
}

TEST(Losses, BceOfPerfectReconstructionIsNearZero) {
  Md p(2, 2);
  p << kBceEpsilon, 1 - kBceEpsilon, 1 - kBceEpsilon, kBceEpsilon;
  // The clamp floor leaves a residual equal to the binary entropy at
  // epsilon, about 1.7e-6, rather than exactly zero.
  const double e = kBceEpsilon;
  const double entropy = -(e * std::log(e) + (1 - e) * std::log(1 - e));
  EXPECT_NEAR(bce_loss<double>(p, p), entropy, 1e-12);
  EXPECT_LT(bce_loss<double>(p, p), 2e-6);
}

TEST(Losses, BceAtHalfIsLogTwo) {
  const Md p = Md::Constant(3, 4, 0.5);
  const Md t = fixture::uniform_matrix_d(3, 4, 9);
  EXPECT_NEAR(bce_loss<double>(p, t), std::log(2.0), 1e-12);
}

TEST(Losses, BceAndMseMatchScalarLoops) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Md p = fixture::uniform_matrix_d(3, 4, 100 + s);
    const Md t = fixture::uniform_matrix_d(3, 4, 200 + s);
    EXPECT_NEAR(bce_loss<double>(p, t), oracle::bce_loop(p, t), 1e-12);
    EXPECT_NEAR(mse_loss<double>(p, t), oracle::mse_loop(p, t), 1e-12);
    Tape<double> tape;
    const NodeId pn = tape.constant(p);
    EXPECT_EQ(tape.scalar(tape.bce_loss(pn, t)), bce_loss<double>(p, t));
    EXPECT_EQ(tape.scalar(tape.mse_loss(pn, t)), mse_loss<double>(p, t));
  }
}

TEST(Losses, MseExamples) {
  const Md t = fixture::uniform_matrix_d(4, 3, 5);
  EXPECT_EQ(mse_loss<double>(t, t), 0.0);
  EXPECT_NEAR(mse_loss<double>((t.array() + 1.0).matrix(), t), 1.0, 1e-12);
}

TEST(Losses, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(bce_loss<double>(Md::Zero(2, 3), Md::Zero(3, 2)), DimensionError);
  EXPECT_THROW(mse_loss<double>(Md::Zero(2, 3), Md::Zero(2, 2)), DimensionError);
}

TEST(Losses, BceInvariantToJointRowPermutation) {
  const Md p = fixture::uniform_matrix_d(6, 3, 11);
  const Md t = fixture::uniform_matrix_d(6, 3, 12);
  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  EXPECT_NEAR(bce_loss<double>(gather_rows(p, perm), gather_rows(t, perm)), bce_loss<double>(p, t), 1e-14);
}

TEST(Losses, NonNegativeOnRandomInputs) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Md p = fixture::uniform_matrix_d(2, 5, s);
    const Md t = fixture::uniform_matrix_d(2, 5, s + 1000);
    EXPECT_GE(bce_loss<double>(p, t), 0.0);
    EXPECT_GE(mse_loss<double>(p, t), 0.0);
  }
}

TEST(Losses, KlMatchesScalarLoopAndKnownValues) {
  EXPECT_EQ(kl_divergence<double>(Md::Zero(3, 4), Md::Zero(3, 4)), 0.0);
  // One unit of mean offset in one coordinate costs 0.5.
  Md mu = Md::Zero(1, 2);
  mu(0, 0) = 1.0;
  EXPECT_NEAR(kl_divergence<double>(mu, Md::Zero(1, 2)), 0.5, 1e-15);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Md m = fixture::uniform_matrix_d(4, 3, s, -2, 2);
    const Md lv = fixture::uniform_matrix_d(4, 3, s + 50, -3, 3);
    EXPECT_NEAR(kl_divergence<double>(m, lv), oracle::kl_loop(m, lv), 1e-12);
  }
}

TEST(Backward, SumOfSquaresGivesTwoX) {
  const Md x = fixture::uniform_matrix_d(3, 4, 21, -1, 1);
  Tape<double> tape;
  const NodeId xn = tape.parameter("x", x);
  const NodeId loss = tape.sum(tape.mul(xn, xn));
  const auto g = tape.backward(loss);
  EXPECT_LE((g.at("x") - 2.0 * x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Backward, UnreachedParameterGetsZeros) {
  ParamStore<double> ps;
  ps.add("used", Md::Constant(2, 2, 1.5));
  ps.add("unused", Md::Constant(3, 1, 2.0));
  Tape<double> tape;
  const NodeId loss = tape.sum(tape.parameter("used", ps.at("used")));
  const auto g = tape.backward(loss, &ps);
  ASSERT_EQ(g.count("unused"), 1u);
  EXPECT_EQ(g.at("unused"), Md::Zero(3, 1));
  EXPECT_EQ(g.at("used"), Md::Ones(2, 2));
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape<double> tape;
  const NodeId p = tape.parameter("w", Md::Ones(2, 2));
  EXPECT_THROW(tape.backward(p), ContractError);
}

TEST(Backward, RepeatedParameterGradientsAccumulate) {
  const Md w = row({1.0, -2.0});
  Tape<double> tape;
  const NodeId a = tape.parameter("w", w);
  const NodeId b = tape.parameter("w", w);
  const auto g = tape.backward(tape.sum(tape.add(a, tape.scale(b, 3.0))));
  EXPECT_EQ(g.at("w"), Md::Constant(1, 2, 4.0));
}

TEST(Tape, ParentsPrecedeChildren) {
  Rng rng(3);
  ParamStore<double> ps;
  const std::vector<LayerSpec> layers = {{4, Activation::relu}, {3, Activation::sigmoid}};
  init_mlp(ps, "m", 3, layers, rng);
  Tape<double> tape;
  const NodeId out = mlp_forward(tape, ps, "m", tape.constant(fixture::uniform_matrix_d(5, 3, 1)), layers);
  tape.bce_loss(out, fixture::uniform_matrix_d(5, 3, 2));
  for (std::size_t i = 0; i < tape.size(); ++i) {
    for (NodeId p : tape.parents(NodeId{i})) EXPECT_LT(p.index, i);
  }
}

TEST(GradCheck, LinearModelIsExact) {
  ParamStore<double> ps;
  ps.add("W", fixture::uniform_matrix_d(4, 3, 31, -1, 1));
  const Md x = fixture::uniform_matrix_d(6, 4, 32, -1, 1);
  const LossBuilder loss = [&](Tape<double>& tape, const ParamStore<double>& p) {
    return tape.sum(tape.matmul(tape.constant(x), tape.parameter("W", p.at("W"))));
  };
  EXPECT_LT(finite_difference_check(loss, ps).max_relative_error, 1e-8);
}

TEST(GradCheck, SigmoidMlpWithBce) {
  Rng rng(41);
  ParamStore<double> ps;
  const std::vector<LayerSpec> layers = {{7, Activation::sigmoid}, {5, Activation::sigmoid}};
  init_mlp(ps, "m", 5, layers, rng);
  const Md x = fixture::uniform_matrix_d(10, 5, 42);
  const LossBuilder loss = [&](Tape<double>& tape, const ParamStore<double>& p) {
    return tape.bce_loss(mlp_forward(tape, p, "m", tape.constant(x), layers), x);
  };
  const auto r = finite_difference_check(loss, ps);
  EXPECT_LT(r.max_relative_error, 1e-4);
  EXPECT_EQ(r.entries_checked, ps.parameter_count());
}

TEST(GradCheck, DoubledGradientIsDetected) {
  Rng rng(51);
  ParamStore<double> ps;
  const std::vector<LayerSpec> layers = {{4, Activation::tanh}, {3, Activation::identity}};
  init_mlp(ps, "m", 3, layers, rng);
  const Md x = fixture::uniform_matrix_d(6, 3, 52);
  const LossBuilder loss = [&](Tape<double>& tape, const ParamStore<double>& p) {
    return tape.mse_loss(mlp_forward(tape, p, "m", tape.constant(x), layers), x);
  };
  Tape<double> tape;
  auto grads = tape.backward(loss(tape, ps), &ps);
  for (auto& [name, g] : grads) g *= 2.0;
  const auto r = compare_with_finite_differences(loss, ps, grads);
  EXPECT_NEAR(r.max_relative_error, 0.5, 1e-5);
}

TEST(GradCheck, ClampGatherSliceReparameterize) {
  ParamStore<double> ps;
  ps.add("h", fixture::uniform_matrix_d(5, 6, 61, -1.5, 1.5));
  const Md eps = fixture::uniform_matrix_d(4, 3, 62, -1, 1);
  const Md target = fixture::uniform_matrix_d(4, 3, 63);
  const LossBuilder loss = [&](Tape<double>& tape, const ParamStore<double>& p) {
    const NodeId h = tape.gather_rows(tape.parameter("h", p.at("h")), {4, 0, 2, 0});
    const NodeId mu = tape.slice_cols(h, 0, 3);
    const NodeId lv = tape.clamp(tape.slice_cols(h, 3, 3), -1.0, 1.0);
    const NodeId z = tape.reparameterize(mu, lv, eps);
    return tape.add(tape.mse_loss(z, target), tape.kl_divergence(mu, lv));
  };
  // Entries sitting exactly on a clamp edge are excluded by the random draw.
  EXPECT_LT(finite_difference_check(loss, ps).max_relative_error, 1e-4);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  ParamStore<double> ps;
  ps.add("w", fixture::uniform_matrix_d(3, 3, 71));
  const Md before = ps.at("w");
  Gradients<double> g{{"w", Md::Zero(3, 3)}};
  for (int i = 0; i < 5; ++i) adam_step(ps, g, {});
  EXPECT_EQ(ps.at("w"), before);
  EXPECT_EQ(ps.adam_state("w").step, 5);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore<double> ps;
  ps.add("w", Md::Constant(1, 1, 3.0));
  AdamHyper hyper;
  adam_step(ps, Gradients<double>{{"w", Md::Constant(1, 1, 1.0)}}, hyper);
  EXPECT_NEAR(ps.at("w")(0, 0), 3.0 - hyper.lr, 1e-10);
}

TEST(Adam, ThreeStepsMatchScalarRecurrence) {
  // f(w) = (w - 2)^2, gradient 2 (w - 2).
  AdamHyper hyper;
  hyper.lr = 0.1;
  ParamStore<double> ps;
  ps.add("w", Md::Constant(1, 1, -1.0));
  double w = -1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * (ps.at("w")(0, 0) - 2.0);
    adam_step(ps, Gradients<double>{{"w", Md::Constant(1, 1, g)}}, hyper);
    const double gr = 2.0 * (w - 2.0);
    m = hyper.beta1 * m + (1 - hyper.beta1) * gr;
    v = hyper.beta2 * v + (1 - hyper.beta2) * gr * gr;
    const double mh = m / (1 - std::pow(hyper.beta1, t));
    const double vh = v / (1 - std::pow(hyper.beta2, t));
    w -= hyper.lr * mh / (std::sqrt(vh) + hyper.eps);
    EXPECT_NEAR(ps.at("w")(0, 0), w, 1e-12);
  }
}

TEST(Adam, NonFiniteGradientCarriesParameterName) {
  ParamStore<double> ps;
  ps.add("layer.W", Md::Zero(2, 2));
  Md g = Md::Zero(2, 2);
  g(1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(ps, Gradients<double>{{"layer.W", g}}, {});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.W"), std::string::npos);
  }
  EXPECT_EQ(ps.at("layer.W"), Md::Zero(2, 2));
  EXPECT_EQ(ps.adam_state("layer.W").step, 0);
}

TEST(Adam, MomentsMatchParameterShapes) {
  ParamStore<float> ps;
  ps.add("a", DenseMatrix::Ones(3, 2));
  ps.add("b", DenseMatrix::Ones(1, 5));
  adam_step(ps, Gradients<float>{{"a", DenseMatrix::Ones(3, 2)}}, {});
  EXPECT_EQ(ps.adam_state("a").first_moment.rows(), 3);
  EXPECT_EQ(ps.adam_state("a").second_moment.cols(), 2);
  EXPECT_EQ(ps.adam_state("b").step, 0);
}

TEST(Forward, DeterministicGivenParameters) {
  Rng rng(81);
  ParamStore<float> ps;
  const std::vector<LayerSpec> layers = {{16, Activation::relu}, {4, Activation::identity}};
  init_mlp(ps, "e", 10, layers, rng);
  const DenseMatrix x = fixture::uniform_matrix(32, 10, 82);
  EXPECT_EQ(mlp_eval(ps, "e", x, layers), mlp_eval(ps, "e", x, layers));
}
