#include "nbrenc/autodiff/gradcheck.hpp"
#include "nbrenc/errors.hpp"
#include "nbrenc/evaluation/hungarian.hpp"
#include "nbrenc/models/model.hpp"
#include "nbrenc/models/objective.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace nbrenc;
using namespace nbrenc::models;
using autodiff::Tape;
using Md = Matrix<double>;

namespace {

ModelConfig small_config(Variant v, Objective o, std::size_t k) {
  ModelConfig c;
  c.encoder_widths = {10, 8, 4};
  c.decoder_count = k;
  c.variant = v;
  c.objective = o;
  return c;
}

// Loss builder over a merged store with fixed noise and targets.
autodiff::LossBuilder objective_builder(const ModelConfig& config, const ObjectiveNoise<double>& noise,
                                        const std::vector<DecoderTargets<double>>& targets) {
  return [=](Tape<double>& tape, const autodiff::ParamStore<double>& p) {
    std::vector<const autodiff::ParamStore<double>*> decs(config.decoder_count, &p);
    return reconstruction_objective(tape, config, p, decs, noise, targets).loss;
  };
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST(Config, EnumNamesRoundTrip) {
  for (auto v : {Variant::vanilla, Variant::denoising, Variant::variational}) EXPECT_EQ(parse_variant(to_string(v)), v);
  for (auto s : {AssignmentStrategy::typed, AssignmentStrategy::matched, AssignmentStrategy::greedy}) {
    EXPECT_EQ(parse_assignment(to_string(s)), s);
  }
  EXPECT_THROW(parse_variant("sparse"), ConfigError);
  EXPECT_THROW(parse_loss("mae"), ConfigError);
}

TEST(Config, ValidationAndJson) {
  ModelConfig c = small_config(Variant::variational, Objective::neighbor, 3);
  c.kl_weight = 0.5;
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  ModelConfig bad = c;
  bad.encoder_widths = {10};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.corruption_rate = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.decoder_count = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  auto j = to_json(c);
  j["extra"] = 1;
  EXPECT_THROW(model_config_from_json(j), ConfigError);
  j = to_json(c);
  j.erase("loss");
  EXPECT_THROW(model_config_from_json(j), ConfigError);
}

TEST(Config, LayerShapes) {
  const ModelConfig c = small_config(Variant::variational, Objective::self, 1);
  const auto enc = c.encoder_layers();
  ASSERT_EQ(enc.size(), 2u);
  EXPECT_EQ(enc.back().width, 8u);
  const auto dec = c.decoder_layers();
  EXPECT_EQ(dec.front().width, 8u);
  EXPECT_EQ(dec.back().width, 10u);
  EXPECT_EQ(dec.back().activation, autodiff::Activation::sigmoid);
  ModelConfig m = c;
  m.loss = LossKind::mse;
  EXPECT_EQ(m.decoder_layers().back().activation, autodiff::Activation::identity);
}

TEST(Init, SeedDeterminismAndIndependentDecoders) {
  const ModelConfig c = small_config(Variant::vanilla, Objective::neighbor, 3);
  const auto a = init_model<float>(c, 5);
  const auto b = init_model<float>(c, 5);
  const auto other = init_model<float>(c, 6);
  EXPECT_TRUE(a.same_parameters(b));
  EXPECT_FALSE(a.same_parameters(other));
  ASSERT_EQ(a.decoders.size(), 3u);
  EXPECT_NE(a.decoders[0].at(autodiff::weight_name(decoder_prefix(0), 0)),
            a.decoders[1].at(autodiff::weight_name(decoder_prefix(1), 0)));
  const float limit = std::sqrt(6.0f / 14.0f);
  EXPECT_LE(a.encoder.at("enc.0.W").cwiseAbs().maxCoeff(), limit);
}

TEST(Corrupt, RateExtremesAndConcentration) {
  Rng rng(1);
  const DenseMatrix x = fixture::uniform_matrix(100, 1000, 2).array() + 0.5f;
  EXPECT_EQ(corrupt(x, 0.0, rng), x);
  EXPECT_EQ(corrupt(x, 1.0, rng), DenseMatrix::Zero(100, 1000));
  const DenseMatrix c = corrupt(x, 0.2, rng);
  const double zeroed = static_cast<double>((c.array() == 0.0f).count()) / static_cast<double>(x.size());
  EXPECT_NEAR(zeroed, 0.2, 0.01);
  EXPECT_THROW(corrupt(x, -0.1, rng), InputError);
}

TEST(Encode, SingleRowMatchesBatchRow) {
  for (Variant v : {Variant::vanilla, Variant::variational}) {
    ModelConfig c = small_config(v, Objective::self, 1);
    c.encoder_widths = {784, 256, 64};
    const auto model = init_model<float>(c, 3);
    const DenseMatrix x = fixture::uniform_matrix(32, 784, 4);
    const auto batch = encode(model, x);
    for (Eigen::Index r = 0; r < 32; ++r) {
      const auto one = encode(model, DenseMatrix(x.row(r)));
      EXPECT_EQ(one.z.row(0), batch.z.row(r)) << "row " << r;
    }
  }
}

TEST(Encode, VariationalHeadSplitsAndZeroInputIsFinite) {
  const ModelConfig c = small_config(Variant::variational, Objective::self, 1);
  const auto model = init_model<double>(c, 3);
  const auto e = encode(model, Md(Md::Zero(5, 10)));
  EXPECT_EQ(e.z.cols(), 4);
  EXPECT_EQ(e.log_var.cols(), 4);
  EXPECT_TRUE(e.z.allFinite());
  EXPECT_TRUE(representation(model, Md(Md::Zero(5, 10))).allFinite());
  EXPECT_THROW(encode(model, Md(Md::Zero(5, 9))), DimensionError);
}

TEST(Reparameterize, ZeroNoiseClampAndMean) {
  const Md mu = fixture::uniform_matrix_d(3, 2, 1, -1, 1);
  EXPECT_EQ(reparameterize_with<double>(mu, Md::Zero(3, 2), Md::Zero(3, 2)), mu);
  const Md lv = Md::Constant(3, 2, -std::numeric_limits<double>::infinity());
  Rng rng(2);
  EXPECT_TRUE(reparameterize<double>(mu, lv, rng).allFinite());
  const Md big = Md::Constant(3, 2, 1e6);
  EXPECT_TRUE(reparameterize<double>(mu, big, rng).allFinite());

  const Md m1 = Md::Constant(1, 1, 0.7);
  const Md l1 = Md::Constant(1, 1, std::log(4.0));  // sigma = 2
  double sum = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) sum += reparameterize<double>(m1, l1, rng)(0, 0);
  EXPECT_NEAR(sum / draws, 0.7, 3.0 * 2.0 / 100.0);
}

TEST(Objective, TwoDecoderLossMatchesHandComposition) {
  ModelConfig c;
  c.encoder_widths = {3, 2};
  c.decoder_count = 2;
  c.objective = Objective::neighbor;
  c.assignment = AssignmentStrategy::typed;
  const auto model = init_model<double>(c, 11);
  const Md x = fixture::uniform_matrix_d(4, 3, 12);
  const Md t0 = fixture::uniform_matrix_d(4, 3, 13);
  const Md t1 = fixture::uniform_matrix_d(4, 3, 14);

  const Md& we = model.encoder.at("enc.0.W");
  const Md& be = model.encoder.at("enc.0.b");
  double total = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    const auto& d = model.decoders[j];
    const Md& wd = d.at(autodiff::weight_name(decoder_prefix(j), 0));
    const Md& bd = d.at(autodiff::bias_name(decoder_prefix(j), 0));
    const Md& t = j == 0 ? t0 : t1;
    Md pred(4, 3);
    for (int r = 0; r < 4; ++r) {
      double z[2];
      for (int m = 0; m < 2; ++m) {
        z[m] = be(0, m);
        for (int i = 0; i < 3; ++i) z[m] += x(r, i) * we(i, m);
      }
      for (int o = 0; o < 3; ++o) {
        double s = bd(0, o);
        for (int m = 0; m < 2; ++m) s += z[m] * wd(m, o);
        pred(r, o) = sigmoid(s);
      }
    }
    total += oracle::bce_loop(pred, t) / 2.0;
  }
  Tape<double> tape;
  const auto nodes = reconstruction_objective(tape, model, ObjectiveNoise<double>{x, std::nullopt},
                                              direct_targets<double>({t0, t1}));
  EXPECT_NEAR(tape.scalar(nodes.loss), total, 1e-12);
}

TEST(Objective, NeighborTargetEqualToInputIsAutoencoderLoss) {
  for (Variant v : {Variant::vanilla, Variant::denoising, Variant::variational}) {
    const ModelConfig ae = small_config(v, Objective::self, 1);
    ModelConfig ne = ae;
    ne.objective = Objective::neighbor;
    auto model_ae = init_model<float>(ae, 21);
    auto model_ne = init_model<float>(ne, 21);
    const DenseMatrix x = fixture::uniform_matrix(16, 10, 22);
    Rng ra(23), rb(23);
    Tape<float> ta, tb;
    const auto la = reconstruction_objective(ta, model_ae, x, direct_targets<float>({x}), ra);
    const auto lb = reconstruction_objective(tb, model_ne, x, direct_targets<float>({x}), rb);
    EXPECT_EQ(ta.scalar(la.loss), tb.scalar(lb.loss)) << to_string(v);
  }
}

TEST(Objective, VariationalWithoutKlAndNoiseEqualsVanillaOnMeanHead) {
  ModelConfig vc = small_config(Variant::variational, Objective::self, 1);
  vc.kl_weight = 0.0;
  const auto var = init_model<double>(vc, 31);
  ModelConfig pc = vc;
  pc.variant = Variant::vanilla;
  auto plain = init_model<double>(pc, 99);
  plain.encoder.at("enc.0.W") = var.encoder.at("enc.0.W");
  plain.encoder.at("enc.0.b") = var.encoder.at("enc.0.b");
  plain.encoder.at("enc.1.W") = var.encoder.at("enc.1.W").leftCols(4);
  plain.encoder.at("enc.1.b") = var.encoder.at("enc.1.b").leftCols(4);
  plain.decoders = var.decoders;
  const Md x = fixture::uniform_matrix_d(12, 10, 32);
  Tape<double> ta, tb;
  const auto a = reconstruction_objective(ta, var, ObjectiveNoise<double>{x, Md::Zero(12, 4)}, direct_targets<double>({x}));
  const auto b = reconstruction_objective(tb, plain, ObjectiveNoise<double>{x, std::nullopt}, direct_targets<double>({x}));
  EXPECT_EQ(ta.scalar(a.loss), tb.scalar(b.loss));
}

TEST(Objective, KlTermAddsWeightedDivergence) {
  ModelConfig c = small_config(Variant::variational, Objective::self, 1);
  c.kl_weight = 0.25;
  const auto model = init_model<double>(c, 41);
  const Md x = fixture::uniform_matrix_d(6, 10, 42);
  const Md eps = fixture::uniform_matrix_d(6, 4, 43, -1, 1);
  Tape<double> tape;
  const auto n = reconstruction_objective(tape, model, ObjectiveNoise<double>{x, eps}, direct_targets<double>({x}));
  ASSERT_TRUE(n.kl.has_value());
  const auto e = encode(model, x);
  EXPECT_NEAR(tape.scalar(*n.kl), oracle::kl_loop(e.z, e.log_var), 1e-12);
  EXPECT_NEAR(tape.scalar(n.loss), tape.scalar(n.reconstruction) + 0.25 * tape.scalar(*n.kl), 1e-14);
}

TEST(Objective, CountMismatchIsContractError) {
  const ModelConfig c = small_config(Variant::vanilla, Objective::neighbor, 2);
  const auto model = init_model<double>(c, 1);
  const Md x = fixture::uniform_matrix_d(4, 10, 2);
  Tape<double> tape;
  EXPECT_THROW(reconstruction_objective(tape, model, ObjectiveNoise<double>{x, std::nullopt}, direct_targets<double>({x})),
               ContractError);
  std::vector<const autodiff::ParamStore<double>*> one = {&model.decoders[0]};
  EXPECT_THROW(reconstruction_objective(tape, c, model.encoder, one, ObjectiveNoise<double>{x, std::nullopt},
                                        direct_targets<double>({x, x})),
               ContractError);
}

TEST(Objective, NoiseDrawOrderIsCorruptionThenEps) {
  ModelConfig c = small_config(Variant::vanilla, Objective::self, 1);
  const Md x = fixture::uniform_matrix_d(5, 10, 1);
  Rng r1(7);
  auto n = draw_objective_noise(c, x, r1);
  EXPECT_EQ(n.input, x);
  EXPECT_FALSE(n.eps.has_value());
  EXPECT_EQ(r1(), Rng(7)());

  c.variant = Variant::denoising;
  Rng r2(7), check(7);
  n = draw_objective_noise(c, x, r2);
  EXPECT_EQ(n.input, corrupt(x, c.corruption_rate, check));
  EXPECT_EQ(r2(), check());
}

TEST(GradientFidelity, EveryVariantPassesFiniteDifferences) {
  for (Objective o : {Objective::self, Objective::neighbor}) {
    for (Variant v : {Variant::vanilla, Variant::denoising, Variant::variational}) {
      const ModelConfig c = small_config(v, o, 1);
      const auto model = init_model<double>(c, 51);
      const Md x = fixture::uniform_matrix_d(20, 10, 52);
      const Md target = o == Objective::self ? x : fixture::uniform_matrix_d(20, 10, 53);
      Rng rng(54);
      const auto noise = draw_objective_noise(c, x, rng);
      const auto r = autodiff::finite_difference_check(objective_builder(c, noise, direct_targets<double>({target})),
                                                       merged_parameters(model));
      EXPECT_LT(r.max_relative_error, 1e-4) << to_string(o) << "/" << to_string(v) << " worst " << r.worst_parameter;
    }
  }
}

TEST(GradientFidelity, ThreeDecoderMatchedRouting) {
  ModelConfig c = small_config(Variant::denoising, Objective::neighbor, 3);
  const auto model = init_model<double>(c, 61);
  const Md x = fixture::uniform_matrix_d(20, 10, 62);
  const std::vector<Md> slots = {fixture::uniform_matrix_d(20, 10, 63), fixture::uniform_matrix_d(20, 10, 64),
                                 fixture::uniform_matrix_d(20, 10, 65)};
  const auto targets = route_targets(model, x, slots);
  Rng rng(66);
  const auto noise = draw_objective_noise(c, x, rng);
  const auto r = autodiff::finite_difference_check(objective_builder(c, noise, targets), merged_parameters(model));
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(Assign, Examples) {
  Md m(2, 2);
  m << 0, 9, 9, 0;
  EXPECT_EQ(assign_decoders(m, AssignmentStrategy::matched), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(assign_decoders(Md::Constant(4, 4, 3.0), AssignmentStrategy::matched),
            (std::vector<std::size_t>{0, 1, 2, 3}));
  m << 9, 0, 0, 9;
  EXPECT_EQ(assign_decoders(m, AssignmentStrategy::typed), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(assign_decoders(m, AssignmentStrategy::matched), (std::vector<std::size_t>{1, 0}));
  m << 1, 2, 0, 5;
  EXPECT_EQ(assign_decoders(m, AssignmentStrategy::greedy), (std::vector<std::size_t>{0, 0}));
  EXPECT_THROW(assign_decoders(Md::Zero(2, 3), AssignmentStrategy::matched), ContractError);
}

TEST(Assign, MatchedNeverWorseThanAnyPermutation) {
  for (std::size_t k = 1; k <= 5; ++k) {
    for (std::uint64_t s = 0; s < 40; ++s) {
      const Md cost = fixture::uniform_matrix_d(k, k, 1000 * k + s);
      const auto perm = assign_decoders(cost, AssignmentStrategy::matched);
      const auto best = oracle::exhaustive_assignment(cost);
      EXPECT_NEAR(evaluation::assignment_cost(cost, perm), best.cost, 1e-12);
      EXPECT_EQ(perm, best.perm);
    }
  }
}

TEST(Routing, GreedyCanStackDecodersAndWeightsByPairs) {
  ModelConfig c = small_config(Variant::vanilla, Objective::neighbor, 2);
  c.assignment = AssignmentStrategy::greedy;
  const auto model = init_model<double>(c, 71);
  const Md x = fixture::uniform_matrix_d(6, 10, 72);
  const std::vector<Md> slots = {x, x};
  const auto targets = route_targets(model, x, slots);
  ASSERT_EQ(targets.size(), 2u);
  // Identical targets in both slots: every pair lands on each row's better
  // decoder, so the two decoders together still see 2 * 6 pairs.
  EXPECT_EQ(targets[0].source.size() + targets[1].source.size(), 12u);
  Tape<double> tape;
  const auto n = reconstruction_objective(tape, model, ObjectiveNoise<double>{x, std::nullopt}, targets);
  double expected = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    if (targets[j].source.empty()) continue;
    const Md z = representation(model, gather_rows(x, targets[j].source));
    const auto rows = per_row_loss<double>(decode(model, j, z), targets[j].target, LossKind::bce);
    for (double l : rows) expected += l / 12.0;
  }
  EXPECT_NEAR(tape.scalar(n.loss), expected, 1e-12);
}

TEST(Routing, TypedAndSingleDecoderAreDirect) {
  ModelConfig c = small_config(Variant::vanilla, Objective::neighbor, 2);
  c.assignment = AssignmentStrategy::typed;
  const auto model = init_model<float>(c, 81);
  const DenseMatrix x = fixture::uniform_matrix(5, 10, 82);
  const DenseMatrix y = fixture::uniform_matrix(5, 10, 83);
  const auto t = route_targets(model, x, std::vector<DenseMatrix>{x, y});
  EXPECT_EQ(t[0].target, x);
  EXPECT_EQ(t[1].target, y);
  EXPECT_EQ(t[1].source, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}
