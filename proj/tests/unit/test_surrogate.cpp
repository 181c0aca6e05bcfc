#include <gtest/gtest.h>

#include <sstream>

#include "nervemp/bench.hpp"
#include "nervemp/errors.hpp"
#include "nervemp/exactmp.hpp"
#include "nervemp/surrogate.hpp"
#include "oracles.hpp"

using namespace nervemp;

namespace {

DirectedTree bfs_tree(const SubgraphCover& cover, int root) {
  return direct_tree(spanning_tree(build_nerve(cover), cover), root);
}

Box unit_box(int d, double r) { return Box::around(VectorXd::Zero(d), r); }

}  // namespace

TEST(Sampling, ZeroMessageGivesZeroOutputs) {
  const SampleSet s = sample_message([](const VectorXd&) { return 0.0; }, {0, 1}, unit_box(2, 1.0), 10, 4);
  EXPECT_EQ(s.size(), 10);
  EXPECT_EQ(s.outputs, VectorXd::Zero(10));
}

TEST(Sampling, SquareOutputsAtSeededPoints) {
  const SampleSet s =
      sample_message([](const VectorXd& x) { return x(0) * x(0); }, {3}, unit_box(1, 1.0), 5, 17);
  Rng rng(17);
  for (int i = 0; i < 5; ++i) {
    const double p = rng.uniform(-1.0, 1.0);
    EXPECT_EQ(s.inputs(i, 0), p);
    EXPECT_EQ(s.outputs(i), p * p);
  }
}

TEST(Sampling, QuadraticOutputsMatchEvaluation) {
  Rng rng(5);
  const QuadFunc q = oracle::random_psd(rng, {0, 1, 2}, 3);
  const SampleSet s = sample_message([&q](const VectorXd& x) { return q.evaluate(x); }, q.vars(),
                                     unit_box(3, 2.0), 40, 9);
  for (int i = 0; i < s.size(); ++i) {
    const VectorXd x = s.inputs.row(i).transpose();
    EXPECT_TRUE(s.box.contains(x));
    double ref = q.c() + q.b().dot(x);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) ref += x(a) * q.A()(a, b) * x(b);
    EXPECT_NEAR(s.outputs(i), ref, 1e-12 * std::max(1.0, std::abs(ref)));
  }
}

TEST(Sampling, RejectsBadArguments) {
  auto zero = [](const VectorXd&) { return 0.0; };
  EXPECT_THROW(sample_message(zero, {0}, unit_box(1, 1.0), 0, 1), ConfigError);
  EXPECT_THROW(sample_message(zero, {0, 1}, unit_box(1, 1.0), 3, 1), DimensionMismatch);
  EXPECT_THROW(sample_message(zero, {0}, Box::unbounded(1), 3, 1), ConfigError);
}

TEST(Sampling, WireFormatRoundTrips) {
  const SampleSet s = sample_message([](const VectorXd& x) { return x.sum() / 3.0; }, {2, 7},
                                     Box::around((VectorXd(2) << 0.5, -1.0).finished(), 0.3), 6, 8, {4, 1});
  std::stringstream first;
  s.write(first);
  const SampleSet back = SampleSet::read(first);
  EXPECT_EQ(back.edge, s.edge);
  EXPECT_EQ(back.vars, s.vars);
  EXPECT_EQ(back.inputs, s.inputs);
  EXPECT_EQ(back.outputs, s.outputs);
  std::stringstream second;
  back.write(second);
  EXPECT_EQ(first.str(), second.str());
}

TEST(Sampling, ReadRejectsPointsOutsideBox) {
  std::istringstream in("nervemp-samples 1\nedge 0 1\nvars 1 0\nlo -1\nhi 1\nsamples 1\n2 0\n");
  EXPECT_THROW(SampleSet::read(in), InvalidInstance);
}

TEST(Surrogate, QuadraticFitRecoversCoefficients) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const QuadFunc q = oracle::random_psd(rng, {0, 1, 2, 3}, 2, false);
    const SampleSet s = sample_message([&q](const VectorXd& x) { return q.evaluate(x); }, q.vars(),
                                       unit_box(4, 3.0), 40, trial);
    const Surrogate fit = fit_surrogate(s, SurrogateKind::quadratic_ls, {}, 0);
    ASSERT_TRUE(fit.quadratic().has_value());
    EXPECT_LE((fit.quadratic()->A() - q.A()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE((fit.quadratic()->b() - q.b()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(fit.quadratic()->c(), q.c(), 1e-6);
  }
}

TEST(Surrogate, ConstantSamplesGiveConstant) {
  const SampleSet s = sample_message([](const VectorXd&) { return 2.5; }, {0, 1}, unit_box(2, 1.0), 30, 3);
  for (SurrogateKind kind : {SurrogateKind::quadratic_ls, SurrogateKind::one_hidden_layer}) {
    FitConfig cfg;
    cfg.epochs = 200;
    const Surrogate fit = fit_surrogate(s, kind, cfg, 1);
    for (double a : {-0.9, 0.0, 0.7})
      EXPECT_NEAR(fit.evaluate((VectorXd(2) << a, -a).finished()), 2.5, 1e-9);
  }
}

TEST(Surrogate, TooFewSamplesIsSingular) {
  const SampleSet s = sample_message([](const VectorXd& x) { return x.squaredNorm(); }, {0, 1, 2},
                                     unit_box(3, 1.0), 5, 3);
  EXPECT_THROW(fit_surrogate(s, SurrogateKind::quadratic_ls, {}, 0), SingularFit);
  // Collinear inputs cannot separate x0^2 from x0*x1.
  SampleSet flat = sample_message([](const VectorXd& x) { return x(0); }, {0, 1}, unit_box(2, 1.0), 20, 3);
  flat.inputs.col(1) = flat.inputs.col(0);
  EXPECT_THROW(fit_surrogate(flat, SurrogateKind::quadratic_ls, {}, 0), SingularFit);
}

TEST(Surrogate, NetworkLearnsSquare) {
  const SampleSet s =
      sample_message([](const VectorXd& x) { return x(0) * x(0); }, {0}, unit_box(1, 2.0), 80, 21);
  const Surrogate fit = fit_surrogate(s, SurrogateKind::one_hidden_layer, {}, 5);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = -2.0 + 4.0 * i / 99.0;
    worst = std::max(worst, std::abs(fit.evaluate((VectorXd(1) << x).finished()) - x * x));
  }
  EXPECT_LE(worst, 0.05);
}

TEST(Surrogate, NetworkGradientMatchesFiniteDifferences) {
  const SampleSet s = sample_message([](const VectorXd& x) { return x(0) * x(1) + x(1); }, {0, 1},
                                     unit_box(2, 1.0), 40, 2);
  FitConfig cfg;
  cfg.epochs = 100;
  const Surrogate fit = fit_surrogate(s, SurrogateKind::one_hidden_layer, cfg, 3);
  const VectorXd x = (VectorXd(2) << 0.31, -0.27).finished();
  const VectorXd g = fit.gradient(x);
  for (int k = 0; k < 2; ++k) {
    VectorXd e = VectorXd::Zero(2);
    e(k) = 1e-7;
    EXPECT_NEAR(g(k), (fit.evaluate(x + e) - fit.evaluate(x - e)) / 2e-7, 1e-4);
  }
}

TEST(Surrogate, FitIsDeterministic) {
  const SampleSet s = sample_message([](const VectorXd& x) { return std::abs(x(0)); }, {0}, unit_box(1, 1.0), 30, 2);
  FitConfig cfg;
  cfg.epochs = 300;
  const Surrogate a = fit_surrogate(s, SurrogateKind::one_hidden_layer, cfg, 9);
  const Surrogate b = fit_surrogate(s, SurrogateKind::one_hidden_layer, cfg, 9);
  for (double x : {-0.5, 0.1, 0.8}) {
    const VectorXd v = (VectorXd(1) << x).finished();
    EXPECT_EQ(a.evaluate(v), b.evaluate(v));
  }
}

TEST(ApproxMp, QuadraticSurrogatesReproduceExactValue) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const Instance inst = gen_random_quadratic({5, 30}, seed);
    const auto quads = regularize(inst.quads, 1e-3, seed);
    const DirectedTree tree = bfs_tree(inst.cover, 0);
    const double exact = local_solve(run_message_passing(inst.cover, quads, inst.observations, tree)).value;
    ApproxConfig cfg;
    cfg.seed = seed;
    const ApproxResult r = approx_message_passing(inst.cover, quads, inst.observations, tree, cfg);
    EXPECT_LE(relative_gap(r.value, exact), 1e-5) << "seed " << seed;
    EXPECT_EQ(r.exchanges, inst.cover.size() - 1);
    EXPECT_EQ(static_cast<int>(r.transmitted.size()), inst.cover.size() - 1);
  }
}

TEST(ApproxMp, SingleSubgraphNeedsNoSamples) {
  Rng rng(2);
  SubgraphCover cover(Graph{3, {{0, 1}, {1, 2}}}, {{0, 1, 2}}, {{0}});
  const std::vector<QuadFunc> quads{oracle::random_psd(rng, {0, 1, 2}, 3)};
  const VectorXd s = (VectorXd(1) << -0.4).finished();
  const ApproxResult r = approx_message_passing(cover, quads, s, bfs_tree(cover, 0), {});
  EXPECT_EQ(r.exchanges, 0);
  EXPECT_TRUE(r.transmitted.empty());
  EXPECT_NEAR(r.value, centralized_solve(cover, quads, s).value, 1e-12);
}

TEST(ApproxMp, DeterministicForFixedSeed) {
  const Instance inst = gen_random_quadratic({4, 30}, 3);
  const auto quads = regularize(inst.quads, 1e-3, 3);
  ApproxConfig cfg;
  cfg.kind = SurrogateKind::one_hidden_layer;
  cfg.fit.epochs = 200;
  cfg.samples = 30;
  cfg.seed = 12;
  const DirectedTree tree = bfs_tree(inst.cover, 1);
  const double a = approx_message_passing(inst.cover, quads, inst.observations, tree, cfg).value;
  const double b = approx_message_passing(inst.cover, quads, inst.observations, tree, cfg).value;
  EXPECT_EQ(a, b);
}

TEST(ApproxMp, RejectsBadConfig) {
  const Instance inst = fixture_eg32();
  ApproxConfig cfg;
  cfg.radius = 0.0;
  EXPECT_THROW(approx_message_passing(inst.cover, inst.quads, inst.observations, bfs_tree(inst.cover, 1), cfg),
               ConfigError);
}

TEST(ErrorRatio, Arithmetic) {
  EXPECT_EQ(error_ratio(3.0, 3.0), 0.0);
  EXPECT_NEAR(error_ratio(105.0, 100.0), 5.0, 1e-12);
  EXPECT_NEAR(error_ratio(1e-7, 0.0), 10.0, 1e-9);
}
