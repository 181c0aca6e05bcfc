#include <gtest/gtest.h>

#include "nervemp/bench.hpp"
#include "nervemp/errors.hpp"
#include "nervemp/exactmp.hpp"
#include "oracles.hpp"

using namespace nervemp;

namespace {

DirectedTree bfs_tree(const SubgraphCover& cover, int root) {
  return direct_tree(spanning_tree(build_nerve(cover), cover), root);
}

}  // namespace

TEST(ExactMp, BackSubstitutionReproducesCentralizedSolution) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Instance inst = gen_random_quadratic({5, 40}, seed);
    const auto quads = regularize(inst.quads, 1e-3, seed);
    const oracle::DenseMinimum truth = oracle::dense_minimum(inst.cover, quads, inst.observations);
    const CentralSolution central = centralized_solve(inst.cover, quads, inst.observations);
    EXPECT_LE(relative_gap(central.value, truth.value), 1e-9);
    for (int root = 0; root < inst.cover.size(); ++root) {
      const auto run = run_message_passing(inst.cover, quads, inst.observations, bfs_tree(inst.cover, root));
      EXPECT_EQ(run.messages_sent, inst.cover.size() - 1);
      const LocalSolution local = local_solve(run);
      EXPECT_LE(relative_gap(local.value, truth.value), 1e-8);
      const VectorXd full = back_substitute(inst.cover, run, inst.observations, local);
      EXPECT_LE(oracle::max_abs(full - truth.signal), 1e-6) << "seed " << seed << " root " << root;
    }
  }
}

TEST(ExactMp, SingleSubgraphIsLocalSolve) {
  Rng rng(3);
  SubgraphCover cover(Graph{3, {{0, 1}, {1, 2}}}, {{0, 1, 2}}, {{0}});
  const std::vector<QuadFunc> quads{oracle::random_psd(rng, {0, 1, 2}, 3)};
  const VectorXd s = (VectorXd(1) << 0.7).finished();
  const auto run = run_message_passing(cover, quads, s, bfs_tree(cover, 0));
  EXPECT_EQ(run.messages_sent, 0);
  EXPECT_NEAR(local_solve(run).value, centralized_solve(cover, quads, s).value, 1e-12);
}

TEST(ExactMp, FixtureRootHasFreeDirection) {
  const Instance inst = fixture_eg32();
  const auto run = run_message_passing(inst.cover, inst.quads, inst.observations, bfs_tree(inst.cover, 1));
  const LocalSolution local = local_solve(run);
  EXPECT_NEAR(local.value, 0.0, 1e-10);
  ASSERT_EQ(local.kernel.cols(), 1);
  EXPECT_THROW(back_substitute(inst.cover, run, inst.observations, local), NonUniqueArgmin);
  // Root variables x, y2: the free direction moves them in opposite senses.
  EXPECT_EQ(local.vars, (NodeSet{3, 6}));
  EXPECT_NEAR(local.kernel(0, 0) + local.kernel(1, 0), 0.0, 1e-10);
}

TEST(ExactMp, UnboundedEdgeIsReported) {
  SubgraphCover cover(Graph{3, {{0, 1}, {1, 2}}}, {{0, 1}, {1, 2}}, {{0}, {2}});
  // f_1 is linear in the shared node, so the root problem has no minimum.
  const QuadFunc f0({0, 1}, MatrixXd::Zero(2, 2), VectorXd::Zero(2), 0.0);
  const QuadFunc f1({1, 2}, MatrixXd::Zero(2, 2), (VectorXd(2) << 1.0, 0.0).finished(), 0.0);
  const auto run = run_message_passing(cover, {f0, f1}, VectorXd::Zero(2), bfs_tree(cover, 1));
  EXPECT_THROW(local_solve(run), UnboundedBelow);
}

TEST(ExactMp, RegularizationAddsBoundedDiagonal) {
  Rng rng(9);
  const std::vector<QuadFunc> quads{oracle::random_psd(rng, {0, 1, 2}, 1), QuadFunc::zero({2, 3})};
  const auto reg = regularize(quads, 1e-3, 42);
  for (std::size_t i = 0; i < quads.size(); ++i) {
    const MatrixXd diff = reg[i].A() - quads[i].A();
    for (int r = 0; r < diff.rows(); ++r)
      for (int c = 0; c < diff.cols(); ++c) {
        if (r == c) {
          EXPECT_GT(diff(r, c), 0.5e-3);
          EXPECT_LE(diff(r, c), 1e-3);
        } else {
          EXPECT_EQ(diff(r, c), 0.0);
        }
      }
    EXPECT_GT(reg[i].min_eigenvalue(), 0.0);
  }
  EXPECT_EQ(regularize(quads, 1e-3, 42)[0].A(), reg[0].A());
}

TEST(ExactMp, DeterministicAcrossRuns) {
  const Instance inst = gen_random_quadratic({6, 40}, 77);
  const auto a = run_message_passing(inst.cover, inst.quads, inst.observations, bfs_tree(inst.cover, 2));
  const auto b = run_message_passing(inst.cover, inst.quads, inst.observations, bfs_tree(inst.cover, 2));
  EXPECT_EQ(a.aggregated.A(), b.aggregated.A());
  EXPECT_EQ(a.aggregated.b(), b.aggregated.b());
  EXPECT_EQ(a.aggregated.c(), b.aggregated.c());
}

TEST(ExactMp, RelativeGapGuardsSmallValues) {
  EXPECT_DOUBLE_EQ(relative_gap(1e-9, 0.0), 1e-9);
  EXPECT_DOUBLE_EQ(relative_gap(110.0, 100.0), 10.0 / 110.0);
}
