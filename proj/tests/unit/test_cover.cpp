#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "nervemp/bench.hpp"
#include "nervemp/cover.hpp"
#include "nervemp/errors.hpp"
#include "oracles.hpp"

using namespace nervemp;

namespace {

SubgraphCover triangle_cover() {
  // Three subgraphs meeting pairwise in nodes 0, 1, 2.
  Graph g{7, {{0, 1}, {1, 2}, {0, 2}, {0, 3}, {1, 4}, {2, 5}, {2, 6}}};
  return SubgraphCover(g, {{0, 1, 3}, {1, 2, 4}, {0, 2, 5, 6}}, {{3}, {4}, {5}});
}

SubgraphCover path_cover() {
  Graph g{5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}};
  return SubgraphCover(g, {{0, 1}, {1, 2, 3}, {3, 4}}, {{0}, {2}, {4}});
}

}  // namespace

TEST(Cover, TriangleNerveIsComplete) {
  const NerveSkeleton n = build_nerve(triangle_cover());
  EXPECT_EQ(n.edges, (std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(Cover, SingleSubgraphHasNoEdges) {
  SubgraphCover c(Graph{2, {{0, 1}}}, {{0, 1}}, {{0}});
  const NerveSkeleton n = build_nerve(c);
  EXPECT_TRUE(n.edges.empty());
  const SpanningTree t = spanning_tree(n, c);
  EXPECT_TRUE(t.edges.empty());
  EXPECT_TRUE(t.complement.empty());
}

TEST(Cover, NerveMatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RandomInstanceSpec spec;
    spec.subgraphs = 8;
    spec.max_nodes = 200;
    const Instance inst = gen_random_quadratic(spec, seed);
    EXPECT_EQ(build_nerve(inst.cover).edges, oracle::brute_force_nerve(inst.cover)) << "seed " << seed;
  }
}

TEST(Cover, SpanningTreeEdgeCounts) {
  RandomInstanceSpec spec;
  spec.subgraphs = 12;
  spec.max_nodes = 400;
  spec.extra_edge_probability = 0.4;
  const Instance inst = gen_random_quadratic(spec, 5);
  const NerveSkeleton n = build_nerve(inst.cover);
  for (TreeStrategy s : {TreeStrategy::bfs, TreeStrategy::random, TreeStrategy::max_overlap}) {
    const SpanningTree t = spanning_tree(n, inst.cover, {s, 0, 3});
    EXPECT_EQ(t.edges.size(), 11u);
    EXPECT_EQ(t.complement.size(), n.edges.size() - 11);
  }
}

TEST(Cover, TriangleHasDistinctTreesEachLeavingOneEdge) {
  const SubgraphCover c = triangle_cover();
  const NerveSkeleton n = build_nerve(c);
  std::set<std::vector<std::pair<int, int>>> trees;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SpanningTree t = spanning_tree(n, c, {TreeStrategy::random, 0, seed});
    EXPECT_EQ(t.complement.size(), 1u);
    trees.insert(t.edges);
  }
  EXPECT_GE(trees.size(), 2u);
}

TEST(Cover, DisconnectedNerveIsRejected) {
  SubgraphCover c(Graph{4, {{0, 1}, {2, 3}}}, {{0, 1}, {2, 3}}, {{0}, {2}});
  EXPECT_THROW(spanning_tree(build_nerve(c), c), DisconnectedNerve);
}

TEST(Cover, PathDirectedTowardsRoot) {
  const SubgraphCover c = path_cover();
  const DirectedTree t = direct_tree(spanning_tree(build_nerve(c), c), 2);
  EXPECT_EQ(t.edges(), (std::vector<DirectedEdge>{{0, 1}, {1, 2}}));
  EXPECT_EQ(t.out_degree(2), 0);
  EXPECT_EQ(t.out_degree(0) + t.out_degree(1), 2);
}

TEST(Cover, TriangleTreeRootedAtFirst) {
  // Tree with edges (g2, g3), (g3, g1) in one-based naming.
  SpanningTree st{3, {{0, 2}, {1, 2}}, {{0, 1}}};
  const DirectedTree t(st, 0);
  EXPECT_EQ(t.parent(1), 2);
  EXPECT_EQ(t.parent(2), 0);
  EXPECT_EQ(t.parent(0), -1);
}

TEST(Cover, ExactlyOneRootHasNoOutgoingEdge) {
  const Instance inst = gen_random_quadratic({6, 40}, 8);
  const SpanningTree st = spanning_tree(build_nerve(inst.cover), inst.cover);
  for (int root = 0; root < inst.cover.size(); ++root) {
    const DirectedTree t(st, root);
    int roots = 0;
    for (int v = 0; v < t.size(); ++v) roots += t.out_degree(v) == 0;
    EXPECT_EQ(roots, 1);
  }
}

TEST(Cover, FixtureLeafPartition) {
  const Instance inst = fixture_eg32();
  const DirectedTree t = direct_tree(spanning_tree(build_nerve(inst.cover), inst.cover), 1);
  const EdgePartition p = partition_variables(inst.cover, t, {0, 1});
  EXPECT_EQ(p.s_vars, (NodeSet{0, 1}));
  EXPECT_EQ(p.x_vars, (NodeSet{3}));
  EXPECT_EQ(p.y_vars, (NodeSet{2}));
  EXPECT_TRUE(p.z_vars.empty());
}

TEST(Cover, LeafWithoutComplementNeighboursSendsIntersection) {
  const SubgraphCover c = path_cover();
  const DirectedTree t = direct_tree(spanning_tree(build_nerve(c), c), 2);
  const EdgePartition p = partition_variables(c, t, {0, 1});
  EXPECT_EQ(p.x_vars, set_intersection(c.subgraph(0), c.subgraph(1)));
}

TEST(Cover, PartitionsAreDisjointAndCoverHeldVariables) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Instance inst = gen_random_quadratic({6, 40}, seed);
    const SpanningTree st = spanning_tree(build_nerve(inst.cover), inst.cover);
    for (int root = 0; root < inst.cover.size(); ++root) {
      const DirectedTree t(st, root);
      std::map<NodeId, int> eliminated;
      for (const EdgePartition& p : partition_tree(inst.cover, t)) {
        const int i = p.edge.from;
        const NodeSet held = set_union(held_variables(inst.cover, t, i), inst.cover.observables(i));
        NodeSet all = set_union(set_union(p.s_vars, p.x_vars), set_union(p.y_vars, p.z_vars));
        EXPECT_EQ(all, held);
        EXPECT_EQ(all.size(), p.s_vars.size() + p.x_vars.size() + p.y_vars.size() + p.z_vars.size());
        EXPECT_TRUE(std::includes(inst.cover.subgraph(i).begin(), inst.cover.subgraph(i).end(),
                                  p.x_vars.begin(), p.x_vars.end()));
        for (NodeId v : p.y_vars) {
          EXPECT_FALSE(inst.cover.is_observable(v));
          ++eliminated[v];
          for (int k : inst.cover.containing(v)) EXPECT_TRUE(t.in_subtree(k, i));
        }
      }
      for (const auto& [v, count] : eliminated) EXPECT_EQ(count, 1) << "node " << v;
    }
  }
}

TEST(Cover, InvalidCoversAreRejected) {
  // Observable shared with another subgraph.
  EXPECT_THROW(SubgraphCover(Graph{3, {{0, 1}, {1, 2}}}, {{0, 1}, {1, 2}}, {{1}, {}}), InvalidInstance);
  // Node not covered.
  EXPECT_THROW(SubgraphCover(Graph{3, {{0, 1}}}, {{0, 1}}, {{}}), InvalidInstance);
  // Self loop.
  EXPECT_THROW(SubgraphCover(Graph{2, {{1, 1}}}, {{0, 1}}, {{}}), InvalidInstance);
  // No subgraphs.
  EXPECT_THROW(SubgraphCover(Graph{1, {}}, {}, {}), InvalidInstance);
}

TEST(Cover, NerveIsEquivariantUnderRelabeling) {
  const SubgraphCover c = path_cover();
  SubgraphCover r(c.graph(), {c.subgraph(2), c.subgraph(0), c.subgraph(1)},
                  {c.observables(2), c.observables(0), c.observables(1)});
  // old index -> new index: 2->0, 0->1, 1->2.
  const int to_new[3] = {1, 2, 0};
  std::set<std::pair<int, int>> mapped;
  for (auto [a, b] : build_nerve(c).edges) {
    const auto [lo, hi] = std::minmax(to_new[a], to_new[b]);
    mapped.emplace(lo, hi);
  }
  const auto edges = build_nerve(r).edges;
  const std::set<std::pair<int, int>> got(edges.begin(), edges.end());
  EXPECT_EQ(mapped, got);
}
