#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "nervemp/bench.hpp"
#include "nervemp/errors.hpp"
#include "nervemp/exactmp.hpp"
#include "nervemp/rng.hpp"
#include "oracles.hpp"

using namespace nervemp;

TEST(Stats, DataFileMatchesBuiltInTable) {
  std::ifstream f(NERVEMP_DATA_DIR "/table1.csv");
  ASSERT_TRUE(f.good());
  EXPECT_EQ(read_stats_csv(f), table1_rows());
  EXPECT_EQ(table1_rows().front(), (StatsRow{4, 6, 12, 22}));
}

TEST(Stats, CsvRoundTrip) {
  std::stringstream ss;
  write_stats_csv(ss, table1_rows());
  EXPECT_EQ(ss.str().substr(0, 17), "subgraph,X,Y,S,V\n");
  EXPECT_EQ(read_stats_csv(ss), table1_rows());
  std::istringstream bad("a,1,2,3\n");
  EXPECT_THROW(read_stats_csv(bad), InvalidInstance);
}

TEST(Stats, GeneratedCoverReproducesEveryRow) {
  const auto rows = table1_rows();
  for (std::uint64_t seed : {1, 2, 3}) {
    const NerveTopology topo = random_topology(rows, seed);
    const SubgraphCover cover = cover_from_stats(rows, topo, seed);
    EXPECT_EQ(measure_stats(cover), rows) << "seed " << seed;
    auto edges = build_nerve(cover).edges;
    auto want = topo.edges;
    for (auto& [a, b] : want)
      if (a > b) std::swap(a, b);
    std::sort(want.begin(), want.end());
    EXPECT_EQ(edges, want);
  }
}

TEST(Stats, SingleRowIsTrivial) {
  const std::vector<StatsRow> rows{{0, 3, 2, 5}};
  const SubgraphCover cover = cover_from_stats(rows, random_topology(rows, 1), 1);
  EXPECT_EQ(cover.size(), 1);
  EXPECT_EQ(measure_stats(cover), rows);
}

TEST(Stats, InconsistentRowsAreInfeasible) {
  const std::vector<StatsRow> sum_off{{1, 1, 1, 4}, {1, 1, 1, 3}};
  EXPECT_THROW(cover_from_stats(sum_off, {2, {{0, 1}}}, 1), InfeasibleStats);
  // A lone subgraph cannot share nodes with anyone.
  const std::vector<StatsRow> lonely{{2, 1, 1, 4}};
  EXPECT_THROW(cover_from_stats(lonely, {1, {}}, 1), InfeasibleStats);
  // Disconnected topology.
  const std::vector<StatsRow> pair{{0, 1, 1, 2}, {0, 1, 1, 2}};
  EXPECT_THROW(cover_from_stats(pair, {2, {}}, 1), InfeasibleStats);
}

TEST(Fixture, BytesArePinned) {
  const std::string text = instance_to_json(fixture_eg32());
  EXPECT_EQ(fnv1a64(text), 0x9790bc41daf6fcb4ULL) << std::hex << fnv1a64(text);
}

TEST(Fixture, MatchesPrintedVectors) {
  const Instance inst = fixture_eg32();
  EXPECT_EQ(inst.cover.node_count(), 7);
  EXPECT_EQ(inst.cover.subgraph(0), (NodeSet{0, 1, 2, 3}));
  EXPECT_EQ(inst.cover.subgraph(1), (NodeSet{3, 4, 5, 6}));
  const VectorXd v1 = (VectorXd(7) << 1, 0, 1, 0, 1, 0, 1).finished();
  const VectorXd v2 = (VectorXd(7) << 0, 1, 0, 0, 0, 1, 0).finished();
  const VectorXd v3 = (VectorXd(7) << 1, 0, 0, 1, 1, 0, 0).finished();
  for (const VectorXd& v : {v1, v2, v3, VectorXd(v1 - 2.0 * v3)})
    for (int i = 0; i < 2; ++i) {
      const std::vector<int> idx(inst.cover.subgraph(i).begin(), inst.cover.subgraph(i).end());
      EXPECT_NEAR(inst.quads[i].evaluate(v(idx)), 0.0, 1e-12);
    }
  // A vector outside the span is penalised somewhere.
  const VectorXd off = (VectorXd(7) << 0, 0, 1, 0, 0, 0, 0).finished();
  const std::vector<int> idx0(inst.cover.subgraph(0).begin(), inst.cover.subgraph(0).end());
  EXPECT_GT(inst.quads[0].evaluate(off(idx0)), 1e-3);
}

TEST(Instances, RoundTripBitExact) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RandomInstanceSpec spec;
    spec.task_rows = 2;
    const Instance a = gen_random_quadratic(spec, seed);
    const std::string text = instance_to_json(a);
    const Instance b = instance_from_json(text);
    EXPECT_EQ(instance_to_json(b), text);
    EXPECT_EQ(a.observations, b.observations);
    for (std::size_t i = 0; i < a.quads.size(); ++i) EXPECT_EQ(a.quads[i].A(), b.quads[i].A());
  }
  const Instance s = gen_distributed_sampling(cover_from_stats(table1_rows(), random_topology(table1_rows(), 2), 2),
                                              {30, 0.05, BasisSupport::local}, 4);
  EXPECT_EQ(instance_to_json(instance_from_json(instance_to_json(s))), instance_to_json(s));
}

TEST(Instances, MalformedJsonIsInvalid) {
  EXPECT_THROW(instance_from_json("{"), InvalidInstance);
  EXPECT_THROW(instance_from_json("{\"graph\": 3}"), InvalidInstance);
}

TEST(Instances, GeneratorsArePure) {
  EXPECT_EQ(instance_to_json(gen_random_quadratic({6, 40}, 9)), instance_to_json(gen_random_quadratic({6, 40}, 9)));
  EXPECT_NE(instance_to_json(gen_random_quadratic({6, 40}, 9)), instance_to_json(gen_random_quadratic({6, 40}, 10)));
  const auto rows = table1_rows();
  const SubgraphCover c = cover_from_stats(rows, random_topology(rows, 5), 5);
  EXPECT_EQ(instance_to_json(gen_distributed_sampling(c, {25, 0.05, BasisSupport::dense}, 3)),
            instance_to_json(gen_distributed_sampling(c, {25, 0.05, BasisSupport::dense}, 3)));
}

TEST(Sampling, NoiselessObservationsHaveZeroMinimum) {
  const auto rows = table1_rows();
  const SubgraphCover c = cover_from_stats(rows, random_topology(rows, 1), 1);
  for (BasisSupport support : {BasisSupport::dense, BasisSupport::local}) {
    const Instance inst = gen_distributed_sampling(c, {25, 0.0, support}, 7);
    EXPECT_NEAR(oracle::dense_minimum(c, inst.quads, inst.observations).value, 0.0, 1e-8);
    EXPECT_NEAR(centralized_solve(c, inst.quads, inst.observations).value, 0.0, 1e-8);
  }
}

TEST(Sampling, FullDenseBasisMakesEveryTermVanish) {
  Graph g{6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}};
  const SubgraphCover c(g, {{0, 1, 2, 3}, {2, 3, 4, 5}}, {{0}, {5}});
  const Instance inst = gen_distributed_sampling(c, {6, 0.05, BasisSupport::dense}, 2);
  for (const QuadFunc& q : inst.quads) {
    EXPECT_LE(q.A().cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(q.b().cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Sampling, TermsAreResidualProjectors) {
  const auto rows = table1_rows();
  const SubgraphCover c = cover_from_stats(rows, random_topology(rows, 1), 1);
  const Instance inst = gen_distributed_sampling(c, {30, 0.05, BasisSupport::dense}, 1);
  for (const QuadFunc& q : inst.quads) EXPECT_LE((q.A() * q.A() - q.A()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(inst.task->L().rows(), 30);
  EXPECT_THROW(gen_distributed_sampling(c, {0, 0.05, BasisSupport::dense}, 1), ConfigError);
}

TEST(Experiment, QuadraticSurrogatesGiveNoError) {
  ExperimentSpec spec;
  spec.approx.kind = SurrogateKind::quadratic_ls;
  const auto records = run_experiment(spec, SweepKind::k, {25, 50}, 1, 3, 2);
  ASSERT_EQ(records.size(), 2u);
  for (const auto& r : records) {
    EXPECT_LE(r.r_percent, 1e-3) << "k " << r.k;
    EXPECT_EQ(r.m, 80);
  }
  EXPECT_EQ(records[0].k, 25);
  EXPECT_EQ(records[1].k, 50);
}

TEST(Experiment, ThreadCountDoesNotChangeRecords) {
  ExperimentSpec spec;
  const auto one = run_experiment(spec, SweepKind::m, {20, 40}, 2, 8, 1);
  const auto many = run_experiment(spec, SweepKind::m, {20, 40}, 2, 8, 3);
  std::stringstream a, b;
  write_records_csv(a, one, false);
  write_records_csv(b, many, false);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Experiment, CsvLayout) {
  std::vector<ExperimentRecord> recs{{25, 80, 1, 1.0, 1.0, 1.05, 5.0, 3.5}, {25, 80, 2, 2.0, 2.0, 2.0, 0.0, 1.0}};
  std::stringstream rec;
  write_records_csv(rec, recs, false);
  std::string header;
  std::getline(rec, header);
  EXPECT_EQ(header, "k,m,seed,exact_value,approx_value,R_percent,wall_ms");
  std::string first;
  std::getline(rec, first);
  EXPECT_EQ(first.substr(first.rfind(',') + 1), "0");

  const auto agg = aggregate(recs, SweepKind::k);
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_EQ(agg[0].n, 2);
  EXPECT_NEAR(agg[0].mean_r, 2.5, 1e-12);
  EXPECT_NEAR(agg[0].std_r, std::sqrt(12.5), 1e-12);
  std::stringstream out;
  write_aggregate_csv(out, agg);
  std::getline(out, header);
  EXPECT_EQ(header, "sweep_point,mean_R,std_R,n");
}
