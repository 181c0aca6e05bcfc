#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nervemp/cover.hpp"
#include "nervemp/instance_io.hpp"
#include "nervemp/surrogate.hpp"

namespace nervemp {

// Per-subgraph intersection statistics: shared nodes, exclusive hidden
// nodes, exclusive observable nodes and total size.
struct StatsRow {
  int x = 0;
  int y = 0;
  int s = 0;
  int v = 0;
  friend bool operator==(const StatsRow&, const StatsRow&) = default;
};

// The 12-subgraph statistics used by the distributed-sampling experiment.
std::vector<StatsRow> table1_rows();

// CSV with header `subgraph,X,Y,S,V`.
std::vector<StatsRow> read_stats_csv(std::istream& in);
void write_stats_csv(std::ostream& out, const std::vector<StatsRow>& rows);

// Re-measures a cover: X = nodes shared with another subgraph, Y = exclusive
// non-observable nodes, S = observables, V = |V_i|.
std::vector<StatsRow> measure_stats(const SubgraphCover& cover);

struct NerveTopology {
  int size = 0;
  std::vector<std::pair<int, int>> edges;
};

// Seeded random connected topology on rows.size() nodes in which every node's
// degree is at most its X count (so a shared-node allocation can exist).
NerveTopology random_topology(const std::vector<StatsRow>& rows, std::uint64_t seed);

// Builds a cover matching `rows` whose nerve is exactly `topology`. Every
// shared node lies in exactly two subgraphs. Throws InfeasibleStats when no
// allocation is found.
SubgraphCover cover_from_stats(const std::vector<StatsRow>& rows, const NerveTopology& topology,
                               std::uint64_t seed);

// The 7-node two-subgraph instance with basis vectors v1, v2, v3 and the
// task y1 - y2. Node order: s1, s2, y1, x, s3, s4, y2.
Instance fixture_eg32();

struct RandomInstanceSpec {
  int subgraphs = 4;
  int max_nodes = 40;
  // When true, each local function has rank about half its dimension.
  bool rank_deficient = false;
  // Rows of a random linear task; 0 means the objective task.
  int task_rows = 0;
  double extra_edge_probability = 0.3;
};

// Random cover with a connected nerve (some shared nodes lie in three
// subgraphs), random convex quadratics with bounded minima, and random
// observations.
Instance gen_random_quadratic(const RandomInstanceSpec& spec, std::uint64_t seed);

enum class BasisSupport {
  dense,  // every z_j is standard normal on all of V
  local,  // z_j is standard normal on the nodes of one random subgraph
};

struct SamplingSpec {
  int k = 25;
  // Noise standard deviation as a fraction of the RMS clean signal on S.
  double noise_fraction = 0.05;
  BasisSupport support = BasisSupport::dense;
};

// f_i = squared distance to span{z_j|V_i}; task = least-squares coefficients
// of x on z_1..z_k; observations = a random combination restricted to S plus
// Gaussian noise.
Instance gen_distributed_sampling(const SubgraphCover& cover, const SamplingSpec& spec,
                                  std::uint64_t seed);

enum class SweepKind { k, m };

struct ExperimentSpec {
  std::vector<StatsRow> rows = table1_rows();
  // Topology used when `topology` is empty: random_topology(rows, seed).
  NerveTopology topology;
  std::uint64_t cover_seed = 1;
  SamplingSpec sampling{50, 0.05, BasisSupport::local};
  int root = 0;
  TreeChoice tree{};
  ApproxConfig approx{};
};

struct ExperimentRecord {
  int k = 0;
  int m = 0;
  std::uint64_t seed = 0;
  double exact_value = 0.0;
  double truth_value = 0.0;
  double approx_value = 0.0;
  double r_percent = 0.0;
  double wall_ms = 0.0;
};

struct SweepAggregate {
  int sweep_point = 0;
  double mean_r = 0.0;
  double std_r = 0.0;
  int n = 0;
};

// For each sweep point and repeat: generate, run exact and approximate
// message passing, and record the error ratio against the centralized
// optimum. Records are ordered by (sweep point, repeat) regardless of
// `threads`.
std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec, SweepKind sweep,
                                             const std::vector<int>& points, int repeats,
                                             std::uint64_t seed, int threads = 1);

std::vector<SweepAggregate> aggregate(const std::vector<ExperimentRecord>& records, SweepKind sweep);

// `k,m,seed,exact_value,approx_value,R_percent,wall_ms`
void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records,
                       bool include_wall_time = true);
// `sweep_point,mean_R,std_R,n`
void write_aggregate_csv(std::ostream& out, const std::vector<SweepAggregate>& rows);

}  // namespace nervemp
