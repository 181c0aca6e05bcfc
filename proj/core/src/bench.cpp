#include "nervemp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "nervemp/errors.hpp"
#include "nervemp/exactmp.hpp"
#include "nervemp/rng.hpp"

namespace nervemp {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool topology_connected(const NerveTopology& topo) {
  if (topo.size <= 1) return true;
  std::vector<std::vector<int>> adj(topo.size);
  for (const auto& [a, b] : topo.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> seen(topo.size, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int w : adj[u])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
  }
  return count == topo.size;
}

// Positive integer multiplicities on topology edges with per-node sums equal
// to the X counts. Greedy largest-residual pairing with random tie-breaks.
std::optional<std::vector<int>> allocate_shared(const std::vector<StatsRow>& rows,
                                                const NerveTopology& topo, Rng& rng) {
  const int t = static_cast<int>(rows.size());
  std::vector<int> weight(topo.edges.size(), 1);
  std::vector<int> residual(t);
  for (int i = 0; i < t; ++i) residual[i] = rows[i].x;
  std::vector<std::vector<int>> incident(t);
  for (std::size_t e = 0; e < topo.edges.size(); ++e) {
    const auto [a, b] = topo.edges[e];
    --residual[a];
    --residual[b];
    incident[a].push_back(static_cast<int>(e));
    incident[b].push_back(static_cast<int>(e));
  }
  for (int r : residual)
    if (r < 0) return std::nullopt;

  while (true) {
    int best = -1;
    for (int i = 0; i < t; ++i) {
      if (residual[i] <= 0) continue;
      if (best < 0 || residual[i] > residual[best] || (residual[i] == residual[best] && rng.uniform() < 0.5))
        best = i;
    }
    if (best < 0) return weight;
    int pick = -1, partner = -1;
    for (int e : incident[best]) {
      const auto [a, b] = topo.edges[e];
      const int other = a == best ? b : a;
      if (residual[other] <= 0) continue;
      if (pick < 0 || residual[other] > residual[partner] ||
          (residual[other] == residual[partner] && rng.uniform() < 0.5)) {
        pick = e;
        partner = other;
      }
    }
    if (pick < 0) return std::nullopt;
    ++weight[pick];
    --residual[best];
    --residual[partner];
  }
}

Graph path_edges_graph(int node_count, const std::vector<NodeSet>& subgraphs) {
  Graph g;
  g.node_count = node_count;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (const auto& vi : subgraphs)
    for (std::size_t k = 1; k < vi.size(); ++k) edges.emplace_back(vi[k - 1], vi[k]);
  for (auto& e : edges)
    if (e.first > e.second) std::swap(e.first, e.second);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

double rms(const VectorXd& v) { return v.size() ? std::sqrt(v.squaredNorm() / static_cast<double>(v.size())) : 0.0; }

}  // namespace

std::vector<StatsRow> table1_rows() {
  return {{4, 6, 12, 22},  {12, 4, 10, 26}, {6, 6, 14, 26},  {6, 8, 12, 26},
          {12, 6, 10, 28}, {14, 8, 6, 28},  {10, 4, 12, 26}, {8, 2, 14, 24},
          {6, 6, 12, 24},  {10, 6, 10, 26}, {4, 8, 13, 25},  {4, 8, 14, 26}};
}

std::vector<StatsRow> read_stats_csv(std::istream& in) {
  std::vector<StatsRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.find_first_of("0123456789") > line.find(',')) continue;  // header
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5)
      throw InvalidInstance("stats CSV line " + std::to_string(line_no) + ": expected 5 columns");
    try {
      rows.push_back({std::stoi(cells[1]), std::stoi(cells[2]), std::stoi(cells[3]), std::stoi(cells[4])});
    } catch (const std::exception&) {
      throw InvalidInstance("stats CSV line " + std::to_string(line_no) + ": non-integer cell");
    }
  }
  if (rows.empty()) throw InvalidInstance("stats CSV has no rows");
  return rows;
}

void write_stats_csv(std::ostream& out, const std::vector<StatsRow>& rows) {
  out << "subgraph,X,Y,S,V\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    out << "G" << (i + 1) << ',' << rows[i].x << ',' << rows[i].y << ',' << rows[i].s << ',' << rows[i].v << '\n';
}

std::vector<StatsRow> measure_stats(const SubgraphCover& cover) {
  std::vector<StatsRow> rows(cover.size());
  for (int i = 0; i < cover.size(); ++i) {
    StatsRow& r = rows[i];
    r.v = static_cast<int>(cover.subgraph(i).size());
    r.s = static_cast<int>(cover.observables(i).size());
    for (NodeId v : cover.subgraph(i)) {
      if (cover.containing(v).size() > 1)
        ++r.x;
      else if (!cover.is_observable(v))
        ++r.y;
    }
  }
  return rows;
}

NerveTopology random_topology(const std::vector<StatsRow>& rows, std::uint64_t seed) {
  const int t = static_cast<int>(rows.size());
  for (int attempt = 0; attempt < 200; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    NerveTopology topo;
    topo.size = t;
    std::vector<int> degree(t, 0);
    std::vector<int> order(t);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    bool ok = true;
    for (int k = 1; k < t && ok; ++k) {
      std::vector<int> candidates;
      for (int p = 0; p < k; ++p)
        if (degree[order[p]] < rows[order[p]].x) candidates.push_back(order[p]);
      if (candidates.empty() || rows[order[k]].x < 1) {
        ok = false;
        break;
      }
      const int parent = candidates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
      topo.edges.emplace_back(std::min(parent, order[k]), std::max(parent, order[k]));
      ++degree[parent];
      ++degree[order[k]];
    }
    if (!ok) continue;
    // Chords give the allocation room and make the tree complement non-empty;
    // later attempts add more of them.
    const int chords = t / 2 + attempt / 4;
    for (int c = 0, tries = 0; c < chords && tries < 50 * t; ++tries) {
      const int a = rng.uniform_int(0, t - 1), b = rng.uniform_int(0, t - 1);
      if (a == b) continue;
      const std::pair<int, int> e{std::min(a, b), std::max(a, b)};
      if (std::find(topo.edges.begin(), topo.edges.end(), e) != topo.edges.end()) continue;
      if (degree[a] >= rows[a].x || degree[b] >= rows[b].x) continue;
      topo.edges.push_back(e);
      ++degree[a];
      ++degree[b];
      ++c;
    }
    std::sort(topo.edges.begin(), topo.edges.end());
    for (int p = 0; p < 64; ++p) {
      Rng probe(derive_seed(seed, 0xa11c, static_cast<std::uint64_t>(p)));
      if (allocate_shared(rows, topo, probe)) return topo;
    }
  }
  throw InfeasibleStats("no connected topology admits the requested shared-node counts");
}

SubgraphCover cover_from_stats(const std::vector<StatsRow>& rows, const NerveTopology& topology,
                               std::uint64_t seed) {
  const int t = static_cast<int>(rows.size());
  if (t < 1) throw InfeasibleStats("no rows");
  if (topology.size != t) throw InfeasibleStats("topology size differs from the number of rows");
  for (int i = 0; i < t; ++i) {
    const StatsRow& r = rows[i];
    if (r.x < 0 || r.y < 0 || r.s < 0 || r.x + r.y + r.s != r.v)
      throw InfeasibleStats("row " + std::to_string(i) + ": X + Y + S must equal V");
  }
  for (const auto& [a, b] : topology.edges)
    if (a < 0 || b < 0 || a >= t || b >= t || a == b)
      throw InfeasibleStats("topology edge (" + std::to_string(a) + ", " + std::to_string(b) + ") is invalid");
  if (!topology_connected(topology)) throw InfeasibleStats("topology is not connected");

  std::optional<std::vector<int>> weights;
  for (int attempt = 0; attempt < 64 && !weights; ++attempt) {
    Rng rng(derive_seed(seed, 0xa11c, static_cast<std::uint64_t>(attempt)));
    weights = allocate_shared(rows, topology, rng);
  }
  if (!weights) throw InfeasibleStats("shared-node counts cannot be realised on this topology");

  std::vector<NodeSet> subgraphs(t), observables(t);
  NodeId next = 0;
  for (int i = 0; i < t; ++i) {
    for (int k = 0; k < rows[i].s; ++k) {
      observables[i].push_back(next);
      subgraphs[i].push_back(next++);
    }
    for (int k = 0; k < rows[i].y; ++k) subgraphs[i].push_back(next++);
  }
  for (std::size_t e = 0; e < topology.edges.size(); ++e) {
    const auto [a, b] = topology.edges[e];
    for (int k = 0; k < (*weights)[e]; ++k) {
      subgraphs[a].push_back(next);
      subgraphs[b].push_back(next++);
    }
  }
  Graph g = path_edges_graph(next, subgraphs);
  return SubgraphCover(std::move(g), std::move(subgraphs), std::move(observables));
}

Instance fixture_eg32() {
  // Node order s1, s2, y1, x, s3, s4, y2.
  Graph g;
  g.node_count = 7;
  g.edges = {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {3, 4}, {4, 5}, {5, 6}};
  SubgraphCover cover(std::move(g), {{0, 1, 2, 3}, {3, 4, 5, 6}}, {{0, 1}, {4, 5}});

  MatrixXd z(7, 3);
  z.col(0) << 1, 0, 1, 0, 1, 0, 1;
  z.col(1) << 0, 1, 0, 0, 0, 1, 0;
  z.col(2) << 1, 0, 0, 1, 1, 0, 0;
  std::vector<QuadFunc> quads;
  for (int i = 0; i < 2; ++i) {
    const NodeSet& vi = cover.subgraph(i);
    const std::vector<int> rows(vi.begin(), vi.end());
    quads.push_back(subspace_distance_quad(vi, z(rows, Eigen::all)));
  }
  MatrixXd l = MatrixXd::Zero(1, 7);
  l(0, 2) = 1.0;
  l(0, 6) = -1.0;
  VectorXd s(4);
  s << 1.0, 2.0, 3.0, 4.0;
  return Instance{"eg32", std::move(cover), std::move(quads), std::move(s),
                  TaskSpec::linear(std::move(l), VectorXd::Zero(1))};
}

Instance gen_random_quadratic(const RandomInstanceSpec& spec, std::uint64_t seed) {
  if (spec.subgraphs < 1) throw ConfigError("need at least one subgraph");
  Rng rng(seed);
  const int t = spec.subgraphs;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<std::pair<int, int>> nerve;
    for (int i = 1; i < t; ++i) nerve.emplace_back(rng.uniform_int(0, i - 1), i);
    for (int i = 0; i < t; ++i)
      for (int j = i + 1; j < t; ++j) {
        const std::pair<int, int> e{i, j};
        if (std::find(nerve.begin(), nerve.end(), e) == nerve.end() && rng.uniform() < spec.extra_edge_probability)
          nerve.push_back(e);
      }
    std::sort(nerve.begin(), nerve.end());

    std::vector<NodeSet> subgraphs(t), observables(t);
    NodeId next = 0;
    for (int i = 0; i < t; ++i) {
      const int obs = rng.uniform_int(0, 2);
      const int hidden = rng.uniform_int(1, 2);
      for (int k = 0; k < obs; ++k) {
        observables[i].push_back(next);
        subgraphs[i].push_back(next++);
      }
      for (int k = 0; k < hidden; ++k) subgraphs[i].push_back(next++);
    }
    for (const auto& [a, b] : nerve) {
      const int shared = rng.uniform_int(1, 2);
      for (int k = 0; k < shared; ++k) {
        subgraphs[a].push_back(next);
        subgraphs[b].push_back(next++);
      }
    }
    for (int a = 0; a < t; ++a)
      for (int b = a + 1; b < t; ++b)
        for (int c = b + 1; c < t; ++c) {
          auto has = [&](int p, int q) {
            return std::binary_search(nerve.begin(), nerve.end(), std::make_pair(p, q));
          };
          if (has(a, b) && has(b, c) && has(a, c) && rng.uniform() < 0.3) {
            subgraphs[a].push_back(next);
            subgraphs[b].push_back(next);
            subgraphs[c].push_back(next++);
          }
        }
    if (next > spec.max_nodes) continue;

    Graph g = path_edges_graph(next, subgraphs);
    SubgraphCover cover(std::move(g), std::move(subgraphs), std::move(observables));

    std::vector<QuadFunc> quads;
    for (int i = 0; i < t; ++i) {
      const NodeSet& vi = cover.subgraph(i);
      const int n = static_cast<int>(vi.size());
      const int rank = spec.rank_deficient ? std::max(1, n / 2) : n + 1;
      MatrixXd b(rank, n);
      for (int r = 0; r < rank; ++r)
        for (int c = 0; c < n; ++c) b(r, c) = rng.normal();
      const MatrixXd a = b.transpose() * b / static_cast<double>(rank);
      VectorXd w(n);
      for (int c = 0; c < n; ++c) w(c) = rng.normal();
      // b in range(A) keeps the minimum finite.
      const VectorXd lin = 2.0 * (a * w);
      quads.emplace_back(vi, a, lin, rng.uniform(-1.0, 1.0));
    }
    VectorXd obs(cover.observable_count());
    for (int k = 0; k < obs.size(); ++k) obs(k) = rng.normal();

    std::optional<TaskSpec> task = TaskSpec::objective_value();
    if (spec.task_rows > 0) {
      MatrixXd l(spec.task_rows, cover.node_count());
      for (int r = 0; r < l.rows(); ++r)
        for (int c = 0; c < l.cols(); ++c) l(r, c) = rng.normal();
      task = TaskSpec::linear(std::move(l), VectorXd::Zero(spec.task_rows));
    }
    return Instance{"random", std::move(cover), std::move(quads), std::move(obs), std::move(task)};
  }
  throw ConfigError("could not generate a cover within the node budget");
}

Instance gen_distributed_sampling(const SubgraphCover& cover, const SamplingSpec& spec,
                                  std::uint64_t seed) {
  const int n = cover.node_count();
  if (spec.k < 1 || spec.k > n) throw ConfigError("basis size k must satisfy 1 <= k <= |V|");
  if (spec.noise_fraction < 0.0) throw ConfigError("noise fraction must be non-negative");
  Rng rng(seed);
  MatrixXd z = MatrixXd::Zero(n, spec.k);
  for (int j = 0; j < spec.k; ++j) {
    if (spec.support == BasisSupport::dense) {
      for (int v = 0; v < n; ++v) z(v, j) = rng.normal();
    } else {
      const int home = rng.uniform_int(0, cover.size() - 1);
      for (NodeId v : cover.subgraph(home)) z(v, j) = rng.normal();
    }
  }

  std::vector<QuadFunc> quads;
  for (int i = 0; i < cover.size(); ++i) {
    const NodeSet& vi = cover.subgraph(i);
    const std::vector<int> rows(vi.begin(), vi.end());
    quads.push_back(subspace_distance_quad(vi, z(rows, Eigen::all)));
  }

  // Least-squares coefficients r = Z⁺ x.
  const MatrixXd l = z.completeOrthogonalDecomposition().pseudoInverse();

  VectorXd coeff(spec.k);
  for (int j = 0; j < spec.k; ++j) coeff(j) = rng.normal();
  const VectorXd signal = z * coeff;
  VectorXd obs(cover.observable_count());
  for (int k = 0; k < obs.size(); ++k) obs(k) = signal(cover.observable_order()[k]);
  const double sigma = spec.noise_fraction * (rms(obs) > 0.0 ? rms(obs) : 1.0);
  for (int k = 0; k < obs.size(); ++k) obs(k) += sigma * rng.normal();

  return Instance{"distributed-sampling", cover, std::move(quads), std::move(obs),
                  TaskSpec::linear(l, VectorXd::Zero(spec.k))};
}

std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec, SweepKind sweep,
                                             const std::vector<int>& points, int repeats,
                                             std::uint64_t seed, int threads) {
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (points.empty()) throw ConfigError("sweep needs at least one point");
  const NerveTopology topo = spec.topology.size > 0 ? spec.topology : random_topology(spec.rows, spec.cover_seed);
  const SubgraphCover cover = cover_from_stats(spec.rows, topo, spec.cover_seed);
  const DirectedTree tree(spanning_tree(build_nerve(cover), cover, spec.tree), spec.root);

  const std::size_t total = points.size() * static_cast<std::size_t>(repeats);
  std::vector<ExperimentRecord> records(total);
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::size_t idx = cursor++; idx < total; idx = cursor++) {
      try {
        const std::size_t p = idx / static_cast<std::size_t>(repeats);
        const std::size_t rep = idx % static_cast<std::size_t>(repeats);
        SamplingSpec sampling = spec.sampling;
        ApproxConfig approx = spec.approx;
        if (sweep == SweepKind::k)
          sampling.k = points[p];
        else
          approx.samples = points[p];
        // The instance seed depends only on (k, repeat), so an m sweep reuses
        // the same instances at every sample count.
        const std::uint64_t run_seed =
            derive_seed(seed, static_cast<std::uint64_t>(sampling.k), static_cast<std::uint64_t>(rep));
        approx.seed = derive_seed(run_seed, 0xa770, static_cast<std::uint64_t>(approx.samples));

        const auto start = std::chrono::steady_clock::now();
        const Instance inst = gen_distributed_sampling(cover, sampling, run_seed);
        ExperimentRecord rec;
        rec.k = sampling.k;
        rec.m = approx.samples;
        rec.seed = run_seed;
        rec.exact_value = local_solve(run_message_passing(cover, inst.quads, inst.observations, tree)).value;
        rec.truth_value = centralized_solve(cover, inst.quads, inst.observations).value;
        rec.approx_value = approx_message_passing(cover, inst.quads, inst.observations, tree, approx).value;
        rec.r_percent = error_ratio(rec.approx_value, rec.truth_value);
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        records[idx] = rec;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(total)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

std::vector<SweepAggregate> aggregate(const std::vector<ExperimentRecord>& records, SweepKind sweep) {
  std::vector<SweepAggregate> out;
  for (const auto& r : records) {
    const int point = sweep == SweepKind::k ? r.k : r.m;
    auto it = std::find_if(out.begin(), out.end(), [&](const SweepAggregate& a) { return a.sweep_point == point; });
    if (it == out.end()) {
      out.push_back({point, 0.0, 0.0, 0});
      it = out.end() - 1;
    }
    it->mean_r += r.r_percent;
    ++it->n;
  }
  for (auto& a : out) a.mean_r /= a.n;
  for (const auto& r : records) {
    const int point = sweep == SweepKind::k ? r.k : r.m;
    auto it = std::find_if(out.begin(), out.end(), [&](const SweepAggregate& a) { return a.sweep_point == point; });
    it->std_r += (r.r_percent - it->mean_r) * (r.r_percent - it->mean_r);
  }
  for (auto& a : out) a.std_r = a.n > 1 ? std::sqrt(a.std_r / (a.n - 1)) : 0.0;
  return out;
}

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records, bool include_wall_time) {
  out << "k,m,seed,exact_value,approx_value,R_percent,wall_ms\n";
  for (const auto& r : records)
    out << r.k << ',' << r.m << ',' << r.seed << ',' << fmt_double(r.exact_value) << ','
        << fmt_double(r.approx_value) << ',' << fmt_double(r.r_percent) << ','
        << (include_wall_time ? fmt_double(r.wall_ms) : std::string("0")) << '\n';
}

void write_aggregate_csv(std::ostream& out, const std::vector<SweepAggregate>& rows) {
  out << "sweep_point,mean_R,std_R,n\n";
  for (const auto& a : rows)
    out << a.sweep_point << ',' << fmt_double(a.mean_r) << ',' << fmt_double(a.std_r) << ',' << a.n << '\n';
}

}  // namespace nervemp
