#include "nervemp/exactmp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nervemp/errors.hpp"
#include "nervemp/rng.hpp"

namespace nervemp {

namespace {

void check_inputs(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                  const VectorXd& observations) {
  if (static_cast<int>(quads.size()) != cover.size()) {
    std::ostringstream os;
    os << quads.size() << " local functions for " << cover.size() << " subgraphs";
    throw InvalidInstance(os.str());
  }
  if (observations.size() != cover.observable_count()) {
    std::ostringstream os;
    os << "observation vector has length " << observations.size() << ", expected "
       << cover.observable_count();
    throw DimensionMismatch(os.str());
  }
}

}  // namespace

const EdgeMessage* MessagePassingRun::message_from(int node) const {
  for (const auto& e : edges)
    if (e.partition.edge.from == node) return &e;
  return nullptr;
}

Assignment observation_assignment(const SubgraphCover& cover, const VectorXd& observations, int i) {
  Assignment a;
  for (NodeId v : cover.observables(i)) a.emplace(v, observations(cover.observable_position(v)));
  return a;
}

QuadFunc local_function(const SubgraphCover& cover, const QuadFunc& f, const VectorXd& observations,
                        int i) {
  return fix_vars(embed(f, cover.subgraph(i)), observation_assignment(cover, observations, i));
}

MessagePassingRun run_message_passing(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                      const VectorXd& observations, const DirectedTree& tree) {
  check_inputs(cover, quads, observations);
  MessagePassingRun run;
  run.tree = tree;
  std::vector<EdgePartition> partitions = partition_tree(cover, tree);

  std::vector<QuadFunc> held(cover.size());
  for (int i = 0; i < cover.size(); ++i) held[i] = local_function(cover, quads[i], observations, i);

  std::size_t next = 0;
  for (int node : tree.post_order()) {
    // held[node] already contains the local function; children arrive in
    // ascending order because post order visits them that way.
    for (int child : tree.children(node)) {
      const EdgeMessage* incoming = nullptr;
      for (const auto& e : run.edges)
        if (e.partition.edge.from == child) incoming = &e;
      held[node] = add(held[node], incoming->message);
    }
    if (node == tree.root()) continue;

    EdgePartition& p = partitions[next++];
    try {
      PartialMinimum pm = partial_minimize(held[node], p.y_vars);
      run.edges.push_back({std::move(p), std::move(pm.message), std::move(pm.argmin),
                           pm.block_min_eigenvalue});
    } catch (const UnboundedBelow& e) {
      std::ostringstream os;
      os << "message on edge " << node << "->" << tree.parent(node) << ": " << e.what();
      throw UnboundedBelow(os.str());
    }
    ++run.messages_sent;
  }
  run.aggregated = std::move(held[tree.root()]);
  run.retained = set_difference(run.aggregated.vars(), cover.subgraph(tree.root()));
  return run;
}

LocalSolution local_solve(const MessagePassingRun& run) {
  const GlobalMinimum gm = global_minimize(run.aggregated);
  return {gm.value, run.aggregated.vars(), gm.minimizer, gm.kernel};
}

VectorXd back_substitute(const SubgraphCover& cover, const MessagePassingRun& run,
                         const VectorXd& observations, const LocalSolution& root) {
  if (root.kernel.cols() > 0)
    throw NonUniqueArgmin("the aggregated message has a non-trivial minimizer set");
  for (const auto& e : run.edges)
    if (e.argmin.singular) {
      std::ostringstream os;
      os << "elimination on edge " << e.partition.edge.from << "->" << e.partition.edge.to
         << " had a singular block";
      throw NonUniqueArgmin(os.str());
    }

  VectorXd x = VectorXd::Zero(cover.node_count());
  for (int k = 0; k < cover.observable_count(); ++k) x(cover.observable_order()[k]) = observations(k);
  for (std::size_t k = 0; k < root.vars.size(); ++k) x(root.vars[k]) = root.minimizer(static_cast<Eigen::Index>(k));

  for (auto it = run.edges.rbegin(); it != run.edges.rend(); ++it) {
    const ArgminMap& map = it->argmin;
    VectorXd in(static_cast<Eigen::Index>(map.inputs.size()));
    for (std::size_t k = 0; k < map.inputs.size(); ++k) in(static_cast<Eigen::Index>(k)) = x(map.inputs[k]);
    const VectorXd y = map.apply(in);
    for (std::size_t k = 0; k < map.eliminated.size(); ++k) x(map.eliminated[k]) = y(static_cast<Eigen::Index>(k));
  }
  return x;
}

CentralSolution centralized_solve(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                  const VectorXd& observations) {
  check_inputs(cover, quads, observations);
  NodeSet all(cover.node_count());
  for (NodeId v = 0; v < cover.node_count(); ++v) all[v] = v;
  QuadFunc f = QuadFunc::zero(all);
  for (const auto& q : quads) f = add(f, embed(q, all));

  Assignment s;
  for (int k = 0; k < cover.observable_count(); ++k) s.emplace(cover.observable_order()[k], observations(k));
  const QuadFunc free_part = fix_vars(f, s);
  const GlobalMinimum gm = global_minimize(free_part);

  CentralSolution out;
  out.value = gm.value;
  out.minimizer = VectorXd::Zero(cover.node_count());
  for (const auto& [v, value] : s) out.minimizer(v) = value;
  out.kernel = MatrixXd::Zero(cover.node_count(), gm.kernel.cols());
  for (std::size_t k = 0; k < free_part.vars().size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    out.minimizer(free_part.vars()[k]) = gm.minimizer(row);
    out.kernel.row(free_part.vars()[k]) = gm.kernel.row(row);
  }
  return out;
}

std::vector<QuadFunc> regularize(const std::vector<QuadFunc>& quads, double eps, std::uint64_t seed) {
  if (!(eps > 0.0)) throw ConfigError("regularization strength must be positive");
  std::vector<QuadFunc> out;
  out.reserve(quads.size());
  for (std::size_t i = 0; i < quads.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    MatrixXd a = quads[i].A();
    for (Eigen::Index k = 0; k < a.rows(); ++k) a(k, k) += rng.uniform_left_open(0.5 * eps, eps);
    out.emplace_back(quads[i].vars(), std::move(a), quads[i].b(), quads[i].c());
  }
  return out;
}

double relative_gap(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace nervemp
