#pragma once

#include <cstdint>
#include <vector>

#include "nervemp/cover.hpp"
#include "nervemp/quadform.hpp"

namespace nervemp {

// One message per tree edge: the held function at the tail with its
// y-variables minimized out.
struct EdgeMessage {
  EdgePartition partition;
  QuadFunc message;
  ArgminMap argmin;
  double block_min_eigenvalue = 0.0;
};

struct MessagePassingRun {
  DirectedTree tree;
  // In post order of the tail node.
  std::vector<EdgeMessage> edges;
  // h_g: root function plus every incoming message.
  QuadFunc aggregated;
  // Variables of h_g outside V_root (forwarded z-variables kept free at the root).
  NodeSet retained;
  int messages_sent = 0;

  // The message emitted by `node`, or nullptr for the root.
  const EdgeMessage* message_from(int node) const;
};

struct LocalSolution {
  double value = 0.0;
  NodeSet vars;
  VectorXd minimizer;
  MatrixXd kernel;
};

struct CentralSolution {
  double value = 0.0;
  // Full signal over V with observations in place.
  VectorXd minimizer;
  // Rows indexed by V; rows of observable nodes are zero.
  MatrixXd kernel;
};

// Observation values of S_i taken from an observation vector laid out in
// cover.observable_order().
Assignment observation_assignment(const SubgraphCover& cover, const VectorXd& observations, int i);

// f_i embedded over V_i with its observations substituted.
QuadFunc local_function(const SubgraphCover& cover, const QuadFunc& f, const VectorXd& observations,
                        int i);

// Exact message passing along `tree`. Children are summed in ascending index
// order so results are bit-stable. UnboundedBelow names the offending edge.
MessagePassingRun run_message_passing(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                      const VectorXd& observations, const DirectedTree& tree);

LocalSolution local_solve(const MessagePassingRun& run);

// Replays the argmin maps from the root outward. Throws NonUniqueArgmin when
// any elimination block (or the root problem) was singular.
VectorXd back_substitute(const SubgraphCover& cover, const MessagePassingRun& run,
                         const VectorXd& observations, const LocalSolution& root);

CentralSolution centralized_solve(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                  const VectorXd& observations);

// Adds sum_v a_v v² to every function with a_v ~ U(eps/2, eps], drawn
// independently per function and variable.
std::vector<QuadFunc> regularize(const std::vector<QuadFunc>& quads, double eps, std::uint64_t seed);

// |a - b| / max(1, |a|, |b|).
double relative_gap(double a, double b);

}  // namespace nervemp
