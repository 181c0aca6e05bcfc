#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nervemp/cover.hpp"
#include "nervemp/exactmp.hpp"
#include "nervemp/quadform.hpp"

namespace nervemp {

// A task applied to the constrained minimizer: either the linear map
// x -> Lx + d, or the optimal value of f itself.
class TaskSpec {
 public:
  enum class Kind { linear, objective_value };

  static TaskSpec linear(MatrixXd l, VectorXd d);
  static TaskSpec objective_value();

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ == Kind::linear; }
  const MatrixXd& L() const { return l_; }
  const VectorXd& d() const { return d_; }
  int codomain_dim() const { return kind_ == Kind::linear ? static_cast<int>(l_.rows()) : 1; }

  // Throws InvalidInstance if L does not have `node_count` columns.
  void validate(int node_count) const;

 private:
  Kind kind_ = Kind::objective_value;
  MatrixXd l_;
  VectorXd d_;
};

// s -> phi * s + offset.
struct GlobalProblemMap {
  MatrixXd phi;
  VectorXd offset;
  VectorXd apply(const VectorXd& s) const { return phi * s + offset; }
};

inline constexpr double kWellDefinedTolerance = 1e-8;

struct WellDefinedness {
  bool well_defined = true;
  // Kernel of the constrained minimizer set, rows indexed by V.
  MatrixXd kernel;
  // max |L K|; zero for the objective task.
  double violation = 0.0;
  // Kernel direction with the largest task response when ill-defined.
  VectorXd certificate;
};

WellDefinedness task_welldefined(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                 const TaskSpec& task);

// Linear tasks only. Throws IllDefinedTask when the task is not constant on
// the minimizer sets, ConfigError for the objective task (its global problem
// is quadratic in s, not affine).
GlobalProblemMap global_problem_map(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                    const TaskSpec& task);

struct JetConfig {
  int samples = 32;
  double rank_tolerance = 1e-8;
  double step = 1e-2;
  std::uint64_t seed = 0;
};

// How the leaf message's observation dependence varies, read off the
// coefficients (A, b, c) of the quadratic message. Quadratics are determined
// by their 2-jet, so no higher order is sampled.
struct JetProfile {
  int leaf = -1;
  int jet_rank = 0;               // d_jet
  int message_domain_dim = 0;     // |X_i| + |Z_i|
  int eliminated_count = 0;       // |Y_i|
  int free_dim = 0;               // |V_i| - |S_i|
  int coefficient_count = 0;
  int observable_count = 0;       // |S|
  int leaf_observable_count = 0;  // |S_i|
  std::vector<int> sample_ranks;
};

// Flattened message coefficients: upper triangle of A row by row, then b, then c.
VectorXd message_coefficients(const QuadFunc& message);

// Throws ConfigError if `leaf` is not a leaf of `tree`.
JetProfile jet_profile(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                       const DirectedTree& tree, int leaf, const JetConfig& config = {});

enum class BAlphaConvention {
  // d_jet minus the leaf's free-variable dimension |V_i| - |S_i|.
  free_domain,
  // d_jet minus the message domain dimension |X_i| + |Z_i|.
  message_domain,
  // d_jet alone: the jet image over the message domain has dimension
  // dim M + d_jet, so subtracting dim M leaves the observation dependence.
  jet_image,
};

int b_alpha(const JetProfile& profile, BAlphaConvention convention = BAlphaConvention::free_domain);

struct SolubilityReport {
  int leaf = -1;
  int receiver = -1;
  int leaf_observables = 0;  // |S_i|
  int jet_rank = 0;
  int free_dim = 0;
  int b_alpha = 0;
  int observables = 0;  // |S|
  int codomain_dim = 0;
  int lhs = 0;  // |S_i| - b_alpha
  int rhs = 0;  // |S| - dim M
  bool flag = false;
  // A flag on one spanning tree holds for every spanning tree.
  bool tree_independent = false;
  BAlphaConvention convention = BAlphaConvention::free_domain;
  std::optional<bool> direct_test;
  std::string note;
};

SolubilityReport insolubility_check(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                    const TaskSpec& task, const DirectedTree& tree, int leaf,
                                    const JetConfig& config = {},
                                    BAlphaConvention convention = BAlphaConvention::free_domain);

// Decides whether the root's local argmin (together with its own
// observations) determines the global problem through some linear map.
// The objective task is decided by comparing optimal values instead.
bool direct_solubility_test(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                            const TaskSpec& task, int root, const SpanningTree& tree,
                            std::uint64_t seed = 0);

}  // namespace nervemp
