#include "nervemp/solubility.hpp"

#include <algorithm>
#include <sstream>

#include "nervemp/errors.hpp"
#include "nervemp/rng.hpp"

namespace nervemp {

namespace {

int numerical_rank(const MatrixXd& m, double relative_tol, double floor = 0.0) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const VectorXd& sv = svd.singularValues();
  const double tol = std::max(relative_tol * sv(0), floor);
  int r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > tol) ++r;
  return r;
}

QuadFunc global_objective(const SubgraphCover& cover, const std::vector<QuadFunc>& quads) {
  NodeSet all(cover.node_count());
  for (NodeId v = 0; v < cover.node_count(); ++v) all[v] = v;
  QuadFunc f = QuadFunc::zero(all);
  for (const auto& q : quads) f = add(f, embed(q, all));
  return f;
}

// Affine response of the minimum-norm constrained minimizer to the
// observations: x̂(s) = R s + r0 over all of V.
std::pair<MatrixXd, VectorXd> minimizer_response(const SubgraphCover& cover,
                                                 const std::vector<QuadFunc>& quads) {
  const QuadFunc f = global_objective(cover, quads);
  const NodeSet free = cover.free_nodes();
  std::vector<int> fi(free.begin(), free.end());
  std::vector<int> si(cover.observable_order().begin(), cover.observable_order().end());

  const MatrixXd pinv = symmetric_pinv(f.A()(fi, fi));
  const MatrixXd x_s = -pinv * f.A()(fi, si);
  const VectorXd x_0 = -0.5 * (pinv * f.b()(fi));

  MatrixXd r = MatrixXd::Zero(cover.node_count(), cover.observable_count());
  VectorXd r0 = VectorXd::Zero(cover.node_count());
  for (int k = 0; k < cover.observable_count(); ++k) r(si[k], k) = 1.0;
  for (std::size_t k = 0; k < fi.size(); ++k) {
    r.row(fi[k]) = x_s.row(static_cast<Eigen::Index>(k));
    r0(fi[k]) = x_0(static_cast<Eigen::Index>(k));
  }
  return {r, r0};
}

QuadFunc leaf_message(const SubgraphCover& cover, const QuadFunc& f, const EdgePartition& p,
                      const VectorXd& observations, int leaf) {
  return partial_minimize(local_function(cover, f, observations, leaf), p.y_vars).message;
}

}  // namespace

TaskSpec TaskSpec::linear(MatrixXd l, VectorXd d) {
  if (d.size() != l.rows()) {
    std::ostringstream os;
    os << "task offset has length " << d.size() << " for " << l.rows() << " task rows";
    throw DimensionMismatch(os.str());
  }
  TaskSpec t;
  t.kind_ = Kind::linear;
  t.l_ = std::move(l);
  t.d_ = std::move(d);
  return t;
}

TaskSpec TaskSpec::objective_value() { return TaskSpec{}; }

void TaskSpec::validate(int node_count) const {
  if (kind_ == Kind::linear && l_.cols() != node_count) {
    std::ostringstream os;
    os << "task matrix has " << l_.cols() << " columns for a graph with " << node_count << " nodes";
    throw InvalidInstance(os.str());
  }
}

WellDefinedness task_welldefined(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                 const TaskSpec& task) {
  task.validate(cover.node_count());
  // The kernel of the constrained problem does not depend on s; s = 0 also
  // surfaces UnboundedBelow for a linear term outside the range.
  const CentralSolution central =
      centralized_solve(cover, quads, VectorXd::Zero(cover.observable_count()));
  WellDefinedness out;
  out.kernel = central.kernel;
  if (!task.is_linear() || out.kernel.cols() == 0) return out;

  const MatrixXd response = task.L() * out.kernel;
  Eigen::Index row = 0, col = 0;
  out.violation = response.cwiseAbs().maxCoeff(&row, &col);
  if (out.violation > kWellDefinedTolerance) {
    out.well_defined = false;
    out.certificate = out.kernel.col(col);
  }
  return out;
}

GlobalProblemMap global_problem_map(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                    const TaskSpec& task) {
  if (!task.is_linear())
    throw ConfigError("the objective task has a quadratic, not affine, global problem");
  const WellDefinedness wd = task_welldefined(cover, quads, task);
  if (!wd.well_defined) {
    std::ostringstream os;
    os << "task varies by " << wd.violation << " along the minimizer set";
    throw IllDefinedTask(os.str());
  }
  const auto [r, r0] = minimizer_response(cover, quads);
  return {task.L() * r, task.L() * r0 + task.d()};
}

VectorXd message_coefficients(const QuadFunc& message) {
  const int n = message.dim();
  VectorXd out(n * (n + 1) / 2 + n + 1);
  Eigen::Index k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out(k++) = message.A()(i, j);
  out.segment(k, n) = message.b();
  out(k + n) = message.c();
  return out;
}

JetProfile jet_profile(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                       const DirectedTree& tree, int leaf, const JetConfig& config) {
  if (leaf < 0 || leaf >= tree.size() || !tree.is_leaf(leaf)) {
    std::ostringstream os;
    os << "node " << leaf << " is not a leaf of the directed tree";
    throw ConfigError(os.str());
  }
  if (config.samples < 1) throw ConfigError("jet profile needs at least one sample");
  const EdgePartition p = partition_variables(cover, tree, {leaf, tree.parent(leaf)});
  const QuadFunc& f = quads.at(leaf);
  const int s_count = cover.observable_count();

  JetProfile out;
  out.leaf = leaf;
  out.message_domain_dim = static_cast<int>(p.x_vars.size() + p.z_vars.size());
  out.eliminated_count = static_cast<int>(p.y_vars.size());
  out.free_dim = static_cast<int>(cover.subgraph(leaf).size() - cover.observables(leaf).size());
  out.observable_count = s_count;
  out.leaf_observable_count = static_cast<int>(cover.observables(leaf).size());
  const int m = out.message_domain_dim;
  out.coefficient_count = m * (m + 1) / 2 + m + 1;

  Rng rng(config.seed);
  for (int sample = 0; sample < config.samples; ++sample) {
    VectorXd s(s_count);
    for (int k = 0; k < s_count; ++k) s(k) = rng.uniform(-1.0, 1.0);
    MatrixXd jac(out.coefficient_count, s_count);
    for (int k = 0; k < s_count; ++k) {
      VectorXd up = s, down = s;
      up(k) += config.step;
      down(k) -= config.step;
      jac.col(k) = (message_coefficients(leaf_message(cover, f, p, up, leaf)) -
                    message_coefficients(leaf_message(cover, f, p, down, leaf))) /
                   (2.0 * config.step);
    }
    // Identically vanishing dependence must read as rank 0, so the relative
    // tolerance is floored at the same absolute level.
    const int r = numerical_rank(jac, config.rank_tolerance, config.rank_tolerance);
    out.sample_ranks.push_back(r);
    out.jet_rank = std::max(out.jet_rank, r);
  }
  return out;
}

int b_alpha(const JetProfile& profile, BAlphaConvention convention) {
  switch (convention) {
    case BAlphaConvention::free_domain:
      return profile.jet_rank - profile.free_dim;
    case BAlphaConvention::message_domain:
      return profile.jet_rank - profile.message_domain_dim;
    case BAlphaConvention::jet_image:
      return profile.jet_rank;
  }
  return 0;
}

SolubilityReport insolubility_check(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                    const TaskSpec& task, const DirectedTree& tree, int leaf,
                                    const JetConfig& config, BAlphaConvention convention) {
  task.validate(cover.node_count());
  const JetProfile profile = jet_profile(cover, quads, tree, leaf, config);
  SolubilityReport r;
  r.leaf = leaf;
  r.receiver = tree.parent(leaf);
  r.leaf_observables = profile.leaf_observable_count;
  r.jet_rank = profile.jet_rank;
  r.free_dim = profile.free_dim;
  r.convention = convention;
  r.b_alpha = b_alpha(profile, convention);
  r.observables = profile.observable_count;
  r.codomain_dim = task.codomain_dim();
  r.lhs = r.leaf_observables - r.b_alpha;
  r.rhs = r.observables - r.codomain_dim;
  r.flag = r.lhs > r.rhs;
  r.tree_independent = r.flag;
  r.note =
      "assumes the jet map is a submersion on a dense open set of observations; "
      "genericity is not verified";
  return r;
}

bool direct_solubility_test(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                            const TaskSpec& task, int root, const SpanningTree& spanning,
                            std::uint64_t seed) {
  task.validate(cover.node_count());
  const DirectedTree tree(spanning, root);
  const int s_count = cover.observable_count();

  if (!task.is_linear()) {
    Rng rng(seed);
    for (int trial = 0; trial < 5; ++trial) {
      VectorXd s(s_count);
      for (int k = 0; k < s_count; ++k) s(k) = rng.uniform(-1.0, 1.0);
      const double local = local_solve(run_message_passing(cover, quads, s, tree)).value;
      const double central = centralized_solve(cover, quads, s).value;
      if (relative_gap(local, central) > 1e-8) return false;
    }
    return true;
  }

  const GlobalProblemMap phi = global_problem_map(cover, quads, task);

  // Affine map s -> (ŷ_root(s), s_root), read off column by column.
  const LocalSolution base = local_solve(run_message_passing(cover, quads, VectorXd::Zero(s_count), tree));
  const NodeSet& root_obs = cover.observables(root);
  const auto y_rows = static_cast<Eigen::Index>(base.vars.size());
  MatrixXd m(y_rows + static_cast<Eigen::Index>(root_obs.size()), s_count);
  for (int k = 0; k < s_count; ++k) {
    VectorXd s = VectorXd::Zero(s_count);
    s(k) = 1.0;
    const LocalSolution sol = local_solve(run_message_passing(cover, quads, s, tree));
    m.col(k).head(y_rows) = sol.minimizer - base.minimizer;
    m.col(k).tail(static_cast<Eigen::Index>(root_obs.size())).setZero();
  }
  for (std::size_t r = 0; r < root_obs.size(); ++r)
    m(y_rows + static_cast<Eigen::Index>(r), cover.observable_position(root_obs[r])) = 1.0;

  // Find w with w'M = phi and w constant-blind along the root kernel:
  // [M'; K'] w = [phi'; 0] must be consistent.
  const auto k_cols = base.kernel.cols();
  MatrixXd system = MatrixXd::Zero(s_count + k_cols, m.rows());
  system.topRows(s_count) = m.transpose();
  if (k_cols > 0) system.bottomRows(k_cols).leftCols(y_rows) = base.kernel.transpose();
  MatrixXd rhs = MatrixXd::Zero(system.rows(), phi.phi.rows());
  rhs.topRows(s_count) = phi.phi.transpose();

  MatrixXd augmented(system.rows(), system.cols() + rhs.cols());
  augmented << system, rhs;
  const double scale = std::max(
      {1.0, system.size() ? system.cwiseAbs().maxCoeff() : 0.0, rhs.size() ? rhs.cwiseAbs().maxCoeff() : 0.0});
  const double floor = 1e-8 * scale;
  return numerical_rank(augmented, 1e-8, floor) == numerical_rank(system, 1e-8, floor);
}

}  // namespace nervemp
