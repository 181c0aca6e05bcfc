#pragma once

#include <map>

#include <Eigen/Dense>

#include "nervemp/cover.hpp"

namespace nervemp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Singular values below rank_tolerance * sigma_max are treated as zero.
inline constexpr double kRankTolerance = 1e-10;
// Relative threshold separating a genuinely unbounded kernel component of b
// from rounding noise.
inline constexpr double kUnboundedTolerance = 1e-8;
inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kPsdTolerance = 1e-9;

// Values assigned to a subset of graph nodes.
using Assignment = std::map<NodeId, double>;

// Convex quadratic q(x) = x'Ax + b'x + c over an ascending set of node
// variables. Note there is no 1/2 on the quadratic term: grad q = 2Ax + b.
class QuadFunc {
 public:
  QuadFunc() = default;
  // A is symmetrized on construction. Throws DimensionMismatch on shape errors
  // and InvalidInstance if vars is not strictly ascending.
  QuadFunc(NodeSet vars, MatrixXd a, VectorXd b, double c);

  static QuadFunc zero(NodeSet vars);

  const NodeSet& vars() const { return vars_; }
  int dim() const { return static_cast<int>(vars_.size()); }
  const MatrixXd& A() const { return a_; }
  const VectorXd& b() const { return b_; }
  double c() const { return c_; }

  // Position of v in vars(), or -1.
  int index_of(NodeId v) const;

  double evaluate(const VectorXd& x) const;
  VectorXd gradient(const VectorXd& x) const;

  double min_eigenvalue() const;
  bool is_psd() const;

 private:
  NodeSet vars_;
  MatrixXd a_;
  VectorXd b_;
  double c_ = 0.0;
};

// Eliminated variables as an affine function of the remaining ones:
// y*(x) = M x + m.
struct ArgminMap {
  NodeSet eliminated;
  NodeSet inputs;
  MatrixXd M;
  VectorXd m;
  // True when the elimination block had a nontrivial kernel; y* is then the
  // minimum-norm choice among many minimizers.
  bool singular = false;

  VectorXd apply(const VectorXd& x) const { return M * x + m; }
};

struct PartialMinimum {
  QuadFunc message;
  ArgminMap argmin;
  // Smallest eigenvalue of the eliminated block A_yy (+inf if Y is empty).
  double block_min_eigenvalue = 0.0;
};

struct GlobalMinimum {
  double value = 0.0;
  // Minimum-norm minimizer -A⁺b/2.
  VectorXd minimizer;
  // Columns span the directions along which the minimizer set extends.
  MatrixXd kernel;
};

double evaluate(const QuadFunc& q, const VectorXd& assignment);

// Throws MissingVariable if q's variables are not all in `superset`.
QuadFunc embed(const QuadFunc& q, const NodeSet& superset);

QuadFunc add(const QuadFunc& q1, const QuadFunc& q2);

// Substitutes fixed values; the result is over the remaining variables.
// Throws UnknownVariable if a fixed node is not a variable of q.
QuadFunc fix_vars(const QuadFunc& q, const Assignment& fixed);

// min over `elim` via the generalized Schur complement
//   Ã = A_xx - A_xy A_yy⁺ A_yx,  b̃ = b_x - A_xy A_yy⁺ b_y,  c̃ = c - b_y'A_yy⁺b_y/4
// with y*(x) = -A_yy⁺(A_yx x + b_y/2).
// Throws UnboundedBelow when b_y has a component in ker A_yy, and
// UnknownVariable when elim is not a subset of q's variables.
PartialMinimum partial_minimize(const QuadFunc& q, const NodeSet& elim);

GlobalMinimum global_minimize(const QuadFunc& q);

// q(x) = ||(I - P)x||² with P the orthogonal projector onto the column span
// of `basis` (rows indexed like `vars`).
QuadFunc subspace_distance_quad(const NodeSet& vars, const MatrixXd& basis);

// Moore-Penrose pseudoinverse of a symmetric matrix with the module's rank
// tolerance; also reports the numerical rank.
MatrixXd symmetric_pinv(const MatrixXd& m, int* rank = nullptr);

// Orthonormal basis of the numerical kernel of a symmetric matrix.
MatrixXd symmetric_kernel(const MatrixXd& m);

}  // namespace nervemp
