#include "nervemp/quadform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "nervemp/errors.hpp"

namespace nervemp {

namespace {

std::vector<int> positions(const NodeSet& vars, const NodeSet& subset) {
  std::vector<int> idx;
  idx.reserve(subset.size());
  for (NodeId v : subset) {
    auto it = std::lower_bound(vars.begin(), vars.end(), v);
    idx.push_back(static_cast<int>(it - vars.begin()));
  }
  return idx;
}

void require_subset(const NodeSet& vars, const NodeSet& subset, const char* op) {
  for (NodeId v : subset)
    if (!set_contains(vars, v)) {
      std::ostringstream os;
      os << op << ": node " << v << " is not a variable of the quadratic";
      throw UnknownVariable(os.str());
    }
}

struct SymmetricSpectrum {
  VectorXd values;
  MatrixXd vectors;
  double tolerance = 0.0;
};

SymmetricSpectrum spectrum(const MatrixXd& m) {
  SymmetricSpectrum s;
  if (m.rows() == 0) return s;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  s.values = eig.eigenvalues();
  s.vectors = eig.eigenvectors();
  s.tolerance = kRankTolerance * s.values.cwiseAbs().maxCoeff();
  return s;
}

}  // namespace

QuadFunc::QuadFunc(NodeSet vars, MatrixXd a, VectorXd b, double c)
    : vars_(std::move(vars)), a_(std::move(a)), b_(std::move(b)), c_(c) {
  const auto n = static_cast<Eigen::Index>(vars_.size());
  if (a_.rows() != n || a_.cols() != n || b_.size() != n) {
    std::ostringstream os;
    os << "quadratic over " << n << " variables got A " << a_.rows() << "x" << a_.cols()
       << " and b of length " << b_.size();
    throw DimensionMismatch(os.str());
  }
  for (std::size_t k = 1; k < vars_.size(); ++k)
    if (vars_[k] <= vars_[k - 1]) throw InvalidInstance("quadratic variables must be strictly ascending");
  a_ = 0.5 * (a_ + a_.transpose()).eval();
}

QuadFunc QuadFunc::zero(NodeSet vars) {
  const auto n = static_cast<Eigen::Index>(vars.size());
  return QuadFunc(std::move(vars), MatrixXd::Zero(n, n), VectorXd::Zero(n), 0.0);
}

int QuadFunc::index_of(NodeId v) const {
  auto it = std::lower_bound(vars_.begin(), vars_.end(), v);
  return (it != vars_.end() && *it == v) ? static_cast<int>(it - vars_.begin()) : -1;
}

double QuadFunc::evaluate(const VectorXd& x) const {
  if (x.size() != dim()) {
    std::ostringstream os;
    os << "assignment of length " << x.size() << " for a quadratic over " << dim() << " variables";
    throw DimensionMismatch(os.str());
  }
  return x.dot(a_ * x) + b_.dot(x) + c_;
}

VectorXd QuadFunc::gradient(const VectorXd& x) const { return 2.0 * (a_ * x) + b_; }

double QuadFunc::min_eigenvalue() const {
  if (dim() == 0) return std::numeric_limits<double>::infinity();
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(a_, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

bool QuadFunc::is_psd() const {
  if (dim() == 0) return true;
  VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(a_, Eigen::EigenvaluesOnly).eigenvalues();
  const double norm2 = ev.cwiseAbs().maxCoeff();
  return ev(0) >= -kPsdTolerance * (1.0 + norm2);
}

double evaluate(const QuadFunc& q, const VectorXd& assignment) { return q.evaluate(assignment); }

MatrixXd symmetric_pinv(const MatrixXd& m, int* rank) {
  const SymmetricSpectrum s = spectrum(m);
  MatrixXd pinv = MatrixXd::Zero(m.rows(), m.cols());
  int r = 0;
  for (Eigen::Index k = 0; k < s.values.size(); ++k) {
    const double lambda = s.values(k);
    if (std::abs(lambda) <= s.tolerance || lambda == 0.0) continue;
    pinv.noalias() += (1.0 / lambda) * s.vectors.col(k) * s.vectors.col(k).transpose();
    ++r;
  }
  if (rank) *rank = r;
  return pinv;
}

MatrixXd symmetric_kernel(const MatrixXd& m) {
  const SymmetricSpectrum s = spectrum(m);
  std::vector<Eigen::Index> cols;
  for (Eigen::Index k = 0; k < s.values.size(); ++k)
    if (std::abs(s.values(k)) <= s.tolerance) cols.push_back(k);
  MatrixXd kernel(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) kernel.col(static_cast<Eigen::Index>(k)) = s.vectors.col(cols[k]);
  return kernel;
}

QuadFunc embed(const QuadFunc& q, const NodeSet& superset) {
  for (NodeId v : q.vars())
    if (!set_contains(superset, v)) {
      std::ostringstream os;
      os << "node " << v << " is missing from the embedding superset";
      throw MissingVariable(os.str());
    }
  if (superset == q.vars()) return q;
  const auto idx = positions(superset, q.vars());
  const auto n = static_cast<Eigen::Index>(superset.size());
  MatrixXd a = MatrixXd::Zero(n, n);
  VectorXd b = VectorXd::Zero(n);
  a(idx, idx) = q.A();
  b(idx) = q.b();
  return QuadFunc(superset, std::move(a), std::move(b), q.c());
}

QuadFunc add(const QuadFunc& q1, const QuadFunc& q2) {
  const NodeSet vars = set_union(q1.vars(), q2.vars());
  const auto i1 = positions(vars, q1.vars());
  const auto i2 = positions(vars, q2.vars());
  const auto n = static_cast<Eigen::Index>(vars.size());
  MatrixXd a = MatrixXd::Zero(n, n);
  VectorXd b = VectorXd::Zero(n);
  a(i1, i1) += q1.A();
  b(i1) += q1.b();
  a(i2, i2) += q2.A();
  b(i2) += q2.b();
  return QuadFunc(vars, std::move(a), std::move(b), q1.c() + q2.c());
}

QuadFunc fix_vars(const QuadFunc& q, const Assignment& fixed) {
  NodeSet fixed_vars;
  for (const auto& [v, value] : fixed) fixed_vars.push_back(v);
  require_subset(q.vars(), fixed_vars, "fix_vars");
  const NodeSet rest = set_difference(q.vars(), fixed_vars);
  const auto fi = positions(q.vars(), fixed_vars);
  const auto ri = positions(q.vars(), rest);

  VectorXd f(static_cast<Eigen::Index>(fixed_vars.size()));
  Eigen::Index k = 0;
  for (const auto& [v, value] : fixed) f(k++) = value;

  const MatrixXd a_rf = q.A()(ri, fi);
  const MatrixXd a_ff = q.A()(fi, fi);
  VectorXd b = q.b()(ri) + 2.0 * (a_rf * f);
  const double c = q.c() + f.dot(a_ff * f) + q.b()(fi).dot(f);
  return QuadFunc(rest, q.A()(ri, ri), std::move(b), c);
}

PartialMinimum partial_minimize(const QuadFunc& q, const NodeSet& elim) {
  require_subset(q.vars(), elim, "partial_minimize");
  const NodeSet rest = set_difference(q.vars(), elim);
  const auto yi = positions(q.vars(), elim);
  const auto xi = positions(q.vars(), rest);

  PartialMinimum out;
  out.argmin.eliminated = elim;
  out.argmin.inputs = rest;
  if (elim.empty()) {
    out.message = q;
    out.argmin.M = MatrixXd::Zero(0, static_cast<Eigen::Index>(rest.size()));
    out.argmin.m = VectorXd::Zero(0);
    out.block_min_eigenvalue = std::numeric_limits<double>::infinity();
    return out;
  }

  const MatrixXd a_yy = q.A()(yi, yi);
  const MatrixXd a_xy = q.A()(xi, yi);
  const VectorXd b_y = q.b()(yi);
  const SymmetricSpectrum s = spectrum(a_yy);
  out.block_min_eigenvalue = s.values(0);

  MatrixXd pinv = MatrixXd::Zero(a_yy.rows(), a_yy.cols());
  int rank = 0;
  for (Eigen::Index k = 0; k < s.values.size(); ++k) {
    const double lambda = s.values(k);
    if (std::abs(lambda) <= s.tolerance || lambda == 0.0) continue;
    pinv.noalias() += (1.0 / lambda) * s.vectors.col(k) * s.vectors.col(k).transpose();
    ++rank;
  }

  const VectorXd kernel_part = b_y - a_yy * (pinv * b_y);
  if (kernel_part.norm() > kUnboundedTolerance * (1.0 + q.b().norm())) {
    std::ostringstream os;
    os << "linear term has a component of norm " << kernel_part.norm()
       << " along the kernel of the eliminated block";
    throw UnboundedBelow(os.str());
  }

  const MatrixXd pinv_ayx = pinv * a_xy.transpose();
  const VectorXd pinv_by = pinv * b_y;
  MatrixXd a = q.A()(xi, xi) - a_xy * pinv_ayx;
  VectorXd b = q.b()(xi) - a_xy * pinv_by;
  const double c = q.c() - 0.25 * b_y.dot(pinv_by);
  out.message = QuadFunc(rest, std::move(a), std::move(b), c);
  out.argmin.M = -pinv_ayx;
  out.argmin.m = -0.5 * pinv_by;
  out.argmin.singular = rank < static_cast<int>(elim.size());
  return out;
}

GlobalMinimum global_minimize(const QuadFunc& q) {
  GlobalMinimum out;
  const PartialMinimum pm = partial_minimize(q, q.vars());
  out.value = pm.message.c();
  out.minimizer = pm.argmin.m;
  out.kernel = symmetric_kernel(q.A());
  return out;
}

QuadFunc subspace_distance_quad(const NodeSet& vars, const MatrixXd& basis) {
  const auto n = static_cast<Eigen::Index>(vars.size());
  if (basis.rows() != n) {
    std::ostringstream os;
    os << "basis vectors have length " << basis.rows() << " but " << n << " variables were given";
    throw DimensionMismatch(os.str());
  }
  if (basis.cols() == 0 || n == 0)
    return QuadFunc(vars, MatrixXd::Identity(n, n), VectorXd::Zero(n), 0.0);
  // Sum over the orthogonal complement directly, so a spanning basis gives an
  // exactly zero form rather than I - UU' rounding residue.
  Eigen::JacobiSVD<MatrixXd> svd(basis, Eigen::ComputeFullU);
  const VectorXd& sv = svd.singularValues();
  const double tol = kRankTolerance * sv(0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol && sv(rank) != 0.0) ++rank;
  const MatrixXd perp = svd.matrixU().rightCols(n - rank);
  MatrixXd a = perp * perp.transpose();
  return QuadFunc(vars, std::move(a), VectorXd::Zero(n), 0.0);
}

}  // namespace nervemp
