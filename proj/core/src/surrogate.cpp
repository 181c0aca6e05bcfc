#include "nervemp/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>

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

template <class T>
T expect_value(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) throw InvalidInstance(std::string("sample set: cannot read ") + what);
  return v;
}

void expect_token(std::istream& is, const std::string& token) {
  std::string got;
  if (!(is >> got) || got != token)
    throw InvalidInstance("sample set: expected '" + token + "', got '" + got + "'");
}

// Positions of `subset` inside the ascending `vars`.
std::vector<int> positions(const NodeSet& vars, const NodeSet& subset) {
  std::vector<int> idx;
  idx.reserve(subset.size());
  for (NodeId v : subset)
    idx.push_back(static_cast<int>(std::lower_bound(vars.begin(), vars.end(), v) - vars.begin()));
  return idx;
}

// Held function at a node: an exact quadratic part plus fitted
// non-quadratic surrogate terms, over the node's held variables.
struct NodeFunction {
  NodeSet vars;
  QuadFunc quad;
  struct Term {
    const Surrogate* surrogate;
    std::vector<int> idx;
  };
  std::vector<Term> terms;
  Box trust;

  explicit NodeFunction(QuadFunc local) : vars(local.vars()), quad(std::move(local)) {
    trust = Box::unbounded(static_cast<Eigen::Index>(vars.size()));
  }

  void widen_to(const NodeSet& more) {
    const NodeSet merged = set_union(vars, more);
    if (merged == vars) return;
    Box widened = Box::unbounded(static_cast<Eigen::Index>(merged.size()));
    const auto idx = positions(merged, vars);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      widened.lo(idx[k]) = trust.lo(static_cast<Eigen::Index>(k));
      widened.hi(idx[k]) = trust.hi(static_cast<Eigen::Index>(k));
    }
    for (auto& t : terms) {
      for (int& i : t.idx) i = idx[i];
    }
    quad = embed(quad, merged);
    vars = merged;
    trust = std::move(widened);
  }

  void add_quadratic(const QuadFunc& q) {
    widen_to(q.vars());
    quad = add(quad, q);
  }

  void add_term(const Surrogate& s, const Box& box) {
    widen_to(s.vars());
    const auto idx = positions(vars, s.vars());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto e = static_cast<Eigen::Index>(k);
      trust.lo(idx[k]) = std::max(trust.lo(idx[k]), box.lo(e));
      trust.hi(idx[k]) = std::min(trust.hi(idx[k]), box.hi(e));
    }
    terms.push_back({&s, idx});
  }

  bool exact() const { return terms.empty(); }

  double operator()(const VectorXd& x, VectorXd* grad) const {
    double value = quad.evaluate(x);
    if (grad) *grad = quad.gradient(x);
    for (const auto& t : terms) {
      const VectorXd sub = x(t.idx);
      value += t.surrogate->evaluate(sub);
      if (grad) (*grad)(t.idx) += t.surrogate->gradient(sub);
    }
    return value;
  }
};

double checked_inner_min(const NodeFunction& fn, const std::vector<int>& out_idx,
                         const std::vector<int>& elim_idx, const VectorXd& out_value,
                         const VectorXd& y_start, const DescentConfig& descent, VectorXd* y_best) {
  VectorXd full = VectorXd::Zero(static_cast<Eigen::Index>(fn.vars.size()));
  full(out_idx) = out_value;
  if (elim_idx.empty()) return fn(full, nullptr);

  Box ybox{fn.trust.lo(elim_idx), fn.trust.hi(elim_idx)};
  VectorXd g(full.size());
  Objective inner = [&](const VectorXd& y, VectorXd* grad) {
    full(elim_idx) = y;
    const double v = fn(full, grad ? &g : nullptr);
    if (grad) *grad = g(elim_idx);
    return v;
  };
  DescentResult r = descend(inner, y_start, descent, &ybox);
  if (!r.ok()) {
    std::ostringstream os;
    os << "inner minimization stopped with gradient norm " << r.grad_norm << " after " << r.steps
       << " steps";
    throw InnerOptimizationFailed(os.str());
  }
  if (y_best) *y_best = r.x;
  return r.value;
}

}  // namespace

void SampleSet::write(std::ostream& os) const {
  os << "nervemp-samples 1\n";
  os << "edge " << edge.from << ' ' << edge.to << '\n';
  os << "vars " << vars.size();
  for (NodeId v : vars) os << ' ' << v;
  os << "\nlo";
  for (Eigen::Index k = 0; k < box.lo.size(); ++k) os << ' ' << fmt_double(box.lo(k));
  os << "\nhi";
  for (Eigen::Index k = 0; k < box.hi.size(); ++k) os << ' ' << fmt_double(box.hi(k));
  os << "\nsamples " << size() << '\n';
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    for (Eigen::Index k = 0; k < inputs.cols(); ++k) os << fmt_double(inputs(i, k)) << ' ';
    os << fmt_double(outputs(i)) << '\n';
  }
}

SampleSet SampleSet::read(std::istream& is) {
  SampleSet s;
  expect_token(is, "nervemp-samples");
  if (expect_value<int>(is, "version") != 1) throw InvalidInstance("sample set: unsupported version");
  expect_token(is, "edge");
  s.edge.from = expect_value<int>(is, "edge tail");
  s.edge.to = expect_value<int>(is, "edge head");
  expect_token(is, "vars");
  const int d = expect_value<int>(is, "variable count");
  if (d < 0) throw InvalidInstance("sample set: negative variable count");
  for (int k = 0; k < d; ++k) s.vars.push_back(expect_value<int>(is, "variable"));
  s.box.lo.resize(d);
  s.box.hi.resize(d);
  expect_token(is, "lo");
  for (int k = 0; k < d; ++k) s.box.lo(k) = expect_value<double>(is, "lower bound");
  expect_token(is, "hi");
  for (int k = 0; k < d; ++k) s.box.hi(k) = expect_value<double>(is, "upper bound");
  expect_token(is, "samples");
  const int m = expect_value<int>(is, "sample count");
  if (m < 1) throw InvalidInstance("sample set: needs at least one sample");
  s.inputs.resize(m, d);
  s.outputs.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < d; ++k) s.inputs(i, k) = expect_value<double>(is, "sample input");
    s.outputs(i) = expect_value<double>(is, "sample output");
    if (!s.box.contains(s.inputs.row(i).transpose()))
      throw InvalidInstance("sample set: row " + std::to_string(i) + " lies outside the box");
  }
  return s;
}

SampleSet sample_message(const std::function<double(const VectorXd&)>& h, const NodeSet& vars,
                         const Box& box, int m, std::uint64_t seed, DirectedEdge edge) {
  if (m < 1) throw ConfigError("sample count must be at least 1");
  if (box.dim() != static_cast<Eigen::Index>(vars.size()))
    throw DimensionMismatch("sample box dimension does not match the message variables");
  if (!box.lo.allFinite() || !box.hi.allFinite()) throw ConfigError("sample box must be bounded");
  SampleSet s;
  s.edge = edge;
  s.vars = vars;
  s.box = box;
  const auto d = box.dim();
  s.inputs.resize(m, d);
  s.outputs.resize(m);
  Rng rng(seed);
  for (int i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) s.inputs(i, k) = rng.uniform(box.lo(k), box.hi(k));
    s.outputs(i) = h(s.inputs.row(i).transpose());
  }
  return s;
}

int quadratic_coefficient_count(int dim) { return (dim + 1) * (dim + 2) / 2; }

double Surrogate::evaluate(const VectorXd& x) const {
  if (quadratic_) return quadratic_->evaluate(x);
  const VectorXd u = (x - in_mean_).cwiseQuotient(in_scale_);
  const VectorXd z = (w1_ * u + b1_).cwiseMax(0.0);
  return out_mean_ + out_scale_ * (w2_.dot(z) + b2_);
}

VectorXd Surrogate::gradient(const VectorXd& x) const {
  if (quadratic_) return quadratic_->gradient(x);
  const VectorXd u = (x - in_mean_).cwiseQuotient(in_scale_);
  const VectorXd z = w1_ * u + b1_;
  VectorXd gate(z.size());
  for (Eigen::Index h = 0; h < z.size(); ++h) gate(h) = z(h) > 0.0 ? w2_(h) : 0.0;
  return out_scale_ * (w1_.transpose() * gate).cwiseQuotient(in_scale_);
}

Surrogate fit_surrogate(const SampleSet& samples, SurrogateKind kind, const FitConfig& config,
                        std::uint64_t seed) {
  const int m = samples.size();
  const auto d = static_cast<Eigen::Index>(samples.vars.size());
  if (m < 1) throw ConfigError("cannot fit a surrogate to an empty sample set");

  Surrogate s;
  s.kind_ = kind;
  s.vars_ = samples.vars;
  s.in_mean_ = samples.inputs.colwise().mean().transpose();
  s.in_scale_ = VectorXd::Ones(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double var = (samples.inputs.col(k).array() - s.in_mean_(k)).square().mean();
    if (var > 0.0) s.in_scale_(k) = std::sqrt(var);
  }
  MatrixXd u(m, d);
  for (int i = 0; i < m; ++i)
    u.row(i) = (samples.inputs.row(i).transpose() - s.in_mean_).cwiseQuotient(s.in_scale_).transpose();

  if (kind == SurrogateKind::quadratic_ls) {
    const int p = quadratic_coefficient_count(static_cast<int>(d));
    if (m < p) {
      std::ostringstream os;
      os << m << " samples cannot identify " << p << " quadratic coefficients";
      throw SingularFit(os.str());
    }
    MatrixXd design(m, p);
    for (int i = 0; i < m; ++i) {
      Eigen::Index c = 0;
      design(i, c++) = 1.0;
      for (Eigen::Index a = 0; a < d; ++a) design(i, c++) = u(i, a);
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = a; b < d; ++b) design(i, c++) = u(i, a) * u(i, b);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      std::ostringstream os;
      os << "design matrix has rank " << qr.rank() << " < " << p;
      throw SingularFit(os.str());
    }
    MatrixXd normal = design.transpose() * design;
    normal.diagonal().array() += config.ridge;
    const VectorXd theta = normal.ldlt().solve(design.transpose() * samples.outputs);

    // Back to original coordinates: u = D (x - mu).
    MatrixXd bq = MatrixXd::Zero(d, d);
    VectorXd beta = theta.segment(1, d);
    Eigen::Index c = 1 + d;
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = a; b < d; ++b) {
        if (a == b)
          bq(a, a) = theta(c++);
        else {
          bq(a, b) = bq(b, a) = 0.5 * theta(c++);
        }
      }
    const VectorXd dinv = s.in_scale_.cwiseInverse();
    const MatrixXd a = dinv.asDiagonal() * bq * dinv.asDiagonal();
    const VectorXd& mu = s.in_mean_;
    const VectorXd dbeta = dinv.cwiseProduct(beta);
    const VectorXd b = -2.0 * (a * mu) + dbeta;
    const double c0 = mu.dot(a * mu) - dbeta.dot(mu) + theta(0);
    s.quadratic_ = QuadFunc(samples.vars, a, b, c0);
  } else {
    const int hidden = config.hidden;
    s.out_mean_ = samples.outputs.mean();
    const double out_var = (samples.outputs.array() - s.out_mean_).square().mean();
    s.out_scale_ = out_var > 0.0 ? std::sqrt(out_var) : 0.0;
    s.w1_ = MatrixXd::Zero(hidden, d);
    s.b1_ = VectorXd::Zero(hidden);
    s.w2_ = VectorXd::Zero(hidden);
    Rng rng(seed);
    const double a1 = std::sqrt(6.0 / static_cast<double>(d + hidden));
    const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (int h = 0; h < hidden; ++h)
      for (Eigen::Index k = 0; k < d; ++k) s.w1_(h, k) = rng.uniform(-a1, a1);
    for (int h = 0; h < hidden; ++h) s.w2_(h) = rng.uniform(-a2, a2);

    if (s.out_scale_ > 0.0) {
      const Eigen::RowVectorXd y =
          ((samples.outputs.array() - s.out_mean_) / s.out_scale_).matrix().transpose();
      const MatrixXd ut = u.transpose();  // d x m
      MatrixXd v_w1 = MatrixXd::Zero(hidden, d);
      VectorXd v_b1 = VectorXd::Zero(hidden), v_w2 = VectorXd::Zero(hidden);
      double v_b2 = 0.0;
      MatrixXd z(hidden, m), act(hidden, m), dz(hidden, m);
      double loss = 0.0;
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        z.noalias() = s.w1_ * ut;
        z.colwise() += s.b1_;
        act = z.cwiseMax(0.0);
        const Eigen::RowVectorXd pred = (s.w2_.transpose() * act).array() + s.b2_;
        const Eigen::RowVectorXd resid = pred - y;
        loss = resid.squaredNorm() / m;
        const Eigen::RowVectorXd dpred = (2.0 / m) * resid;

        const VectorXd g_w2 = act * dpred.transpose();
        const double g_b2 = dpred.sum();
        dz.noalias() = s.w2_ * dpred;
        dz = dz.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
        const MatrixXd g_w1 = dz * u;
        const VectorXd g_b1 = dz.rowwise().sum();

        v_w1 = config.momentum * v_w1 - config.learning_rate * g_w1;
        v_b1 = config.momentum * v_b1 - config.learning_rate * g_b1;
        v_w2 = config.momentum * v_w2 - config.learning_rate * g_w2;
        v_b2 = config.momentum * v_b2 - config.learning_rate * g_b2;
        s.w1_ += v_w1;
        s.b1_ += v_b1;
        s.w2_ += v_w2;
        s.b2_ += v_b2;
      }
      s.training_.final_loss = loss;
      s.training_.epochs = config.epochs;
    }
  }

  double sq = 0.0, worst = 0.0;
  for (int i = 0; i < m; ++i) {
    const double r = s.evaluate(samples.inputs.row(i).transpose()) - samples.outputs(i);
    sq += r * r;
    worst = std::max(worst, std::abs(r));
  }
  s.training_.rmse = std::sqrt(sq / m);
  s.training_.max_residual = worst;
  return s;
}

ApproxResult approx_message_passing(const SubgraphCover& cover, const std::vector<QuadFunc>& quads,
                                    const VectorXd& observations, const DirectedTree& tree,
                                    const ApproxConfig& config) {
  if (config.samples < 1) throw ConfigError("samples per edge must be at least 1");
  if (!(config.radius > 0.0)) throw ConfigError("sampling radius must be positive");
  if (config.restarts < 1) throw ConfigError("root optimizer needs at least one restart");
  if (static_cast<int>(quads.size()) != cover.size())
    throw InvalidInstance("one local function per subgraph is required");

  const std::vector<EdgePartition> partitions = partition_tree(cover, tree);
  std::vector<NodeFunction> held;
  held.reserve(cover.size());
  for (int i = 0; i < cover.size(); ++i) held.emplace_back(local_function(cover, quads[i], observations, i));

  // Surrogates are owned here; node functions point into this list.
  std::vector<std::unique_ptr<Surrogate>> surrogates;
  ApproxResult result;

  std::size_t next = 0;
  for (int node : tree.post_order()) {
    if (node == tree.root()) continue;
    const EdgePartition& p = partitions[next++];
    const NodeFunction& fn = held[node];
    const NodeSet out_vars = set_union(p.x_vars, p.z_vars);
    const auto out_idx = positions(fn.vars, out_vars);
    const auto elim_idx = positions(fn.vars, p.y_vars);
    const std::uint64_t edge_key = static_cast<std::uint64_t>(node);

    // Message center and sampler.
    std::function<double(const VectorXd&)> message;
    VectorXd center = VectorXd::Zero(static_cast<Eigen::Index>(out_vars.size()));
    VectorXd y_start = VectorXd::Zero(static_cast<Eigen::Index>(p.y_vars.size()));
    std::optional<QuadFunc> exact;
    if (fn.exact()) {
      exact = partial_minimize(fn.quad, p.y_vars).message;
      if (config.center == BoxCenter::message_argmin) center = global_minimize(*exact).minimizer;
      message = [&exact](const VectorXd& x) { return exact->evaluate(x); };
    } else {
      if (config.center == BoxCenter::message_argmin) {
        Objective joint = [&fn](const VectorXd& x, VectorXd* g) { return fn(x, g); };
        const DescentResult r = descend(joint, fn.trust.center(), config.descent, &fn.trust);
        if (!r.ok()) throw InnerOptimizationFailed("could not locate the message minimizer for centering");
        center = r.x(out_idx);
        y_start = r.x(elim_idx);
      } else {
        y_start = fn.trust.center()(elim_idx);
      }
      message = [&, y_start](const VectorXd& x) {
        return checked_inner_min(fn, out_idx, elim_idx, x, y_start, config.descent, nullptr);
      };
    }

    Box box = Box::around(center, config.radius);
    int m = config.samples;
    if (config.kind == SurrogateKind::quadratic_ls && config.raise_to_identifiable)
      m = std::max(m, 2 * quadratic_coefficient_count(static_cast<int>(out_vars.size())));

    SampleSet wire = sample_message(message, out_vars, box, m, derive_seed(config.seed, edge_key, 1),
                                    p.edge);

    // Receiver side.
    auto surrogate = std::make_unique<Surrogate>(
        fit_surrogate(wire, config.kind, config.fit, derive_seed(config.seed, edge_key, 2)));
    NodeFunction& receiver = held[p.edge.to];
    if (surrogate->quadratic())
      receiver.add_quadratic(*surrogate->quadratic());
    else
      receiver.add_term(*surrogate, wire.box);

    EdgeDiagnostics diag;
    diag.edge = p.edge;
    diag.domain_dim = static_cast<int>(out_vars.size());
    diag.samples = m;
    diag.fit_rmse = surrogate->training().rmse;
    diag.fit_max_residual = surrogate->training().max_residual;
    diag.final_loss = surrogate->training().final_loss;
    result.edges.push_back(diag);
    result.transmitted.push_back(std::move(wire));
    ++result.exchanges;
    surrogates.push_back(std::move(surrogate));
  }

  const NodeFunction& root = held[tree.root()];
  result.vars = root.vars;
  if (root.exact()) {
    const GlobalMinimum gm = global_minimize(root.quad);
    result.value = gm.value;
    result.minimizer = gm.minimizer;
    return result;
  }

  Box start = root.trust;
  for (Eigen::Index k = 0; k < start.dim(); ++k) {
    if (!std::isfinite(start.lo(k))) start.lo(k) = -config.radius;
    if (!std::isfinite(start.hi(k))) start.hi(k) = config.radius;
  }
  Objective objective = [&root](const VectorXd& x, VectorXd* g) { return root(x, g); };
  const DescentResult best = multistart_descend(objective, start, config.restarts, config.descent,
                                                derive_seed(config.seed, static_cast<std::uint64_t>(tree.root()), 3),
                                                &root.trust);
  result.value = best.value;
  result.minimizer = best.x;
  return result;
}

double error_ratio(double approx_value, double truth_value) {
  return 100.0 * std::abs(approx_value - truth_value) / std::max(std::abs(truth_value), 1e-6);
}

}  // namespace nervemp
