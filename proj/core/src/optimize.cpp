#include "nervemp/optimize.hpp"

#include <algorithm>
#include <cmath>

#include "nervemp/errors.hpp"
#include "nervemp/rng.hpp"

namespace nervemp {

using Eigen::VectorXd;

Box Box::around(const VectorXd& center, double radius) {
  return {center.array() - radius, center.array() + radius};
}

Box Box::unbounded(Eigen::Index dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return {VectorXd::Constant(dim, -inf), VectorXd::Constant(dim, inf)};
}

bool Box::contains(const VectorXd& x) const {
  return x.size() == dim() && (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

VectorXd Box::clamp(const VectorXd& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

VectorXd Box::center() const {
  VectorXd c(dim());
  for (Eigen::Index k = 0; k < dim(); ++k)
    c(k) = (std::isfinite(lo(k)) && std::isfinite(hi(k))) ? 0.5 * (lo(k) + hi(k)) : 0.0;
  return c;
}

DescentResult descend(const Objective& f, VectorXd x0, const DescentConfig& config, const Box* box) {
  DescentResult r;
  r.x = box ? box->clamp(x0) : std::move(x0);
  VectorXd grad(r.x.size());
  r.value = f(r.x, &grad);
  double step = config.step;

  auto projected_norm = [&](const VectorXd& x, const VectorXd& g) {
    return box ? (x - box->clamp(x - g)).norm() : g.norm();
  };

  // On piecewise-linear objectives the gradient norm need not shrink near a
  // kink; a window of steps without meaningful decrease counts as a stall.
  constexpr int kWindow = 100;
  double window_start = r.value;

  VectorXd trial_grad(r.x.size());
  for (r.steps = 0; r.steps < config.max_steps; ++r.steps) {
    r.grad_norm = projected_norm(r.x, grad);
    if (r.grad_norm <= config.grad_tolerance) {
      r.converged = true;
      return r;
    }
    bool accepted = false;
    while (step >= config.min_step) {
      VectorXd trial = r.x - step * grad;
      if (box) trial = box->clamp(trial);
      const double decrease = grad.dot(r.x - trial);
      const double value = f(trial, &trial_grad);
      if (value <= r.value - 1e-4 * decrease && decrease > 0.0) {
        r.x = std::move(trial);
        r.value = value;
        grad.swap(trial_grad);
        accepted = true;
        step = std::min(2.0 * step, config.max_step);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      r.stalled = true;
      return r;
    }
    if ((r.steps + 1) % kWindow == 0) {
      if (window_start - r.value <= config.stall_tolerance * (1.0 + std::abs(r.value))) {
        r.stalled = true;
        return r;
      }
      window_start = r.value;
    }
  }
  r.grad_norm = projected_norm(r.x, grad);
  r.converged = r.grad_norm <= config.grad_tolerance;
  return r;
}

DescentResult multistart_descend(const Objective& f, const Box& start_box, int restarts,
                                 const DescentConfig& config, std::uint64_t seed, const Box* constraint) {
  if (restarts < 1) throw ConfigError("multi-start descent needs at least one restart");
  Rng rng(seed);
  DescentResult best;
  for (int r = 0; r < restarts; ++r) {
    VectorXd x0(start_box.dim());
    for (Eigen::Index k = 0; k < x0.size(); ++k) x0(k) = rng.uniform(start_box.lo(k), start_box.hi(k));
    DescentResult d = descend(f, std::move(x0), config, constraint);
    if (d.value < best.value) best = std::move(d);
  }
  return best;
}

}  // namespace nervemp
