#pragma once

#include <cstdint>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace nervemp {

// Per-coordinate bounds; infinite entries leave a coordinate unconstrained.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Box around(const Eigen::VectorXd& center, double radius);
  static Box unbounded(Eigen::Index dim);

  Eigen::Index dim() const { return lo.size(); }
  bool contains(const Eigen::VectorXd& x) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
  Eigen::VectorXd center() const;
};

// Returns f(x) and, when `grad` is non-null, writes the gradient.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct DescentConfig {
  int max_steps = 5000;
  double step = 1e-2;
  double grad_tolerance = 1e-5;
  // Backtracking gives up below this step; at a kink of a piecewise-linear
  // term this is the only way the iteration can end.
  double min_step = 1e-14;
  double max_step = 1e3;
  // Relative decrease over 100 accepted steps below which descent stalls.
  double stall_tolerance = 1e-9;
};

struct DescentResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  int steps = 0;
  bool converged = false;  // projected gradient below tolerance
  bool stalled = false;    // no decrease possible along -grad
  bool ok() const { return converged || stalled; }
};

// Projected gradient descent with Armijo backtracking (halving). Accepted
// steps grow the trial step by 2x, up to max_step.
DescentResult descend(const Objective& f, Eigen::VectorXd x0, const DescentConfig& config,
                      const Box* box = nullptr);

// `restarts` descents from points uniform in `start_box`; best value wins.
// Unbounded coordinates of `start_box` must not be used here.
DescentResult multistart_descend(const Objective& f, const Box& start_box, int restarts,
                                 const DescentConfig& config, std::uint64_t seed,
                                 const Box* constraint = nullptr);

}  // namespace nervemp
