#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mpsenc::opt {

/// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
  std::size_t max_iters = 500;
  std::size_t memory = 10;
  double gradient_tol = 1e-8;     // stop when ||g||_2 <= gradient_tol
  double improvement_tol = 1e-12; // stop when f_k - f_{k+1} < improvement_tol
  double c1 = 1e-4;               // sufficient decrease
  double c2 = 0.9;                // curvature (strong Wolfe)
  std::size_t max_line_search = 40;
};

enum class LbfgsStatus { GradientTolerance, NoImprovement, MaxIterations, LineSearchFailure };
std::string status_name(LbfgsStatus s);

struct LbfgsIterate {
  std::size_t iteration = 0;
  double f = 0.0;
  double gradient_norm = 0.0;
  double elapsed_ms = 0.0;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double initial_f = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
  /// Iterate 0 is the starting point; one entry per accepted step after that.
  std::vector<LbfgsIterate> trace;

  bool converged() const {
    return status == LbfgsStatus::GradientTolerance || status == LbfgsStatus::NoImprovement;
  }
};

/// Limited-memory BFGS with a strong-Wolfe line search (bracketing + cubic
/// zoom). Accepted steps never increase f; on line-search failure the best
/// point seen so far is returned.
LbfgsResult lbfgs(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& options = {});

}  // namespace mpsenc::opt
