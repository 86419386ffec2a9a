#include "mpsenc/lbfgs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

#include "mpsenc/common.hpp"

namespace mpsenc::opt {

std::string status_name(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::GradientTolerance: return "gradient_tolerance";
    case LbfgsStatus::NoImprovement: return "no_improvement";
    case LbfgsStatus::MaxIterations: return "max_iterations";
    case LbfgsStatus::LineSearchFailure: return "line_search_failure";
  }
  return "unknown";
}

namespace {

struct Point {
  double a = 0.0;   // step length
  double f = 0.0;   // phi(a)
  double d = 0.0;   // phi'(a)
  Eigen::VectorXd x, g;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db); NaN if none.
double cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc < 0) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  return b - (b - a) * (db + d2 - d1) / (db - da + 2 * d2);
}

class LineSearch {
 public:
  LineSearch(const Objective& f, const LbfgsOptions& o, std::size_t& evals)
      : f_(f), o_(o), evals_(evals) {}

  // Returns true with `out` satisfying the strong Wolfe conditions. On failure
  // `out` holds the best sufficient-decrease point, if any (out.a > 0).
  bool run(const Eigen::VectorXd& x0, double f0, double d0, const Eigen::VectorXd& dir,
           double a_init, Point& out) {
    x0_ = &x0;
    dir_ = &dir;
    f0_ = f0;
    d0_ = d0;
    best_ = Point{};
    best_.f = f0;
    Point prev{0.0, f0, d0, {}, {}};
    double a = a_init;
    for (std::size_t i = 0; i < o_.max_line_search; ++i) {
      Point cur = eval(a);
      if (!std::isfinite(cur.f) || cur.f > f0 + o_.c1 * a * d0 || (i > 0 && cur.f >= prev.f)) {
        return zoom(prev, cur, out);
      }
      if (std::abs(cur.d) <= -o_.c2 * d0) {
        out = std::move(cur);
        return true;
      }
      if (cur.d >= 0) return zoom(cur, prev, out);
      prev = std::move(cur);
      a *= 2.0;
    }
    out = best_;
    return false;
  }

 private:
  Point eval(double a) {
    Point p;
    p.a = a;
    p.x = *x0_ + a * *dir_;
    p.g.resize(p.x.size());
    p.f = f_(p.x, p.g);
    ++evals_;
    p.d = p.g.dot(*dir_);
    if (std::isfinite(p.f) && p.f <= f0_ + o_.c1 * a * d0_ && p.f < best_.f) best_ = p;
    return p;
  }

  // lo satisfies sufficient decrease and has the lower value; the minimizer
  // lies between lo.a and hi.a.
  bool zoom(Point lo, Point hi, Point& out) {
    for (std::size_t i = 0; i < o_.max_line_search; ++i) {
      const double left = std::min(lo.a, hi.a), right = std::max(lo.a, hi.a);
      const double width = right - left;
      if (width <= 1e-16 * std::max(1.0, right)) break;
      double a = std::isfinite(hi.f) ? cubic_min(lo.a, lo.f, lo.d, hi.a, hi.f, hi.d)
                                     : std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(a) || a < left + 0.1 * width || a > right - 0.1 * width) {
        a = left + 0.5 * width;
      }
      Point cur = eval(a);
      if (!std::isfinite(cur.f) || cur.f > f0_ + o_.c1 * a * d0_ || cur.f >= lo.f) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.d) <= -o_.c2 * d0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.d * (hi.a - lo.a) >= 0) hi = lo;
      lo = std::move(cur);
    }
    out = best_;
    return false;
  }

  const Objective& f_;
  const LbfgsOptions& o_;
  std::size_t& evals_;
  const Eigen::VectorXd* x0_ = nullptr;
  const Eigen::VectorXd* dir_ = nullptr;
  double f0_ = 0.0, d0_ = 0.0;
  Point best_;
};

}  // namespace

LbfgsResult lbfgs(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& o) {
  if (o.memory == 0) throw InvalidParameter("L-BFGS memory must be positive");
  if (!(o.c1 > 0 && o.c1 < o.c2 && o.c2 < 1)) {
    throw InvalidParameter("line search constants need 0 < c1 < c2 < 1");
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  LbfgsResult r;
  r.x = std::move(x0);
  Eigen::VectorXd g(r.x.size());
  r.f = f(r.x, g);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !g.allFinite()) throw NumericalError("objective is not finite at the start");
  r.initial_f = r.f;
  r.gradient_norm = g.norm();
  r.trace.push_back({0, r.f, r.gradient_norm, elapsed()});

  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;
  LineSearch ls(f, o, r.evaluations);

  if (r.gradient_norm <= o.gradient_tol) {
    r.status = LbfgsStatus::GradientTolerance;
    return r;
  }
  r.status = LbfgsStatus::MaxIterations;
  while (r.iterations < o.max_iters) {
    // Two-loop recursion.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(S.size());
    for (std::size_t i = S.size(); i-- > 0;) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    Eigen::VectorXd dir = -q;
    double d0 = g.dot(dir);
    if (!(d0 < 0)) {
      S.clear(), Y.clear(), rho.clear();
      dir = -g;
      d0 = -g.squaredNorm();
    }
    double a_init = S.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;

    // A step that only satisfies sufficient decrease is still accepted.
    Point p;
    const bool ok = ls.run(r.x, r.f, d0, dir, a_init, p);
    if (!ok && p.a == 0.0 && !S.empty()) {
      // Retry once along steepest descent with a fresh memory.
      S.clear(), Y.clear(), rho.clear();
      dir = -g;
      d0 = -g.squaredNorm();
      ls.run(r.x, r.f, d0, dir, std::min(1.0, 1.0 / g.norm()), p);
    }
    if (p.a == 0.0) {
      r.status = LbfgsStatus::LineSearchFailure;
      break;
    }

    Eigen::VectorXd s = p.x - r.x;
    Eigen::VectorXd y = p.g - g;
    const double sy = s.dot(y);
    const double improvement = r.f - p.f;
    r.x = std::move(p.x);
    g = std::move(p.g);
    r.f = p.f;
    r.gradient_norm = g.norm();
    ++r.iterations;
    r.trace.push_back({r.iterations, r.f, r.gradient_norm, elapsed()});

    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (S.size() > o.memory) S.pop_front(), Y.pop_front(), rho.pop_front();
    }
    if (r.gradient_norm <= o.gradient_tol) {
      r.status = LbfgsStatus::GradientTolerance;
      break;
    }
    if (improvement < o.improvement_tol) {
      r.status = LbfgsStatus::NoImprovement;
      break;
    }
  }
  return r;
}

}  // namespace mpsenc::opt
