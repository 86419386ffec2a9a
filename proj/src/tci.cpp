#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "mpsenc/linalg.hpp"
#include "mpsenc/rng.hpp"
#include "mpsenc/targets.hpp"

namespace mpsenc::targets {

namespace {

using linalg::choose_rank;
using linalg::thin_svd;

// Rows of `a` (m x r, m >= r) spanning a maximum-volume r x r submatrix, found
// by greedy row swaps from a pivoted-LU start.
std::vector<Eigen::Index> maxvol(const RowMat& a, int max_iters) {
  const Eigen::Index m = a.rows(), r = a.cols();
  std::vector<Eigen::Index> piv(static_cast<std::size_t>(r));
  if (m == r) {
    for (Eigen::Index i = 0; i < r; ++i) piv[static_cast<std::size_t>(i)] = i;
    return piv;
  }
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(a);
  const auto& perm = lu.permutationP().indices();
  // permutationP maps original row i to position perm[i]; invert it.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(perm[i])] = i;
  for (Eigen::Index i = 0; i < r; ++i) piv[static_cast<std::size_t>(i)] = order[static_cast<std::size_t>(i)];

  for (int it = 0; it < max_iters; ++it) {
    RowMat sub(r, r);
    for (Eigen::Index i = 0; i < r; ++i) sub.row(i) = a.row(piv[static_cast<std::size_t>(i)]);
    // B = A * sub^{-1}  <=>  sub^T B^T = A^T.
    Eigen::PartialPivLU<Eigen::MatrixXcd> slu(sub.transpose());
    Eigen::MatrixXcd b = slu.solve(Eigen::MatrixXcd(a.transpose())).transpose();
    Eigen::Index bi = 0, bj = 0;
    const double best = b.cwiseAbs().maxCoeff(&bi, &bj);
    if (!(best > 1.0 + 1e-2)) break;
    piv[static_cast<std::size_t>(bj)] = bi;
  }
  return piv;
}

class CrossBuilder {
 public:
  CrossBuilder(const std::function<double(double)>& f, double a, double b, std::size_t n)
      : f_(f), a_(a), b_(b), n_(n) {}

  double value(std::uint64_t idx) {
    ++requests_;
    auto it = cache_.find(idx);
    if (it != cache_.end()) return it->second;
    const double v = f_(grid_point(a_, b_, n_, idx));
    if (!std::isfinite(v)) throw InvalidTarget("function is not finite at grid index " + std::to_string(idx));
    cache_.emplace(idx, v);
    return v;
  }

  double raw(std::uint64_t idx) const { return f_(grid_point(a_, b_, n_, idx)); }

  std::size_t distinct() const { return cache_.size(); }
  std::size_t requests() const { return requests_; }

  // Superblock over sites (k, k+1): rows (I_k, s_k), cols (s_{k+1}, J_{k+2}).
  RowMat superblock(std::size_t k, const std::vector<std::uint64_t>& left,
                    const std::vector<std::uint64_t>& right) {
    const auto nl = static_cast<Eigen::Index>(left.size());
    const auto nr = static_cast<Eigen::Index>(right.size());
    const unsigned tail = static_cast<unsigned>(n_ - k - 2);
    RowMat m(nl * 2, 2 * nr);
    for (Eigen::Index i = 0; i < nl; ++i) {
      for (std::uint64_t s1 = 0; s1 < 2; ++s1) {
        for (std::uint64_t s2 = 0; s2 < 2; ++s2) {
          for (Eigen::Index j = 0; j < nr; ++j) {
            const std::uint64_t idx =
                (((left[static_cast<std::size_t>(i)] << 1 | s1) << 1 | s2) << tail) |
                right[static_cast<std::size_t>(j)];
            m(i * 2 + static_cast<Eigen::Index>(s1), static_cast<Eigen::Index>(s2) * nr + j) =
                value(idx);
          }
        }
      }
    }
    return m;
  }

 private:
  const std::function<double(double)>& f_;
  double a_, b_;
  std::size_t n_;
  std::unordered_map<std::uint64_t, double> cache_;
  std::size_t requests_ = 0;
};

tn::Core core_from(const RowMat& m, std::size_t left, std::size_t right) {
  tn::Core c(left, right);
  Eigen::Map<RowMat>(c.data.data(), m.rows(), m.cols()) = m;
  return c;
}

double eval_cores(const std::vector<tn::Core>& cores, std::uint64_t idx) {
  const std::size_t n = cores.size();
  Eigen::RowVectorXcd v = Eigen::RowVectorXcd::Ones(1);
  for (std::size_t k = 0; k < n; ++k) v = v * cores[k].slice((idx >> (n - 1 - k)) & 1U);
  return v(0).real();
}

}  // namespace

CrossResult tci_build(const std::function<double(double)>& f, double a, double b, std::size_t n,
                      std::size_t chi_cap, double tol, std::uint64_t seed,
                      const CrossOptions& options) {
  if (n < 2 || n > 62) throw InvalidParameter("tci_build supports 2 <= n <= 62");
  if (chi_cap < 1) throw InvalidParameter("chi_cap must be at least 1");
  if (!(tol >= 0.0)) throw InvalidParameter("tol must be non-negative");
  if (!(a < b)) throw InvalidParameter("domain needs a < b");

  CrossBuilder fb(f, a, b, n);
  Rng rng(seed);
  const std::uint64_t full = n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n);

  // Start from the largest-magnitude entry among a few random probes.
  std::uint64_t start = 0;
  double best = -1.0;
  for (int t = 0; t < 64; ++t) {
    const std::uint64_t idx = rng.below(full);
    const double v = std::abs(fb.value(idx));
    if (v > best) {
      best = v;
      start = idx;
    }
  }
  std::vector<std::vector<std::uint64_t>> left(n + 1), right(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    left[k] = {k == 0 ? 0 : start >> (n - k)};
    right[k] = {k == n ? 0 : start & ((std::uint64_t{1} << (n - k)) - 1)};
  }

  // Hold-out set, drawn from its own stream so build sampling cannot touch it.
  Rng hold_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::uint64_t> hold(options.holdout_samples);
  std::vector<double> hold_val(hold.size());
  double hold_norm = 0.0;
  for (std::size_t i = 0; i < hold.size(); ++i) {
    hold[i] = hold_rng.below(full);
    hold_val[i] = fb.raw(hold[i]);
    hold_norm += hold_val[i] * hold_val[i];
  }
  auto holdout_error = [&](const std::vector<tn::Core>& cores) {
    double err = 0.0;
    for (std::size_t i = 0; i < hold.size(); ++i) {
      const double d = eval_cores(cores, hold[i]) - hold_val[i];
      err += d * d;
    }
    return hold_norm > 0.0 ? std::sqrt(err / hold_norm) : std::sqrt(err);
  };

  auto cap_rank = [&](std::size_t r, std::size_t previous) {
    if (options.rank_increment > 0) r = std::min(r, previous + options.rank_increment);
    return r;
  };

  CrossResult result;
  std::vector<tn::Core> cores(n);
  std::vector<tn::Core> best_cores;
  double best_err = std::numeric_limits<double>::infinity();
  double prev_err = std::numeric_limits<double>::infinity();

  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    // Left-to-right: refresh left index sets, cores are left interpolants.
    for (std::size_t k = 0; k + 1 < n; ++k) {
      RowMat m = fb.superblock(k, left[k], right[k + 2]);
      auto svd = thin_svd(m);
      std::size_t r = choose_rank(svd.s, chi_cap, tol * 1e-2);
      r = cap_rank(r, left[k + 1].size());
      if (r >= chi_cap && svd.s.size() > static_cast<Eigen::Index>(chi_cap)) result.chi_cap_reached = true;
      const auto rr = static_cast<Eigen::Index>(r);
      RowMat u = svd.u.leftCols(rr);
      if (k + 2 < n) {
        auto piv = maxvol(u, options.maxvol_iterations);
        std::vector<std::uint64_t> next(r);
        RowMat sub(rr, rr);
        for (std::size_t i = 0; i < r; ++i) {
          const auto row = piv[i];
          next[i] = (left[k][static_cast<std::size_t>(row / 2)] << 1) | static_cast<std::uint64_t>(row % 2);
          sub.row(static_cast<Eigen::Index>(i)) = u.row(row);
        }
        RowMat interp = Eigen::PartialPivLU<Eigen::MatrixXcd>(sub.transpose())
                            .solve(Eigen::MatrixXcd(u.transpose()))
                            .transpose();
        cores[k] = core_from(interp, left[k].size(), r);
        left[k + 1] = std::move(next);
      } else {
        RowMat sv = svd.s.head(rr).asDiagonal() * svd.vh.topRows(rr);
        cores[k] = core_from(u, left[k].size(), r);
        cores[k + 1] = core_from(sv, r, 1);
      }
    }
    // Right-to-left: refresh right index sets, cores are right interpolants.
    for (std::size_t k = n - 1; k-- > 0;) {
      RowMat m = fb.superblock(k, left[k], right[k + 2]);
      auto svd = thin_svd(m);
      std::size_t r = choose_rank(svd.s, chi_cap, tol * 1e-2);
      r = cap_rank(r, right[k + 1].size());
      if (r >= chi_cap && svd.s.size() > static_cast<Eigen::Index>(chi_cap)) result.chi_cap_reached = true;
      const auto rr = static_cast<Eigen::Index>(r);
      RowMat vh = svd.vh.topRows(rr);
      const std::size_t nr = right[k + 2].size();
      const unsigned tail = static_cast<unsigned>(n - k - 2);
      if (k > 0) {
        RowMat vt = vh.transpose();
        auto piv = maxvol(vt, options.maxvol_iterations);
        std::vector<std::uint64_t> next(r);
        RowMat sub(rr, rr);
        for (std::size_t i = 0; i < r; ++i) {
          const auto col = static_cast<std::size_t>(piv[i]);
          next[i] = (static_cast<std::uint64_t>(col / nr) << tail) | right[k + 2][col % nr];
          sub.col(static_cast<Eigen::Index>(i)) = vh.col(piv[i]);
        }
        RowMat interp = Eigen::PartialPivLU<Eigen::MatrixXcd>(sub).solve(Eigen::MatrixXcd(vh));
        cores[k + 1] = core_from(interp, r, nr);
        right[k + 1] = std::move(next);
      } else {
        RowMat us = svd.u.leftCols(rr) * svd.s.head(rr).asDiagonal();
        cores[k] = core_from(us, 1, r);
        cores[k + 1] = core_from(vh, r, nr);
      }
    }
    result.sweeps = sweep + 1;
    const double err = holdout_error(cores);
    if (err < best_err) {
      best_err = err;
      best_cores = cores;
    }
    if (err <= tol) {
      result.converged = true;
      break;
    }
    // Stalled: the ranks are saturated and the error no longer moves.
    if (sweep > 0 && std::abs(prev_err - err) <= 1e-3 * std::max(err, 1e-300)) {
      result.converged = true;
      break;
    }
    prev_err = err;
  }

  tn::Mps raw(std::move(best_cores));
  result.norm = std::sqrt(std::max(0.0, tn::inner_product(raw, raw).real()));
  if (!(result.norm > 0.0)) throw InvalidTarget("function has zero norm on the grid");
  result.mps = tn::canonicalize(raw, tn::Canonical::left());
  result.mps.normalize();
  result.est_error = best_err;
  result.samples_used = fb.distinct();
  result.total_evaluations = fb.requests() + hold.size();
  return result;
}

}  // namespace mpsenc::targets
