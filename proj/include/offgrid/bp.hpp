#ifndef OFFGRID_BP_HPP
#define OFFGRID_BP_HPP

// Grid basis pursuit: minimize sum_k |c_k| subject to (F c)_j = y_j on T,
// where F maps coefficients on the grid {k/N} to samples over J.
// ADMM with complex shrinkage; F restricted to T has orthogonal rows
// (F_T F_T^* = N I), so the affine projection is closed form.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "offgrid/core.hpp"

namespace offgrid {

struct BpOptions {
  int grid_factor = 4;
  int max_iterations = 20000;
  double rho = 1.0;
  double over_relaxation = 1.8;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  int check_every = 10;
  /// Support read-off threshold relative to max |c_k|.
  double support_threshold = 1e-3;

  void validate() const {
    require(grid_factor >= 1, ErrorKind::Precondition, "grid_factor must be >= 1");
    require(max_iterations >= 1, ErrorKind::Precondition, "max_iterations must be >= 1");
    require(rho > 0.0, ErrorKind::Precondition, "rho must be positive");
    require(over_relaxation >= 1.0 && over_relaxation < 2.0, ErrorKind::Precondition,
            "over_relaxation must lie in [1,2)");
    require(tol_primal > 0.0 && tol_dual > 0.0, ErrorKind::Precondition, "tolerances must be positive");
    require(check_every >= 1, ErrorKind::Precondition, "check_every must be >= 1");
  }
};

struct BpSolution {
  IndexSet index_set = IndexSet::first_n(2);
  int grid_size = 0;
  CVector c;
  double objective = 0.0;
  /// ||(F c)_T - y||.
  double residual = 0.0;
  std::vector<int> support;
  int iterations = 0;
  bool converged = false;
  double solve_seconds = 0.0;

  double grid_frequency(int k) const { return static_cast<double>(k) / grid_size; }
};

namespace detail {

/// Applies F_T and its adjoint through length-N FFTs.
class GridOperator {
 public:
  GridOperator(const IndexSet& J, const std::vector<int>& mask, int N) : N_(N) {
    for (int j : mask) rows_.push_back(((j % N) + N) % N);
    J_positions_.reserve(static_cast<std::size_t>(J.size()));
    for (int j : J.indices()) J_positions_.push_back(((j % N) + N) % N);
    buf_.resize(static_cast<std::size_t>(N));
    out_.resize(static_cast<std::size_t>(N));
  }

  int grid_size() const { return N_; }

  /// (F c)_j for j in the given residues.
  CVector forward(const CVector& c, const std::vector<int>& residues) {
    for (int k = 0; k < N_; ++k) buf_[static_cast<std::size_t>(k)] = c[k];
    // sum_k c_k e^{+i 2 pi k j / N} = N * ifft(c)_j
    fft_.inv(out_, buf_);
    CVector r(static_cast<Eigen::Index>(residues.size()));
    for (std::size_t i = 0; i < residues.size(); ++i)
      r[static_cast<Eigen::Index>(i)] = out_[static_cast<std::size_t>(residues[i])] * static_cast<double>(N_);
    return r;
  }

  CVector apply(const CVector& c) { return forward(c, rows_); }
  CVector synthesize(const CVector& c) { return forward(c, J_positions_); }

  /// F_T^* r.
  CVector adjoint(const CVector& r) {
    std::fill(buf_.begin(), buf_.end(), cplx(0.0));
    for (std::size_t i = 0; i < rows_.size(); ++i) buf_[static_cast<std::size_t>(rows_[i])] += r[static_cast<Eigen::Index>(i)];
    fft_.fwd(out_, buf_);
    CVector c(N_);
    for (int k = 0; k < N_; ++k) c[k] = out_[static_cast<std::size_t>(k)];
    return c;
  }

 private:
  int N_;
  std::vector<int> rows_;
  std::vector<int> J_positions_;
  std::vector<cplx> buf_, out_;
  Eigen::FFT<double> fft_;
};

inline void shrink(const CVector& v, double tau, CVector& out) {
  out.resize(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double a = std::abs(v[k]);
    out[k] = a > tau ? v[k] * ((a - tau) / a) : cplx(0.0);
  }
}

}  // namespace detail

inline BpSolution bp_solve(const SampleSet& obs, const BpOptions& opts = {}) {
  opts.validate();
  require(obs.m() >= 1, ErrorKind::Precondition, "basis pursuit needs at least one observation");
  const auto t0 = std::chrono::steady_clock::now();
  const IndexSet& J = obs.index_set();
  const int N = opts.grid_factor * J.size();
  detail::GridOperator F(J, obs.mask(), N);

  BpSolution sol;
  sol.index_set = J;
  sol.grid_size = N;
  const CVector& y_raw = obs.values();
  const double scale = y_raw.norm() / std::sqrt(static_cast<double>(obs.m()));
  if (scale == 0.0) {
    sol.c = CVector::Zero(N);
    sol.converged = true;
    sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }
  const CVector y = y_raw / scale;
  const double invN = 1.0 / N;

  auto project = [&](const CVector& v) -> CVector { return v - F.adjoint(F.apply(v) - y) * invN; };

  CVector z = CVector::Zero(N), w = CVector::Zero(N), c(N), chat(N), z_prev;
  double rho = opts.rho;
  const double alpha = opts.over_relaxation;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    c = project(z - w);
    chat = alpha * c + (1.0 - alpha) * z;
    z_prev = z;
    detail::shrink(chat + w, 1.0 / rho, z);
    w += chat - z;
    sol.iterations = it;
    if (it % opts.check_every != 0) continue;
    const double r = (c - z).norm() / std::max({c.norm(), z.norm(), 1e-300});
    const double s = rho * (z - z_prev).norm() / std::max(rho * w.norm(), 1e-300);
    if (r <= opts.tol_primal && s <= opts.tol_dual) {
      sol.converged = true;
      break;
    }
    if (it % (5 * opts.check_every) == 0) {
      if (r > 10.0 * s) {
        rho *= 2.0;
        w /= 2.0;
      } else if (s > 10.0 * r) {
        rho /= 2.0;
        w *= 2.0;
      }
    }
  }
  // The sparse iterate pulled back onto the constraint set.
  sol.c = project(z) * scale;
  sol.objective = sol.c.cwiseAbs().sum();
  sol.residual = (F.apply(sol.c) - y_raw).norm();
  const double cmax = sol.c.cwiseAbs().maxCoeff();
  for (int k = 0; k < N; ++k)
    if (std::abs(sol.c[k]) > opts.support_threshold * cmax) sol.support.push_back(k);
  sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

/// Samples F c over the whole index set.
inline ComplexSignal bp_signal(const BpSolution& sol) {
  std::vector<int> none;
  detail::GridOperator F(sol.index_set, none, sol.grid_size);
  return {sol.index_set, F.synthesize(sol.c)};
}

/// Grid frequencies with |c_k| > threshold * max |c|; runs of adjacent bins
/// (cyclically) are merged into their magnitude-weighted centroid.
inline std::vector<double> bp_localize(const BpSolution& sol, double threshold) {
  std::vector<double> out;
  const int N = sol.grid_size;
  if (N == 0 || sol.c.size() == 0) return out;
  const double cmax = sol.c.cwiseAbs().maxCoeff();
  if (cmax == 0.0) return out;
  std::vector<int> active;
  for (int k = 0; k < N; ++k)
    if (std::abs(sol.c[k]) > threshold * cmax) active.push_back(k);
  if (active.empty()) return out;
  if (static_cast<int>(active.size()) == N) fail(ErrorKind::NonIsolated, "every grid bin is active");

  // Start at a gap so that no cluster straddles the starting point.
  std::size_t start = 0;
  for (std::size_t i = 0; i < active.size(); ++i) {
    const int prev = active[(i + active.size() - 1) % active.size()];
    const int gap = ((active[i] - prev) % N + N) % N;
    if (active.size() == 1 || gap > 1) {
      start = i;
      break;
    }
  }
  constexpr double kMergeRadius = 1.5;  // bins
  double wsum = 0.0, acc = 0.0;
  int anchor = active[start];
  auto flush = [&] {
    if (wsum > 0.0) out.push_back(wrap_unit((anchor + acc / wsum) / N));
    wsum = acc = 0.0;
  };
  int last = anchor;
  for (std::size_t n = 0; n < active.size(); ++n) {
    const int k = active[(start + n) % active.size()];
    const int step = ((k - last) % N + N) % N;
    if (n > 0 && step > kMergeRadius) {
      flush();
      anchor = k;
    }
    const double w = std::abs(sol.c[k]);
    const int offset = ((k - anchor) % N + N) % N;
    wsum += w;
    acc += w * offset;
    last = k;
  }
  flush();
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace offgrid

#endif
