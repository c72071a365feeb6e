#ifndef OFFGRID_SOLVER_HPP
#define OFFGRID_SOLVER_HPP

// Atomic norm minimization through its semidefinite form
//
//   minimize   u_0 / 2 + t / 2        ( = trace(Toep(u)) / (2|J|) + t / 2 )
//   subject to [Toep(u) x; x^* t] >= 0,  x_T = y   (or ||x_T - y|| <= eps)
//
// solved by over-relaxed ADMM on the splitting
//   W = [Toep(u) x; x^* t]  (affine structure + data constraint + objective)
//   Z >= 0                  (PSD cone)
// with adaptive penalty, followed by an optional polishing stage that
// localizes the atoms from the dual polynomial and refines them jointly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "offgrid/core.hpp"
#include "offgrid/linalg.hpp"
#include "offgrid/localize.hpp"

namespace offgrid {

struct SolverOptions {
  int max_iterations = 50000;
  double rho = 1.0;              // initial penalty (data are normalized to unit RMS)
  double over_relaxation = 1.8;  // in [1, 2)
  double tol_primal = 1e-7;      // relative
  double tol_dual = 1e-7;        // relative
  bool polish = true;
  bool adaptive_rho = true;
  int check_every = 10;
  /// Relative observed-sample residual below which a polished model counts as feasible.
  double polish_tolerance = 1e-9;
  LocalizationOptions localization{};

  void validate() const {
    require(max_iterations >= 1, ErrorKind::Precondition, "max_iterations must be >= 1");
    require(rho > 0.0, ErrorKind::Precondition, "rho must be positive");
    require(over_relaxation >= 1.0 && over_relaxation < 2.0, ErrorKind::Precondition,
            "over_relaxation must lie in [1,2)");
    require(tol_primal > 0.0 && tol_dual > 0.0, ErrorKind::Precondition, "tolerances must be positive");
    require(check_every >= 1, ErrorKind::Precondition, "check_every must be >= 1");
  }
};

enum class SolverStatus { Converged, MaxIter, Infeasible };

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Converged: return "converged";
    case SolverStatus::MaxIter: return "max_iter";
    case SolverStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

struct SdpSolution {
  ComplexSignal x{IndexSet::first_n(2), CVector::Zero(2)};
  HermitianToeplitz u{CVector::Zero(2)};
  double t = 0.0;
  double objective = 0.0;
  /// Dual coefficients over J; exactly zero off the mask.
  CVector q;
  std::vector<int> mask;
  CVector observed;
  double epsilon = 0.0;

  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  SolverStatus status = SolverStatus::MaxIter;

  /// Objective of the (PSD-corrected) splitting iterate before polishing.
  double sdp_objective = 0.0;
  bool polished = false;
  /// Atoms of the polished solution (empty when not polished).
  SpectralModel atoms;
  double solve_seconds = 0.0;

  /// Re <q_T, y_T>, the dual objective.
  double dual_value() const {
    double v = 0.0;
    const IndexSet& J = x.index_set;
    for (std::size_t i = 0; i < mask.size(); ++i)
      v += std::real(std::conj(observed[static_cast<Eigen::Index>(i)]) * q[J.position(mask[i])]);
    return v - epsilon * masked_q_norm();
  }

  double masked_q_norm() const {
    double s = 0.0;
    const IndexSet& J = x.index_set;
    for (int j : mask) s += std::norm(q[J.position(j)]);
    return std::sqrt(s);
  }

  /// The bordered matrix [Toep(u) x; x^* t].
  CMatrix bordered() const {
    const Eigen::Index n = x.samples.size();
    CMatrix B(n + 1, n + 1);
    B.topLeftCorner(n, n) = u.matrix();
    B.topRightCorner(n, 1) = x.samples;
    B.bottomLeftCorner(1, n) = x.samples.adjoint();
    B(n, n) = t;
    return B;
  }
};

namespace detail {

enum class DataConstraint { Equality, Ball };

class AdmmWorkspace {
 public:
  AdmmWorkspace(const IndexSet& J, const std::vector<int>& mask, const CVector& y, DataConstraint kind, double eps,
                const SolverOptions& opts)
      : J_(J), n_(J.size()), kind_(kind), eps_(eps), opts_(opts), y_(y) {
    observed_.assign(static_cast<std::size_t>(n_), false);
    yfull_ = CVector::Zero(n_);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const int p = J.position(mask[i]);
      observed_[static_cast<std::size_t>(p)] = true;
      yfull_[p] = y[static_cast<Eigen::Index>(i)];
    }
    for (int p = 0; p < n_; ++p)
      if (observed_[static_cast<std::size_t>(p)]) obs_pos_.push_back(p);
  }

  struct Result {
    CVector u;
    CVector x;
    double t = 0.0;
    CMatrix dual;  // Lambda
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool converged = false;
  };

  Result run() {
    const Eigen::Index N = n_ + 1;
    CMatrix Z = CMatrix::Zero(N, N);
    CMatrix U = CMatrix::Zero(N, N);  // scaled dual Lambda / rho
    double rho = opts_.rho;
    const double alpha = opts_.over_relaxation;

    CVector u = CVector::Zero(n_), x = CVector::Zero(n_), u_prev, x_prev;
    double t = 0.0, t_prev = 0.0;
    CMatrix W(N, N), V(N, N), What(N, N), Tmp(N, N);
    linalg::PsdProjector projector(N);
    Result res;
    double r_norm = 0.0, s_norm = 0.0;

    for (int it = 1; it <= opts_.max_iterations; ++it) {
      u_prev = u;
      x_prev = x;
      t_prev = t;
      V = Z + U;
      affine_step(V, rho, u, x, t);
      assemble(u, x, t, W);

      What = alpha * W + (1.0 - alpha) * Z;
      Tmp = What - U;
      projector.project(Tmp, Z);
      U += Z - What;

      const bool check = (it % opts_.check_every == 0) || it == opts_.max_iterations;
      if (!check) continue;

      r_norm = (Z - W).norm();
      s_norm = rho * structured_norm(u - u_prev, x - x_prev, t - t_prev);
      const double pscale = std::max({Z.norm(), W.norm(), 1e-300});
      const double dscale = std::max(rho * U.norm(), 1e-300);
      res.primal_residual = r_norm / pscale;
      res.dual_residual = s_norm / dscale;
      res.iterations = it;
      if (res.primal_residual <= opts_.tol_primal && res.dual_residual <= opts_.tol_dual) {
        res.converged = true;
        break;
      }
      if (opts_.adaptive_rho && it % (5 * opts_.check_every) == 0) {
        const double rp = res.primal_residual, rd = res.dual_residual;
        if (rp > 10.0 * rd) {
          rho *= 2.0;
          U /= 2.0;
        } else if (rd > 10.0 * rp) {
          rho /= 2.0;
          U *= 2.0;
        }
      }
    }
    res.u = u;
    res.x = x;
    res.t = t;
    res.dual = rho * U;
    return res;
  }

 private:
  // argmin_W obj(W) + rho/2 ||W - V||^2 over the affine structure.
  void affine_step(const CMatrix& V, double rho, CVector& u, CVector& x, double& t) const {
    const int n = n_;
    for (int k = 0; k < n; ++k) {
      cplx acc = 0.0;
      for (int j = 0; j + k < n; ++j) acc += V(j + k, j);
      u[k] = acc / static_cast<double>(n - k);
    }
    u[0] = cplx(u[0].real() - 1.0 / (2.0 * rho * n), 0.0);
    t = V(n, n).real() - 1.0 / (2.0 * rho);
    for (int p = 0; p < n; ++p) x[p] = 0.5 * (V(p, n) + std::conj(V(n, p)));
    if (kind_ == DataConstraint::Equality) {
      for (int p : obs_pos_) x[p] = yfull_[p];
    } else {
      double d2 = 0.0;
      for (int p : obs_pos_) d2 += std::norm(x[p] - yfull_[p]);
      const double d = std::sqrt(d2);
      if (d > eps_) {
        const double s = eps_ / d;
        for (int p : obs_pos_) x[p] = yfull_[p] + s * (x[p] - yfull_[p]);
      }
    }
  }

  void assemble(const CVector& u, const CVector& x, double t, CMatrix& W) const {
    const int n = n_;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) W(j, k) = j >= k ? u[j - k] : std::conj(u[k - j]);
    W.block(0, n, n, 1) = x;
    W.block(n, 0, 1, n) = x.adjoint();
    W(n, n) = t;
  }

  // Frobenius norm of the bordered matrix generated by (du, dx, dt).
  double structured_norm(const CVector& du, const CVector& dx, double dt) const {
    double s = n_ * std::norm(du[0]);
    for (int k = 1; k < n_; ++k) s += 2.0 * (n_ - k) * std::norm(du[k]);
    s += 2.0 * dx.squaredNorm() + dt * dt;
    return std::sqrt(s);
  }

  IndexSet J_;
  int n_;
  DataConstraint kind_;
  double eps_;
  SolverOptions opts_;
  CVector y_;
  CVector yfull_;
  std::vector<bool> observed_;
  std::vector<int> obs_pos_;
};

inline double bordered_min_eig(const CVector& u, const CVector& x, double t) {
  const Eigen::Index n = u.size();
  CMatrix B(n + 1, n + 1);
  B.topLeftCorner(n, n) = toeplitz_matrix(u);
  B.topRightCorner(n, 1) = x;
  B.bottomLeftCorner(1, n) = x.adjoint();
  B(n, n) = t;
  return linalg::hermitian_eigenvalues(B)[0];
}

// Runs the splitting on normalized data and maps the result back.
inline SdpSolution solve_sdp(const IndexSet& J, const std::vector<int>& mask, const CVector& y, DataConstraint kind,
                             double eps, const SolverOptions& opts) {
  opts.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int n = J.size();
  SdpSolution sol;
  sol.x = ComplexSignal(J, CVector::Zero(n));
  sol.u = HermitianToeplitz(CVector::Zero(n));
  sol.mask = mask;
  sol.observed = y;
  sol.epsilon = eps;
  sol.q = CVector::Zero(n);

  const double ynorm = y.norm();
  const bool trivially_zero = ynorm == 0.0 || (kind == DataConstraint::Ball && eps >= ynorm);
  if (trivially_zero) {
    sol.status = SolverStatus::Converged;
    sol.x = ComplexSignal(J, CVector::Zero(n));
    if (kind == DataConstraint::Ball) {
      for (std::size_t i = 0; i < mask.size(); ++i) sol.x.samples[J.position(mask[i])] = cplx(0.0);
    }
    // q = 0 certifies optimality of the zero signal.
    sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

  const double scale = ynorm / std::sqrt(static_cast<double>(std::max<std::size_t>(mask.size(), 1)));
  AdmmWorkspace ws(J, mask, y / scale, kind, eps / scale, opts);
  auto res = ws.run();

  // Restore exact positive semidefiniteness by lifting u_0 and t.
  const double lmin = bordered_min_eig(res.u, res.x, res.t);
  if (lmin < 0.0) {
    const double lift = -lmin * (1.0 + 1e-12);
    res.u[0] += lift;
    res.t += lift;
  }
  sol.u = HermitianToeplitz(res.u * scale);
  sol.x = ComplexSignal(J, res.x * scale);
  sol.t = res.t * scale;
  sol.objective = 0.5 * sol.u.generator()[0].real() + 0.5 * sol.t;
  sol.sdp_objective = sol.objective;
  sol.iterations = res.iterations;
  sol.primal_residual = res.primal_residual;
  sol.dual_residual = res.dual_residual;
  sol.status = res.converged ? SolverStatus::Converged : SolverStatus::MaxIter;
  // Lambda = [H/2, -q/2; -q^*/2, 1/2] at optimality.
  for (int j : mask) {
    const int p = J.position(j);
    sol.q[p] = -2.0 * res.dual(p, n);
  }
  sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

inline std::vector<std::vector<double>> polish_candidates(const SdpSolution& sol, const SolverOptions& opts) {
  std::vector<std::vector<double>> out;
  const DualPolynomial Q(sol.x.index_set, sol.q);
  if (sol.q.squaredNorm() > 0.0) {
    const double dn = dual_norm_on_grid(Q, opts.localization.grid_size);
    try {
      auto f = localize_frequencies(Q.scaled(1.0 / std::max(1.0, dn)), opts.localization);
      if (!f.empty()) out.push_back(std::move(f));
    } catch (const Error&) {
    }
  }
  try {
    auto vd = vandermonde_decompose(sol.u, 1e-6);
    if (!vd.frequencies.empty()) out.push_back(vd.frequencies);
  } catch (const Error&) {
  }
  return out;
}

// Replaces the splitting iterate by a refined atomic decomposition when the
// latter is feasible and its l1 weight does not exceed the SDP objective.
inline void polish(SdpSolution& sol, const SolverOptions& opts) {
  const IndexSet& J = sol.x.index_set;
  const SampleSet obs(J, sol.mask, sol.observed);
  const double ynorm = sol.observed.norm();
  if (ynorm == 0.0) return;
  std::optional<RefinedModel> best;
  double best_l1 = std::numeric_limits<double>::infinity();
  for (auto& freqs : polish_candidates(sol, opts)) {
    if (3 * freqs.size() > 2 * static_cast<std::size_t>(obs.m()) || freqs.size() > static_cast<std::size_t>(obs.m()))
      continue;
    try {
      auto fit = fit_coefficients(freqs, obs);
      auto refined = refine_model(freqs, fit.coefficients, obs);
      // Drop atoms that vanished during refinement and refit the rest.
      double cmax = 0.0;
      for (const auto& c : refined.coefficients) cmax = std::max(cmax, std::abs(c));
      std::vector<double> kept_f;
      std::vector<cplx> kept_c;
      for (std::size_t k = 0; k < refined.frequencies.size(); ++k)
        if (std::abs(refined.coefficients[k]) > 1e-8 * cmax) {
          kept_f.push_back(refined.frequencies[k]);
          kept_c.push_back(refined.coefficients[k]);
        }
      if (kept_f.size() != refined.frequencies.size()) refined = refine_model(kept_f, kept_c, obs);
      if (min_separation(refined.frequencies) <= 0.0) continue;
      if (refined.residual > opts.polish_tolerance * ynorm) continue;
      double l1 = 0.0;
      for (const auto& c : refined.coefficients) l1 += std::abs(c);
      if (l1 > sol.sdp_objective * (1.0 + 1e-6) + 1e-300) continue;
      if (l1 < best_l1) {
        best_l1 = l1;
        best = std::move(refined);
      }
    } catch (const Error&) {
    }
  }
  if (!best) return;
  SpectralModel model(best->frequencies, best->coefficients);
  sol.atoms = model;
  sol.x = synthesize(model, J);
  CVector u = CVector::Zero(J.size());
  for (const auto& e : model.entries())
    for (int k = 0; k < J.size(); ++k) u[k] += std::abs(e.coefficient) * cis(kTwoPi * e.frequency * k);
  sol.u = HermitianToeplitz(u);
  sol.t = model.l1();
  sol.objective = 0.5 * sol.u.generator()[0].real() + 0.5 * sol.t;
  sol.polished = true;
}

}  // namespace detail

/// Signal completion from samples on T by atomic norm minimization.
inline SdpSolution complete_signal(const SampleSet& obs, const SolverOptions& opts = {}) {
  require(obs.m() >= 1, ErrorKind::Precondition, "complete_signal needs at least one observed sample");
  const auto t0 = std::chrono::steady_clock::now();
  SdpSolution sol =
      detail::solve_sdp(obs.index_set(), obs.mask(), obs.values(), detail::DataConstraint::Equality, 0.0, opts);
  if (opts.polish) detail::polish(sol, opts);
  sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

/// minimize ||x||_A subject to ||y - x_T||_2 <= epsilon. epsilon = 0 is
/// exactly complete_signal.
inline SdpSolution denoise_complete(const SampleSet& obs, double epsilon, const SolverOptions& opts = {}) {
  require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorKind::Precondition, "epsilon must be finite and >= 0");
  if (epsilon == 0.0) return complete_signal(obs, opts);
  require(obs.m() >= 1, ErrorKind::Precondition, "denoise_complete needs at least one observed sample");
  return detail::solve_sdp(obs.index_set(), obs.mask(), obs.values(), detail::DataConstraint::Ball, epsilon, opts);
}

struct AtomicNormResult {
  double value = 0.0;
  HermitianToeplitz u{CVector::Zero(1)};
  double t = 0.0;
  SdpSolution solution;
};

/// ||x||_A via the semidefinite characterization with every index observed.
inline AtomicNormResult atomic_norm(const ComplexSignal& x, const SolverOptions& opts = {}) {
  require(x.samples.allFinite(), ErrorKind::Precondition, "signal must be finite");
  SdpSolution sol = complete_signal(SampleSet::full(x), opts);
  AtomicNormResult r{sol.objective, sol.u, sol.t, sol};
  return r;
}

/// Dual polynomial of a converged solve, rescaled so that its grid-measured
/// sup modulus does not exceed one.
inline DualPolynomial extract_dual(const SdpSolution& sol, int grid_size = 1 << 14) {
  require(sol.status == SolverStatus::Converged, ErrorKind::StaleDual,
          std::string("dual requested from a solve with status ") + to_string(sol.status));
  DualPolynomial Q(sol.x.index_set, sol.q);
  if (sol.q.squaredNorm() == 0.0) return Q;
  const double dn = dual_norm_on_grid(Q, std::max(grid_size, sol.x.index_set.size()));
  return Q.scaled(1.0 / std::max(1.0, dn));
}

/// Number of eigenvalues of Toep(u) above tol * lambda_max.
inline int rank_diagnostic(const HermitianToeplitz& u, double tol = 1e-6) {
  const RVector ev = linalg::hermitian_eigenvalues(u.matrix());
  const double lmax = ev[ev.size() - 1];
  const double scale = std::max(std::abs(lmax), std::abs(ev[0]));
  if (scale == 0.0) return 0;
  require(ev[0] >= -tol * scale, ErrorKind::Domain, "Toeplitz matrix is indefinite");
  int r = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (ev[k] > tol * lmax) ++r;
  return r;
}

}  // namespace offgrid

#endif
