#ifndef OFFGRID_LOCALIZE_HPP
#define OFFGRID_LOCALIZE_HPP

// Frequency localization: dual polynomial evaluation and peak picking,
// coefficient refits, the matrix pencil estimator and the Vandermonde
// decomposition of PSD Toeplitz matrices.

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/FFT>

#include "offgrid/core.hpp"
#include "offgrid/linalg.hpp"

namespace offgrid {

/// Q(f) = sum_{j in J} q_j exp(-i 2 pi j f).
class DualPolynomial {
 public:
  DualPolynomial(IndexSet J, CVector q) : index_set_(J), q_(std::move(q)) {
    require(q_.size() == J.size(), ErrorKind::Precondition, "dual coefficient count must equal |J|");
  }

  const IndexSet& index_set() const { return index_set_; }
  const CVector& coefficients() const { return q_; }

  /// The l-th derivative of Q at f.
  cplx eval(double f, int derivative = 0) const {
    cplx acc = 0.0;
    for (int p = 0; p < index_set_.size(); ++p) {
      const int j = index_set_.at(p);
      cplx term = q_[p] * cis(-kTwoPi * j * f);
      for (int d = 0; d < derivative; ++d) term *= cplx(0.0, -kTwoPi * j);
      acc += term;
    }
    return acc;
  }

  cplx operator()(double f) const { return eval(f, 0); }

  DualPolynomial scaled(double s) const { return DualPolynomial(index_set_, q_ * s); }

 private:
  IndexSet index_set_;
  CVector q_;
};

/// Q(k/grid_size) for k = 0..grid_size-1 through one FFT of the zero-padded
/// coefficient vector.
inline CVector eval_dual_grid_complex(const DualPolynomial& Q, int grid_size) {
  const int n = Q.index_set().size();
  require(grid_size >= n, ErrorKind::Precondition,
          "grid size " + std::to_string(grid_size) + " is smaller than |J| = " + std::to_string(n));
  std::vector<cplx> padded(static_cast<std::size_t>(grid_size), cplx(0.0));
  for (int p = 0; p < n; ++p) padded[static_cast<std::size_t>(p)] = Q.coefficients()[p];
  std::vector<cplx> spectrum;
  Eigen::FFT<double> fft;
  fft.fwd(spectrum, padded);
  // Index offset j = first + p contributes exp(-i 2 pi first k / G).
  const int first = Q.index_set().first();
  CVector out(grid_size);
  for (int k = 0; k < grid_size; ++k) {
    const long long jk = static_cast<long long>(first) * k;
    const long long r = ((jk % grid_size) + grid_size) % grid_size;
    out[k] = spectrum[static_cast<std::size_t>(k)] * cis(-kTwoPi * static_cast<double>(r) / grid_size);
  }
  return out;
}

/// |Q(k/grid_size)| for k = 0..grid_size-1.
inline RVector eval_dual_grid(const DualPolynomial& Q, int grid_size) {
  return eval_dual_grid_complex(Q, grid_size).cwiseAbs();
}

/// max_f |Q(f)| measured on a uniform grid, the dual atomic norm estimate.
inline double dual_norm_on_grid(const DualPolynomial& Q, int grid_size = 1 << 14) {
  return eval_dual_grid(Q, std::max(grid_size, Q.index_set().size())).maxCoeff();
}

struct LocalizationOptions {
  int grid_size = 1 << 14;
  double modulus_threshold = 1.0 - 1e-4;
  int refine_newton_steps = 20;
  double cluster_radius = 0.5 / (1 << 14) * 4;

  void validate(int J_size) const {
    require(grid_size > 0 && (grid_size & (grid_size - 1)) == 0, ErrorKind::Precondition,
            "grid_size must be a power of two");
    require(grid_size >= 4 * J_size, ErrorKind::Precondition, "grid_size must be at least 4|J|");
    require(modulus_threshold > 0.0 && modulus_threshold < 1.0, ErrorKind::Precondition,
            "modulus_threshold must lie in (0,1)");
    require(refine_newton_steps >= 0, ErrorKind::Precondition, "refine_newton_steps must be >= 0");
    require(cluster_radius > 0.0, ErrorKind::Precondition, "cluster_radius must be positive");
  }
};

namespace detail {

// d|Q|^2/df and its derivative.
inline std::pair<double, double> modulus_slope(const DualPolynomial& Q, double f) {
  const cplx q0 = Q.eval(f, 0), q1 = Q.eval(f, 1), q2 = Q.eval(f, 2);
  const double g = 2.0 * std::real(std::conj(q0) * q1);
  const double h = 2.0 * (std::norm(q1) + std::real(std::conj(q0) * q2));
  return {g, h};
}

// Maximizes |Q| inside [lo, hi] starting from f0 with safeguarded Newton.
inline double refine_peak(const DualPolynomial& Q, double f0, double lo, double hi, int steps) {
  double f = f0;
  auto [glo, hlo] = modulus_slope(Q, lo);
  auto [ghi, hhi] = modulus_slope(Q, hi);
  (void)hlo;
  (void)hhi;
  const bool bracketed = glo > 0.0 && ghi < 0.0;
  double a = lo, b = hi;
  for (int it = 0; it < steps; ++it) {
    auto [g, h] = modulus_slope(Q, f);
    if (g == 0.0) break;
    if (bracketed) {
      if (g > 0.0) a = f; else b = f;
    }
    double next = (h < 0.0) ? f - g / h : std::numeric_limits<double>::quiet_NaN();
    if (!(next > a && next < b)) {
      if (!bracketed) break;
      next = 0.5 * (a + b);  // bisection fallback
    }
    if (std::abs(next - f) < 1e-15) {
      f = next;
      break;
    }
    f = next;
  }
  return std::abs(Q(f)) >= std::abs(Q(f0)) ? f : f0;
}

}  // namespace detail

/// Frequencies where |Q| reaches the modulus threshold, refined to local
/// maxima of |Q|. Returns an empty list when nothing reaches the threshold.
/// Throws NonIsolated when |Q| saturates over an interval wider than one
/// main lobe (1/|J|), e.g. for constant-modulus polynomials.
inline std::vector<double> localize_frequencies(const DualPolynomial& Q, const LocalizationOptions& opts = {}) {
  const int n = Q.index_set().size();
  opts.validate(n);
  require(Q.coefficients().squaredNorm() > 0.0, ErrorKind::Precondition, "dual polynomial is zero");
  const int G = opts.grid_size;
  const RVector mod = eval_dual_grid(Q, G);

  // Saturation test: longest cyclic run of grid points above threshold.
  {
    int longest = 0, run = 0, total = 0;
    for (int k = 0; k < 2 * G; ++k) {
      if (mod[k % G] >= opts.modulus_threshold) {
        ++run;
        if (k < G) ++total;
      } else {
        run = 0;
      }
      longest = std::max(longest, std::min(run, G));
    }
    if (longest > G / n || total == G)
      fail(ErrorKind::NonIsolated, "dual polynomial modulus saturates on an interval; maxima are not isolated");
  }

  const double pre_threshold = std::max(0.0, 1.0 - 100.0 * (1.0 - opts.modulus_threshold));
  const double h = 1.0 / G;
  std::vector<double> peaks;
  for (int k = 0; k < G; ++k) {
    const double v = mod[k];
    if (v < pre_threshold) continue;
    const double l = mod[(k + G - 1) % G], r = mod[(k + 1) % G];
    if (!(v >= l && v > r)) continue;
    const double f0 = k * h;
    const double f = detail::refine_peak(Q, f0, f0 - h, f0 + h, opts.refine_newton_steps);
    if (std::abs(Q(f)) >= opts.modulus_threshold) peaks.push_back(wrap_unit(f));
  }
  std::sort(peaks.begin(), peaks.end());

  // Merge peaks closer than the cluster radius, keeping the larger modulus.
  std::vector<double> out;
  for (double f : peaks) {
    if (!out.empty() && wrap_distance(out.back(), f) <= opts.cluster_radius) {
      if (std::abs(Q(f)) > std::abs(Q(out.back()))) out.back() = f;
      continue;
    }
    out.push_back(f);
  }
  if (out.size() > 1 && wrap_distance(out.front(), out.back()) <= opts.cluster_radius) {
    if (std::abs(Q(out.back())) > std::abs(Q(out.front()))) out.front() = out.back();
    out.pop_back();
    std::sort(out.begin(), out.end());
  }
  return out;
}

// ---------------------------------------------------------------------------

struct CoefficientFit {
  std::vector<cplx> coefficients;
  double residual = 0.0;  // ||A c - y||_2 on the mask
  double condition = 1.0;
};

inline CMatrix atom_matrix(const std::vector<double>& freqs, const std::vector<int>& idx) {
  CMatrix A(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(freqs.size()));
  for (std::size_t k = 0; k < freqs.size(); ++k) A.col(static_cast<Eigen::Index>(k)) = steering(freqs[k], idx);
  return A;
}

/// Least-squares coefficients of the atoms at `freqs` against the observed
/// samples. Throws IllPosed when the restricted atom matrix has condition
/// number above 1e12.
inline CoefficientFit fit_coefficients(const std::vector<double>& freqs, const SampleSet& obs) {
  require(obs.m() >= static_cast<int>(freqs.size()), ErrorKind::Precondition,
          "fit needs at least as many samples as frequencies");
  CoefficientFit fit;
  if (freqs.empty()) {
    fit.residual = obs.values().norm();
    return fit;
  }
  const CMatrix A = atom_matrix(freqs, obs.mask());
  Eigen::JacobiSVD<CMatrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  fit.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
  require(fit.condition <= 1e12, ErrorKind::IllPosed,
          "atom matrix restricted to the mask is rank deficient (condition " + std::to_string(fit.condition) + ")");
  const CVector c = svd.solve(obs.values());
  fit.coefficients.assign(c.data(), c.data() + c.size());
  fit.residual = (A * c - obs.values()).norm();
  return fit;
}

struct RefinedModel {
  std::vector<double> frequencies;
  std::vector<cplx> coefficients;
  double residual = 0.0;
  int iterations = 0;
};

/// Joint Levenberg-Marquardt refinement of frequencies and coefficients
/// minimizing the residual on the observed samples.
inline RefinedModel refine_model(std::vector<double> freqs, std::vector<cplx> coeffs, const SampleSet& obs,
                                 int max_iterations = 100) {
  const std::size_t s = freqs.size();
  const auto& idx = obs.mask();
  const Eigen::Index m = obs.m();
  const CVector& y = obs.values();
  auto residual = [&](const std::vector<double>& f, const std::vector<cplx>& c) {
    CVector r = -y;
    for (std::size_t k = 0; k < s; ++k) r += c[k] * steering(f[k], idx);
    return r;
  };
  RefinedModel out{freqs, coeffs, 0.0, 0};
  CVector r = residual(freqs, coeffs);
  double cost = r.squaredNorm();
  if (s == 0) {
    out.residual = std::sqrt(cost);
    return out;
  }
  const Eigen::Index p = static_cast<Eigen::Index>(3 * s);
  double lambda = 1e-3;
  const double floor = 1e-32 * std::max(1.0, y.squaredNorm());
  int it = 0;
  for (; it < max_iterations && cost > floor; ++it) {
    RMatrix Jr(2 * m, p);
    for (std::size_t k = 0; k < s; ++k) {
      const CVector a = steering(freqs[k], idx);
      for (Eigen::Index i = 0; i < m; ++i) {
        const cplx df = coeffs[k] * cplx(0.0, kTwoPi * idx[static_cast<std::size_t>(i)]) * a[i];
        const cplx di = cplx(0.0, 1.0) * a[i];
        Jr(i, static_cast<Eigen::Index>(k)) = df.real();
        Jr(m + i, static_cast<Eigen::Index>(k)) = df.imag();
        Jr(i, static_cast<Eigen::Index>(s + k)) = a[i].real();
        Jr(m + i, static_cast<Eigen::Index>(s + k)) = a[i].imag();
        Jr(i, static_cast<Eigen::Index>(2 * s + k)) = di.real();
        Jr(m + i, static_cast<Eigen::Index>(2 * s + k)) = di.imag();
      }
    }
    RVector rr(2 * m);
    rr << r.real(), r.imag();
    const RMatrix JtJ = Jr.transpose() * Jr;
    const RVector g = Jr.transpose() * rr;
    bool improved = false;
    for (int tries = 0; tries < 12; ++tries) {
      RMatrix Aug = JtJ;
      Aug.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-12);
      const RVector step = Aug.ldlt().solve(-g);
      std::vector<double> nf = freqs;
      std::vector<cplx> nc = coeffs;
      for (std::size_t k = 0; k < s; ++k) {
        nf[k] += step[static_cast<Eigen::Index>(k)];
        nc[k] += cplx(step[static_cast<Eigen::Index>(s + k)], step[static_cast<Eigen::Index>(2 * s + k)]);
      }
      CVector nr = residual(nf, nc);
      const double ncost = nr.squaredNorm();
      if (ncost < cost) {
        const double rel = step.head(static_cast<Eigen::Index>(s)).cwiseAbs().maxCoeff();
        freqs = std::move(nf);
        coeffs = std::move(nc);
        r = std::move(nr);
        const double gain = cost - ncost;
        cost = ncost;
        lambda = std::max(lambda / 5.0, 1e-15);
        improved = true;
        if (rel < 1e-15 || gain <= 1e-30 * std::max(1.0, cost)) it = max_iterations;
        break;
      }
      lambda *= 8.0;
    }
    if (!improved) break;
  }
  for (auto& f : freqs) f = wrap_unit(f);
  out.frequencies = std::move(freqs);
  out.coefficients = std::move(coeffs);
  out.residual = std::sqrt(cost);
  out.iterations = it;
  return out;
}

// ---------------------------------------------------------------------------

/// Frequencies of an s-term exponential sum from fully observed samples via
/// the shift-invariant Hankel pencil with pencil parameter floor(|J|/2).
/// Throws ModelOrder when fewer than s singular values exceed tol * sigma_max.
inline std::vector<double> matrix_pencil(const ComplexSignal& x, int s, double tol = 1e-8) {
  const int N = x.index_set.size();
  require(s >= 1, ErrorKind::Precondition, "model order must be positive");
  require(N >= 2 * s, ErrorKind::Precondition, "matrix pencil needs |J| >= 2s");
  const int L = N / 2;
  const int rows = N - L;
  CMatrix Y(rows, L + 1);
  for (int i = 0; i < rows; ++i)
    for (int l = 0; l <= L; ++l) Y(i, l) = x.samples[i + l];
  Eigen::BDCSVD<CMatrix> svd(Y, Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  int significant = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv[k] > tol * sv[0]) ++significant;
  if (sv.size() == 0 || sv[0] == 0.0 || significant < s)
    fail(ErrorKind::ModelOrder, "only " + std::to_string(significant) + " significant singular values for s = " +
                                    std::to_string(s));
  // Rows of V span the conjugated Vandermonde factor in the lag index l.
  const CMatrix Vs = svd.matrixV().leftCols(s).conjugate();
  const CMatrix down = Vs.topRows(L);
  const CMatrix up = Vs.bottomRows(L);
  const CMatrix Phi = down.completeOrthogonalDecomposition().solve(up);
  Eigen::ComplexEigenSolver<CMatrix> es(Phi, false);
  std::vector<double> f;
  for (Eigen::Index k = 0; k < s; ++k) f.push_back(wrap_unit(std::arg(es.eigenvalues()[k]) / kTwoPi));
  std::sort(f.begin(), f.end());
  return f;
}

struct VandermondeDecomposition {
  std::vector<double> frequencies;
  std::vector<double> weights;
  double reconstruction_error = 0.0;  // ||P - V D V^*||_F
};

/// P = V D V^* for a rank-deficient PSD Toeplitz matrix, through the
/// shift-invariance of its signal subspace (generalized eigenvalue route).
inline VandermondeDecomposition vandermonde_decompose(const HermitianToeplitz& P, double tol = 1e-8) {
  const CMatrix T = P.matrix();
  const Eigen::Index N = T.rows();
  VandermondeDecomposition out;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(T);
  const RVector& ev = es.eigenvalues();
  const double lmax = ev[N - 1];
  const double scale = std::max(std::abs(lmax), std::abs(ev[0]));
  if (scale == 0.0) return out;
  require(ev[0] >= -tol * scale, ErrorKind::Domain, "Toeplitz matrix is not positive semidefinite");
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < N; ++k)
    if (ev[k] > tol * lmax) ++r;
  if (r == 0) return out;
  require(r < N, ErrorKind::NonUnique, "full-rank Toeplitz matrix has no unique Vandermonde decomposition");
  const CMatrix U = es.eigenvectors().rightCols(r);
  const CMatrix Phi = U.topRows(N - 1).completeOrthogonalDecomposition().solve(U.bottomRows(N - 1));
  Eigen::ComplexEigenSolver<CMatrix> ces(Phi, false);
  std::vector<double> f;
  for (Eigen::Index k = 0; k < r; ++k) f.push_back(wrap_unit(std::arg(ces.eigenvalues()[k]) / kTwoPi));
  std::sort(f.begin(), f.end());
  std::vector<int> lags(static_cast<std::size_t>(N));
  for (Eigen::Index p = 0; p < N; ++p) lags[static_cast<std::size_t>(p)] = static_cast<int>(p);
  const CMatrix V = atom_matrix(f, lags);
  const CVector d = V.colPivHouseholderQr().solve(P.generator());
  out.frequencies = f;
  out.weights.resize(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) out.weights[k] = d[static_cast<Eigen::Index>(k)].real();
  const RVector dr = Eigen::Map<const RVector>(out.weights.data(), r);
  out.reconstruction_error = (T - V * dr.cast<cplx>().asDiagonal() * V.adjoint()).norm();
  return out;
}

// ---------------------------------------------------------------------------

struct FrequencyMatch {
  /// est_index[k] is the estimate matched to truth k, or -1.
  std::vector<int> est_index;
  std::vector<double> errors;  // wrap distance per truth entry (inf if unmatched)
  double max_error = 0.0;
};

/// Minimum-cost assignment of estimates to true frequencies under wrap
/// distance (Hungarian algorithm on the square-padded cost matrix).
inline FrequencyMatch match_frequencies(const std::vector<double>& est, const std::vector<double>& truth) {
  const std::size_t nt = truth.size(), ne = est.size();
  const std::size_t n = std::max(nt, ne);
  FrequencyMatch out;
  out.est_index.assign(nt, -1);
  out.errors.assign(nt, std::numeric_limits<double>::infinity());
  if (nt == 0) return out;
  const double big = 1.0;  // exceeds any wrap distance
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i + 1][j + 1] = (i < nt && j < ne) ? wrap_distance(truth[i], est[j]) : big;
  // e-maxx formulation, 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = p[j];
    if (i >= 1 && i <= nt && j <= ne) {
      out.est_index[i - 1] = static_cast<int>(j - 1);
      out.errors[i - 1] = wrap_distance(truth[i - 1], est[j - 1]);
    }
  }
  out.max_error = 0.0;
  for (double e : out.errors) out.max_error = std::max(out.max_error, e);
  if (ne != nt) out.max_error = std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace offgrid

#endif
