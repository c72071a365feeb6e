#ifndef OFFGRID_CERTIFICATE_HPP
#define OFFGRID_CERTIFICATE_HPP

// Explicit dual certificates built from the squared Fejer kernel
//
//   K_M(f) = [sin(pi M f) / (M sin(pi f))]^4 = (1/M) sum_{|j|<=2M} g_M(j) e^{-i 2 pi f j}
//
// and from its randomly masked counterpart, whose coefficients survive only
// on observed indices. A certificate is
//
//   Q(f) = sum_k alpha_k K(f - f_k) + beta_k K'(f - f_k)
//
// with (alpha, beta) chosen so that Q(f_k) = sign(c_k) and Q'(f_k) = 0.

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "offgrid/core.hpp"
#include "offgrid/linalg.hpp"
#include "offgrid/localize.hpp"

namespace offgrid {

/// g_M(j) over j = -2M..2M.
struct FejerWeights {
  int M = 0;
  RVector g;

  double operator()(int j) const { return std::abs(j) > 2 * M ? 0.0 : g[j + 2 * M]; }
};

inline FejerWeights fejer_weights(int M) {
  require(M >= 2, ErrorKind::Domain, "Fejer weights need M >= 2");
  FejerWeights w{M, RVector::Zero(4 * M + 1)};
  const double dM = M;
  for (int j = 0; j <= 2 * M; ++j) {
    double acc = 0.0;
    for (int k = std::max(j - M, -M); k <= std::min(j + M, M); ++k)
      acc += (1.0 - std::abs(k / dM)) * (1.0 - std::abs(j / dM - k / dM));
    w.g[2 * M + j] = w.g[2 * M - j] = acc / dM;
  }
  return w;
}

/// |K''_M(0)| = 4 pi^2 (M^2 - 1) / 3.
inline double kernel_curvature(int M) { return 4.0 * kPi * kPi * (static_cast<double>(M) * M - 1.0) / 3.0; }

/// [sin(pi M f) / (M sin(pi f))]^4 with the removable singularity at integers.
inline double fejer_closed_form(int M, double f) {
  const double d = wrap_centered(f);
  if (std::abs(d) < 1e-12) return 1.0;
  const double r = std::sin(kPi * M * d) / (M * std::sin(kPi * d));
  return r * r * r * r;
}

/// Kernel (1/M) sum_j w_j e^{-i 2 pi f j} over j = -2M..2M; w = g_M for the
/// deterministic kernel, w = g_M * delta for the masked one.
class FejerKernel {
 public:
  explicit FejerKernel(int M) : FejerKernel(fejer_weights(M), std::nullopt) {}

  FejerKernel(const FejerWeights& g, const std::optional<std::vector<bool>>& mask) : M_(g.M), w_(g.g / g.M) {
    if (mask) {
      require(static_cast<int>(mask->size()) == 4 * M_ + 1, ErrorKind::Precondition, "mask length must be 4M+1");
      for (int p = 0; p < 4 * M_ + 1; ++p)
        if (!(*mask)[static_cast<std::size_t>(p)]) w_[p] = 0.0;
    }
  }

  int M() const { return M_; }
  /// Coefficient of e^{-i 2 pi f j}, j = -2M..2M.
  const RVector& weights() const { return w_; }

  /// l-th derivative at f. Terms j and -j are added in pairs so that odd
  /// derivatives of a symmetric kernel vanish exactly at f = 0.
  cplx operator()(double f, int ell = 0) const {
    cplx acc = ell == 0 ? cplx(w_[2 * M_]) : cplx(0.0);
    for (int j = 1; j <= 2 * M_; ++j) {
      const cplx e = cis(-kTwoPi * f * j);
      cplx dp = 1.0, dm = 1.0;
      for (int d = 0; d < ell; ++d) {
        dp *= cplx(0.0, -kTwoPi * j);
        dm *= cplx(0.0, kTwoPi * j);
      }
      acc += w_[2 * M_ + j] * dp * e + w_[2 * M_ - j] * dm * std::conj(e);
    }
    return acc;
  }

 private:
  int M_;
  RVector w_;
};

inline cplx fejer_kernel(int M, double f, int ell) {
  require(ell >= 0 && ell <= 3, ErrorKind::Domain, "kernel derivative order must be 0..3");
  return FejerKernel(M)(f, ell);
}

/// Bernoulli observation pattern over {-2M..2M}.
struct BernoulliMask {
  double p = 1.0;
  std::vector<bool> observed;  // by position in {-2M..2M}

  std::vector<int> indices(int M) const {
    std::vector<int> out;
    for (int p_ = 0; p_ < 4 * M + 1; ++p_)
      if (observed[static_cast<std::size_t>(p_)]) out.push_back(p_ - 2 * M);
    return out;
  }
};

template <class Rng>
BernoulliMask bernoulli_mask(int M, double p, Rng& rng) {
  require(p > 0.0 && p <= 1.0, ErrorKind::Domain, "Bernoulli probability must lie in (0,1]");
  BernoulliMask mask{p, std::vector<bool>(static_cast<std::size_t>(4 * M + 1))};
  std::bernoulli_distribution coin(p);
  for (std::size_t i = 0; i < mask.observed.size(); ++i) mask.observed[i] = coin(rng);
  return mask;
}

struct KernelSystem {
  int M = 0;
  std::vector<double> frequencies;
  std::optional<BernoulliMask> mask;
  /// [D0, D1/sqrt(k); -D1/sqrt(k), -D2/k] with k = |K''_M(0)|.
  CMatrix D;
  double curvature = 0.0;

  /// D scaled by 1/p so that its expectation is the deterministic system.
  CMatrix normalized() const { return mask ? CMatrix(D / mask->p) : D; }
};

inline KernelSystem build_system(const std::vector<double>& freqs, int M,
                                 const std::optional<BernoulliMask>& mask = std::nullopt) {
  require(!freqs.empty(), ErrorKind::Precondition, "certificate system needs at least one frequency");
  require(min_separation(freqs) > 0.0, ErrorKind::InvalidModel, "frequencies must be distinct");
  const FejerWeights g = fejer_weights(M);
  std::optional<std::vector<bool>> bits;
  if (mask) bits = mask->observed;
  const FejerKernel K(g, bits);
  const Eigen::Index s = static_cast<Eigen::Index>(freqs.size());
  KernelSystem sys{M, freqs, mask, CMatrix(2 * s, 2 * s), kernel_curvature(M)};
  const double sk = std::sqrt(sys.curvature);
  for (Eigen::Index j = 0; j < s; ++j)
    for (Eigen::Index k = 0; k < s; ++k) {
      const double d = wrap_centered(freqs[static_cast<std::size_t>(j)] - freqs[static_cast<std::size_t>(k)]);
      const cplx k0 = K(d, 0), k1 = K(d, 1), k2 = K(d, 2);
      sys.D(j, k) = k0;
      sys.D(j, s + k) = k1 / sk;
      sys.D(s + j, k) = -k1 / sk;
      sys.D(s + j, s + k) = -k2 / sys.curvature;
    }
  return sys;
}

struct SystemBounds {
  double identity_gap;  // ||I - D||
  double norm;          // ||D||
  double inverse_norm;  // ||D^{-1}||
};

/// Operator-norm diagnostics of a (Hermitian) certificate system.
inline SystemBounds system_bounds(const CMatrix& D) {
  const CMatrix H = 0.5 * (D + D.adjoint());
  const RVector ev = linalg::hermitian_eigenvalues(H);
  const double lo = ev[0], hi = ev[ev.size() - 1];
  SystemBounds b{};
  b.identity_gap = std::max(std::abs(1.0 - lo), std::abs(1.0 - hi));
  b.norm = std::max(std::abs(lo), std::abs(hi));
  double min_abs = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < ev.size(); ++k) min_abs = std::min(min_abs, std::abs(ev[k]));
  b.inverse_norm = min_abs > 0.0 ? 1.0 / min_abs : std::numeric_limits<double>::infinity();
  return b;
}

struct CertificateCoefficients {
  std::vector<cplx> alpha;
  std::vector<cplx> beta;
};

struct Certificate {
  DualPolynomial Q;
  CertificateCoefficients coefficients;
  SystemBounds bounds;
};

/// Solves the interpolation system and returns the certificate polynomial
/// over {-2M..2M}. Throws Singular when ||I - D/p|| >= 1.
inline Certificate build_certificate(const std::vector<double>& freqs, const std::vector<cplx>& signs, int M,
                                     const std::optional<BernoulliMask>& mask = std::nullopt) {
  require(freqs.size() == signs.size(), ErrorKind::Precondition, "one sign per frequency required");
  for (const auto& u : signs)
    require(std::abs(std::abs(u) - 1.0) < 1e-9, ErrorKind::Precondition, "signs must have unit modulus");
  const KernelSystem sys = build_system(freqs, M, mask);
  const SystemBounds bounds = system_bounds(sys.normalized());
  if (!(bounds.identity_gap < 1.0))
    fail(ErrorKind::Singular, "certificate system not invertible: ||I - D/p|| = " + std::to_string(bounds.identity_gap) +
                                  ", ||(D/p)^-1|| = " + std::to_string(bounds.inverse_norm));
  const Eigen::Index s = static_cast<Eigen::Index>(freqs.size());
  CVector rhs = CVector::Zero(2 * s);
  for (Eigen::Index k = 0; k < s; ++k) rhs[k] = signs[static_cast<std::size_t>(k)];
  const CVector sol = sys.D.partialPivLu().solve(rhs);
  const double sk = std::sqrt(sys.curvature);

  CertificateCoefficients coef;
  for (Eigen::Index k = 0; k < s; ++k) {
    coef.alpha.push_back(sol[k]);
    coef.beta.push_back(sol[s + k] / sk);
  }
  const FejerWeights g = fejer_weights(M);
  const IndexSet J = IndexSet::symmetric(M);
  CVector q = CVector::Zero(J.size());
  for (int j = -2 * M; j <= 2 * M; ++j) {
    const int p = j + 2 * M;
    if (mask && !mask->observed[static_cast<std::size_t>(p)]) continue;
    cplx acc = 0.0;
    for (Eigen::Index k = 0; k < s; ++k)
      acc += (coef.alpha[static_cast<std::size_t>(k)] + coef.beta[static_cast<std::size_t>(k)] * cplx(0.0, -kTwoPi * j)) *
             cis(kTwoPi * freqs[static_cast<std::size_t>(k)] * j);
    q[p] = g.g[p] / M * acc;
  }
  return {DualPolynomial(J, std::move(q)), std::move(coef), bounds};
}

// ---------------------------------------------------------------------------

/// Kernel order used to normalize derivatives for an index set.
inline int kernel_order_for(const IndexSet& J) {
  if (J.kind() == IndexSet::Kind::Symmetric) return std::max(2, J.parameter());
  return std::max(2, (J.size() - 1) / 4);
}

/// Half-width of the near region around each frequency, 8.245e-2 / M.
inline double near_region_radius(int M) { return 8.245e-2 / M; }

struct CertificateReport {
  bool support_ok = true;
  double interpolation_max_error = 0.0;
  double derivative_max_error = 0.0;
  /// sup |Q| over grid points farther than the exclusion radius from Omega.
  double off_support_max_modulus = 0.0;
  double far_max_modulus = 0.0;
  // Near-region statistics; Q is rotated by conj(sign) of the nearest f_k.
  double near_min_real = 1.0;
  double near_max_abs_imag = 0.0;
  double near_max_real_curvature = -std::numeric_limits<double>::infinity();  // Q_R''/|K''(0)|
  double near_max_abs_imag_curvature = 0.0;                                    // |Q_I''|/|K''(0)|
  double near_max_abs_slope = 0.0;                                             // |Q'|/sqrt|K''(0)|
  int M = 0;
  double near_radius = 0.0;
  int grid_points = 0;
  bool pass = false;

  // Regional bounds of the deterministic construction.
  static constexpr double kFarBound = 0.99992;
  static constexpr double kNearRealBound = 0.9182;
  static constexpr double kNearImagBound = 3.611e-2;
  static constexpr double kNearCurvatureBound = -0.314;
  static constexpr double kNearImagCurvatureBound = 0.5755;
  static constexpr double kNearSlopeBound = 0.4346;

  bool far_bound_ok(double slack = 0.0) const { return far_max_modulus < kFarBound + slack; }
  bool near_bounds_ok(double slack = 0.0) const {
    return near_min_real >= kNearRealBound - slack && near_max_abs_imag <= kNearImagBound + slack &&
           near_max_real_curvature <= kNearCurvatureBound + slack;
  }
};

struct VerifyOptions {
  int grid_size = 1 << 14;
  int near_refinement = 1 << 6;
  double exclusion_radius = 1e-6;
};

/// Checks the certificate conditions: support on T, interpolation of the
/// signs with vanishing slope, and |Q| < 1 away from Omega on a grid plus a
/// per-frequency refinement of the near region.
inline CertificateReport verify_certificate(const DualPolynomial& Q, const std::vector<double>& freqs,
                                            const std::vector<cplx>& signs, const std::vector<int>& mask,
                                            const VerifyOptions& vopts = {}) {
  require(freqs.size() == signs.size(), ErrorKind::Precondition, "one sign per frequency required");
  const IndexSet& J = Q.index_set();
  CertificateReport rep;
  rep.M = kernel_order_for(J);
  rep.near_radius = near_region_radius(rep.M);
  const double kappa = kernel_curvature(rep.M);
  const double sk = std::sqrt(kappa);

  std::vector<bool> in_mask(static_cast<std::size_t>(J.size()), false);
  for (int j : mask)
    if (J.contains(j)) in_mask[static_cast<std::size_t>(J.position(j))] = true;
  for (int p = 0; p < J.size(); ++p)
    if (!in_mask[static_cast<std::size_t>(p)] && Q.coefficients()[p] != cplx(0.0)) rep.support_ok = false;

  for (std::size_t k = 0; k < freqs.size(); ++k) {
    rep.interpolation_max_error = std::max(rep.interpolation_max_error, std::abs(Q(freqs[k]) - signs[k]));
    rep.derivative_max_error = std::max(rep.derivative_max_error, std::abs(Q.eval(freqs[k], 1)) / sk);
  }

  const int G = std::max(vopts.grid_size, 4 * J.size());
  rep.grid_points = G;
  // Q, Q' and Q'' on the grid through three FFTs.
  CVector q1 = Q.coefficients(), q2 = Q.coefficients();
  for (int p = 0; p < J.size(); ++p) {
    const cplx d(0.0, -kTwoPi * J.at(p));
    q1[p] *= d;
    q2[p] *= d * d;
  }
  const CVector v0 = eval_dual_grid_complex(Q, G);
  const CVector v1 = eval_dual_grid_complex(DualPolynomial(J, q1), G);
  const CVector v2 = eval_dual_grid_complex(DualPolynomial(J, q2), G);

  auto nearest = [&](double f) {
    std::size_t best = 0;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      const double dk = wrap_distance(f, freqs[k]);
      if (dk < d) {
        d = dk;
        best = k;
      }
    }
    return std::pair{best, d};
  };

  bool any_near = false;
  auto visit = [&](double f, cplx z0, cplx z1, cplx z2) {
    const double mod = std::abs(z0);
    if (freqs.empty()) {
      rep.off_support_max_modulus = std::max(rep.off_support_max_modulus, mod);
      rep.far_max_modulus = std::max(rep.far_max_modulus, mod);
      return;
    }
    auto [k, d] = nearest(f);
    if (d > vopts.exclusion_radius) rep.off_support_max_modulus = std::max(rep.off_support_max_modulus, mod);
    if (d > rep.near_radius) {
      rep.far_max_modulus = std::max(rep.far_max_modulus, mod);
      return;
    }
    any_near = true;
    const cplx rot = std::conj(signs[k]);
    const cplx r0 = rot * z0, r2 = rot * z2;
    rep.near_min_real = std::min(rep.near_min_real, r0.real());
    rep.near_max_abs_imag = std::max(rep.near_max_abs_imag, std::abs(r0.imag()));
    rep.near_max_real_curvature = std::max(rep.near_max_real_curvature, r2.real() / kappa);
    rep.near_max_abs_imag_curvature = std::max(rep.near_max_abs_imag_curvature, std::abs(r2.imag()) / kappa);
    rep.near_max_abs_slope = std::max(rep.near_max_abs_slope, std::abs(z1) / sk);
  };

  for (int k = 0; k < G; ++k) visit(static_cast<double>(k) / G, v0[k], v1[k], v2[k]);
  for (double fk : freqs) {
    const int R = vopts.near_refinement;
    for (int i = -R; i <= R; ++i) {
      const double f = wrap_unit(fk + rep.near_radius * i / R);
      visit(f, Q.eval(f, 0), Q.eval(f, 1), Q.eval(f, 2));
    }
  }
  if (!any_near) rep.near_max_real_curvature = 0.0;

  rep.pass = rep.support_ok && rep.interpolation_max_error <= 1e-8 && rep.derivative_max_error <= 1e-8 &&
             rep.off_support_max_modulus < 1.0;
  return rep;
}

}  // namespace offgrid

#endif
