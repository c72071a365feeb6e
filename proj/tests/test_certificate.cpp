#include <gtest/gtest.h>

#include <random>

#include "offgrid/certificate.hpp"

using namespace offgrid;

namespace {

// Gaps of delta plus uniform spacings of the remaining slack, randomly rotated.
std::vector<double> separated(int s, double delta, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> cuts{0.0, 1.0};
  for (int k = 1; k < s; ++k) cuts.push_back(U(rng));
  std::sort(cuts.begin(), cuts.end());
  const double slack = 1.0 - s * delta;
  std::vector<double> f;
  double pos = U(rng);
  for (int k = 0; k < s; ++k) {
    f.push_back(wrap_unit(pos));
    pos += delta + slack * (cuts[static_cast<std::size_t>(k) + 1] - cuts[static_cast<std::size_t>(k)]);
  }
  return f;
}

std::vector<cplx> unit_signs(std::size_t s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<cplx> u;
  for (std::size_t k = 0; k < s; ++k) u.push_back(std::polar(1.0, kTwoPi * U(rng)));
  return u;
}

// Triangle-convolution weights summed in long double.
long double g_oracle(int M, int j) {
  long double acc = 0.0L;
  for (int k = -M; k <= M; ++k) {
    const long double a = 1.0L - std::fabs(static_cast<long double>(k) / M);
    const long double b = 1.0L - std::fabs(static_cast<long double>(j - k) / M);
    if (a > 0 && b > 0) acc += a * b;
  }
  return acc / M;
}

}  // namespace

TEST(FejerWeights, SymmetricBoundedAndDirect) {
  for (int M = 2; M <= 256; M = M < 16 ? M + 1 : M * 2) {
    const auto w = fejer_weights(M);
    double mx = 0.0;
    for (int j = -2 * M; j <= 2 * M; ++j) {
      EXPECT_EQ(w(j), w(-j));
      EXPECT_GE(w(j), 0.0);
      mx = std::max(mx, w(j));
      EXPECT_NEAR(w(j), static_cast<double>(g_oracle(M, j)), 1e-13);
    }
    EXPECT_LE(mx, 1.0);
  }
  EXPECT_EQ(fejer_weights(4)(8), 0.0);
  EXPECT_EQ(fejer_weights(4)(9), 0.0);
  EXPECT_THROW(fejer_weights(1), Error);
}

TEST(FejerKernel, ValuesAtOrigin) {
  for (int M : {2, 5, 8, 33}) {
    const double kappa = 4.0 * kPi * kPi * (M * M - 1.0) / 3.0;
    EXPECT_NEAR(fejer_kernel(M, 0.0, 0).real(), 1.0, 1e-13);
    EXPECT_LT(std::abs(fejer_kernel(M, 0.0, 1)), 1e-10);
    EXPECT_LT(std::abs(fejer_kernel(M, 0.0, 3)), 1e-6 * kappa * M);
    EXPECT_NEAR(fejer_kernel(M, 0.0, 2).real(), -kappa, 1e-10 * kappa);
    EXPECT_NEAR(kernel_curvature(M), kappa, 1e-12 * kappa);
  }
  EXPECT_NEAR(fejer_kernel(8, 0.3, 0).real(), fejer_closed_form(8, 0.3), 1e-10);
  EXPECT_THROW(fejer_kernel(8, 0.1, 4), Error);
}

TEST(FejerKernel, MatchesSineRatio) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int M : {2, 3, 8, 17, 64}) {
    const FejerKernel K(M);
    for (int t = 0; t < 1000; ++t) {
      const double f = U(rng);
      const double r = std::sin(kPi * M * f) / (M * std::sin(kPi * f));
      const cplx v = K(f);
      EXPECT_NEAR(v.real(), r * r * r * r, 1e-9);
      EXPECT_LT(std::abs(v.imag()), 1e-9);
    }
  }
}

TEST(System, SingleFrequencyIsIdentity) {
  const auto sys = build_system({0.37}, 8);
  EXPECT_LT((sys.D - CMatrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(System, DeterministicBoundsUnderSeparation) {
  std::mt19937_64 rng(2);
  for (int M : {8, 16, 32, 64}) {
    for (int t = 0; t < 20; ++t) {
      const int s = 1 + static_cast<int>(rng() % static_cast<unsigned>(M / 2));
      const auto sys = build_system(separated(s, 1.0 / M, rng), M);
      EXPECT_LT((sys.D - sys.D.adjoint()).norm(), 1e-10);
      for (int k = 0; k < 2 * s; ++k) EXPECT_NEAR(sys.D(k, k).real(), 1.0, 1e-10);
      const auto b = system_bounds(sys.D);
      EXPECT_LE(b.identity_gap, 0.3623);
      EXPECT_LE(b.inverse_norm, 1.568);
    }
    // Equispaced at exactly the minimum separation.
    std::vector<double> f;
    for (int k = 0; k < M; ++k) f.push_back(static_cast<double>(k) / M);
    const auto b = system_bounds(build_system(f, M).D);
    EXPECT_LE(b.identity_gap, 0.3623);
    EXPECT_LE(b.inverse_norm, 1.568);
  }
}

TEST(System, MaskedExpectation) {
  const int M = 8;
  const double p = 0.5;
  const std::vector<double> f{0.1, 0.3, 0.72};
  const CMatrix Dbar = build_system(f, M).D;
  std::mt19937_64 rng(3);
  const int draws = 200;
  CMatrix sum = CMatrix::Zero(Dbar.rows(), Dbar.cols());
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(Dbar.rows(), Dbar.cols());
  for (int d = 0; d < draws; ++d) {
    const CMatrix D = build_system(f, M, bernoulli_mask(M, p, rng)).D;
    sum += D;
    sq += D.cwiseAbs2();
  }
  const CMatrix mean = sum / draws;
  const Eigen::MatrixXd var = sq / draws - mean.cwiseAbs2();
  const double stderr_f = std::sqrt(var.sum() / draws);
  EXPECT_LE((mean - p * Dbar).norm(), 5.0 * stderr_f);
}

TEST(Certificate, SingleFrequency) {
  const auto cert = build_certificate({0.5}, {cplx(1.0)}, 8);
  EXPECT_NEAR(std::abs(cert.coefficients.alpha[0] - 1.0), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(cert.coefficients.beta[0]), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(cert.Q(0.5) - 1.0), 0.0, 1e-10);
  EXPECT_LT(std::abs(cert.Q.eval(0.5, 1)), 1e-10);
  const auto rep = verify_certificate(cert.Q, {0.5}, {cplx(1.0)}, cert.Q.index_set().indices());
  EXPECT_TRUE(rep.pass);
  EXPECT_LT(rep.off_support_max_modulus, 1.0);
}

TEST(Certificate, DeterministicRegionalBounds) {
  std::mt19937_64 rng(4);
  for (int M : {8, 16, 32, 64}) {
    for (int t = 0; t < 5; ++t) {
      const auto f = separated(M / 4, 1.0 / M, rng);
      const auto u = unit_signs(f.size(), rng);
      const auto cert = build_certificate(f, u, M);
      for (std::size_t k = 0; k < f.size(); ++k) {
        EXPECT_LT(std::abs(cert.Q(f[k]) - u[k]), 1e-10);
        EXPECT_LT(std::abs(cert.Q.eval(f[k], 1)), 1e-10 * std::sqrt(kernel_curvature(M)));
      }
      const auto rep = verify_certificate(cert.Q, f, u, cert.Q.index_set().indices());
      EXPECT_TRUE(rep.pass) << "M=" << M;
      EXPECT_EQ(rep.M, M);
      EXPECT_LT(rep.far_max_modulus, CertificateReport::kFarBound);
      EXPECT_GE(rep.near_min_real, CertificateReport::kNearRealBound);
      EXPECT_LE(rep.near_max_abs_imag, CertificateReport::kNearImagBound);
      EXPECT_LE(rep.near_max_real_curvature, CertificateReport::kNearCurvatureBound);
    }
  }
}

TEST(Certificate, MaskedSupportedOnMask) {
  std::mt19937_64 rng(5);
  const int M = 32;
  const std::vector<double> f{0.1, 0.45, 0.8};
  const std::vector<cplx> u{cplx(1.0), cplx(-1.0), cplx(0.0, 1.0)};
  int built = 0;
  for (int t = 0; t < 10; ++t) {
    const auto mask = bernoulli_mask(M, 0.6, rng);
    try {
      const auto cert = build_certificate(f, u, M, mask);
      ++built;
      const auto rep = verify_certificate(cert.Q, f, u, mask.indices(M));
      EXPECT_TRUE(rep.support_ok);
      EXPECT_LT(rep.interpolation_max_error, 1e-10);
      EXPECT_LT(rep.derivative_max_error, 1e-10);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Singular);
    }
  }
  EXPECT_GT(built, 0);
}

TEST(Certificate, SingularSystemRejected) {
  std::mt19937_64 rng(6);
  // Very sparse mask: the normalized system is far from identity.
  const auto mask = bernoulli_mask(8, 0.05, rng);
  try {
    build_certificate({0.1, 0.15, 0.2}, {cplx(1.0), cplx(1.0), cplx(1.0)}, 8, mask);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Singular);
  }
}

TEST(Verify, ConstantPolynomialFails) {
  const auto J = IndexSet::symmetric(8);
  CVector q = CVector::Zero(J.size());
  q[J.position(0)] = 1.0;
  const auto rep = verify_certificate(DualPolynomial(J, q), {0.3}, {cplx(1.0)}, J.indices());
  EXPECT_LT(rep.interpolation_max_error, 1e-14);
  EXPECT_GE(rep.off_support_max_modulus, 1.0 - 1e-14);
  EXPECT_FALSE(rep.pass);
}

TEST(Verify, ZeroPolynomialFails) {
  const auto J = IndexSet::symmetric(8);
  const auto rep = verify_certificate(DualPolynomial(J, CVector::Zero(J.size())), {0.3}, {cplx(1.0)}, J.indices());
  EXPECT_NEAR(rep.interpolation_max_error, 1.0, 1e-14);
  EXPECT_FALSE(rep.pass);
}

TEST(Verify, SupportViolationDetected) {
  const auto cert = build_certificate({0.25}, {cplx(1.0)}, 8);
  std::vector<int> mask = cert.Q.index_set().indices();
  mask.erase(mask.begin() + 3);
  const auto rep = verify_certificate(cert.Q, {0.25}, {cplx(1.0)}, mask);
  EXPECT_FALSE(rep.support_ok);
  EXPECT_FALSE(rep.pass);
}
