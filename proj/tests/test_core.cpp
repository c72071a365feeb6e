#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "offgrid/core.hpp"

using namespace offgrid;

namespace {

// e^{i theta} in extended precision, rounded to double.
cplx cis_ld(long double theta) {
  return {static_cast<double>(std::cos(theta)), static_cast<double>(std::sin(theta))};
}

constexpr long double kPiL = 3.141592653589793238462643383279502884L;

}  // namespace

TEST(IndexSet, Sizes) {
  const auto a = IndexSet::first_n(7);
  EXPECT_EQ(a.size(), 7);
  EXPECT_EQ(a.first(), 0);
  EXPECT_EQ(a.last(), 6);
  const auto b = IndexSet::symmetric(3);
  EXPECT_EQ(b.size(), 13);
  EXPECT_EQ(b.first(), -6);
  EXPECT_EQ(b.last(), 6);
  EXPECT_EQ(b.position(-6), 0);
  EXPECT_EQ(b.at(12), 6);
  const auto idx = b.indices();
  for (std::size_t k = 1; k < idx.size(); ++k) EXPECT_LT(idx[k - 1], idx[k]);
}

TEST(IndexSet, RejectsDegenerate) {
  EXPECT_THROW(IndexSet::first_n(1), Error);
  EXPECT_THROW(IndexSet::symmetric(0), Error);
}

TEST(Atom, ZeroFrequencyIsAllOnes) {
  const auto a = atom(0.0, 0.0, IndexSet::first_n(4));
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(a[j] - cplx(1.0)), 0.0, 1e-15);
}

TEST(Atom, HalfFrequencyAlternates) {
  const auto a = atom(0.5, 0.0, IndexSet::first_n(4));
  const cplx expect[] = {1.0, -1.0, 1.0, -1.0};
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(a[j] - expect[j]), 0.0, 1e-15);
}

TEST(Atom, SymmetricEntrywise) {
  const auto J = IndexSet::symmetric(1);
  const auto a = atom(0.25, kPi / 2.0, J);
  for (int j = -2; j <= 2; ++j) {
    const cplx ref = cis_ld(2.0L * kPiL * 0.25L * j + kPiL / 2.0L);
    EXPECT_NEAR(std::abs(a[j] - ref), 0.0, 1e-15) << "j=" << j;
  }
}

TEST(Atom, UnitModulusAndNorm) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto J = trial % 2 ? IndexSet::first_n(33) : IndexSet::symmetric(8);
    const auto a = atom(U(rng), kTwoPi * U(rng) * 0.999, J);
    for (Eigen::Index p = 0; p < a.samples.size(); ++p) EXPECT_NEAR(std::abs(a.samples[p]), 1.0, 1e-12);
    EXPECT_NEAR(a.norm(), std::sqrt(static_cast<double>(J.size())), 1e-12);
  }
}

TEST(Atom, DomainErrors) {
  const auto J = IndexSet::first_n(4);
  EXPECT_THROW(atom(1.0, 0.0, J), Error);
  EXPECT_THROW(atom(-0.1, 0.0, J), Error);
  EXPECT_THROW(atom(0.1, kTwoPi, J), Error);
}

TEST(SpectralModel, ReducesAndRejects) {
  SpectralModel m({1.25, -0.25}, {cplx(1.0), cplx(0.0, 2.0)});
  EXPECT_DOUBLE_EQ(m.frequencies()[0], 0.25);
  EXPECT_DOUBLE_EQ(m.frequencies()[1], 0.75);
  EXPECT_DOUBLE_EQ(m.l1(), 3.0);
  EXPECT_THROW(SpectralModel({0.1, 1.1}, {cplx(1.0), cplx(1.0)}), Error);
  EXPECT_THROW(SpectralModel({0.1}, {cplx(0.0)}), Error);
  EXPECT_THROW(SpectralModel({0.1, 0.2}, {cplx(1.0)}), Error);
}

TEST(Synthesize, EmptyModelIsZero) {
  const auto x = synthesize(SpectralModel(), IndexSet::first_n(8));
  EXPECT_EQ(x.samples.norm(), 0.0);
}

TEST(Synthesize, SingleEntryIsScaledAtom) {
  const auto J = IndexSet::first_n(16);
  const cplx c(0.3, -1.2);
  const auto x = synthesize(SpectralModel({0.37}, {c}), J);
  const auto a = atom(0.37, 0.0, J);
  EXPECT_LT((x.samples - c * a.samples).norm(), 1e-14);
}

TEST(Synthesize, ThreeAtomModelNormBySummation) {
  const std::vector<double> f{0.5874, 0.7528, 0.8966};
  const std::vector<cplx> c{{-0.1756, -0.5306}, {0.1599, -0.4344}, {-1.0966, 0.4216}};
  const auto x = synthesize(SpectralModel(f, c), IndexSet::first_n(40));
  long double acc = 0.0L;
  for (int j = 0; j < 40; ++j) {
    std::complex<long double> v = 0.0L;
    for (int k = 0; k < 3; ++k) {
      const long double th = 2.0L * kPiL * static_cast<long double>(f[static_cast<std::size_t>(k)]) * j;
      v += std::complex<long double>(c[static_cast<std::size_t>(k)].real(), c[static_cast<std::size_t>(k)].imag()) *
           std::complex<long double>(std::cos(th), std::sin(th));
    }
    acc += std::norm(v);
  }
  EXPECT_NEAR(x.norm(), static_cast<double>(std::sqrt(acc)), 1e-12);
}

TEST(Synthesize, Linear) {
  const auto J = IndexSet::symmetric(5);
  SpectralModel a({0.1, 0.4}, {cplx(1.0, 1.0), cplx(-2.0)});
  SpectralModel b({0.7}, {cplx(0.0, 0.5)});
  SpectralModel ab({0.1, 0.4, 0.7}, {cplx(1.0, 1.0), cplx(-2.0), cplx(0.0, 0.5)});
  EXPECT_LT((synthesize(ab, J).samples - synthesize(a, J).samples - synthesize(b, J).samples).norm(), 1e-13);
}

TEST(WrapDistance, Examples) {
  EXPECT_NEAR(wrap_distance(0.1, 0.9), 0.2, 1e-15);
  EXPECT_EQ(wrap_distance(0.3, 0.3), 0.0);
  EXPECT_NEAR(wrap_distance(0.0, 0.5), 0.5, 1e-15);
}

TEST(WrapDistance, IsMetric) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = U(rng), b = U(rng), c = U(rng);
    EXPECT_DOUBLE_EQ(wrap_distance(a, b), wrap_distance(b, a));
    EXPECT_LE(wrap_distance(a, c), wrap_distance(a, b) + wrap_distance(b, c) + 1e-15);
    EXPECT_LE(wrap_distance(a, b), 0.5);
  }
}

TEST(MinSeparation, MatchesBruteForce) {
  EXPECT_NEAR(min_separation({0.1, 0.2, 0.95}), 0.1, 1e-15);
  EXPECT_NEAR(min_separation({0.25, 0.75}), 0.5, 1e-15);
  EXPECT_TRUE(std::isinf(min_separation({0.3})));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> f(7);
    for (auto& v : f) v = U(rng);
    double brute = 1.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = i + 1; j < f.size(); ++j) {
        const double d = std::abs(f[i] - f[j]);
        brute = std::min(brute, std::min(d, 1.0 - d));
      }
    EXPECT_DOUBLE_EQ(min_separation(f), brute);
  }
}

TEST(SampleSet, Validation) {
  const auto J = IndexSet::first_n(5);
  const CVector v = CVector::Ones(2);
  EXPECT_THROW(SampleSet(J, {3, 1}, v), Error);
  EXPECT_THROW(SampleSet(J, {1, 1}, v), Error);
  EXPECT_THROW(SampleSet(J, {1, 5}, v), Error);
  EXPECT_THROW(SampleSet(J, {1}, v), Error);
  EXPECT_NO_THROW(SampleSet(J, {1, 4}, v));
}

TEST(Toeplitz, Examples) {
  CVector u(3);
  u << 1.0, 0.0, 0.0;
  EXPECT_LT((toeplitz_matrix(u) - CMatrix::Identity(3, 3)).norm(), 1e-15);
  CVector v(2);
  v << 2.0, cplx(0.0, 1.0);
  CMatrix expect(2, 2);
  expect << 2.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 2.0;
  EXPECT_LT((toeplitz_matrix(v) - expect).norm(), 1e-15);
}

TEST(Toeplitz, SumOfAtomOuterProducts) {
  const int n = 12;
  const std::vector<double> f{0.12, 0.5, 0.83};
  const std::vector<double> c{1.5, 0.25, 2.0};
  CVector u = CVector::Zero(n);
  CMatrix outer = CMatrix::Zero(n, n);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const CVector a = atom(f[k], 0.0, IndexSet::first_n(n)).samples;
    u += c[k] * a;
    outer += c[k] * a * a.adjoint();
  }
  const CMatrix T = toeplitz_matrix(u);
  EXPECT_LT((T - outer).norm(), 1e-12);
  EXPECT_LT((T - T.adjoint()).norm(), 1e-15);
}

TEST(Shift, NineSamples) {
  const auto s = symmetric_shift_for(9);
  EXPECT_EQ(s.M, 2);
  EXPECT_EQ(s.n0, 1);
  EXPECT_TRUE(s.dropped.empty());
  EXPECT_THROW(symmetric_shift_for(4), Error);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0.0, 1.0);
  CVector x(9);
  for (auto& v : x) v = {N(rng), N(rng)};
  const auto sh = shift_to_symmetric(ComplexSignal(IndexSet::first_n(9), x));
  for (int j = -4; j <= 4; ++j) EXPECT_EQ(sh.signal[j], x[j + 4]);
}

TEST(Shift, RoundtripAndDroppedTail) {
  const int n = 15;  // M = 3, window 13, two indices dropped
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  CVector x(n);
  for (auto& v : x) v = {N(rng), N(rng)};
  const ComplexSignal sig(IndexSet::first_n(n), x);
  const auto sh = shift_to_symmetric(sig);
  EXPECT_EQ(sh.shift.dropped, (std::vector<int>{13, 14}));
  const CVector tail = x.tail(2);
  const auto back = shift_from_symmetric(sh.signal, n, &tail);
  EXPECT_EQ((back.samples - x).norm(), 0.0);

  const auto obs = SampleSet::observe(sig, {0, 4, 12, 14});
  const auto so = shift_to_symmetric(obs);
  EXPECT_EQ(so.samples.mask(), (std::vector<int>{-6, -2, 6}));
  EXPECT_EQ(so.dropped_observed, (std::vector<int>{14}));
}

TEST(Shift, ModelModulation) {
  const double f = 0.3141;
  const cplx c(0.7, -0.2);
  const int n = 21;
  const auto s = symmetric_shift_for(n);
  const auto xs = shift_to_symmetric(synthesize(SpectralModel({f}, {c}), IndexSet::first_n(n))).signal;
  const auto model = shift_model_to_symmetric(SpectralModel({f}, {c}), s.M);
  const cplx expect = c * cis_ld(4.0L * kPiL * f * s.M);
  EXPECT_NEAR(std::abs(model.coefficients()[0] - expect), 0.0, 1e-14);
  EXPECT_LT((synthesize(model, IndexSet::symmetric(s.M)).samples - xs.samples).norm(), 1e-12);
}
