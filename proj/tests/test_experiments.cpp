#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "offgrid/experiments.hpp"

using namespace offgrid;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n = 32;
  cfg.rho_s = 2.0 / 32;
  cfg.rho_m_over_rho_s = 8.0;
  cfg.delta_min = 1.0 / 32;
  cfg.trials = 1;
  cfg.base_seed = 99;
  return cfg;
}

TrialResult fake(const std::string& alg, int trial, double err) {
  TrialResult r;
  r.config_id = "c";
  r.trial = trial;
  r.algorithm = alg;
  r.relative_error = err;
  r.runtime_s = err;
  return r;
}

}  // namespace

TEST(Config, DerivedSizesAndValidation) {
  ExperimentConfig cfg;
  cfg.n = 128;
  cfg.rho_s = 4.0 / 128;
  cfg.rho_m_over_rho_s = 5.0;
  EXPECT_EQ(cfg.s(), 4);
  EXPECT_EQ(cfg.m(), 20);
  EXPECT_NO_THROW(cfg.validate());
  cfg.rho_m_over_rho_s = 40.0;  // m > n
  EXPECT_THROW(cfg.validate(), Error);
  cfg.rho_m_over_rho_s = 5.0;
  cfg.delta_min = 0.3;  // 4 * 0.3 > 1
  EXPECT_THROW(cfg.validate(), Error);
  cfg.delta_min = 0.0;
  cfg.rho_s = 0.001;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Config, IdReflectsFields) {
  auto a = small_config(), b = small_config();
  EXPECT_EQ(a.id(), b.id());
  b.sign = SignMode::Real;
  EXPECT_NE(a.id(), b.id());
  b = a;
  b.magnitude = MagnitudeMode::Fading;
  EXPECT_NE(a.id(), b.id());
}

TEST(Instance, Deterministic) {
  const auto cfg = small_config();
  const auto a = generate_instance(cfg, 3), b = generate_instance(cfg, 3), c = generate_instance(cfg, 4);
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_EQ(a.model.frequencies(), b.model.frequencies());
  EXPECT_EQ(a.samples.mask(), b.samples.mask());
  EXPECT_NE(a.hash, c.hash);
  auto other = cfg;
  other.base_seed = 100;
  EXPECT_NE(generate_instance(other, 3).hash, a.hash);
}

TEST(Instance, RandomModeRespectsSeparationAndMask) {
  auto cfg = small_config();
  cfg.rho_s = 5.0 / 32;
  cfg.rho_m_over_rho_s = 3.0;
  for (int t = 0; t < 50; ++t) {
    const auto inst = generate_instance(cfg, t);
    EXPECT_EQ(inst.model.size(), 5u);
    EXPECT_GE(min_separation(inst.model.frequencies()), cfg.delta_min);
    const auto& mask = inst.samples.mask();
    EXPECT_EQ(static_cast<int>(mask.size()), 15);
    EXPECT_TRUE(std::is_sorted(mask.begin(), mask.end()));
    EXPECT_EQ(std::set<int>(mask.begin(), mask.end()).size(), mask.size());
    EXPECT_GE(mask.front(), 0);
    EXPECT_LT(mask.back(), 32);
    for (const auto& e : inst.model.entries()) EXPECT_NEAR(std::abs(e.coefficient), 1.0, 1e-14);
    const auto x = synthesize(inst.model, IndexSet::first_n(32));
    EXPECT_LT((x.samples - inst.signal.samples).norm(), 1e-14);
  }
}

TEST(Instance, EquispacedWithShift) {
  auto cfg = small_config();
  cfg.frequency = FrequencyMode::Equispaced;
  cfg.rho_s = 4.0 / 32;
  cfg.rho_m_over_rho_s = 4.0;
  const auto inst = generate_instance(cfg, 0);
  auto f = inst.model.frequencies();
  ASSERT_EQ(f.size(), 4u);
  const double phi = f[0];
  std::vector<double> expect;
  for (int k = 0; k < 4; ++k) expect.push_back(wrap_unit(phi + k / 4.0));
  std::sort(expect.begin(), expect.end());
  std::sort(f.begin(), f.end());
  for (int k = 0; k < 4; ++k) EXPECT_LT(wrap_distance(f[k], expect[k]), 1e-14);
}

TEST(Instance, RealSigns) {
  auto cfg = small_config();
  cfg.sign = SignMode::Real;
  for (int t = 0; t < 10; ++t) {
    const auto inst = generate_instance(cfg, t);
    for (const auto& e : inst.model.entries()) {
      EXPECT_EQ(e.coefficient.imag(), 0.0);
      EXPECT_EQ(std::abs(e.coefficient.real()), 1.0);
    }
  }
}

TEST(Instance, FadingMagnitudeMean) {
  ExperimentConfig cfg;
  cfg.n = 64;
  cfg.rho_s = 4.0 / 64;
  cfg.rho_m_over_rho_s = 2.0;
  cfg.magnitude = MagnitudeMode::Fading;
  cfg.base_seed = 7;
  double sum = 0.0;
  int count = 0;
  for (int t = 0; t < 2500; ++t) {
    const auto inst = generate_instance(cfg, t);
    for (const auto& e : inst.model.entries()) {
      const double a = std::abs(e.coefficient);
      EXPECT_GE(a, 0.5);
      sum += a;
      ++count;
    }
  }
  ASSERT_EQ(count, 10000);
  // 0.5 + w^2 has mean 1.5 and variance 2.
  const double stderr_mean = std::sqrt(2.0 / count);
  EXPECT_NEAR(sum / count, 1.5, 3.0 * stderr_mean);
}

TEST(Instance, InfeasibleSeparation) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(random_separated_frequencies(5, 0.25, rng), Error);
  // Feasible in principle but essentially never hit by rejection.
  EXPECT_THROW(random_separated_frequencies(10, 0.0999, rng, 1000), Error);
}

TEST(Instance, UniformSubsetIsUniform) {
  std::mt19937_64 rng(2);
  const int n = 20, m = 5, draws = 20000;
  std::vector<int> hits(n, 0);
  for (int d = 0; d < draws; ++d)
    for (int j : uniform_subset(n, m, rng)) ++hits[static_cast<std::size_t>(j)];
  const double expect = static_cast<double>(draws) * m / n;
  // Binomial sd ~ sqrt(draws * p * (1-p)) = 61.
  for (int h : hits) EXPECT_NEAR(h, expect, 5.0 * std::sqrt(expect * (1.0 - static_cast<double>(m) / n)));
}

TEST(Trial, RelativeError) {
  CVector a(2), b(2);
  a << cplx(1.0), cplx(0.0);
  b << cplx(1.0), cplx(1.0);
  EXPECT_NEAR(relative_error(b, a), 1.0, 1e-15);
  EXPECT_EQ(relative_error(a, a), 0.0);
  EXPECT_NEAR(relative_error(a, CVector::Zero(2)), 1.0, 1e-15);
}

TEST(Suite, PairedRowsAndCsv) {
  const auto path = (std::filesystem::temp_directory_path() / "offgrid_suite_test.csv").string();
  SuiteOptions opts;
  opts.csv_path = path;
  const auto cfg = small_config();
  const auto res = run_suite({cfg}, {"sdp", "bp4"}, opts);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].instance_hash, res[1].instance_hash);
  EXPECT_EQ(res[0].algorithm, "sdp");
  EXPECT_EQ(res[1].algorithm, "bp4");
  EXPECT_TRUE(res[0].success);
  EXPECT_EQ(res[0].success, res[0].relative_error <= 1e-6);
  EXPECT_LT(res[0].frequency_error_max, 1e-6);

  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], csv_header());
  EXPECT_EQ(lines[1].rfind(cfg.id() + ",0,sdp,", 0), 0u);
  std::filesystem::remove(path);
}

TEST(Suite, ReproducibleAndThreadIndependent) {
  auto cfg = small_config();
  cfg.trials = 3;
  SuiteOptions one, two;
  two.threads = 2;
  const auto a = run_suite({cfg}, {"sdp", "bp4"}, one);
  const auto b = run_suite({cfg}, {"sdp", "bp4"}, one);
  const auto c = run_suite({cfg}, {"sdp", "bp4"}, two);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].relative_error, b[k].relative_error);
    EXPECT_EQ(a[k].relative_error, c[k].relative_error);
    EXPECT_EQ(a[k].algorithm, c[k].algorithm);
    EXPECT_EQ(a[k].trial, c[k].trial);
    EXPECT_EQ(a[k].instance_hash, c[k].instance_hash);
  }
}

TEST(Suite, UnknownAlgorithmRejected) {
  EXPECT_THROW(run_suite({small_config()}, {"omp"}), Error);
  EXPECT_EQ(bp_grid_factor("bp16"), 16);
  EXPECT_EQ(bp_grid_factor("sdp"), 0);
}

TEST(Profile, SingleAlgorithm) {
  const auto curves = performance_profile({fake("a", 0, 1e-3), fake("a", 1, 1e-9)}, ProfileMetric::Accuracy);
  ASSERT_EQ(curves.size(), 1u);
  for (double v : curves[0].value) EXPECT_EQ(v, 1.0);
}

TEST(Profile, StrictDominance) {
  std::vector<TrialResult> rs;
  const double ratios[] = {2.0, 10.0, 5.0};
  for (int p = 0; p < 3; ++p) {
    rs.push_back(fake("A", p, 1e-6));
    rs.push_back(fake("B", p, 1e-6 * ratios[p]));
  }
  const auto curves = performance_profile(rs, ProfileMetric::Runtime, 50);
  ASSERT_EQ(curves.size(), 2u);
  const auto& A = curves[0];
  const auto& B = curves[1];
  EXPECT_EQ(A.value.front(), 1.0);
  EXPECT_EQ(B.value.front(), 0.0);
  EXPECT_NEAR(B.beta.back(), 10.0, 1e-12);
  EXPECT_EQ(B.value.back(), 1.0);
  for (std::size_t k = 1; k < B.value.size(); ++k) {
    EXPECT_GE(B.value[k], B.value[k - 1]);
    EXPECT_GE(B.beta[k], B.beta[k - 1]);
    EXPECT_LE(B.value[k], 1.0);
  }
  // Just below the largest ratio only two of three problems are covered.
  for (std::size_t k = 0; k < B.beta.size(); ++k)
    if (B.beta[k] >= 5.0 && B.beta[k] < 10.0 - 1e-9) EXPECT_NEAR(B.value[k], 2.0 / 3.0, 1e-15);
}

TEST(Profile, MissingPairRejected) {
  EXPECT_THROW(performance_profile({fake("A", 0, 1.0), fake("B", 1, 1.0)}, ProfileMetric::Accuracy), Error);
}

TEST(Phase, SmallGrid) {
  PhaseOptions o;
  o.base_seed = 5;
  const auto pt = phase_transition(16, {1, 4}, {2, 16}, 1.5 / 16, 2, o);
  ASSERT_EQ(pt.success.size(), 2u);
  EXPECT_EQ(pt.success[1][0], 0.0);  // s = 4 > m / 2
  EXPECT_EQ(pt.success[0][1], 1.0);  // full observation
  EXPECT_EQ(pt.success[1][1], 1.0);
  const std::string csv = pt.csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(csv.rfind("rho_m,rho_s,success_rate,reference_rho_s\n", 0), 0u);
}

TEST(Stats, MedianMad) {
  const auto st = median_mad({1.0, 2.0, 3.0, 4.0, 100.0});
  EXPECT_EQ(st.median, 3.0);
  EXPECT_EQ(st.mad, 1.0);
  EXPECT_EQ(median_mad({1.0, 3.0}).median, 2.0);
  EXPECT_THROW(median_mad({}), Error);
}
