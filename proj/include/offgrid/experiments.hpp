#ifndef OFFGRID_EXPERIMENTS_HPP
#define OFFGRID_EXPERIMENTS_HPP

// Instance generation, paired SDP / grid-BP trials, performance profiles and
// phase-transition sweeps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "offgrid/bp.hpp"
#include "offgrid/core.hpp"
#include "offgrid/localize.hpp"
#include "offgrid/solver.hpp"

namespace offgrid {

enum class MagnitudeMode { Unit, Fading };
enum class FrequencyMode { Random, Equispaced };
enum class SignMode { Real, Complex };
enum class MaskMode { Uniform, Bernoulli };

inline const char* to_string(MagnitudeMode m) { return m == MagnitudeMode::Unit ? "unit" : "fading"; }
inline const char* to_string(FrequencyMode m) { return m == FrequencyMode::Random ? "random" : "equispaced"; }
inline const char* to_string(SignMode m) { return m == SignMode::Real ? "real" : "complex"; }
inline const char* to_string(MaskMode m) { return m == MaskMode::Uniform ? "uniform" : "bernoulli"; }

struct ExperimentConfig {
  int n = 64;
  double rho_s = 1.0 / 16.0;
  double rho_m_over_rho_s = 10.0;
  MagnitudeMode magnitude = MagnitudeMode::Unit;
  FrequencyMode frequency = FrequencyMode::Random;
  /// Minimum wrap-around separation for random frequencies (absolute).
  double delta_min = 0.0;
  SignMode sign = SignMode::Complex;
  MaskMode mask = MaskMode::Uniform;
  int trials = 10;
  std::uint64_t base_seed = 0;

  int s() const { return static_cast<int>(std::lround(rho_s * n)); }
  int m() const { return static_cast<int>(std::lround(rho_s * rho_m_over_rho_s * n)); }

  void validate() const {
    require(n >= 2, ErrorKind::Config, "n must be >= 2");
    require(s() >= 1, ErrorKind::Config, "configuration yields s < 1");
    require(m() >= 1 && m() <= n, ErrorKind::Config, "configuration yields m outside [1, n]");
    require(trials >= 1, ErrorKind::Config, "trials must be >= 1");
    require(delta_min >= 0.0, ErrorKind::Config, "delta_min must be >= 0");
    if (frequency == FrequencyMode::Random)
      require(s() * delta_min <= 1.0, ErrorKind::Config, "separation infeasible: s * delta_min > 1");
  }

  /// Stable identifier built from every field that affects instances.
  std::string id() const {
    std::ostringstream os;
    os << "n" << n << "_s" << s() << "_m" << m() << "_" << to_string(magnitude) << "_" << to_string(frequency);
    if (frequency == FrequencyMode::Random) os << "_d" << delta_min;
    os << "_" << to_string(sign) << "_" << to_string(mask);
    return os.str();
  }
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ull) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace detail

/// Independent generator for (base_seed, config, trial).
inline std::mt19937_64 trial_rng(const ExperimentConfig& cfg, int trial) {
  const std::uint64_t ch = detail::fnv1a(cfg.id());
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.base_seed), static_cast<std::uint32_t>(cfg.base_seed >> 32),
                    static_cast<std::uint32_t>(ch), static_cast<std::uint32_t>(ch >> 32),
                    static_cast<std::uint32_t>(trial)};
  return std::mt19937_64(seq);
}

struct Instance {
  SpectralModel model;
  ComplexSignal signal;
  SampleSet samples;
  std::uint64_t hash = 0;
};

template <class Rng>
std::vector<double> random_separated_frequencies(int s, double delta, Rng& rng, int max_attempts = 100000) {
  require(s * delta <= 1.0, ErrorKind::Config, "separation infeasible: s * delta_min > 1");
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> f(static_cast<std::size_t>(s));
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    for (auto& v : f) v = U(rng);
    if (min_separation(f) >= delta) return f;
  }
  fail(ErrorKind::Config, "could not draw separated frequencies within the attempt cap");
}

/// Uniform m-subset of {0..n-1} by partial Fisher-Yates, sorted.
template <class Rng>
std::vector<int> uniform_subset(int n, int m, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::uint64_t instance_hash(const SpectralModel& model, const std::vector<int>& mask) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& e : model.entries()) {
    h = detail::fnv1a(&e.frequency, sizeof(double), h);
    const double re = e.coefficient.real(), im = e.coefficient.imag();
    h = detail::fnv1a(&re, sizeof(double), h);
    h = detail::fnv1a(&im, sizeof(double), h);
  }
  for (int j : mask) h = detail::fnv1a(&j, sizeof(int), h);
  return h;
}

inline Instance generate_instance(const ExperimentConfig& cfg, int trial_index) {
  cfg.validate();
  auto rng = trial_rng(cfg, trial_index);
  const int s = cfg.s(), m = cfg.m(), n = cfg.n;
  std::uniform_real_distribution<double> U(0.0, 1.0);

  std::vector<double> f;
  if (cfg.frequency == FrequencyMode::Random) {
    f = random_separated_frequencies(s, cfg.delta_min, rng);
  } else {
    const double shift = U(rng);
    for (int k = 0; k < s; ++k) f.push_back(wrap_unit(shift + static_cast<double>(k) / s));
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<cplx> c;
  for (int k = 0; k < s; ++k) {
    double mag = 1.0;
    if (cfg.magnitude == MagnitudeMode::Fading) {
      const double w = gauss(rng);
      mag = 0.5 + w * w;
    }
    const cplx sign = cfg.sign == SignMode::Real ? cplx(coin(rng) ? 1.0 : -1.0) : cis(kTwoPi * U(rng));
    c.push_back(mag * sign);
  }

  std::vector<int> mask;
  if (cfg.mask == MaskMode::Uniform) {
    mask = uniform_subset(n, m, rng);
  } else {
    std::bernoulli_distribution keep(static_cast<double>(m) / n);
    for (int j = 0; j < n; ++j)
      if (keep(rng)) mask.push_back(j);
    if (mask.empty()) mask.push_back(std::uniform_int_distribution<int>(0, n - 1)(rng));
  }

  SpectralModel model(f, c);
  const IndexSet J = IndexSet::first_n(n);
  ComplexSignal x = synthesize(model, J);
  SampleSet obs = SampleSet::observe(x, mask);
  const std::uint64_t h = instance_hash(model, mask);
  return {std::move(model), std::move(x), std::move(obs), h};
}

// ---------------------------------------------------------------------------

/// Relative error threshold for a successful recovery.
inline constexpr double kSuccessThreshold = 1e-6;

struct TrialResult {
  std::string config_id;
  int trial = 0;
  std::string algorithm;
  int n = 0, s = 0, m = 0;
  double delta_f = 0.0;
  double relative_error = 0.0;
  std::vector<double> frequency_errors;
  double frequency_error_max = std::numeric_limits<double>::infinity();
  bool success = false;
  double runtime_s = 0.0;
  std::string status;
  std::uint64_t instance_hash = 0;
};

inline double relative_error(const CVector& estimate, const CVector& truth) {
  const double tn = truth.norm();
  return tn > 0.0 ? (estimate - truth).norm() / tn : estimate.norm();
}

struct SuiteOptions {
  SolverOptions solver{};
  BpOptions bp{};
  double bp_localize_threshold = 1e-2;
  int threads = 1;
  /// Rows are appended here as they complete, in task order (empty: no file).
  std::string csv_path;
};

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names{"sdp", "bp4", "bp16", "bp64"};
  return names;
}

inline int bp_grid_factor(const std::string& algorithm) {
  if (algorithm.rfind("bp", 0) != 0) return 0;
  try {
    return std::stoi(algorithm.substr(2));
  } catch (const std::exception&) {
    return 0;
  }
}

/// Estimated frequencies of an SDP solve: polished atoms, else the dual.
inline std::vector<double> sdp_frequencies(const SdpSolution& sol, const SolverOptions& opts) {
  if (sol.polished) return sol.atoms.frequencies();
  try {
    return localize_frequencies(extract_dual(sol, opts.localization.grid_size), opts.localization);
  } catch (const Error&) {
    return {};
  }
}

inline TrialResult run_trial(const ExperimentConfig& cfg, int trial, const Instance& inst,
                             const std::string& algorithm, const SuiteOptions& opts) {
  TrialResult r;
  r.config_id = cfg.id();
  r.trial = trial;
  r.algorithm = algorithm;
  r.n = cfg.n;
  r.s = static_cast<int>(inst.model.size());
  r.m = inst.samples.m();
  r.delta_f = min_separation(inst.model.frequencies());
  r.instance_hash = inst.hash;
  try {
    std::vector<double> est;
    if (algorithm == "sdp") {
      SdpSolution sol = complete_signal(inst.samples, opts.solver);
      r.runtime_s = sol.solve_seconds;
      r.relative_error = relative_error(sol.x.samples, inst.signal.samples);
      r.status = to_string(sol.status);
      est = sdp_frequencies(sol, opts.solver);
    } else if (const int g = bp_grid_factor(algorithm); g >= 1) {
      BpOptions bo = opts.bp;
      bo.grid_factor = g;
      BpSolution sol = bp_solve(inst.samples, bo);
      r.runtime_s = sol.solve_seconds;
      r.relative_error = relative_error(bp_signal(sol).samples, inst.signal.samples);
      r.status = sol.converged ? "converged" : "max_iter";
      est = bp_localize(sol, opts.bp_localize_threshold);
    } else {
      fail(ErrorKind::Config, "unknown algorithm '" + algorithm + "'");
    }
    const FrequencyMatch fm = match_frequencies(est, inst.model.frequencies());
    r.frequency_errors = fm.errors;
    r.frequency_error_max = fm.max_error;
    r.success = r.relative_error <= kSuccessThreshold;
  } catch (const std::exception& e) {
    r.status = std::string("error: ") + e.what();
    r.relative_error = std::numeric_limits<double>::infinity();
    r.success = false;
  }
  return r;
}

inline std::string csv_header() {
  return "config_id,trial,algorithm,n,s,m,delta_f,rel_error,freq_error_max,success,runtime_s,status";
}

inline std::string csv_row(const TrialResult& r) {
  std::ostringstream os;
  os.precision(17);
  std::string status = r.status;
  std::replace(status.begin(), status.end(), ',', ';');
  std::replace(status.begin(), status.end(), '\n', ' ');
  os << r.config_id << ',' << r.trial << ',' << r.algorithm << ',' << r.n << ',' << r.s << ',' << r.m << ','
     << r.delta_f << ',' << r.relative_error << ',' << r.frequency_error_max << ',' << (r.success ? 1 : 0) << ','
     << r.runtime_s << ',' << status;
  return os.str();
}

/// Runs every (config, trial, algorithm) triple; algorithms within a trial
/// share one instance. Results come back in task order whatever the thread
/// count.
inline std::vector<TrialResult> run_suite(const std::vector<ExperimentConfig>& cfgs,
                                          const std::vector<std::string>& algorithms,
                                          const SuiteOptions& opts = {}) {
  require(!algorithms.empty(), ErrorKind::Precondition, "no algorithms given");
  for (const auto& a : algorithms)
    require(a == "sdp" || bp_grid_factor(a) >= 1, ErrorKind::Config, "unknown algorithm '" + a + "'");
  for (const auto& c : cfgs) c.validate();

  struct Task {
    std::size_t cfg;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cfgs.size(); ++c)
    for (int t = 0; t < cfgs[c].trials; ++t) tasks.push_back({c, t});
  const std::size_t A = algorithms.size();
  std::vector<TrialResult> results(tasks.size() * A);
  std::vector<char> done(tasks.size(), 0);

  std::ofstream csv;
  if (!opts.csv_path.empty()) {
    csv.open(opts.csv_path, std::ios::trunc);
    require(static_cast<bool>(csv), ErrorKind::Io, "cannot open " + opts.csv_path);
    csv << csv_header() << '\n';
  }
  std::mutex mu;
  std::size_t next_to_write = 0;
  std::atomic<std::size_t> next_task{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next_task.fetch_add(1);
      if (k >= tasks.size()) return;
      const auto& task = tasks[k];
      const ExperimentConfig& cfg = cfgs[task.cfg];
      std::optional<Instance> inst;
      std::string gen_error;
      try {
        inst = generate_instance(cfg, task.trial);
      } catch (const std::exception& e) {
        gen_error = e.what();
      }
      for (std::size_t a = 0; a < A; ++a) {
        TrialResult r;
        if (inst) {
          r = run_trial(cfg, task.trial, *inst, algorithms[a], opts);
        } else {
          r.config_id = cfg.id();
          r.trial = task.trial;
          r.algorithm = algorithms[a];
          r.n = cfg.n;
          r.relative_error = std::numeric_limits<double>::infinity();
          r.status = "error: " + gen_error;
        }
        results[k * A + a] = std::move(r);
      }
      std::lock_guard<std::mutex> lock(mu);
      done[k] = 1;
      while (next_to_write < tasks.size() && done[next_to_write]) {
        if (csv.is_open()) {
          for (std::size_t a = 0; a < A; ++a) csv << csv_row(results[next_to_write * A + a]) << '\n';
          csv.flush();
        }
        ++next_to_write;
      }
    }
  };

  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

// ---------------------------------------------------------------------------

enum class ProfileMetric { Accuracy, Runtime };

struct ProfileCurve {
  std::string algorithm;
  std::vector<double> beta;
  std::vector<double> value;
};

/// Metric floor: errors below machine precision are indistinguishable.
inline constexpr double kProfileFloor = 1e-16;

/// P_a(beta) = #{p : M_a(p) <= beta * min_a M_a(p)} / #P on a log-spaced beta
/// grid from 1 to the largest observed ratio.
inline std::vector<ProfileCurve> performance_profile(const std::vector<TrialResult>& results, ProfileMetric metric,
                                                     int points = 200) {
  require(points >= 2, ErrorKind::Precondition, "profile needs at least two beta points");
  std::vector<std::string> algs;
  std::vector<std::pair<std::string, int>> problems;
  for (const auto& r : results) {
    if (std::find(algs.begin(), algs.end(), r.algorithm) == algs.end()) algs.push_back(r.algorithm);
    const auto key = std::make_pair(r.config_id, r.trial);
    if (std::find(problems.begin(), problems.end(), key) == problems.end()) problems.push_back(key);
  }
  require(!algs.empty(), ErrorKind::Precondition, "no results to profile");
  const std::size_t P = problems.size(), A = algs.size();
  std::vector<std::vector<double>> M(P, std::vector<double>(A, std::numeric_limits<double>::quiet_NaN()));
  for (const auto& r : results) {
    const auto p = static_cast<std::size_t>(
        std::find(problems.begin(), problems.end(), std::make_pair(r.config_id, r.trial)) - problems.begin());
    const auto a = static_cast<std::size_t>(std::find(algs.begin(), algs.end(), r.algorithm) - algs.begin());
    const double v = metric == ProfileMetric::Accuracy ? r.relative_error : r.runtime_s;
    M[p][a] = std::max(v, kProfileFloor);
  }
  std::vector<std::vector<double>> ratio(P, std::vector<double>(A));
  double max_ratio = 1.0;
  for (std::size_t p = 0; p < P; ++p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) {
      require(!std::isnan(M[p][a]), ErrorKind::Precondition,
              "missing result for algorithm " + algs[a] + " on " + problems[p].first + "#" +
                  std::to_string(problems[p].second));
      best = std::min(best, M[p][a]);
    }
    for (std::size_t a = 0; a < A; ++a) {
      ratio[p][a] = std::isfinite(M[p][a]) ? M[p][a] / best : std::numeric_limits<double>::infinity();
      if (std::isfinite(ratio[p][a])) max_ratio = std::max(max_ratio, ratio[p][a]);
    }
  }
  std::vector<double> beta(static_cast<std::size_t>(points));
  const double lmax = std::log(max_ratio);
  for (int i = 0; i < points; ++i) beta[static_cast<std::size_t>(i)] = std::exp(lmax * i / (points - 1));
  beta.back() = max_ratio;

  std::vector<ProfileCurve> out;
  for (std::size_t a = 0; a < A; ++a) {
    ProfileCurve c{algs[a], beta, std::vector<double>(beta.size())};
    for (std::size_t b = 0; b < beta.size(); ++b) {
      std::size_t count = 0;
      for (std::size_t p = 0; p < P; ++p)
        // relative slack keeps ratio == beta.back() counted despite rounding
        if (ratio[p][a] <= beta[b] * (1.0 + 1e-12)) ++count;
      c.value[b] = static_cast<double>(count) / static_cast<double>(P);
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct PhaseTransition {
  int n = 0;
  std::vector<int> s_values;
  std::vector<int> m_values;
  /// success[i][j] for s_values[i], m_values[j].
  std::vector<std::vector<double>> success;

  double rho_s(std::size_t i) const { return static_cast<double>(s_values[i]) / n; }
  double rho_m(std::size_t j) const { return static_cast<double>(m_values[j]) / n; }

  std::string csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "rho_m,rho_s,success_rate,reference_rho_s\n";
    for (std::size_t i = 0; i < s_values.size(); ++i)
      for (std::size_t j = 0; j < m_values.size(); ++j)
        os << rho_m(j) << ',' << rho_s(i) << ',' << success[i][j] << ',' << 0.5 * rho_m(j) << '\n';
    return os.str();
  }
};

struct PhaseOptions {
  SolverOptions solver{};
  MagnitudeMode magnitude = MagnitudeMode::Unit;
  SignMode sign = SignMode::Complex;
  std::uint64_t base_seed = 0;
  int threads = 1;
  /// Called after each finished cell (s index, m index, rate).
  std::function<void(std::size_t, std::size_t, double)> on_cell;
};

inline PhaseTransition phase_transition(int n, const std::vector<int>& s_values, const std::vector<int>& m_values,
                                        double delta_min, int trials, const PhaseOptions& opts = {}) {
  require(trials >= 1, ErrorKind::Precondition, "trials must be >= 1");
  PhaseTransition pt{n, s_values, m_values,
                     std::vector<std::vector<double>>(s_values.size(), std::vector<double>(m_values.size(), 0.0))};
  for (std::size_t i = 0; i < s_values.size(); ++i)
    for (std::size_t j = 0; j < m_values.size(); ++j) {
      ExperimentConfig cfg;
      cfg.n = n;
      cfg.rho_s = static_cast<double>(s_values[i]) / n;
      cfg.rho_m_over_rho_s = static_cast<double>(m_values[j]) / s_values[i];
      cfg.frequency = FrequencyMode::Random;
      cfg.delta_min = delta_min;
      cfg.magnitude = opts.magnitude;
      cfg.sign = opts.sign;
      cfg.trials = trials;
      cfg.base_seed = opts.base_seed;
      SuiteOptions so;
      so.solver = opts.solver;
      so.threads = opts.threads;
      int ok = 0;
      try {
        for (const auto& r : run_suite({cfg}, {"sdp"}, so)) ok += r.success ? 1 : 0;
      } catch (const Error&) {
        // infeasible cell: counted as unsuccessful
      }
      pt.success[i][j] = static_cast<double>(ok) / trials;
      if (opts.on_cell) opts.on_cell(i, j, pt.success[i][j]);
    }
  return pt;
}

struct SummaryStats {
  double median = 0.0;
  double mad = 0.0;
};

inline SummaryStats median_mad(std::vector<double> v) {
  require(!v.empty(), ErrorKind::Precondition, "median of an empty sample");
  auto med = [](std::vector<double>& x) {
    std::sort(x.begin(), x.end());
    const std::size_t k = x.size();
    return k % 2 ? x[k / 2] : 0.5 * (x[k / 2 - 1] + x[k / 2]);
  };
  SummaryStats st;
  st.median = med(v);
  for (auto& x : v) x = std::abs(x - st.median);
  st.mad = med(v);
  return st;
}

}  // namespace offgrid

#endif
