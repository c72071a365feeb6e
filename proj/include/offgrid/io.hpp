#ifndef OFFGRID_IO_HPP
#define OFFGRID_IO_HPP

// JSON exchange formats.
//
// Problem:
//   {"index_set": {"kind": "first_n", "n": 64}        (or {"kind": "symmetric", "M": 8})
//    "entries":   [{"f": 0.1, "re": 1.0, "im": 0.0}]  (optional ground truth)
//    "mask":      [0, 3, 7]
//    "samples":   [[re, im], ...]}                     (optional if entries given)
//
// Options:
//   {"solver": {"max_iterations", "rho", "over_relaxation", "tol_primal", "tol_dual", "polish"},
//    "bp":     {"grid_factor", "max_iterations", "rho", "over_relaxation", "tol_primal", "tol_dual"}}
//
// Bench:
//   {"solver", "bp", "algorithms": ["sdp", "bp4"], "base_seed", "threads",
//    "experiments": [{"n", "rho_s", "rho_m_over_rho_s", "magnitude", "frequency",
//                     "delta_min", "sign", "trials"}]}
//
// Phase:
//   {"solver", "n", "s_values", "m_values", "delta_min", "trials", "magnitude", "sign",
//    "base_seed", "threads"}

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "offgrid/bp.hpp"
#include "offgrid/certificate.hpp"
#include "offgrid/core.hpp"
#include "offgrid/experiments.hpp"
#include "offgrid/solver.hpp"
#include "offgrid/version.hpp"

namespace offgrid::io {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  require(obj.is_object(), ErrorKind::Config, where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    require(allowed.count(it.key()) > 0, ErrorKind::Config, "unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& where) {
  require(obj.contains(key), ErrorKind::Config, "missing key '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, "bad value for '" + key + "' in " + where + ": " + e.what());
  }
}

}  // namespace detail

inline json to_json(const IndexSet& J) {
  if (J.kind() == IndexSet::Kind::FirstN) return {{"kind", "first_n"}, {"n", J.parameter()}};
  return {{"kind", "symmetric"}, {"M", J.parameter()}};
}

inline IndexSet index_set_from_json(const json& j) {
  require(j.is_object(), ErrorKind::Config, "index_set must be an object");
  const auto kind = detail::get<std::string>(j, "kind", "index_set");
  if (kind == "first_n") {
    detail::check_keys(j, {"kind", "n"}, "index_set");
    return IndexSet::first_n(detail::get<int>(j, "n", "index_set"));
  }
  if (kind == "symmetric") {
    detail::check_keys(j, {"kind", "M"}, "index_set");
    return IndexSet::symmetric(detail::get<int>(j, "M", "index_set"));
  }
  fail(ErrorKind::Config, "index_set kind must be first_n or symmetric");
}

inline json to_json(const CVector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back({v[k].real(), v[k].imag()});
  return a;
}

inline CVector cvector_from_json(const json& a, const std::string& where) {
  require(a.is_array(), ErrorKind::Config, where + " must be an array of [re, im] pairs");
  CVector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    const json& e = a[k];
    require(e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number(), ErrorKind::Config,
            where + " entries must be [re, im] number pairs");
    v[static_cast<Eigen::Index>(k)] = {e[0].get<double>(), e[1].get<double>()};
  }
  return v;
}

inline json to_json(const SpectralModel& model) {
  json a = json::array();
  for (const auto& e : model.entries())
    a.push_back({{"f", e.frequency}, {"re", e.coefficient.real()}, {"im", e.coefficient.imag()}});
  return a;
}

inline SpectralModel model_from_json(const json& a) {
  require(a.is_array(), ErrorKind::Config, "entries must be an array");
  std::vector<SpectralEntry> entries;
  for (const auto& e : a) {
    detail::check_keys(e, {"f", "re", "im"}, "entries[]");
    entries.push_back({detail::get<double>(e, "f", "entries[]"),
                       {detail::get<double>(e, "re", "entries[]"), detail::get<double>(e, "im", "entries[]")}});
  }
  return SpectralModel(std::move(entries));
}

struct Problem {
  IndexSet index_set = IndexSet::first_n(2);
  std::optional<SpectralModel> model;
  SampleSet samples;
};

inline json to_json(const Problem& p) {
  json j;
  j["index_set"] = to_json(p.index_set);
  if (p.model) j["entries"] = to_json(*p.model);
  j["mask"] = p.samples.mask();
  j["samples"] = to_json(p.samples.values());
  return j;
}

/// Reads a problem. Samples default to the model evaluated on the mask, and
/// the mask defaults to the whole index set.
inline Problem problem_from_json(const json& j) {
  detail::check_keys(j, {"index_set", "entries", "mask", "samples"}, "problem");
  require(j.contains("index_set"), ErrorKind::Config, "problem needs an index_set");
  const IndexSet J = index_set_from_json(j.at("index_set"));
  std::optional<SpectralModel> model;
  if (j.contains("entries")) model = model_from_json(j.at("entries"));
  std::vector<int> mask;
  if (j.contains("mask")) {
    require(j.at("mask").is_array(), ErrorKind::Config, "mask must be an array of integers");
    for (const auto& e : j.at("mask")) {
      require(e.is_number_integer(), ErrorKind::Config, "mask must be an array of integers");
      mask.push_back(e.get<int>());
    }
  } else {
    mask = J.indices();
  }
  if (j.contains("samples")) {
    CVector y = cvector_from_json(j.at("samples"), "samples");
    return {J, model, SampleSet(J, mask, y)};
  }
  require(model.has_value(), ErrorKind::Config, "problem needs samples or entries");
  return {J, model, SampleSet::observe(synthesize(*model, J), mask)};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, "malformed JSON in " + path + ": " + e.what());
  }
}

/// Writes through a temporary file in the same directory and renames it.
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    fail(ErrorKind::Io, "cannot move output into place at " + path + ": " + ec.message());
  }
}

// ---------------------------------------------------------------------------

inline SolverOptions solver_options_from_json(const json& j, SolverOptions base = {}) {
  detail::check_keys(j, {"max_iterations", "rho", "over_relaxation", "tol_primal", "tol_dual", "polish"}, "solver");
  if (j.contains("max_iterations")) base.max_iterations = detail::get<int>(j, "max_iterations", "solver");
  if (j.contains("rho")) base.rho = detail::get<double>(j, "rho", "solver");
  if (j.contains("over_relaxation")) base.over_relaxation = detail::get<double>(j, "over_relaxation", "solver");
  if (j.contains("tol_primal")) base.tol_primal = detail::get<double>(j, "tol_primal", "solver");
  if (j.contains("tol_dual")) base.tol_dual = detail::get<double>(j, "tol_dual", "solver");
  if (j.contains("polish")) base.polish = detail::get<bool>(j, "polish", "solver");
  try {
    base.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, std::string("solver: ") + e.what());
  }
  return base;
}

inline json to_json(const SolverOptions& o) {
  return {{"max_iterations", o.max_iterations}, {"rho", o.rho},         {"over_relaxation", o.over_relaxation},
          {"tol_primal", o.tol_primal},         {"tol_dual", o.tol_dual}, {"polish", o.polish}};
}

inline BpOptions bp_options_from_json(const json& j, BpOptions base = {}) {
  detail::check_keys(j, {"grid_factor", "max_iterations", "rho", "over_relaxation", "tol_primal", "tol_dual"}, "bp");
  if (j.contains("grid_factor")) base.grid_factor = detail::get<int>(j, "grid_factor", "bp");
  if (j.contains("max_iterations")) base.max_iterations = detail::get<int>(j, "max_iterations", "bp");
  if (j.contains("rho")) base.rho = detail::get<double>(j, "rho", "bp");
  if (j.contains("over_relaxation")) base.over_relaxation = detail::get<double>(j, "over_relaxation", "bp");
  if (j.contains("tol_primal")) base.tol_primal = detail::get<double>(j, "tol_primal", "bp");
  if (j.contains("tol_dual")) base.tol_dual = detail::get<double>(j, "tol_dual", "bp");
  try {
    base.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, std::string("bp: ") + e.what());
  }
  return base;
}

struct Config {
  SolverOptions solver{};
  BpOptions bp{};
};

inline Config config_from_json(const json& j) {
  detail::check_keys(j, {"solver", "bp"}, "config");
  Config c;
  if (j.contains("solver")) c.solver = solver_options_from_json(j.at("solver"));
  if (j.contains("bp")) c.bp = bp_options_from_json(j.at("bp"));
  return c;
}

// ---------------------------------------------------------------------------

inline json to_json(const SdpSolution& s) {
  json j;
  j["index_set"] = to_json(s.x.index_set);
  j["x"] = to_json(s.x.samples);
  j["u"] = to_json(s.u.generator());
  j["t"] = s.t;
  j["objective"] = s.objective;
  j["sdp_objective"] = s.sdp_objective;
  j["q"] = to_json(s.q);
  j["mask"] = s.mask;
  j["epsilon"] = s.epsilon;
  j["iterations"] = s.iterations;
  j["primal_residual"] = s.primal_residual;
  j["dual_residual"] = s.dual_residual;
  j["status"] = to_string(s.status);
  j["polished"] = s.polished;
  j["atoms"] = to_json(s.atoms);
  j["dual_value"] = s.dual_value();
  j["solve_seconds"] = s.solve_seconds;
  return j;
}

inline json to_json(const BpSolution& s) {
  json j;
  j["index_set"] = to_json(s.index_set);
  j["grid_size"] = s.grid_size;
  j["objective"] = s.objective;
  j["residual"] = s.residual;
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  json sup = json::array();
  for (int k : s.support) sup.push_back({{"k", k}, {"f", s.grid_frequency(k)}, {"re", s.c[k].real()}, {"im", s.c[k].imag()}});
  j["support"] = sup;
  j["solve_seconds"] = s.solve_seconds;
  return j;
}

inline json to_json(const CertificateReport& r) {
  return {{"M", r.M},
          {"support_ok", r.support_ok},
          {"interpolation_max_error", r.interpolation_max_error},
          {"derivative_max_error", r.derivative_max_error},
          {"off_support_max_modulus", r.off_support_max_modulus},
          {"far_max_modulus", r.far_max_modulus},
          {"near_radius", r.near_radius},
          {"near_min_real", r.near_min_real},
          {"near_max_abs_imag", r.near_max_abs_imag},
          {"near_max_real_curvature", r.near_max_real_curvature},
          {"near_max_abs_imag_curvature", r.near_max_abs_imag_curvature},
          {"near_max_abs_slope", r.near_max_abs_slope},
          {"grid_points", r.grid_points},
          {"pass", r.pass}};
}

inline json to_json(const SystemBounds& b) {
  return {{"identity_gap", b.identity_gap}, {"norm", b.norm}, {"inverse_norm", b.inverse_norm}};
}


// ---------------------------------------------------------------------------

namespace detail {

template <class E>
E parse_enum(const json& j, const std::string& key, const std::string& where, std::initializer_list<E> values) {
  const auto name = get<std::string>(j, key, where);
  for (E v : values)
    if (name == to_string(v)) return v;
  fail(ErrorKind::Config, "bad value '" + name + "' for '" + key + "' in " + where);
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig base = {}) {
  const std::string where = "experiments[]";
  detail::check_keys(
      j, {"n", "rho_s", "rho_m_over_rho_s", "magnitude", "frequency", "delta_min", "sign", "mask", "trials", "base_seed"},
      where);
  if (j.contains("n")) base.n = detail::get<int>(j, "n", where);
  if (j.contains("rho_s")) base.rho_s = detail::get<double>(j, "rho_s", where);
  if (j.contains("rho_m_over_rho_s")) base.rho_m_over_rho_s = detail::get<double>(j, "rho_m_over_rho_s", where);
  if (j.contains("magnitude"))
    base.magnitude = detail::parse_enum(j, "magnitude", where, {MagnitudeMode::Unit, MagnitudeMode::Fading});
  if (j.contains("frequency"))
    base.frequency = detail::parse_enum(j, "frequency", where, {FrequencyMode::Random, FrequencyMode::Equispaced});
  if (j.contains("delta_min")) base.delta_min = detail::get<double>(j, "delta_min", where);
  if (j.contains("sign")) base.sign = detail::parse_enum(j, "sign", where, {SignMode::Real, SignMode::Complex});
  if (j.contains("mask")) base.mask = detail::parse_enum(j, "mask", where, {MaskMode::Uniform, MaskMode::Bernoulli});
  if (j.contains("trials")) base.trials = detail::get<int>(j, "trials", where);
  if (j.contains("base_seed")) base.base_seed = detail::get<std::uint64_t>(j, "base_seed", where);
  base.validate();
  return base;
}

inline json to_json(const ExperimentConfig& c) {
  json j = {{"n", c.n},
            {"rho_s", c.rho_s},
            {"rho_m_over_rho_s", c.rho_m_over_rho_s},
            {"magnitude", to_string(c.magnitude)},
            {"frequency", to_string(c.frequency)},
            {"delta_min", c.delta_min},
            {"sign", to_string(c.sign)},
            {"mask", to_string(c.mask)},
            {"trials", c.trials},
            {"base_seed", c.base_seed}};
  return j;
}

struct BenchSpec {
  SolverOptions solver{};
  BpOptions bp{};
  std::vector<std::string> algorithms{"sdp", "bp4", "bp16", "bp64"};
  std::vector<ExperimentConfig> experiments;
  std::uint64_t base_seed = 0;
  int threads = 1;
};

/// An empty experiment list is a configuration error.
inline BenchSpec bench_spec_from_json(const json& j) {
  detail::check_keys(j, {"solver", "bp", "algorithms", "experiments", "base_seed", "threads"}, "bench config");
  BenchSpec b;
  if (j.contains("solver")) b.solver = solver_options_from_json(j.at("solver"));
  if (j.contains("bp")) b.bp = bp_options_from_json(j.at("bp"));
  if (j.contains("algorithms")) b.algorithms = detail::get<std::vector<std::string>>(j, "algorithms", "bench config");
  require(!b.algorithms.empty(), ErrorKind::Config, "bench config lists no algorithms");
  for (const auto& a : b.algorithms)
    require(a == "sdp" || bp_grid_factor(a) >= 1, ErrorKind::Config, "unknown algorithm '" + a + "'");
  if (j.contains("base_seed")) b.base_seed = detail::get<std::uint64_t>(j, "base_seed", "bench config");
  if (j.contains("threads")) b.threads = detail::get<int>(j, "threads", "bench config");
  require(j.contains("experiments") && j.at("experiments").is_array() && !j.at("experiments").empty(),
          ErrorKind::Config, "bench config needs a non-empty 'experiments' array");
  for (const auto& e : j.at("experiments")) {
    ExperimentConfig base;
    base.base_seed = b.base_seed;
    b.experiments.push_back(experiment_config_from_json(e, base));
  }
  return b;
}

struct PhaseSpec {
  SolverOptions solver{};
  int n = 0;
  std::vector<int> s_values;
  std::vector<int> m_values;
  double delta_min = 0.0;
  int trials = 0;
  MagnitudeMode magnitude = MagnitudeMode::Unit;
  SignMode sign = SignMode::Complex;
  std::uint64_t base_seed = 0;
  int threads = 1;
};

inline PhaseSpec phase_spec_from_json(const json& j) {
  const std::string where = "phase config";
  detail::check_keys(j, {"solver", "n", "s_values", "m_values", "delta_min", "trials", "magnitude", "sign", "base_seed",
                         "threads"},
                     where);
  PhaseSpec p;
  if (j.contains("solver")) p.solver = solver_options_from_json(j.at("solver"));
  p.n = detail::get<int>(j, "n", where);
  p.s_values = detail::get<std::vector<int>>(j, "s_values", where);
  p.m_values = detail::get<std::vector<int>>(j, "m_values", where);
  p.trials = detail::get<int>(j, "trials", where);
  if (j.contains("delta_min")) p.delta_min = detail::get<double>(j, "delta_min", where);
  if (j.contains("magnitude"))
    p.magnitude = detail::parse_enum(j, "magnitude", where, {MagnitudeMode::Unit, MagnitudeMode::Fading});
  if (j.contains("sign")) p.sign = detail::parse_enum(j, "sign", where, {SignMode::Real, SignMode::Complex});
  if (j.contains("base_seed")) p.base_seed = detail::get<std::uint64_t>(j, "base_seed", where);
  if (j.contains("threads")) p.threads = detail::get<int>(j, "threads", where);
  require(p.n >= 2, ErrorKind::Config, "phase config: n must be >= 2");
  require(!p.s_values.empty() && !p.m_values.empty(), ErrorKind::Config, "phase config: empty grid");
  for (int s : p.s_values) require(s >= 1 && s <= p.n, ErrorKind::Config, "phase config: s out of range");
  for (int m : p.m_values) require(m >= 1 && m <= p.n, ErrorKind::Config, "phase config: m out of range");
  require(p.trials >= 1, ErrorKind::Config, "phase config: trials must be >= 1");
  require(p.delta_min >= 0.0, ErrorKind::Config, "phase config: delta_min must be >= 0");
  return p;
}

/// Common envelope for every output document.
inline json envelope(const std::string& kind) {
  return {{"schema_version", kSchemaVersion}, {"version", kVersion}, {"kind", kind}};
}

}  // namespace offgrid::io

#endif
