// offgrid: command-line front end.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#ifdef OFFGRID_CLI11_INSTALLED
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "offgrid/offgrid.hpp"

namespace fs = std::filesystem;
using namespace offgrid;
using io::json;

namespace {

struct Common {
  std::string config;
  std::string input;
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  int grid_factor = 0;
  double epsilon = -1.0;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

io::Config load_config(const Common& c) {
  if (c.config.empty()) return {};
  return io::config_from_json(io::read_json_file(c.config));
}

fs::path out_dir(const Common& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(fs::is_directory(dir), ErrorKind::Io, "cannot create output directory " + c.out);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  io::write_atomic(path.string(), j.dump(2) + "\n");
  std::cout << "wrote " << path.string() << "\n";
}

io::Problem load_problem(const Common& c) {
  if (c.input.empty()) throw UsageError("--input is required");
  return io::problem_from_json(io::read_json_file(c.input));
}

json ground_truth_metadata(const io::Problem& p, const ComplexSignal& xhat, const std::vector<double>& freqs) {
  json meta = json::object();
  if (!p.model) return meta;
  const ComplexSignal x = synthesize(*p.model, p.index_set);
  const double err = relative_error(xhat.samples, x.samples);
  const FrequencyMatch fm = match_frequencies(freqs, p.model->frequencies());
  meta["relative_error"] = err;
  meta["frequency_error_max"] = std::isfinite(fm.max_error) ? json(fm.max_error) : json(nullptr);
  meta["success"] = err <= kSuccessThreshold;
  return meta;
}

json localization_json(const std::vector<double>& freqs, const SampleSet& obs) {
  json j = io::envelope("localization");
  j["frequencies"] = freqs;
  if (!freqs.empty()) {
    try {
      const CoefficientFit fit = fit_coefficients(freqs, obs);
      j["entries"] = io::to_json(SpectralModel(freqs, fit.coefficients));
      j["fit_residual"] = fit.residual;
    } catch (const Error& e) {
      j["fit_error"] = e.what();
    }
  }
  return j;
}

void emit_solution(const Common& c, const io::Problem& p, const SdpSolution& sol, const SolverOptions& opts) {
  const auto freqs = sdp_frequencies(sol, opts);
  json j = io::envelope("sdp_solution");
  j["solution"] = io::to_json(sol);
  j["options"] = io::to_json(opts);
  j["metadata"] = ground_truth_metadata(p, sol.x, freqs);
  const fs::path dir = out_dir(c);
  write_json(dir / "solution.json", j);
  write_json(dir / "localization.json", localization_json(freqs, p.samples));
  std::cout << "status " << to_string(sol.status) << ", objective " << sol.objective << ", " << freqs.size()
            << " frequencies";
  if (j["metadata"].contains("relative_error"))
    std::cout << ", relative error " << j["metadata"]["relative_error"].get<double>();
  std::cout << "\n";
}

int cmd_recover(const Common& c) {
  const io::Config cfg = load_config(c);
  const io::Problem p = load_problem(c);
  emit_solution(c, p, complete_signal(p.samples, cfg.solver), cfg.solver);
  return 0;
}

int cmd_denoise(const Common& c) {
  if (c.epsilon < 0.0) throw UsageError("denoise needs --epsilon >= 0");
  const io::Config cfg = load_config(c);
  const io::Problem p = load_problem(c);
  emit_solution(c, p, denoise_complete(p.samples, c.epsilon, cfg.solver), cfg.solver);
  return 0;
}

int cmd_localize(const Common& c) {
  if (c.input.empty()) throw UsageError("--input is required");
  json in = io::read_json_file(c.input);
  // Accept a solution document written by recover/denoise or a bare
  // {"index_set", "q"} object.
  if (in.contains("solution")) in = in.at("solution");
  require(in.contains("index_set") && in.contains("q"), ErrorKind::Config, "input needs index_set and q");
  const IndexSet J = io::index_set_from_json(in.at("index_set"));
  const CVector q = io::cvector_from_json(in.at("q"), "q");
  require(q.size() == J.size(), ErrorKind::Config, "q length does not match the index set");
  DualPolynomial Q(J, q);
  const double dn = dual_norm_on_grid(Q, std::max(1 << 14, J.size()));
  if (dn > 1.0) Q = Q.scaled(1.0 / dn);
  const auto freqs = localize_frequencies(Q);
  json j = io::envelope("localization");
  j["frequencies"] = freqs;
  j["dual_norm"] = dn;
  write_json(out_dir(c) / "localization.json", j);
  return 0;
}

int cmd_bp(const Common& c) {
  io::Config cfg = load_config(c);
  if (c.grid_factor > 0) cfg.bp.grid_factor = c.grid_factor;
  cfg.bp.validate();
  const io::Problem p = load_problem(c);
  const BpSolution sol = bp_solve(p.samples, cfg.bp);
  const auto freqs = bp_localize(sol, 1e-2);
  json j = io::envelope("bp_solution");
  j["solution"] = io::to_json(sol);
  j["frequencies"] = freqs;
  j["metadata"] = ground_truth_metadata(p, bp_signal(sol), freqs);
  write_json(out_dir(c) / "bp.json", j);
  std::cout << "grid " << sol.grid_size << ", objective " << sol.objective << ", " << sol.support.size()
            << " active bins, " << freqs.size() << " clusters\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct CertifyInput {
  int M = 0;
  std::vector<double> freqs;
  std::vector<cplx> signs;
};

CertifyInput load_certify_input(const std::string& path, int M_flag) {
  const json j = io::read_json_file(path);
  io::detail::check_keys(j, {"M", "entries", "frequencies", "signs"}, "certify input");
  CertifyInput in;
  in.M = M_flag > 0 ? M_flag : (j.contains("M") ? io::detail::get<int>(j, "M", "certify input") : 0);
  require(in.M >= 2, ErrorKind::Config, "certify needs M >= 2 (input key 'M' or --M)");
  if (j.contains("entries")) {
    const SpectralModel model = io::model_from_json(j.at("entries"));
    for (const auto& e : model.entries()) {
      in.freqs.push_back(e.frequency);
      in.signs.push_back(e.coefficient / std::abs(e.coefficient));
    }
  } else {
    in.freqs = io::detail::get<std::vector<double>>(j, "frequencies", "certify input");
    if (j.contains("signs")) {
      const CVector u = io::cvector_from_json(j.at("signs"), "signs");
      for (Eigen::Index k = 0; k < u.size(); ++k) in.signs.push_back(u[k]);
    } else {
      in.signs.assign(in.freqs.size(), cplx(1.0));
    }
  }
  require(!in.freqs.empty(), ErrorKind::Config, "certify input has no frequencies");
  require(in.freqs.size() == in.signs.size(), ErrorKind::Config, "one sign per frequency required");
  return in;
}

void print_certificate_table(const CertificateReport& r, const SystemBounds& b, bool deterministic) {
  auto row = [](const std::string& name, const std::string& bound, double value, bool ok) {
    std::cout << "  " << std::left << std::setw(28) << name << std::setw(14) << bound << std::setw(18)
              << std::setprecision(10) << value << (ok ? "ok" : "VIOLATED") << "\n";
  };
  std::cout << "  " << std::left << std::setw(28) << "quantity" << std::setw(14) << "bound" << std::setw(18)
            << "measured" << "\n";
  using R = CertificateReport;
  row("||I - D||", "<= 0.3623", b.identity_gap, !deterministic || b.identity_gap <= 0.3623);
  row("||D^-1||", "<= 1.568", b.inverse_norm, !deterministic || b.inverse_norm <= 1.568);
  row("far sup |Q|", "< 0.99992", r.far_max_modulus, r.far_max_modulus < R::kFarBound);
  row("near inf Re Q", ">= 0.9182", r.near_min_real, r.near_min_real >= R::kNearRealBound);
  row("near sup |Im Q|", "<= 3.611e-2", r.near_max_abs_imag, r.near_max_abs_imag <= R::kNearImagBound);
  row("near sup Re Q''/|K''(0)|", "<= -0.314", r.near_max_real_curvature,
      r.near_max_real_curvature <= R::kNearCurvatureBound);
  row("near sup |Im Q''|/|K''(0)|", "<= 0.5755", r.near_max_abs_imag_curvature,
      r.near_max_abs_imag_curvature <= R::kNearImagCurvatureBound);
  row("near sup |Q'|/sqrt|K''(0)|", "<= 0.4346", r.near_max_abs_slope, r.near_max_abs_slope <= R::kNearSlopeBound);
  row("interpolation error", "<= 1e-8", r.interpolation_max_error, r.interpolation_max_error <= 1e-8);
  row("derivative error", "<= 1e-8", r.derivative_max_error, r.derivative_max_error <= 1e-8);
  row("off-support sup |Q|", "< 1", r.off_support_max_modulus, r.off_support_max_modulus < 1.0);
  std::cout << "  certificate " << (r.pass ? "PASSES" : "FAILS") << "\n";
}

int cmd_certify(const Common& c, int M_flag, double p, int draws) {
  if (c.input.empty()) throw UsageError("--input is required");
  const CertifyInput in = load_certify_input(c.input, M_flag);
  json j = io::envelope("certificate");
  j["M"] = in.M;
  j["frequencies"] = in.freqs;
  j["separation"] = min_separation(in.freqs);
  if (p >= 1.0) {
    const Certificate cert = build_certificate(in.freqs, in.signs, in.M);
    const auto rep = verify_certificate(cert.Q, in.freqs, in.signs, cert.Q.index_set().indices());
    j["bounds"] = io::to_json(cert.bounds);
    j["report"] = io::to_json(rep);
    j["pass"] = rep.pass;
    std::cout << "deterministic certificate, M = " << in.M << ", s = " << in.freqs.size() << ", min separation * M = "
              << min_separation(in.freqs) * in.M << "\n";
    print_certificate_table(rep, cert.bounds, true);
  } else {
    std::mt19937_64 rng(c.seed);
    json trials = json::array();
    int passed = 0;
    for (int d = 0; d < draws; ++d) {
      const BernoulliMask mask = bernoulli_mask(in.M, p, rng);
      json t = {{"draw", d}, {"m", mask.indices(in.M).size()}};
      try {
        const Certificate cert = build_certificate(in.freqs, in.signs, in.M, mask);
        const auto rep = verify_certificate(cert.Q, in.freqs, in.signs, mask.indices(in.M));
        t["bounds"] = io::to_json(cert.bounds);
        t["report"] = io::to_json(rep);
        t["pass"] = rep.pass;
        passed += rep.pass ? 1 : 0;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Singular) throw;
        t["pass"] = false;
        t["diagnostic"] = e.what();
      }
      trials.push_back(std::move(t));
    }
    j["p"] = p;
    j["seed"] = c.seed;
    j["draws"] = trials;
    j["pass_fraction"] = static_cast<double>(passed) / draws;
    j["pass"] = passed == draws;
    std::cout << "Bernoulli certificates, M = " << in.M << ", p = " << p << ": " << passed << "/" << draws
              << " pass\n";
  }
  write_json(out_dir(c) / "certificate.json", j);
  return 0;
}

// ---------------------------------------------------------------------------

std::string fingerprint(const json& j) {
  std::ostringstream os;
  os << std::hex << detail::fnv1a(j.dump());
  return os.str();
}

int cmd_bench(const Common& c, bool force) {
  if (c.config.empty()) throw UsageError("bench needs --config");
  const json raw = io::read_json_file(c.config);
  io::BenchSpec spec = io::bench_spec_from_json(raw);
  if (c.seed_set)
    for (auto& e : spec.experiments) e.base_seed = c.seed;
  if (c.threads > 0) spec.threads = c.threads;
  if (c.grid_factor > 0) spec.bp.grid_factor = c.grid_factor;

  json resolved = {{"algorithms", spec.algorithms},
                   {"solver", io::to_json(spec.solver)},
                   {"experiments", json::array()}};
  for (const auto& e : spec.experiments) resolved["experiments"].push_back(io::to_json(e));
  const std::string fp = fingerprint(resolved);

  const fs::path dir = out_dir(c);
  const fs::path manifest_path = dir / "manifest.json", csv_path = dir / "results.csv";
  if (!force && fs::exists(manifest_path) && fs::exists(csv_path)) {
    try {
      const json old = io::read_json_file(manifest_path.string());
      if (old.value("fingerprint", "") == fp && old.value("complete", false)) {
        std::cout << "results for this configuration are complete in " << dir.string() << " (use --force to rerun)\n";
        return 0;
      }
    } catch (const Error&) {
    }
  }

  json manifest = io::envelope("bench_manifest");
  manifest["config"] = resolved;
  manifest["fingerprint"] = fp;
  manifest["complete"] = false;
  write_json(manifest_path, manifest);

  SuiteOptions so;
  so.solver = spec.solver;
  so.bp = spec.bp;
  so.threads = spec.threads;
  const fs::path partial = dir / "results.csv.partial";
  so.csv_path = partial.string();
  const auto results = run_suite(spec.experiments, spec.algorithms, so);
  std::error_code ec;
  fs::rename(partial, csv_path, ec);
  require(!ec, ErrorKind::Io, "cannot move results into place: " + ec.message());
  std::cout << "wrote " << csv_path.string() << "\n";

  json summary = json::object();
  for (const auto& a : spec.algorithms) {
    std::vector<double> errs;
    int ok = 0;
    for (const auto& r : results)
      if (r.algorithm == a) {
        errs.push_back(r.relative_error);
        ok += r.success ? 1 : 0;
      }
    const auto st = median_mad(errs);
    summary[a] = {{"median_rel_error", st.median}, {"mad_rel_error", st.mad}, {"successes", ok},
                  {"trials", errs.size()}};
    std::cout << "  " << std::left << std::setw(6) << a << " median " << std::setprecision(3) << std::scientific
              << st.median << "  MAD " << st.mad << std::defaultfloat << "  success " << ok << "/" << errs.size()
              << "\n";
  }
  for (auto metric : {ProfileMetric::Accuracy, ProfileMetric::Runtime}) {
    const auto curves = performance_profile(results, metric);
    std::ostringstream os;
    os.precision(17);
    os << "algorithm,beta,fraction\n";
    for (const auto& cv : curves)
      for (std::size_t k = 0; k < cv.beta.size(); ++k) os << cv.algorithm << ',' << cv.beta[k] << ',' << cv.value[k] << '\n';
    const fs::path pp = dir / (metric == ProfileMetric::Accuracy ? "profile_accuracy.csv" : "profile_runtime.csv");
    io::write_atomic(pp.string(), os.str());
    std::cout << "wrote " << pp.string() << "\n";
  }
  manifest["summary"] = summary;
  manifest["rows"] = results.size();
  manifest["complete"] = true;
  write_json(manifest_path, manifest);
  return 0;
}

int cmd_phase(const Common& c) {
  if (c.config.empty()) throw UsageError("phase needs --config");
  io::PhaseSpec spec = io::phase_spec_from_json(io::read_json_file(c.config));
  if (c.seed_set) spec.base_seed = c.seed;
  if (c.threads > 0) spec.threads = c.threads;
  PhaseOptions o;
  o.solver = spec.solver;
  o.magnitude = spec.magnitude;
  o.sign = spec.sign;
  o.base_seed = spec.base_seed;
  o.threads = spec.threads;
  o.on_cell = [&](std::size_t i, std::size_t jm, double rate) {
    std::cout << "  s=" << spec.s_values[i] << " m=" << spec.m_values[jm] << " success " << rate << "\n"
              << std::flush;
  };
  const auto pt = phase_transition(spec.n, spec.s_values, spec.m_values, spec.delta_min, spec.trials, o);
  const fs::path dir = out_dir(c);
  io::write_atomic((dir / "phase.csv").string(), pt.csv());
  std::cout << "wrote " << (dir / "phase.csv").string() << "\n";
  json manifest = io::envelope("phase_manifest");
  manifest["config"] = {{"n", spec.n},
                        {"s_values", spec.s_values},
                        {"m_values", spec.m_values},
                        {"delta_min", spec.delta_min},
                        {"trials", spec.trials},
                        {"magnitude", to_string(spec.magnitude)},
                        {"sign", to_string(spec.sign)},
                        {"base_seed", spec.base_seed},
                        {"solver", io::to_json(spec.solver)}};
  manifest["success"] = pt.success;
  manifest["complete"] = true;
  write_json(dir / "manifest.json", manifest);
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool input) {
  sub->add_option("--config", c.config, "JSON options file");
  if (input) sub->add_option("-i,--input", c.input, "input JSON file");
  sub->add_option("-o,--out", c.out, "output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-the-grid line spectral estimation by atomic norm minimization"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Common c;
  int M_flag = 0, draws = 1;
  double p = 1.0;
  bool force = false;

  auto* recover = app.add_subcommand("recover", "complete a partially observed signal");
  add_common(recover, c, true);
  auto* denoise = app.add_subcommand("denoise", "complete and denoise within an l2 ball");
  add_common(denoise, c, true);
  denoise->add_option("--epsilon", c.epsilon, "noise radius")->required();
  auto* localize = app.add_subcommand("localize", "frequencies from a dual solution");
  add_common(localize, c, true);
  auto* certify = app.add_subcommand("certify", "build and verify a dual certificate");
  add_common(certify, c, true);
  certify->add_option("--M", M_flag, "kernel order (overrides the input)");
  certify->add_option("--bernoulli-p", p, "observation probability for masked certificates")->check(
      CLI::Range(0.0, 1.0));
  certify->add_option("--draws", draws, "number of mask draws")->check(CLI::PositiveNumber);
  auto* bp = app.add_subcommand("bp", "discretized basis pursuit baseline");
  add_common(bp, c, true);
  auto* bench = app.add_subcommand("bench", "run a benchmark suite");
  add_common(bench, c, false);
  bench->add_flag("--force", force, "rerun even if the manifest says complete");
  auto* phase = app.add_subcommand("phase", "phase-transition sweep");
  add_common(phase, c, false);

  for (auto* sub : {recover, denoise, localize, certify, bp, bench, phase}) {
    auto* seed = sub->add_option("--seed", c.seed, "random seed");
    sub->callback([&c, seed] { c.seed_set = seed->count() > 0; });
    sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--grid-factor", c.grid_factor, "basis pursuit grid factor")->check(CLI::PositiveNumber);
    if (sub != denoise) sub->add_option("--epsilon", c.epsilon, "noise radius");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (recover->parsed()) return cmd_recover(c);
    if (denoise->parsed()) return cmd_denoise(c);
    if (localize->parsed()) return cmd_localize(c);
    if (certify->parsed()) return cmd_certify(c, M_flag, p, draws);
    if (bp->parsed()) return cmd_bp(c);
    if (bench->parsed()) return cmd_bench(c, force);
    if (phase->parsed()) return cmd_phase(c);
  } catch (const UsageError& e) {
    std::cerr << "offgrid: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "offgrid: " << e.what() << "\n";
    return e.kind() == ErrorKind::Config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "offgrid: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
