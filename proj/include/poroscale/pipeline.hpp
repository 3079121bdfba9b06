#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <atomic>
#include <thread>

#include "poroscale/macro.hpp"
#include "poroscale/serialize.hpp"
#include "poroscale/stokes.hpp"
#include "poroscale/viscoelastic.hpp"

namespace poroscale {

/// Resolved pipeline configuration: one self-describing document drives a
/// run; flags only override paths, thread count and the generator seed.
struct PipelineConfig {
  json raw;
  CellGeometry geometry;
  std::uint64_t geometry_hash = 0;
  RegimeLimits limits;
  HypothesisAssertions hyp;
  SolverSettings solver;
  bool literal_7_38 = true;
  std::string out_dir = ".";
  int threads = 1;
  std::uint64_t seed = 1;
  bool want_kernels = false;
  bool want_macro_run = false;
};

namespace detail {

inline json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

inline CellGeometry geometry_from_config(const json& g, std::uint64_t seed) {
  if (g.contains("file")) return load_geometry(g.at("file").get<std::string>());
  if (!g.contains("generator"))
    throw ParameterError("geometry block needs \"file\" or \"generator\"");
  const json& spec = g.at("generator");
  std::string kind = spec.at("kind").get<std::string>();
  int dim = spec.value("dim", 3);
  int n = spec.at("n").get<int>();
  if (n <= 0) throw ParameterError("generator: empty grid (n must be positive)");
  if (kind == "all_fluid") return CellGeometry::all_fluid(dim, n);
  if (kind == "all_solid") return CellGeometry::all_solid(dim, n);
  if (kind == "laminate")
    return CellGeometry::laminate(dim, n, spec.value("axis", 0),
                                  spec.at("fluid_layers").get<int>());
  if (kind == "channel")
    return CellGeometry::channel(dim, n, spec.value("axis", 0),
                                 spec.at("width").get<int>());
  if (kind == "sphere")
    return CellGeometry::sphere_pore(dim, n, spec.at("radius").get<double>());
  if (kind == "random")
    return CellGeometry::random(dim, n, spec.at("fluid_fraction").get<double>(),
                                spec.value("seed", seed));
  if (kind == "random_connected")
    return random_connected(dim, n, spec.at("fluid_fraction").get<double>(),
                            spec.value("seed", seed));
  throw ParameterError("unknown geometry generator kind: " + kind);
}

inline PowerLaw power_law_from_json(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  return {j.at("c").get<double>(), j.at("k").get<double>()};
}

inline RegimeLimits limits_from_config(const json& params) {
  if (params.contains("limits")) {
    RegimeLimits l = limits_from_json(params.at("limits"));
    return l;
  }
  if (params.contains("alphas")) {
    AlphaLaws a;
    const json& al = params.at("alphas");
    auto get = [&](const char* name, PowerLaw& out) {
      if (al.contains(name)) out = power_law_from_json(al.at(name));
    };
    get("alpha_tau", a.alpha_tau);
    get("alpha_mu", a.alpha_mu);
    get("alpha_nu", a.alpha_nu);
    get("alpha_lambda", a.alpha_lambda);
    get("alpha_eta", a.alpha_eta);
    get("alpha_p", a.alpha_p);
    get("alpha_theta_f", a.alpha_theta_f);
    get("alpha_theta_s", a.alpha_theta_s);
    get("alpha_kappa_f", a.alpha_kappa_f);
    get("alpha_kappa_s", a.alpha_kappa_s);
    a.rho_f = params.value("rho_f", 1.0);
    a.rho_s = params.value("rho_s", 1.0);
    a.c_pf = params.value("c_pf", 1.0);
    a.c_ps = params.value("c_ps", 1.0);
    return limits_from_power_laws(a);
  }
  if (params.contains("samples")) {
    std::vector<DimensionlessParams> seq;
    for (const json& s : params.at("samples")) {
      DimensionlessParams p;
      p.epsilon = s.at("epsilon").get<double>();
      p.alpha_tau = s.value("alpha_tau", 1.0);
      p.alpha_mu = s.value("alpha_mu", 1.0);
      p.alpha_nu = s.value("alpha_nu", 0.0);
      p.alpha_lambda = s.value("alpha_lambda", 1.0);
      p.alpha_eta = s.value("alpha_eta", 1.0);
      p.alpha_p = s.value("alpha_p", 1.0);
      p.alpha_theta_f = s.value("alpha_theta_f", 0.0);
      p.alpha_theta_s = s.value("alpha_theta_s", 0.0);
      p.alpha_kappa_f = s.value("alpha_kappa_f", 1.0);
      p.alpha_kappa_s = s.value("alpha_kappa_s", 1.0);
      p.rho_f = params.value("rho_f", 1.0);
      p.rho_s = params.value("rho_s", 1.0);
      p.c_pf = params.value("c_pf", 1.0);
      p.c_ps = params.value("c_ps", 1.0);
      seq.push_back(p);
    }
    return limits_from_samples(seq);
  }
  if (params.contains("physical")) {
    const json& ph = params.at("physical");
    PhysicalConstants pc;
    auto get = [&](const char* name, double& out) {
      if (ph.contains(name)) out = ph.at(name).get<double>();
    };
    get("L", pc.L);
    get("tau", pc.tau);
    get("g", pc.g);
    get("rho0", pc.rho0);
    get("mu", pc.mu);
    get("nu", pc.nu);
    get("lambda", pc.lambda);
    get("eta", pc.eta);
    get("kappa_s", pc.kappa_s);
    get("kappa_f", pc.kappa_f);
    get("vartheta_star", pc.vartheta_star);
    get("v_star", pc.v_star);
    get("c_f_rho", pc.c_f_rho);
    get("c_f_rho_rho", pc.c_f_rho_rho);
    get("c_f_rho_vartheta", pc.c_f_rho_vartheta);
    get("c_f_vartheta_vartheta", pc.c_f_vartheta_vartheta);
    get("c_s_vartheta_vartheta", pc.c_s_vartheta_vartheta);
    get("gamma_s", pc.gamma_s);
    get("rho_s_prime", pc.rho_s_prime);
    get("rho_f_prime", pc.rho_f_prime);
    get("epsilon", pc.epsilon);
    DimensionlessParams p = params_from_physical(pc);
    // physical constants define one parameter point: treat the ratios as
    // eps-independent
    AlphaLaws a;
    a.alpha_tau = {p.alpha_tau, 0};
    a.alpha_mu = {p.alpha_mu, 0};
    a.alpha_nu = {p.alpha_nu, 0};
    a.alpha_lambda = {p.alpha_lambda, 0};
    a.alpha_eta = {p.alpha_eta, 0};
    a.alpha_p = {p.alpha_p, 0};
    a.alpha_theta_f = {p.alpha_theta_f, 0};
    a.alpha_theta_s = {p.alpha_theta_s, 0};
    a.alpha_kappa_f = {p.alpha_kappa_f, 0};
    a.alpha_kappa_s = {p.alpha_kappa_s, 0};
    a.rho_f = p.rho_f;
    a.rho_s = p.rho_s;
    a.c_pf = p.c_pf;
    a.c_ps = p.c_ps;
    return limits_from_power_laws(a);
  }
  throw ParameterError(
      "parameter block needs one of \"limits\", \"alphas\", \"samples\", \"physical\"");
}

/// Runs independent jobs on up to nthreads workers; each job owns its slot,
/// so results are bit-identical for any thread count.
inline void run_jobs(std::vector<std::function<void()>>& jobs, int nthreads) {
  if (nthreads <= 1 || jobs.size() <= 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs.size());
  int nt = std::min<int>(nthreads, int(jobs.size()));
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) break;
        try {
          jobs[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline PipelineConfig load_pipeline_config(const std::string& path,
                                           const std::string& out_dir_override = "",
                                           int threads_override = 0,
                                           std::uint64_t seed_override = 0) {
  PipelineConfig cfg;
  cfg.raw = detail::read_json_file(path);
  if (seed_override) cfg.seed = seed_override;
  else cfg.seed = cfg.raw.value("seed", std::uint64_t(1));
  cfg.geometry = detail::geometry_from_config(cfg.raw.at("geometry"), cfg.seed);
  {
    std::string blob(reinterpret_cast<const char*>(cfg.geometry.chi.data()),
                     cfg.geometry.chi.size());
    cfg.geometry_hash = fnv1a(blob);
  }
  cfg.limits = detail::limits_from_config(cfg.raw.at("parameters"));
  if (cfg.raw.at("parameters").contains("hypotheses")) {
    const json& h = cfg.raw.at("parameters").at("hypotheses");
    cfg.hyp.asserts_2_8 = h.value("asserts_2_8", true);
    cfg.hyp.asserts_2_9 = h.value("asserts_2_9", false);
    cfg.hyp.assumption3 = h.value("assumption3", false);
    cfg.hyp.assumption4 = h.value("assumption4", false);
    cfg.hyp.second_approximation = h.value("second_approximation", false);
  }
  if (cfg.raw.contains("solver")) {
    const json& s = cfg.raw.at("solver");
    cfg.solver.cg_tolerance = s.value("cg_tolerance", 1e-10);
    cfg.solver.max_iterations = s.value("max_iterations", 50000);
    cfg.solver.dt = s.value("dt", 1e-3);
    cfg.solver.t_kernel = s.value("t_kernel", 1.0);
    cfg.solver.validate();
  }
  cfg.literal_7_38 = cfg.raw.value("literal_7_38", true);
  if (cfg.raw.contains("outputs"))
    for (const json& o : cfg.raw.at("outputs")) {
      std::string s = o.get<std::string>();
      if (s == "kernels") cfg.want_kernels = true;
      if (s == "macro-run") cfg.want_macro_run = true;
    }
  cfg.out_dir = out_dir_override.empty() ? cfg.raw.value("out_dir", ".") : out_dir_override;
  cfg.threads = threads_override > 0 ? threads_override : cfg.raw.value("threads", 1);
  return cfg;
}

struct UpscaleResult {
  ModelSelection selection;
  ConnectivityReport conn;
  EffectiveCoefficients coeffs;
  MemoryKernelSet kernels;
  bool has_kernels = false;
  VerificationReport report;
};

/// Runs exactly the cell problems the selected model requires and assembles
/// the effective objects.
inline UpscaleResult run_upscale(const PipelineConfig& cfg) {
  UpscaleResult out;
  out.conn = connectivity(cfg.geometry);
  out.selection = classify(cfg.limits, out.conn, cfg.hyp);
  const RegimeLimits& el = out.selection.effective_limits;
  const CellGeometry& g = cfg.geometry;
  const int dim = g.dim;
  const Model model = out.selection.model;
  const bool thm2_family = model == Model::ThermoPoroElastic_OneVelocity ||
                           model == Model::ThermoPoroElastic_IsolatedPores ||
                           model == Model::ThermoPoroElastic_TwoVelocity;
  const bool filtration = model == Model::Filtration_F1 ||
                          model == Model::Filtration_F2 ||
                          model == Model::Filtration_F3;
  const bool quasistatic = model == Model::QuasiStaticElliptic;
  const bool viscoelastic = model == Model::ThermoViscoElastic;

  out.coeffs.dim = dim;
  out.coeffs.m = porosity(g);
  out.coeffs.rho_hat = out.coeffs.m * el.rho_f + (1 - out.coeffs.m) * el.rho_s;
  out.coeffs.cp_hat = out.coeffs.m * el.c_pf + (1 - out.coeffs.m) * el.c_ps;

  if (thm2_family || quasistatic) {
    // skeleton cell problems (5.35)-(5.37) and heat correctors (5.41);
    // Theorem 3(II) uses lambda0 = 1 and eta0 = eta2
    double lambda0 = quasistatic ? 1.0 : el.lambda0.value();
    double eta0 = quasistatic ? detail::lim_val(el.eta2, "eta2") : el.eta0.value();
    double kappa0s = el.kappa0s.value();
    auto pairs = strain_pairs(dim);
    std::vector<ElasticCellResult> Uij(pairs.size());
    ElasticCellResult U0, U1;
    std::vector<ThermalCellResult> ths(dim);
    std::vector<std::function<void()>> jobs;
    for (std::size_t p = 0; p < pairs.size(); ++p)
      jobs.push_back([&, p]() {
        Uij[p] = solve_elastic_cell_ij(g, lambda0, eta0, pairs[p].first,
                                       pairs[p].second, cfg.solver);
      });
    jobs.push_back([&]() { U0 = solve_elastic_cell_div(g, lambda0, eta0, cfg.solver); });
    jobs.push_back([&]() { U1 = solve_elastic_cell_q(g, lambda0, eta0, cfg.solver); });
    for (int i = 0; i < dim; ++i)
      jobs.push_back([&, i]() { ths[i] = solve_thermal_cell_solid(g, i, cfg.solver); });
    detail::run_jobs(jobs, cfg.threads);
    out.coeffs = assemble_theorem2_coefficients(g, Uij, U0, U1, ths, lambda0, eta0,
                                                kappa0s, el.rho_f, el.rho_s,
                                                el.c_pf, el.c_ps);
  }

  // Darcy matrices / kernels per the selected variant
  if (thm2_family || filtration) {
    DarcyVariant dv = out.selection.darcy_variant;
    if (dv == DarcyVariant::MatrixB2) {
      auto r = solve_permeability_steady(g, el.mu1.value(), cfg.solver);
      out.coeffs.B2_darcy = r.B2;
      out.coeffs.b2_degenerate = r.degenerate;
      for (auto& w : r.warnings) out.coeffs.notes.push_back(w);
    } else if (dv == DarcyVariant::MatrixB3) {
      auto r = solve_permeability_ideal(g, el.tau0.value(), el.rho_f, cfg.solver);
      out.coeffs.B3_darcy = r.B3;
      out.coeffs.b3_degenerate = r.degenerate;
      for (auto& w : r.warnings) out.coeffs.notes.push_back(w);
    } else if (dv == DarcyVariant::KernelB1) {
      auto r = solve_permeability_unsteady(g, el.mu1.value(), el.tau0.value(),
                                           el.rho_f, cfg.solver);
      out.kernels.times = r.times;
      out.kernels.B1_darcy = r.B1;
      out.has_kernels = true;
      for (auto& w : r.warnings) out.coeffs.notes.push_back(w);
    }
    // fluid temperature relaxation data for theta_f reconstruction
    bool isolated_or_twov = model == Model::ThermoPoroElastic_IsolatedPores ||
                            model == Model::ThermoPoroElastic_TwoVelocity || filtration;
    double kappa1 = el.kappa1f.value();
    if (isolated_or_twov && el.mu1.finite() && !el.mu1.is_zero() &&
        el.tau0.value() * el.c_pf > 0 && porosity(g) > 0) {
      if (el.nu0.value() > 0 && el.beta0f.value() > 0) {
        auto r = solve_coupled_fluid_heat(g, el.tau0.value(), el.c_pf, kappa1,
                                          el.mu1.value(), el.nu0.value(),
                                          el.p_star.value(), el.beta0f.value(),
                                          cfg.solver);
        out.kernels.b_theta_f = r.b_theta_f;
        if (out.kernels.times.empty()) out.kernels.times = r.times;
        out.has_kernels = true;
      } else {
        auto r = solve_fluid_heat_relaxation(g, el.tau0.value(), el.c_pf, kappa1,
                                             el.mu1.value(), cfg.solver);
        out.kernels.b_theta_f = r.b_theta_f;
        out.kernels.c_theta_f = r.c_theta_f;
        if (out.kernels.times.empty()) out.kernels.times = r.times;
        out.has_kernels = true;
      }
    }
  }

  if (viscoelastic) {
    ViscoParams vp;
    vp.mu0 = el.mu0.value();
    vp.lambda0 = el.lambda0.value();
    vp.nu0 = el.nu0.value();
    vp.p_star = el.p_star.value();
    vp.eta0 = el.eta0.value();
    vp.beta0f = el.beta0f.value();
    vp.beta0s = el.beta0s.value();
    double k0f = el.kappa0f.value(), k0s = el.kappa0s.value();
    if (!(k0f > 0)) k0f = k0s;  // conduction needs positive coefficients
    auto pairs = strain_pairs(dim);
    SolverSettings s = cfg.solver;
    if (!cfg.want_kernels) s.t_kernel = 2 * s.dt;  // statics only
    std::vector<ViscoelasticCellResult> WI(pairs.size());
    ViscoelasticCellResult WII, WIII;
    std::vector<ThermalCellResult> th2(dim);
    std::vector<std::function<void()>> jobs;
    for (std::size_t p = 0; p < pairs.size(); ++p)
      jobs.push_back([&, p]() {
        WI[p] = solve_viscoelastic_cell(ViscoProblem::I, g, vp, pairs[p].first,
                                        pairs[p].second, s);
      });
    jobs.push_back([&]() {
      WII = solve_viscoelastic_cell(ViscoProblem::II, g, vp, 0, 0, s);
    });
    jobs.push_back([&]() {
      WIII = solve_viscoelastic_cell(ViscoProblem::III, g, vp, 0, 0, s);
    });
    for (int i = 0; i < dim; ++i)
      jobs.push_back([&, i]() {
        th2[i] = solve_thermal_cell_twophase(g, k0f, k0s, i, cfg.solver);
      });
    detail::run_jobs(jobs, cfg.threads);
    assemble_theorem4_static(out.coeffs, g, WI, WII, WIII, th2, vp,
                             k0f, k0s, cfg.literal_7_38);
    if (cfg.want_kernels) {
      out.kernels = assemble_theorem4_kernels(g, WI, WII, WIII, vp);
      out.has_kernels = true;
    }
  }

  double mu0v = el.mu0.finite() ? el.mu0.value() : 0.0;
  double lam0v = el.lambda0.finite() ? el.lambda0.value() : 0.0;
  out.report = verify_coefficients(out.coeffs, out.has_kernels ? &out.kernels : nullptr,
                                   &out.conn, nullptr,
                                   el.kappa0f.finite() ? el.kappa0f.value() : 0.0,
                                   el.kappa0s.finite() ? el.kappa0s.value() : 0.0,
                                   mu0v, lam0v);
  return out;
}

/// Single JSON document per the tensors interface: coefficients, kernels,
/// verification report, selection metadata.
inline json upscale_document(const PipelineConfig& cfg, const UpscaleResult& r) {
  json doc;
  doc["selection"] = to_json(r.selection);
  doc["coefficients"] = to_json(r.coeffs);
  if (r.has_kernels) doc["kernels"] = to_json(r.kernels, r.coeffs.dim);
  doc["verification"] = to_json(r.report);
  doc["geometry_hash"] = cfg.geometry_hash;
  return doc;
}

inline json make_manifest(const PipelineConfig& cfg,
                          const std::vector<std::pair<std::string, std::uint64_t>>& outputs,
                          const std::vector<std::string>& notes = {},
                          const std::vector<double>& energy = {}) {
  json m;
  m["config"] = cfg.raw;
  m["config_hash"] = fnv1a(cfg.raw.dump());
  m["geometry_hash"] = cfg.geometry_hash;
  json files = json::object();
  for (const auto& [name, hash] : outputs) files[name] = hash;
  m["outputs"] = files;
  if (!energy.empty()) m["energy"] = energy;
  m["notes"] = notes;
  return m;
}

inline std::uint64_t write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << text;
  if (!f) throw IoError("write failed: " + path);
  return fnv1a(text);
}

// ---- macro run wiring -------------------------------------------------------

namespace detail {

inline std::function<double(double, double)> forcing_from_json(const json& j) {
  if (j.is_null()) return [](double, double) { return 0.0; };
  std::string kind = j.value("kind", "zero");
  if (kind == "zero") return [](double, double) { return 0.0; };
  if (kind == "sine") {
    double a = j.value("amplitude", 1.0);
    double mode = j.value("mode", 1.0);
    double decay = j.value("decay", 0.0);
    return [a, mode, decay](double x, double t) {
      return a * std::sin(mode * M_PI * x) * std::exp(-decay * t);
    };
  }
  if (kind == "constant") {
    double a = j.value("amplitude", 1.0);
    return [a](double, double) { return a; };
  }
  throw ParameterError("unknown forcing kind: " + kind);
}

inline std::function<double(double)> profile_from_json(const json& j) {
  if (j.is_null()) return [](double) { return 0.0; };
  std::string kind = j.value("kind", "zero");
  if (kind == "zero") return [](double) { return 0.0; };
  if (kind == "sine") {
    double a = j.value("amplitude", 1.0);
    double mode = j.value("mode", 1.0);
    return [a, mode](double x) { return a * std::sin(mode * M_PI * x); };
  }
  throw ParameterError("unknown profile kind: " + kind);
}

/// Linear resampling of kernel samples onto the macro time grid.
inline std::vector<double> resample_series(const std::vector<double>& times,
                                           const std::vector<double>& values,
                                           double dt, double T, const char* what) {
  if (values.empty()) return {};
  if (times.size() != values.size())
    throw InternalError("kernel series and time grid lengths differ");
  int n = int(std::round(T / dt));
  if (times.back() + 1e-12 < T)
    throw SolverError(std::string("kernel horizon shorter than the run horizon for ") +
                      what + " (no extrapolation)");
  std::vector<double> out(std::size_t(n) + 1);
  std::size_t k = 0;
  for (int i = 0; i <= n; ++i) {
    double t = i * dt;
    while (k + 1 < times.size() && times[k + 1] < t) ++k;
    if (k + 1 >= times.size()) {
      out[i] = values.back();
      continue;
    }
    double t0 = times[k], t1 = times[k + 1];
    double w = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
    w = std::min(1.0, std::max(0.0, w));
    out[i] = (1 - w) * values[k] + w * values[k + 1];
  }
  return out;
}

}  // namespace detail

struct MacroRunArtifacts {
  MacroTrajectory trajectory;
  json manifest;
  std::vector<std::pair<std::string, std::string>> csv_files;  // name, content
};

/// Builds the MacroProblemSpec from the config and the upscaled objects,
/// dispatches to the model runner and renders CSV outputs (columns t,
/// x_1..x_n per field).
inline MacroRunArtifacts run_macro(const PipelineConfig& cfg, const UpscaleResult& up) {
  const json mc = cfg.raw.value("macro", json::object());
  MacroProblemSpec spec;
  spec.model = up.selection;
  spec.coeffs = MacroCoeffs1D::from(up.coeffs);
  spec.nx = mc.value("nx", 64);
  spec.dt = mc.value("dt", 1e-3);
  spec.T = mc.value("T", 0.1);
  spec.store_every = mc.value("store_every", 1);
  spec.F = detail::forcing_from_json(mc.value("F", json()));
  spec.Psi = detail::forcing_from_json(mc.value("Psi", json()));
  spec.w0 = detail::profile_from_json(mc.value("w0", json()));
  spec.wf0 = detail::profile_from_json(mc.value("wf0", json()));
  spec.v0 = detail::profile_from_json(mc.value("v0", json()));
  spec.theta0 = detail::profile_from_json(mc.value("theta0", json()));
  std::string sv = mc.value("state_eq_variant", "lemma58");
  spec.state_eq = sv == "thm2" ? StateEqVariant::Thm2 : StateEqVariant::Lemma58;
  std::string du = mc.value("darcy_u_factor", "1");
  spec.darcy_u = du == "m" ? DarcyUFactor::M : DarcyUFactor::One;
  std::string cs = mc.value("continuity_theta_sign", "5.53");
  spec.continuity_sign =
      cs == "2.25" ? ContinuityThetaSign::Minus : ContinuityThetaSign::Plus;

  if (up.has_kernels) {
    MacroKernels1D mk = MacroKernels1D::from(up.kernels);
    auto rs = [&](const std::vector<double>& v, const char* what) {
      return detail::resample_series(up.kernels.times, v, spec.dt, spec.T, what);
    };
    if (!mk.B1.empty()) mk.B1 = rs(mk.B1, "B1");
    if (!mk.b_theta_f.empty()) mk.b_theta_f = rs(mk.b_theta_f, "b_theta_f");
    if (!mk.A4.empty()) {
      mk.A4 = rs(mk.A4, "A4");
      mk.B5 = rs(mk.B5, "B5");
      mk.B2t = rs(mk.B2t, "B2_theta");
      mk.C2a2 = rs(mk.C2a2, "C2/a2");
      mk.a1t = rs(mk.a1t, "a1_theta");
      mk.C3a3 = rs(mk.C3a3, "C3/a3");
      mk.a2t = rs(mk.a2t, "a2_theta");
    }
    mk.dt = spec.dt;
    spec.kernels = mk;
  }

  MacroRunArtifacts art;
  switch (up.selection.model) {
    case Model::ThermoPoroElastic_OneVelocity:
    case Model::ThermoPoroElastic_IsolatedPores:
      art.trajectory = run_thermo_poro_elastic(spec);
      break;
    case Model::ThermoPoroElastic_TwoVelocity:
      art.trajectory = run_two_velocity(spec);
      break;
    case Model::Filtration_F1:
    case Model::Filtration_F2:
    case Model::Filtration_F3:
      art.trajectory = run_filtration(spec);
      break;
    case Model::QuasiStaticElliptic: {
      // drive the matching filtration problem for q, then the elliptic pass
      MacroProblemSpec fspec = spec;
      ModelSelection fsel = up.selection;
      fsel.model = fsel.darcy_variant == DarcyVariant::MatrixB2 ? Model::Filtration_F2
                   : fsel.darcy_variant == DarcyVariant::MatrixB3
                       ? Model::Filtration_F3
                       : Model::Filtration_F1;
      fspec.model = fsel;
      auto ftr = run_filtration(fspec);
      auto qs = run_quasistatic_second_approx(spec, ftr.times, ftr.fields.at("q"));
      art.trajectory = ftr;
      art.trajectory.fields["u_second"] = qs.u;
      art.trajectory.fields["pi_second"] = qs.pi;
      break;
    }
    case Model::ThermoViscoElastic:
      art.trajectory = run_thermo_viscoelastic(spec);
      break;
  }

  for (const auto& [name, series] : art.trajectory.fields) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "t";
    std::size_t ncols = series.empty() ? 0 : series.front().size();
    for (std::size_t i = 0; i < ncols; ++i) csv << ",x" << (i + 1);
    csv << "\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
      csv << art.trajectory.times[s];
      for (double v : series[s]) csv << "," << v;
      csv << "\n";
    }
    art.csv_files.emplace_back(name, csv.str());
  }
  return art;
}

}  // namespace poroscale
