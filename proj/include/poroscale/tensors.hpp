#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "poroscale/cellsolve.hpp"
#include "poroscale/core.hpp"
#include "poroscale/fluid_heat.hpp"
#include "poroscale/geometry.hpp"
#include "poroscale/stokes.hpp"
#include "poroscale/viscoelastic.hpp"

namespace poroscale {

/// Unique symmetric strain-load index pairs: 3 in 2D, 6 in 3D.
inline std::vector<std::pair<int, int>> strain_pairs(int dim) {
  if (dim == 2) return {{0, 0}, {1, 1}, {0, 1}};
  return {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
}

struct EffectiveCoefficients {
  int dim = 3;
  double m = 0, rho_hat = 0, cp_hat = 0, kappa0_hat = 0;
  // skeleton (Theorem 2 family)
  Tensor4 A_s0, A_s1;
  Mat3 B_s0, B_s1, C_s0;
  double a_s0 = 0, a_s1 = 0;
  Mat3 B_theta;
  // thermo-viscoelastic statics (Theorem 4)
  Tensor4 A2, A3, A0_f;
  Mat3 B4, B1_theta, B0_theta;
  bool literal_7_38 = true;
  // Darcy matrices
  Mat3 B2_darcy, B3_darcy;
  bool b2_degenerate = false, b3_degenerate = false;
  std::vector<std::string> notes;
};

struct MemoryKernelSet {
  std::vector<double> times;
  std::vector<Tensor4> A1_f;   // intermediate (7.40)
  std::vector<Tensor4> A4;     // (7.39)
  std::vector<Mat3> B5;        // (7.41)
  std::vector<Mat3> C2, C3;    // (7.42)
  std::vector<double> a2, a3;  // (7.43)
  std::vector<double> a1_theta, a2_theta;  // (7.44)
  std::vector<Mat3> B2_theta;  // (7.45)
  std::vector<Mat3> B1_darcy;
  std::vector<double> b_theta_f;
  double c_theta_f = 0;
};

namespace detail {

inline void check_same_grid(int dim, int n, int fdim, int fn, const char* what) {
  if (dim != fdim || n != fn)
    throw ParameterError(std::string("resolution mismatch in ") + what);
}

}  // namespace detail

/// Effective coefficients of the Theorem-2 family from the stationary
/// skeleton cell solutions (5.35)-(5.37) and the solid heat correctors
/// (5.41), evaluated exactly as the phase averages (5.38)-(5.40), (5.43).
inline EffectiveCoefficients assemble_theorem2_coefficients(
    const CellGeometry& geom, const std::vector<ElasticCellResult>& Uij,
    const ElasticCellResult& U0, const ElasticCellResult& U1,
    const std::vector<ThermalCellResult>& theta_s, double lambda0, double eta0,
    double kappa0s, double rho_f, double rho_s, double c_pf, double c_ps) {
  EffectiveCoefficients c;
  c.dim = geom.dim;
  c.m = porosity(geom);
  c.rho_hat = c.m * rho_f + (1 - c.m) * rho_s;
  c.cp_hat = c.m * c_pf + (1 - c.m) * c_ps;
  auto pairs = strain_pairs(geom.dim);
  if (Uij.size() != pairs.size())
    throw ParameterError("assemble_theorem2_coefficients: need one solution per strain pair");
  if (theta_s.size() != std::size_t(geom.dim))
    throw ParameterError("assemble_theorem2_coefficients: need one heat corrector per axis");
  for (const auto& r : Uij)
    detail::check_same_grid(geom.dim, geom.n, r.displacement.dim, r.displacement.n,
                            "elastic cell solutions");
  for (const auto& r : theta_s)
    detail::check_same_grid(geom.dim, geom.n, r.field.dim, r.field.n,
                            "thermal cell solutions");

  c.A_s0 = Tensor4::sym_identity(geom.dim);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [i, j] = pairs[p];
    double mult = i == j ? 1.0 : 2.0;  // ordered (i,j) and (j,i) terms
    Mat3 D = Uij[p].D_solid;           // <(1-chi) D(U^{ij})>_Y
    Tensor4 contrib;
    contrib.add_dyad(D, i, j);
    c.A_s1 += mult * contrib;
    c.C_s0 += (mult * Uij[p].div_solid) * Mat3::J(i, j);
  }
  c.A_s0 += c.A_s1;
  c.B_s0 = U0.D_solid;
  c.a_s0 = 1.0 - c.m + U0.div_solid;
  if (c.m > 0) {
    c.B_s1 = (1.0 / c.m) * U1.D_solid;
    c.a_s1 = U1.div_solid / c.m;
  } else {
    c.notes.push_back("m = 0: B_s1 and a_s1 set to zero (no fluid load)");
  }
  c.B_theta = (kappa0s * (1 - c.m)) * Mat3::identity(geom.dim);
  for (int i = 0; i < geom.dim; ++i)
    for (int j = 0; j < geom.dim; ++j)
      c.B_theta.a[j][i] += kappa0s * theta_s[i].grad_solid[j];
  (void)lambda0;
  (void)eta0;
  return c;
}

/// The t = 0+ rate averages <D(dW/dt)(0)>_Yf of Problems I-III, evaluated
/// from the stationary initial fields through the weak-form identity (the
/// rate equation tested with the Problem-I basis fields). This avoids
/// solving the degenerate fluid-rate system, whose null space on
/// corner-articulated voxel clusters contains pin-jointed mechanisms.
struct InitialRateAverages {
  std::vector<Mat3> I;
  Mat3 II, III;
};

inline InitialRateAverages compute_initial_rates(const CellGeometry& geom,
                                                 const std::vector<ViscoelasticCellResult>& WI,
                                                 const ViscoelasticCellResult& WII,
                                                 const ViscoelasticCellResult& WIII,
                                                 const ViscoParams& vp) {
  auto pairs = strain_pairs(geom.dim);
  InitialRateAverages out;
  out.I.assign(pairs.size(), Mat3{});
  if (porosity(geom) == 0.0) return out;
  fem::PeriodicGrid grid(geom);
  fem::ElementTables tab(geom.dim, 1.0 / geom.n);
  auto fw = fem::phase_weights(geom, true);
  auto sw = fem::phase_weights(geom, false);
  auto G = [&](const std::vector<double>& a, const std::vector<double>& b) {
    return vp.lambda0 * fem::pair_integral_DD(grid, tab, sw, a, b) +
           vp.eta0 * fem::pair_integral_divdiv(grid, tab, sw, a, b) +
           vp.p_star * fem::pair_integral_divdiv(grid, tab, fw, a, b);
  };
  auto set_entry = [&](Mat3& m, int i, int j, double v) {
    m.a[i][j] = v;
    m.a[j][i] = v;
  };
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    auto [i, j] = pairs[q];
    const auto& Wb = WI[q].W0.values;
    double divf = fem::integral_div(grid, tab, fw, Wb);
    double divs = fem::integral_div(grid, tab, sw, Wb);
    for (std::size_t p = 0; p < pairs.size(); ++p)
      set_entry(out.I[p], i, j, G(WI[p].W0.values, Wb));
    set_entry(out.II, i, j,
              G(WII.W0.values, Wb) + vp.p_star * divf + vp.eta0 * divs);
    set_entry(out.III, i, j,
              G(WIII.W0.values, Wb) - vp.beta0f * divf - vp.beta0s * divs);
  }
  return out;
}

/// Static Theorem-4 coefficients from the initial viscoelastic fields and
/// the two-phase heat correctors (7.37). The conduction matrix applies the
/// corrector with the (kappa0f - kappa0s) contrast factor so that laminates
/// reproduce the harmonic/arithmetic bounds exactly; formula (7.46) absorbs
/// that factor into the corrector scaling.
inline void assemble_theorem4_static(EffectiveCoefficients& c,
                                     const CellGeometry& geom,
                                     const std::vector<ViscoelasticCellResult>& WI,
                                     const ViscoelasticCellResult& WII,
                                     const ViscoelasticCellResult& WIII,
                                     const std::vector<ThermalCellResult>& theta2,
                                     const ViscoParams& vp, double kappa0f,
                                     double kappa0s, bool literal_7_38 = true) {
  const double mu0 = vp.mu0, lambda0 = vp.lambda0;
  auto pairs = strain_pairs(geom.dim);
  if (WI.size() != pairs.size())
    throw ParameterError("assemble_theorem4_static: need one Problem-I solution per strain pair");
  if (theta2.size() != std::size_t(geom.dim))
    throw ParameterError("assemble_theorem4_static: need one two-phase corrector per axis");
  c.dim = geom.dim;
  c.m = porosity(geom);
  c.kappa0_hat = c.m * kappa0f + (1 - c.m) * kappa0s;
  c.literal_7_38 = literal_7_38;

  InitialRateAverages rates = compute_initial_rates(geom, WI, WII, WIII, vp);
  c.A0_f = Tensor4{};
  Tensor4 A1f0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [i, j] = pairs[p];
    double mult = i == j ? 1.0 : 2.0;
    Tensor4 t;
    t.add_dyad(WI[p].D_W0_fluid, i, j);
    c.A0_f += (mult * mu0) * t;
    Tensor4 t1;
    t1.add_dyad(mu0 * rates.I[p] + lambda0 * WI[p].D_W_solid[0], i, j);
    A1f0 += mult * t1;
  }
  double corr = literal_7_38 ? mu0 : 1.0;
  c.A2 = (mu0 * c.m) * Tensor4::sym_identity(geom.dim) + corr * c.A0_f;
  c.A3 = (lambda0 * (1 - c.m)) * Tensor4::sym_identity(geom.dim) +
         (-lambda0) * c.A0_f + mu0 * A1f0;
  c.B4 = mu0 * WII.D_W0_fluid;
  c.B1_theta = mu0 * WIII.D_W0_fluid;
  c.B0_theta = c.kappa0_hat * Mat3::identity(geom.dim);
  for (int i = 0; i < geom.dim; ++i)
    for (int j = 0; j < geom.dim; ++j)
      c.B0_theta.a[j][i] += (kappa0f - kappa0s) *
                            (kappa0f * theta2[i].grad_fluid[j] +
                             kappa0s * theta2[i].grad_solid[j]);
  if (!literal_7_38)
    c.notes.push_back("A2 assembled with the single-mu0 convention (literal_7_38 = false)");
}

/// Memory kernels (7.39)-(7.45) from the time traces of Problems I-III.
inline MemoryKernelSet assemble_theorem4_kernels(
    const CellGeometry& geom, const std::vector<ViscoelasticCellResult>& WI,
    const ViscoelasticCellResult& WII, const ViscoelasticCellResult& WIII,
    const ViscoParams& vp) {
  const double mu0 = vp.mu0, lambda0 = vp.lambda0;
  auto pairs = strain_pairs(geom.dim);
  if (WI.size() != pairs.size())
    throw ParameterError("assemble_theorem4_kernels: need one Problem-I trace per strain pair");
  MemoryKernelSet k;
  k.times = WII.times;
  const std::size_t N = k.times.size();
  for (const auto* r : {&WII, &WIII})
    if (r->times.size() != N)
      throw ParameterError("assemble_theorem4_kernels: traces on different time grids");
  for (const auto& r : WI)
    if (r.times.size() != N)
      throw ParameterError("assemble_theorem4_kernels: traces on different time grids");
  if (N >= 2) {
    double dt = k.times[1] - k.times[0];
    for (std::size_t q = 1; q < N; ++q)
      if (std::abs(k.times[q] - k.times[q - 1] - dt) > 1e-12 * std::max(1.0, dt))
        throw ParameterError("assemble_theorem4_kernels: non-uniform time grid");
  }

  InitialRateAverages rates = compute_initial_rates(geom, WI, WII, WIII, vp);
  k.A1_f.assign(N, Tensor4{});
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [i, j] = pairs[p];
    double mult = i == j ? 1.0 : 2.0;
    for (std::size_t q = 0; q < N; ++q) {
      Mat3 rate = q == 0 ? rates.I[p] : WI[p].D_rate_fluid[q];
      Tensor4 t;
      t.add_dyad(mu0 * rate + lambda0 * WI[p].D_W_solid[q], i, j);
      k.A1_f[q] += mult * t;
    }
  }
  // A4 = mu0 d/dt A1_f - lambda0 A1_f; centered differences inside, one-sided
  // at the ends
  k.A4.assign(N, Tensor4{});
  if (N >= 2) {
    double dt = k.times[1] - k.times[0];
    for (std::size_t q = 0; q < N; ++q) {
      Tensor4 ddt;
      if (q == 0)
        ddt = (1.0 / dt) * (k.A1_f[1] + (-1.0) * k.A1_f[0]);
      else if (q == N - 1)
        ddt = (1.0 / dt) * (k.A1_f[N - 1] + (-1.0) * k.A1_f[N - 2]);
      else
        ddt = (0.5 / dt) * (k.A1_f[q + 1] + (-1.0) * k.A1_f[q - 1]);
      k.A4[q] = mu0 * ddt + (-lambda0) * k.A1_f[q];
    }
  }
  k.B5.assign(N, Mat3{});
  k.B2_theta.assign(N, Mat3{});
  k.C2.assign(N, Mat3{});
  k.C3.assign(N, Mat3{});
  k.a2.assign(N, 0.0);
  k.a3.assign(N, 0.0);
  k.a1_theta.assign(N, 0.0);
  k.a2_theta.assign(N, 0.0);
  for (std::size_t q = 0; q < N; ++q) {
    Mat3 rate2 = q == 0 ? rates.II : WII.D_rate_fluid[q];
    Mat3 rate3 = q == 0 ? rates.III : WIII.D_rate_fluid[q];
    k.B5[q] = mu0 * rate2 + lambda0 * WII.D_W_solid[q];
    k.B2_theta[q] = mu0 * rate3 + lambda0 * WIII.D_W_solid[q];
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      auto [i, j] = pairs[p];
      double mult = i == j ? 1.0 : 2.0;
      k.C2[q] += (mult * WI[p].div_W_fluid[q]) * Mat3::J(i, j);
    }
    k.C3[q] = -1.0 * k.C2[q];
    k.a2[q] = WII.div_W_fluid[q];
    k.a3[q] = -k.a2[q];
    k.a1_theta[q] = WIII.div_W_fluid[q];
    k.a2_theta[q] = -k.a1_theta[q];
  }
  return k;
}

/// Fluid temperature outputs b_theta_f(t), c_theta_f feeding the theta^f
/// reconstruction (5.45)-(5.47) and the h-system (5.50).
inline void assemble_fluid_heat_outputs(MemoryKernelSet& k,
                                        const FluidHeatRelaxation& relax) {
  k.b_theta_f = relax.b_theta_f;
  k.c_theta_f = relax.c_theta_f;
  if (!k.times.empty() && k.b_theta_f.size() != k.times.size() &&
      !k.b_theta_f.empty())
    throw ParameterError("fluid heat trace on a different time grid");
  if (k.times.empty()) k.times = relax.times;
}

inline void assemble_fluid_heat_outputs(MemoryKernelSet& k,
                                        const CoupledFluidHeat& coupled) {
  k.b_theta_f = coupled.b_theta_f;
  if (k.times.empty()) k.times = coupled.times;
}

// ---- verification -----------------------------------------------------------

struct VerificationCheck {
  std::string name;
  bool pass = false;
  double margin = 0;  // signed distance to the threshold, check-specific
  std::string detail;
};

struct VerificationReport {
  std::vector<VerificationCheck> checks;
  bool all_pass = true;
  std::vector<std::string> notes;

  void add(std::string name, bool pass, double margin, std::string detail = "") {
    all_pass = all_pass && pass;
    checks.push_back({std::move(name), pass, margin, std::move(detail)});
  }
};

namespace detail {

inline double major_symmetry_defect(const Tensor4& t, int dim) {
  double num = 0, den = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int kk = 0; kk < dim; ++kk)
        for (int l = 0; l < dim; ++l) {
          num = std::max(num, std::abs(t.a[i][j][kk][l] - t.a[kk][l][i][j]));
          den = std::max(den, std::abs(t.a[i][j][kk][l]));
        }
  return den > 0 ? num / den : 0.0;
}

inline double minor_symmetry_defect(const Tensor4& t, int dim) {
  double num = 0, den = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int kk = 0; kk < dim; ++kk)
        for (int l = 0; l < dim; ++l) {
          num = std::max(num, std::abs(t.a[i][j][kk][l] - t.a[j][i][kk][l]));
          num = std::max(num, std::abs(t.a[i][j][kk][l] - t.a[i][j][l][kk]));
          den = std::max(den, std::abs(t.a[i][j][kk][l]));
        }
  return den > 0 ? num / den : 0.0;
}

}  // namespace detail

/// Structural property report: index symmetries, positivity margins,
/// Voigt-Reuss bracketing, kernel identities and the time-smoothness
/// surrogate. Report-only: no exceptions.
inline VerificationReport verify_coefficients(const EffectiveCoefficients& c,
                                              const MemoryKernelSet* kernels = nullptr,
                                              const ConnectivityReport* conn = nullptr,
                                              const MemoryKernelSet* kernels_refined = nullptr,
                                              double kappa0f = 0, double kappa0s = 0,
                                              double mu0 = 0, double lambda0 = 0) {
  VerificationReport rep;
  const int dim = c.dim;

  auto tensor_checks = [&](const Tensor4& t, const std::string& name,
                           bool expect_spd, double zero_tol) {
    double minor = detail::minor_symmetry_defect(t, dim);
    rep.add(name + " minor symmetry", minor <= 1e-8, 1e-8 - minor);
    double major = detail::major_symmetry_defect(t, dim);
    rep.add(name + " major symmetry", major <= 1e-8, 1e-8 - major);
    auto mm = to_mandel(t, dim);
    auto ev = eigenvalues(mm);
    double tr = 0;
    for (int i = 0; i < mm.size(); ++i) tr += mm.m[i][i];
    double thresh = 1e-6 * std::max(tr, 0.0);
    if (expect_spd)
      rep.add(name + " positive definite", ev.front() > thresh,
              ev.front() - thresh,
              "smallest Voigt eigenvalue " + std::to_string(ev.front()));
    else
      rep.add(name + " positive semidefinite", ev.front() >= -zero_tol,
              ev.front() + zero_tol,
              "smallest Voigt eigenvalue " + std::to_string(ev.front()));
  };

  tensor_checks(c.A_s0, "A_s0", c.m < 1.0, 0.0);
  bool pores_connected = conn && conn->fluid_connected;
  bool pores_isolated = conn && conn->isolated_pores;
  if (c.A2.norm() > 0 || c.A3.norm() > 0) {
    tensor_checks(c.A3, "A3", c.m < 1.0, 1e-12);
    tensor_checks(c.A2, "A2", pores_connected, 1e-10 * std::max(1.0, c.A2.norm()));
    if (pores_isolated) {
      double n2 = c.A2.norm();
      rep.add("A2 vanishes for isolated pores", n2 <= 1e-6, 1e-6 - n2,
              "|A2| = " + std::to_string(n2));
    }
  }

  auto spd_matrix = [&](const Mat3& b, const std::string& name, bool strict) {
    double asym = 0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) asym = std::max(asym, std::abs(b.a[i][j] - b.a[j][i]));
    rep.add(name + " symmetric", asym <= 1e-8 * std::max(1.0, b.max_abs()),
            1e-8 * std::max(1.0, b.max_abs()) - asym);
    auto ev = eigenvalues_sym3(b, dim);
    if (strict)
      rep.add(name + " positive definite", ev.front() > 0, ev.front());
    else
      rep.add(name + " positive semidefinite",
              ev.front() >= -1e-10 * std::max(1.0, b.max_abs()), ev.front());
  };
  bool solid_percolates = !conn || conn->solid_connected;
  spd_matrix(c.B_theta, "B_theta", solid_percolates && c.m < 1.0);
  if (c.B0_theta.max_abs() > 0) {
    spd_matrix(c.B0_theta, "B0_theta", true);
    if (kappa0f > 0 && kappa0s > 0) {
      double lo = 1.0 / (c.m / kappa0f + (1 - c.m) / kappa0s);
      double hi = c.kappa0_hat;
      auto ev = eigenvalues_sym3(c.B0_theta, dim);
      double slack = 1e-8 * hi;
      bool ok = ev.front() >= lo - slack && ev.back() <= hi + slack;
      rep.add("B0_theta within Voigt-Reuss bounds", ok,
              std::min(ev.front() - lo, hi - ev.back()),
              "eigenvalues in [" + std::to_string(ev.front()) + ", " +
                  std::to_string(ev.back()) + "], bounds [" + std::to_string(lo) +
                  ", " + std::to_string(hi) + "]");
    }
  }
  if (!c.b2_degenerate && c.B2_darcy.max_abs() > 0)
    spd_matrix(c.B2_darcy, "B2", false);
  if (!c.b3_degenerate && c.B3_darcy.max_abs() > 0) {
    spd_matrix(c.B3_darcy, "B3", false);
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst_lo = 1e300, worst_hi = 1e300;
    for (int trial = 0; trial < 100; ++trial) {
      double xi[3] = {0, 0, 0};
      double n2 = 0;
      for (int i = 0; i < dim; ++i) {
        xi[i] = gauss(rng);
        n2 += xi[i] * xi[i];
      }
      double q = 0;
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) q += xi[i] * c.B3_darcy.a[i][j] * xi[j];
      worst_lo = std::min(worst_lo, q / n2);
      worst_hi = std::min(worst_hi, c.m - q / n2);
    }
    double tol = 1e-10 * std::max(1.0, c.m);
    rep.add("0 <= B3 <= m I (sampled quadratic forms)",
            worst_lo >= -tol && worst_hi >= -tol, std::min(worst_lo, worst_hi));
  }

  bool has_visco_kernels =
      kernels && !kernels->times.empty() &&
      kernels->C2.size() == kernels->times.size() &&
      kernels->C3.size() == kernels->times.size() &&
      kernels->a2.size() == kernels->times.size() &&
      kernels->a3.size() == kernels->times.size() &&
      kernels->a1_theta.size() == kernels->times.size() &&
      kernels->a2_theta.size() == kernels->times.size();
  if (has_visco_kernels) {
    double e_c = 0, e_a = 0, e_t = 0, scale = 1.0;
    for (std::size_t q = 0; q < kernels->times.size(); ++q) {
      e_c = std::max(e_c, (kernels->C2[q] + kernels->C3[q]).max_abs());
      e_a = std::max(e_a, std::abs(kernels->a2[q] + kernels->a3[q]));
      e_t = std::max(e_t, std::abs(kernels->a1_theta[q] + kernels->a2_theta[q]));
      scale = std::max(scale, kernels->C2[q].max_abs());
    }
    rep.add("kernel identity C3 = -C2", e_c <= 1e-12 * scale, 1e-12 * scale - e_c,
            e_c > 1e-12 * scale ? "C3 = -C2 violated" : "");
    rep.add("kernel identity a3 = -a2", e_a <= 1e-12, 1e-12 - e_a);
    rep.add("kernel identity a2_theta = -a1_theta", e_t <= 1e-12, 1e-12 - e_t);

    // (7.39) consistency at t = 0: recompute A3 from the stored A0_f and the
    // kernel sample A1_f(0) and compare against the assembled value
    if (!kernels->A1_f.empty() && mu0 > 0 && lambda0 > 0) {
      Tensor4 a3re = (lambda0 * (1 - c.m)) * Tensor4::sym_identity(dim) +
                     (-lambda0) * c.A0_f + mu0 * kernels->A1_f[0];
      double defect = (a3re + (-1.0) * c.A3).norm();
      double scale = std::max(1.0, c.A3.norm());
      rep.add("A3 consistency with (7.39) at t=0", defect <= 1e-10 * scale,
              1e-10 * scale - defect);
    }

    // smoothness surrogate: bounded second differences of A4 away from t = 0
    if (kernels->A4.size() >= 4) {
      double d2max = 0, kmax = 1e-300;
      for (std::size_t q = 2; q + 1 < kernels->A4.size(); ++q) {
        Tensor4 d2 = kernels->A4[q + 1] + (-2.0) * kernels->A4[q] + kernels->A4[q - 1];
        d2max = std::max(d2max, d2.norm());
        kmax = std::max(kmax, kernels->A4[q].norm());
      }
      rep.add("A4 second differences bounded", d2max <= 4.0 * kmax + 1e-12,
              4.0 * kmax - d2max);
      if (kernels_refined && kernels_refined->A4.size() >= 2 * kernels->A4.size() - 2) {
        // refined grid halves dt: compare second differences at shared times
        double err_c = 0, err_f = 0;
        double dt = kernels->times[1] - kernels->times[0];
        for (std::size_t q = 2; q + 1 < kernels->A4.size(); ++q) {
          Tensor4 d2c = (1.0 / (dt * dt)) *
                        (kernels->A4[q + 1] + (-2.0) * kernels->A4[q] + kernels->A4[q - 1]);
          std::size_t qf = 2 * q;
          double dtf = dt / 2;
          Tensor4 d2f = (1.0 / (dtf * dtf)) *
                        (kernels_refined->A4[qf + 1] + (-2.0) * kernels_refined->A4[qf] +
                         kernels_refined->A4[qf - 1]);
          err_c = std::max(err_c, (d2c + (-1.0) * d2f).norm());
          err_f = std::max(err_f, d2f.norm());
        }
        rep.add("A4 refinement consistency", err_c <= 0.75 * err_f + 1e-9,
                0.75 * err_f - err_c,
                "coarse-vs-fine second-difference deviation " + std::to_string(err_c));
      }
    }
  }
  rep.notes.push_back(c.literal_7_38
                          ? "A2 uses the literal (7.38) double-mu0 convention"
                          : "A2 uses the single-mu0 convention");
  rep.notes.insert(rep.notes.end(), c.notes.begin(), c.notes.end());
  return rep;
}

}  // namespace poroscale
