#pragma once

#include <string>
#include <vector>

#include "poroscale/cellsolve.hpp"
#include "poroscale/core.hpp"
#include "poroscale/fem.hpp"
#include "poroscale/geometry.hpp"

namespace poroscale {

namespace detail {

/// Stabilized equal-order Q1/Q1 Stokes saddle operator on the fluid part:
///   [ c_mass M + c_visc A   B^T ] [v]
///   [ B                    -C   ] [p]
/// with B the (negative) divergence pairing and C the Brezzi-Pitkaranta
/// pressure stabilization delta h^2 int grad p . grad q per fluid voxel.
/// Velocity dofs live first (nnodes*dim), pressure dofs after (nnodes).
struct StokesOperator {
  const fem::PeriodicGrid* grid;
  const fem::ElementTables* tab;
  const CellGeometry* geom;
  double c_visc = 1.0, c_mass = 0.0, c_stab = 0.0;

  std::size_t vel_size() const { return grid->nnodes * grid->dim; }
  std::size_t total_size() const { return grid->nnodes * (grid->dim + 1); }

  void apply(const double* x, double* y) const {
    const int nc = grid->corners(), d = grid->dim;
    const std::size_t nv = vel_size();
    std::fill(y, y + total_size(), 0.0);
    const double* xp = x + nv;
    double* yp = y + nv;
    double vl[24], pl[8], yv[24], ypl[8];
    for (std::size_t v = 0; v < grid->vox_nodes.size(); ++v) {
      if (!geom->fluid(v)) continue;
      const auto& nd = grid->vox_nodes[v];
      for (int a = 0; a < nc; ++a) {
        pl[a] = xp[nd[a]];
        for (int c = 0; c < d; ++c) vl[a * d + c] = x[std::size_t(nd[a]) * d + c];
      }
      for (int a = 0; a < nc; ++a) {
        double sp = 0;
        for (int c = 0; c < d; ++c) yv[a * d + c] = 0;
        for (int b = 0; b < nc; ++b) {
          double lap = 0;
          for (int al = 0; al < d; ++al) lap += tab->K[al][al][a][b];
          for (int c = 0; c < d; ++c) {
            // momentum row (a,c)
            double m = (c_visc * lap + c_mass * tab->M[a][b]) * vl[b * d + c];
            m -= tab->NG[c][b][a] * pl[b];  // B^T p : -int p div(phi)
            yv[a * d + c] += m;
            // continuity row a: -int q div v  (- C p)
            sp -= tab->NG[c][a][b] * vl[b * d + c];
          }
          sp -= c_stab * lap * pl[b];
        }
        ypl[a] = sp;
      }
      for (int a = 0; a < nc; ++a) {
        yp[nd[a]] += ypl[a];
        for (int c = 0; c < d; ++c) y[std::size_t(nd[a]) * d + c] += yv[a * d + c];
      }
    }
  }

  std::vector<double> diagonal() const {
    const int nc = grid->corners(), d = grid->dim;
    std::vector<double> diag(total_size(), 0.0);
    for (std::size_t v = 0; v < grid->vox_nodes.size(); ++v) {
      if (!geom->fluid(v)) continue;
      const auto& nd = grid->vox_nodes[v];
      for (int a = 0; a < nc; ++a) {
        double lap = 0;
        for (int al = 0; al < d; ++al) lap += tab->K[al][al][a][a];
        for (int c = 0; c < d; ++c)
          diag[std::size_t(nd[a]) * d + c] += c_visc * lap + c_mass * tab->M[a][a];
        diag[grid->nnodes * d + nd[a]] += c_stab * lap + 1e-300;
      }
    }
    return diag;
  }
};

struct StokesSpace {
  fem::PeriodicGrid grid;
  fem::ElementTables tab;
  std::vector<std::uint8_t> active;       // per combined dof
  std::vector<std::uint8_t> vel_node;     // interior fluid nodes
  std::vector<std::uint8_t> p_node;       // fluid-support nodes
  fem::NullSpace ns;                      // per-component constant pressures
  std::vector<double> fluid_w;

  explicit StokesSpace(const CellGeometry& geom)
      : grid(geom), tab(geom.dim, 1.0 / geom.n), fluid_w(fem::phase_weights(geom, true)) {
    const int d = geom.dim;
    vel_node = fem::node_mask(grid, geom, true, fem::NodeSet::PhaseInterior);
    p_node = fem::node_mask(grid, geom, true, fem::NodeSet::PhaseSupport);
    active.assign(grid.nnodes * (d + 1), 0);
    for (std::size_t i = 0; i < grid.nnodes; ++i) {
      for (int c = 0; c < d; ++c) active[i * d + c] = vel_node[i];
      active[grid.nnodes * d + i] = p_node[i];
    }
    auto vox_comp = fem::voxel_components(geom, true);
    auto node_comp = fem::node_components(grid, vox_comp);
    for (std::int32_t comp = 0; comp < fem::component_count(vox_comp); ++comp) {
      std::vector<std::uint32_t> dofs;
      for (std::size_t i = 0; i < grid.nnodes; ++i)
        if (node_comp[i] == comp && p_node[i])
          dofs.push_back(std::uint32_t(grid.nnodes * d + i));
      ns.add_indicator(dofs);
    }
  }

  /// Unit body force e_i against velocity test functions.
  std::vector<double> body_force(const CellGeometry& geom, int i) const {
    const int d = grid.dim;
    std::vector<double> rhs(grid.nnodes * (d + 1), 0.0);
    for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
      if (!geom.fluid(v)) continue;
      const auto& nd = grid.vox_nodes[v];
      for (int a = 0; a < grid.corners(); ++a)
        rhs[std::size_t(nd[a]) * d + i] += tab.NI[a];
    }
    for (std::size_t k = 0; k < rhs.size(); ++k)
      if (!active[k]) rhs[k] = 0.0;
    return rhs;
  }

  Vec3 mean_velocity(const std::vector<double>& x) const {
    return fem::integral_vector_value(grid, tab, fluid_w, x);
  }
};

inline double stab_coefficient(double h, double mu) { return 0.1 * h * h / mu; }

}  // namespace detail

struct PermeabilityResult {
  Mat3 B2;                      // columns <v^i>_Yf
  std::vector<CellField> velocity;
  std::vector<CellField> pressure;
  fem::KrylovStats stats;
  bool degenerate = false;      // no percolating flow: returned zero matrix
  std::vector<std::string> warnings;
};

/// Steady Stokes cell problem mu1 lap(v) - grad r = -e_i in Y_f, no-slip on
/// the interface; B2 columns are the fluid-volume velocity integrals.
inline PermeabilityResult solve_permeability_steady(const CellGeometry& geom,
                                                    double mu1,
                                                    const SolverSettings& s = {},
                                                    int only_direction = -1) {
  s.validate();
  if (!(mu1 > 0)) throw ParameterError("steady permeability requires mu1 > 0");
  PermeabilityResult out;
  double m = porosity(geom);
  if (m == 0.0) {
    out.degenerate = true;
    out.warnings.push_back("empty fluid phase: B2 = 0");
    return out;
  }
  auto conn = connectivity(geom);
  if (conn.isolated_pores) {
    out.degenerate = true;
    out.warnings.push_back("isolated pores: no percolating flow, B2 = 0");
    return out;
  }
  detail::StokesSpace sp(geom);
  detail::StokesOperator op{&sp.grid, &sp.tab, &geom, mu1, 0.0,
                            detail::stab_coefficient(sp.grid.h, mu1)};
  auto diag = op.diagonal();
  auto apply = [&](const double* x, double* y) { op.apply(x, y); };
  const int d = geom.dim;
  for (int i = 0; i < d; ++i) {
    if (only_direction >= 0 && i != only_direction) continue;
    auto rhs = sp.body_force(geom, i);
    sp.ns.project(rhs.data());
    std::vector<double> x(op.total_size(), 0.0);
    auto st = fem::minres(apply, rhs, x, diag, sp.active, sp.ns, s.cg_tolerance,
                          s.max_iterations);
    detail::require_converged(st, "steady Stokes solve");
    out.stats = st;
    Vec3 mean = sp.mean_velocity(x);
    for (int j = 0; j < d; ++j) out.B2.a[j][i] = mean[j];
    CellField vf{FieldKind::Vector, d, geom.n, d, false,
                 std::vector<double>(x.begin(), x.begin() + long(sp.grid.nnodes) * d),
                 {}, {}};
    CellField pf{FieldKind::Scalar, d, geom.n, 1, false,
                 std::vector<double>(x.begin() + long(sp.grid.nnodes) * d, x.end()),
                 {}, {}};
    out.velocity.push_back(std::move(vf));
    out.pressure.push_back(std::move(pf));
  }
  return out;
}

struct PermeabilityKernelResult {
  std::vector<double> times;   // t_0 = 0, then k*dt
  std::vector<Mat3> B1;        // kernel samples, columns <v^i(t)>_Yf
  bool degenerate = false;
  std::vector<std::string> warnings;
};

/// Trapezoidal integral of the sampled kernel.
inline Mat3 kernel_time_integral(const std::vector<double>& times,
                                 const std::vector<Mat3>& k) {
  Mat3 r;
  for (std::size_t i = 1; i < times.size(); ++i) {
    double w = 0.5 * (times[i] - times[i - 1]);
    r += w * (k[i] + k[i - 1]);
  }
  return r;
}

/// Unsteady Stokes impulse response: tau0 rho_f dv/dt = mu1 lap(v) - grad r,
/// started from the discrete projection of e_i onto the no-slip
/// divergence-free space; B1(t) columns are <v^i(t)>_Yf.
inline PermeabilityKernelResult solve_permeability_unsteady(
    const CellGeometry& geom, double mu1, double tau0, double rho_f,
    const SolverSettings& s = {}, int only_direction = -1) {
  s.validate();
  if (!(mu1 > 0) || !(tau0 > 0) || !(rho_f > 0))
    throw ParameterError("unsteady permeability requires mu1, tau0, rho_f > 0");
  PermeabilityKernelResult out;
  double m = porosity(geom);
  auto conn = connectivity(geom);
  if (m == 0.0 || conn.isolated_pores) {
    out.degenerate = true;
    out.warnings.push_back("no percolating flow: B1(t) = 0");
    int nsteps = int(std::ceil(s.t_kernel / s.dt));
    for (int k = 0; k <= nsteps; ++k) {
      out.times.push_back(k * s.dt);
      out.B1.emplace_back();
    }
    return out;
  }
  detail::StokesSpace sp(geom);
  const double trho = tau0 * rho_f;
  detail::StokesOperator proj_op{&sp.grid, &sp.tab, &geom, 0.0, trho,
                                 detail::stab_coefficient(sp.grid.h, mu1)};
  detail::StokesOperator step_op{&sp.grid, &sp.tab, &geom, mu1, trho / s.dt,
                                 detail::stab_coefficient(sp.grid.h, mu1)};
  auto proj_diag = proj_op.diagonal();
  auto step_diag = step_op.diagonal();
  const int d = geom.dim;
  const int nsteps = int(std::ceil(s.t_kernel / s.dt));
  out.times.resize(nsteps + 1);
  out.B1.assign(nsteps + 1, Mat3{});
  for (int k = 0; k <= nsteps; ++k) out.times[k] = k * s.dt;

  for (int i = 0; i < d; ++i) {
    if (only_direction >= 0 && i != only_direction) continue;
    auto rhs = sp.body_force(geom, i);
    sp.ns.project(rhs.data());
    std::vector<double> x(proj_op.total_size(), 0.0);
    auto applyP = [&](const double* in, double* outv) { proj_op.apply(in, outv); };
    auto st = fem::minres(applyP, rhs, x, proj_diag, sp.active, sp.ns,
                          s.cg_tolerance, s.max_iterations);
    detail::require_converged(st, "Stokes impulse projection");
    Vec3 mean = sp.mean_velocity(x);
    for (int j = 0; j < d; ++j) out.B1[0].a[j][i] = mean[j];

    std::vector<double> rhsk(proj_op.total_size(), 0.0);
    auto applyS = [&](const double* in, double* outv) { step_op.apply(in, outv); };
    for (int k = 1; k <= nsteps; ++k) {
      // (tau rho / dt) M v^{k-1} against velocity tests
      std::fill(rhsk.begin(), rhsk.end(), 0.0);
      const int nc = sp.grid.corners();
      for (std::size_t v = 0; v < sp.grid.vox_nodes.size(); ++v) {
        if (!geom.fluid(v)) continue;
        const auto& nd = sp.grid.vox_nodes[v];
        for (int a = 0; a < nc; ++a)
          for (int c = 0; c < d; ++c) {
            double acc = 0;
            for (int b = 0; b < nc; ++b)
              acc += sp.tab.M[a][b] * x[std::size_t(nd[b]) * d + c];
            rhsk[std::size_t(nd[a]) * d + c] += (trho / s.dt) * acc;
          }
      }
      for (std::size_t q = 0; q < rhsk.size(); ++q)
        if (!sp.active[q]) rhsk[q] = 0.0;
      sp.ns.project(rhsk.data());
      st = fem::minres(applyS, rhsk, x, step_diag, sp.active, sp.ns,
                       s.cg_tolerance, s.max_iterations);
      detail::require_converged(st, "unsteady Stokes step");
      mean = sp.mean_velocity(x);
      for (int j = 0; j < d; ++j) out.B1[k].a[j][i] = mean[j];
    }
  }
  // horizon check: kernel should have decayed below 1e-4 of its initial norm
  double n0 = out.B1.front().norm(), nT = out.B1.back().norm();
  if (n0 > 0 && nT > 1e-4 * n0)
    out.warnings.push_back("kernel horizon too short: |B1(T)|/|B1(0)| = " +
                           std::to_string(nT / n0));
  return out;
}

struct IdealFluidResult {
  Mat3 B3;  // relative-mobility matrix, 0 <= B3 <= m I
  std::vector<CellField> potential;
  fem::KrylovStats stats;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

/// Ideal-fluid (potential flow) cell problem: lap(phi_i) = 0 in Y_f with
/// d(phi_i)/dn = -e_i . n on the interface, imposed through the volumetric
/// form div(chi (grad phi_i + e_i)) = 0. B3 e_i = m e_i + <grad phi_i>_Yf,
/// so B3 = m I on the free torus and B3 = 0 for a sealed spherical pore.
inline IdealFluidResult solve_permeability_ideal(const CellGeometry& geom,
                                                 double tau0, double rho_f,
                                                 const SolverSettings& s = {}) {
  s.validate();
  if (!(tau0 > 0) || !(rho_f > 0))
    throw ParameterError("ideal-fluid problem requires tau0, rho_f > 0");
  IdealFluidResult out;
  double m = porosity(geom);
  if (m == 0.0) {
    out.degenerate = true;
    out.warnings.push_back("empty fluid phase: B3 = 0");
    return out;
  }
  fem::PeriodicGrid grid(geom);
  fem::ElementTables tab(geom.dim, 1.0 / geom.n);
  fem::PhaseOperator op;
  op.grid = &grid;
  op.geom = &geom;
  op.ncomp = 1;
  op.fluid_mat = fem::scalar_elem(tab, 1.0, 0.0);
  auto active = fem::node_mask(grid, geom, true, fem::NodeSet::PhaseSupport);
  auto vox_comp = fem::voxel_components(geom, true);
  auto node_comp = fem::node_components(grid, vox_comp);
  fem::NullSpace ns = fem::translation_null_space(node_comp, active,
                                                  fem::component_count(vox_comp), 1);
  auto diag = op.diagonal();
  auto apply = [&](const double* x, double* y) { op.apply(x, y); };
  auto fw = fem::phase_weights(geom, true);
  const int d = geom.dim;
  for (int i = 0; i < d; ++i) {
    std::vector<double> rhs(grid.nnodes, 0.0);
    for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
      if (!geom.fluid(v)) continue;
      const auto& nd = grid.vox_nodes[v];
      for (int a = 0; a < grid.corners(); ++a) rhs[nd[a]] -= tab.G[i][a];
    }
    for (std::size_t k = 0; k < grid.nnodes; ++k)
      if (!active[k]) rhs[k] = 0.0;
    ns.project(rhs.data());
    std::vector<double> phi(grid.nnodes, 0.0);
    out.stats = fem::pcg(apply, rhs, phi, diag, active, ns, s.cg_tolerance,
                         s.max_iterations);
    detail::require_converged(out.stats, "ideal-fluid potential solve");
    Vec3 gphi = fem::integral_gradient(grid, tab, fw, phi);
    for (int j = 0; j < d; ++j) out.B3.a[j][i] = (i == j ? m : 0.0) + gphi[j];
    out.potential.push_back(CellField{FieldKind::Scalar, d, geom.n, 1, false,
                                      std::move(phi), {}, {}});
  }
  return out;
}

}  // namespace poroscale
