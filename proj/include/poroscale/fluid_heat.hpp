#pragma once

#include <string>
#include <vector>

#include "poroscale/cellsolve.hpp"
#include "poroscale/core.hpp"
#include "poroscale/fem.hpp"
#include "poroscale/geometry.hpp"

namespace poroscale {

struct FluidHeatRelaxation {
  std::vector<double> times;
  std::vector<double> b_theta_f;  // <Theta1^f(t)>_Yf, b(0) = m by definition
  double c_theta_f = 0;           // <Theta0^f>_Yf
  CellField theta1_final;
  CellField theta0;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

/// Decoupled fluid heat relaxation (5.49): heat equation in Y_f with unit
/// initial data and zero wall temperature, plus the stationary problem
/// kappa1 mu1 lap(Theta0) = 1 with the same wall condition.
inline FluidHeatRelaxation solve_fluid_heat_relaxation(const CellGeometry& geom,
                                                       double tau0, double c_pf,
                                                       double kappa1, double mu1,
                                                       const SolverSettings& s = {}) {
  s.validate();
  if (!(tau0 * c_pf > 0))
    throw ParameterError("evolutionary fluid heat requires tau0 * c_pf > 0");
  if (!(kappa1 * mu1 > 0))
    throw ParameterError("fluid heat requires kappa1 * mu1 > 0");
  FluidHeatRelaxation out;
  const double m = porosity(geom);
  const int nsteps = int(std::ceil(s.t_kernel / s.dt));
  if (m == 0.0) {
    out.degenerate = true;
    out.warnings.push_back("empty fluid phase");
    for (int k = 0; k <= nsteps; ++k) {
      out.times.push_back(k * s.dt);
      out.b_theta_f.push_back(0.0);
    }
    return out;
  }
  fem::PeriodicGrid grid(geom);
  fem::ElementTables tab(geom.dim, 1.0 / geom.n);
  auto interior = fem::node_mask(grid, geom, true, fem::NodeSet::PhaseInterior);
  bool has_wall = false;
  {
    auto support = fem::node_mask(grid, geom, true, fem::NodeSet::PhaseSupport);
    for (std::size_t i = 0; i < grid.nnodes; ++i)
      if (support[i] && !interior[i]) has_wall = true;
  }
  if (!has_wall) {
    // no interface: nothing relaxes and the stationary problem is
    // incompatible (source with no boundary to balance it)
    out.degenerate = true;
    out.warnings.push_back("fluid phase has no interface: Theta1 stays 1");
    for (int k = 0; k <= nsteps; ++k) {
      out.times.push_back(k * s.dt);
      out.b_theta_f.push_back(m);
    }
    throw SolverError("fluid heat: chi = 1 cell has no interface, "
                      "stationary problem (5.49) is incompatible");
  }

  const double kd = kappa1 * mu1;
  fem::PhaseOperator step_op;
  step_op.grid = &grid;
  step_op.geom = &geom;
  step_op.ncomp = 1;
  step_op.fluid_mat = fem::scalar_elem(tab, kd, tau0 * c_pf / s.dt);
  fem::PhaseOperator mass_op;
  mass_op.grid = &grid;
  mass_op.geom = &geom;
  mass_op.ncomp = 1;
  mass_op.fluid_mat = fem::scalar_elem(tab, 0.0, tau0 * c_pf / s.dt);
  fem::NullSpace none;
  auto step_diag = step_op.diagonal();
  auto fw = fem::phase_weights(geom, true);

  std::vector<double> theta(grid.nnodes, 0.0), rhs(grid.nnodes, 0.0);
  for (std::size_t i = 0; i < grid.nnodes; ++i)
    if (interior[i]) theta[i] = 1.0;
  out.times.push_back(0.0);
  out.b_theta_f.push_back(m);  // exact: the initial data is 1 on all of Y_f
  auto apply = [&](const double* x, double* y) { step_op.apply(x, y); };
  for (int k = 1; k <= nsteps; ++k) {
    mass_op.apply(theta.data(), rhs.data());
    for (std::size_t i = 0; i < grid.nnodes; ++i)
      if (!interior[i]) rhs[i] = 0.0;
    auto st = fem::pcg(apply, rhs, theta, step_diag, interior, none,
                       s.cg_tolerance, s.max_iterations);
    detail::require_converged(st, "fluid heat step");
    out.times.push_back(k * s.dt);
    out.b_theta_f.push_back(fem::integral_value(grid, tab, fw, theta));
  }
  out.theta1_final = CellField{FieldKind::Scalar, geom.dim, geom.n, 1, false,
                               theta, {}, {}};

  // stationary problem: kd * lap(Theta0) = 1, Theta0 = 0 on the wall
  std::vector<double> theta0(grid.nnodes, 0.0);
  std::fill(rhs.begin(), rhs.end(), 0.0);
  for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
    if (!geom.fluid(v)) continue;
    const auto& nd = grid.vox_nodes[v];
    for (int a = 0; a < grid.corners(); ++a) rhs[nd[a]] -= tab.NI[a];
  }
  for (std::size_t i = 0; i < grid.nnodes; ++i)
    if (!interior[i]) rhs[i] = 0.0;
  fem::PhaseOperator pois;
  pois.grid = &grid;
  pois.geom = &geom;
  pois.ncomp = 1;
  pois.fluid_mat = fem::scalar_elem(tab, kd, 0.0);
  auto pd = pois.diagonal();
  auto applyP = [&](const double* x, double* y) { pois.apply(x, y); };
  auto st = fem::pcg(applyP, rhs, theta0, pd, interior, none, s.cg_tolerance,
                     s.max_iterations);
  detail::require_converged(st, "fluid heat stationary solve");
  out.c_theta_f = fem::integral_value(grid, tab, fw, theta0);
  out.theta0 = CellField{FieldKind::Scalar, geom.dim, geom.n, 1, false,
                         std::move(theta0), {}, {}};
  return out;
}

struct CoupledFluidHeat {
  std::vector<double> times;
  std::vector<double> b_theta_f;   // <Theta^f(t)>_Yf
  std::vector<double> p_mean;      // <P^f(t)>_Yf
  double initial_energy_m_form = 0;      // m/2 (tau0 c_pf + 1/p_star)
  double initial_energy_discrete = 0;    // energy of the discrete initial data
  double energy_identity_residual = 0;   // |E(T)+D(T)-E_h(0)| / E_h(0)
  double energy_identity_residual_m_form = 0;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

/// Coupled fluid temperature / pressure relaxation (the system after
/// (5.50)): tau0 c_pf dTheta/dt = kappa1 mu1 lap(Theta) + (beta0f/p*) dP/dt,
/// P + (nu0/p*) dP/dt + beta0f Theta = 0, Theta = P = 1 on Y_f at t = 0,
/// Theta = 0 on the wall when mu1 > 0 (the wall condition drops for
/// mu1 = 0, which becomes an ODE per voxel). The discrete energy identity
///   E(t) + int_0^t D = m/2 (tau0 c_pf + 1/p*)
/// is tracked and a defect beyond 1% of the discrete initial energy is a
/// solver-instability error.
inline CoupledFluidHeat solve_coupled_fluid_heat(const CellGeometry& geom,
                                                 double tau0, double c_pf,
                                                 double kappa1, double mu1,
                                                 double nu0, double p_star,
                                                 double beta0f,
                                                 const SolverSettings& s = {}) {
  s.validate();
  if (!(p_star > 0)) throw ParameterError("coupled fluid heat requires p_star > 0");
  if (!(beta0f >= 0) || !(nu0 >= 0) || !(tau0 >= 0))
    throw ParameterError("coupled fluid heat requires nonnegative parameters");
  CoupledFluidHeat out;
  const double m = porosity(geom);
  const int nsteps = int(std::ceil(s.t_kernel / s.dt));
  out.initial_energy_m_form = 0.5 * m * (tau0 * c_pf + 1.0 / p_star);
  if (m == 0.0) {
    out.degenerate = true;
    out.warnings.push_back("empty fluid phase");
    return out;
  }
  const double dt = s.dt;
  const double a_nu = nu0 / p_star / dt;
  const double p_keep = a_nu / (a_nu + 1.0);
  const double p_gain = beta0f / (a_nu + 1.0);
  // P^k = p_keep P^{k-1} - p_gain Theta^k  (implicit Euler on the P ODE)

  const double kd = kappa1 * mu1;
  if (kd == 0.0) {
    // per-voxel ODE system, exact-quadrature energies
    const double hd = std::pow(1.0 / geom.n, geom.dim);
    double theta = 1.0, p = 1.0;  // identical on every fluid voxel
    double E0 = 0.5 * m * (tau0 * c_pf + 1.0 / p_star);
    out.initial_energy_discrete = E0;
    double diss = 0;
    out.times.push_back(0.0);
    out.b_theta_f.push_back(m);
    out.p_mean.push_back(m);
    for (int k = 1; k <= nsteps; ++k) {
      double tp, pp;
      if (tau0 * c_pf > 0) {
        // (tau c / dt)(T - T0) = (b/p*)(P - P0)/dt with P = keep*P0 - gain*T
        double aa = tau0 * c_pf / dt + (beta0f / p_star / dt) * p_gain;
        double bb = tau0 * c_pf / dt * theta +
                    (beta0f / p_star / dt) * (p_keep - 1.0) * p;
        tp = bb / aa;
      } else {
        // degenerate: Theta slaved, (b/p*) dP/dt = 0 -> P fixed unless beta>0
        double aa = (beta0f / p_star / dt) * p_gain;
        double bb = (beta0f / p_star / dt) * (p_keep - 1.0) * p;
        tp = aa > 0 ? bb / aa : theta;
      }
      pp = p_keep * p - p_gain * tp;
      double pdot = (pp - p) / dt;
      diss += dt * (nu0 / (p_star * p_star)) * pdot * pdot * m;
      theta = tp;
      p = pp;
      out.times.push_back(k * dt);
      out.b_theta_f.push_back(m * theta);
      out.p_mean.push_back(m * p);
    }
    double ET = 0.5 * m * (tau0 * c_pf * theta * theta + p * p / p_star);
    out.energy_identity_residual = std::abs(ET + diss - E0) / E0;
    out.energy_identity_residual_m_form =
        std::abs(ET + diss - out.initial_energy_m_form) / out.initial_energy_m_form;
    if (out.energy_identity_residual > 0.01)
      throw SolverError("coupled fluid heat: energy identity violated by " +
                        std::to_string(out.energy_identity_residual));
    return out;
  }

  // mu1 > 0: FE in space with wall condition Theta = 0
  fem::PeriodicGrid grid(geom);
  fem::ElementTables tab(geom.dim, 1.0 / geom.n);
  auto interior = fem::node_mask(grid, geom, true, fem::NodeSet::PhaseInterior);
  auto support = fem::node_mask(grid, geom, true, fem::NodeSet::PhaseSupport);
  fem::NullSpace none;
  auto fw = fem::phase_weights(geom, true);

  // K and M restricted to fluid voxels
  fem::PhaseOperator Kop, Mop;
  for (auto* op : {&Kop, &Mop}) {
    op->grid = &grid;
    op->geom = &geom;
    op->ncomp = 1;
  }
  Kop.fluid_mat = fem::scalar_elem(tab, 1.0, 0.0);
  Mop.fluid_mat = fem::scalar_elem(tab, 0.0, 1.0);

  const double tc = tau0 * c_pf;
  fem::PhaseOperator step_op;
  step_op.grid = &grid;
  step_op.geom = &geom;
  step_op.ncomp = 1;
  step_op.fluid_mat =
      fem::scalar_elem(tab, kd, tc / dt + (beta0f / p_star / dt) * p_gain);
  auto step_diag = step_op.diagonal();

  std::vector<double> theta(grid.nnodes, 0.0), pfield(grid.nnodes, 0.0);
  std::vector<double> rhs(grid.nnodes, 0.0), tmp(grid.nnodes, 0.0), tmp2(grid.nnodes, 0.0);
  for (std::size_t i = 0; i < grid.nnodes; ++i) {
    if (interior[i]) theta[i] = 1.0;
    if (support[i]) pfield[i] = 1.0;  // P carries no wall condition
  }
  auto mdot = [&](const std::vector<double>& x, const std::vector<double>& y) {
    Mop.apply(x.data(), tmp.data());
    double r = 0;
    for (std::size_t i = 0; i < grid.nnodes; ++i) r += tmp[i] * y[i];
    return r;
  };
  auto kdot = [&](const std::vector<double>& x) {
    Kop.apply(x.data(), tmp.data());
    double r = 0;
    for (std::size_t i = 0; i < grid.nnodes; ++i) r += tmp[i] * x[i];
    return r;
  };
  double E0 = 0.5 * tc * mdot(theta, theta) + 0.5 / p_star * mdot(pfield, pfield);
  out.initial_energy_discrete = E0;
  out.times.push_back(0.0);
  out.b_theta_f.push_back(m);
  out.p_mean.push_back(m);
  double diss = 0;
  std::vector<double> pdot(grid.nnodes, 0.0), pold(grid.nnodes, 0.0);
  auto apply = [&](const double* x, double* y) { step_op.apply(x, y); };
  for (int k = 1; k <= nsteps; ++k) {
    // rhs = (tc/dt) M theta_old + (beta/p*/dt)(p_keep - 1) M p_old
    Mop.apply(theta.data(), tmp.data());
    Mop.apply(pfield.data(), tmp2.data());
    for (std::size_t i = 0; i < grid.nnodes; ++i) {
      rhs[i] = tc / dt * tmp[i] + (beta0f / p_star / dt) * (p_keep - 1.0) * tmp2[i];
      if (!interior[i]) rhs[i] = 0.0;
    }
    pold = pfield;
    if (tc == 0.0 && beta0f == 0.0)
      throw ParameterError("coupled fluid heat: tau0 c_pf = beta0f = 0 leaves "
                           "Theta undetermined; use the relaxation solver");
    auto st = fem::pcg(apply, rhs, theta, step_diag, interior, none,
                       s.cg_tolerance, s.max_iterations);
    detail::require_converged(st, "coupled fluid heat step");
    for (std::size_t i = 0; i < grid.nnodes; ++i) {
      if (!support[i]) continue;
      pfield[i] = p_keep * pold[i] - p_gain * theta[i];
      pdot[i] = (pfield[i] - pold[i]) / dt;
    }
    diss += dt * (kd * kdot(theta) + nu0 / (p_star * p_star) * mdot(pdot, pdot));
    out.times.push_back(k * dt);
    out.b_theta_f.push_back(fem::integral_value(grid, tab, fw, theta));
    out.p_mean.push_back(fem::integral_value(grid, tab, fw, pfield));
  }
  double ET = 0.5 * tc * mdot(theta, theta) + 0.5 / p_star * mdot(pfield, pfield);
  out.energy_identity_residual = std::abs(ET + diss - E0) / E0;
  out.energy_identity_residual_m_form =
      std::abs(ET + diss - out.initial_energy_m_form) / out.initial_energy_m_form;
  if (out.energy_identity_residual > 0.01)
    throw SolverError("coupled fluid heat: energy identity violated by " +
                      std::to_string(out.energy_identity_residual));
  return out;
}

}  // namespace poroscale
