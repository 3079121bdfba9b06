#pragma once

#include <string>
#include <vector>

#include "poroscale/cellsolve.hpp"
#include "poroscale/core.hpp"
#include "poroscale/fem.hpp"
#include "poroscale/geometry.hpp"

namespace poroscale {

enum class ViscoProblem { I, II, III };

struct ViscoParams {
  double mu0 = 1, lambda0 = 1, nu0 = 0, p_star = 1, eta0 = 1;
  double beta0f = 0, beta0s = 0;
};

/// Time traces of the phase averages that the kernel assembly consumes; the
/// full fields are kept only for the initial and final states.
struct ViscoelasticCellResult {
  std::vector<double> times;
  std::vector<Mat3> D_rate_fluid;    // <D(dW/dt)(t)>_Yf
  std::vector<Mat3> D_W_solid;       // <D(W)(t)>_Ys
  std::vector<double> div_W_fluid;   // <div W(t)>_Yf
  Mat3 D_W0_fluid;                   // <D(W0)>_Yf (initial stationary field)
  double div_W0_fluid = 0;
  CellField W0;       // completed initial field, anchored <W>_Y = 0
  CellField Q0;       // per-voxel initial fluid pressure Q0
  CellField W_final;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline void add_div_load(const fem::PeriodicGrid& grid, const fem::ElementTables& tab,
                         const CellGeometry& geom, bool on_fluid, double coef,
                         std::vector<double>& rhs) {
  if (coef == 0.0) return;
  const int d = grid.dim;
  for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
    if (geom.fluid(v) != on_fluid) continue;
    const auto& nd = grid.vox_nodes[v];
    for (int a = 0; a < grid.corners(); ++a)
      for (int c = 0; c < d; ++c)
        rhs[std::size_t(nd[a]) * d + c] += coef * tab.G[c][a];
  }
}

inline void add_strain_load(const fem::PeriodicGrid& grid, const fem::ElementTables& tab,
                            const CellGeometry& geom, bool on_fluid, const Mat3& J,
                            std::vector<double>& rhs) {
  const int d = grid.dim;
  for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
    if (geom.fluid(v) != on_fluid) continue;
    const auto& nd = grid.vox_nodes[v];
    for (int a = 0; a < grid.corners(); ++a)
      for (int c = 0; c < d; ++c) {
        double r = 0;
        for (int i = 0; i < d; ++i) r -= J.a[i][c] * tab.G[i][a];
        rhs[std::size_t(nd[a]) * d + c] += r;
      }
  }
}

}  // namespace detail

/// Solves one evolutionary cell problem of the thermo-viscoelastic regime:
/// stationary initial fields on the fluid, elastic completion of the solid,
/// then an implicit march of the coupled fluid-rate / solid-stress balance
/// with the pressure closures eliminated.
inline ViscoelasticCellResult solve_viscoelastic_cell(ViscoProblem prob,
                                                      const CellGeometry& geom,
                                                      const ViscoParams& vp,
                                                      int li, int lj,
                                                      const SolverSettings& s = {}) {
  s.validate();
  if (!(vp.mu0 > 0))
    throw ParameterError("viscoelastic cell problems need mu0 > 0 (Theorem 2 regime otherwise)");
  if (!(vp.lambda0 > 0) || !(vp.eta0 > 0) || !(vp.p_star > 0) || vp.nu0 < 0)
    throw ParameterError("viscoelastic cell problems need lambda0, eta0, p_star > 0, nu0 >= 0");
  if (prob == ViscoProblem::I && (li < 0 || lj < 0 || li >= geom.dim || lj >= geom.dim))
    throw ParameterError("strain load indices out of range");

  fem::PeriodicGrid grid(geom);
  fem::ElementTables tab(geom.dim, 1.0 / geom.n);
  const int d = geom.dim;
  const std::size_t nv = grid.nnodes * d;
  const int nsteps = int(std::ceil(s.t_kernel / s.dt));

  ViscoelasticCellResult out;
  out.times.resize(nsteps + 1);
  for (int k = 0; k <= nsteps; ++k) out.times[k] = k * s.dt;
  out.D_rate_fluid.assign(nsteps + 1, Mat3{});
  out.D_W_solid.assign(nsteps + 1, Mat3{});
  out.div_W_fluid.assign(nsteps + 1, 0.0);
  out.W0 = CellField{FieldKind::Vector, d, geom.n, d, false,
                     std::vector<double>(nv, 0.0), {}, {}};
  out.Q0 = CellField{FieldKind::Scalar, d, geom.n, 1, true,
                     std::vector<double>(geom.voxel_count(), 0.0), {}, {}};

  const double m = porosity(geom);
  if (m == 0.0) {
    out.degenerate = true;
    out.warnings.push_back("no fluid phase: all memory kernels vanish");
    out.W_final = out.W0;
    return out;
  }

  auto fluid_support = fem::node_mask(grid, geom, true, fem::NodeSet::PhaseSupport);
  auto fw = fem::phase_weights(geom, true);
  auto sw = fem::phase_weights(geom, false);
  fem::NullSpace fluid_ns =
      fem::rigid_null_space(grid, geom, true, fluid_support, true);
  std::vector<std::uint8_t> fluid_active(nv, 0);
  for (std::size_t i = 0; i < grid.nnodes; ++i)
    for (int c = 0; c < d; ++c) fluid_active[i * d + c] = fluid_support[i];

  // -- stage 1: stationary fluid field W0 ------------------------------------
  fem::PhaseOperator init_op;
  init_op.grid = &grid;
  init_op.geom = &geom;
  init_op.ncomp = d;
  init_op.fluid_mat = fem::vector_elem(tab, vp.mu0, vp.nu0, 0.0, 0.0);
  std::vector<double>& W = out.W0.values;
  {
    std::vector<double> rhs(nv, 0.0);
    switch (prob) {
      case ViscoProblem::I:
        detail::add_strain_load(grid, tab, geom, true, Mat3::J(li, lj), rhs);
        break;
      case ViscoProblem::II:
        detail::add_div_load(grid, tab, geom, true, -vp.nu0, rhs);
        break;
      case ViscoProblem::III:
        detail::add_div_load(grid, tab, geom, true, vp.beta0f, rhs);
        break;
    }
    for (std::size_t q = 0; q < nv; ++q)
      if (!fluid_active[q]) rhs[q] = 0.0;
    fluid_ns.project(rhs.data());
    auto diag = init_op.diagonal();
    auto apply = [&](const double* x, double* y) { init_op.apply(x, y); };
    auto st = fem::pcg(apply, rhs, W, diag, fluid_active, fluid_ns,
                       s.cg_tolerance, s.max_iterations);
    detail::require_converged(st, "viscoelastic initial fluid solve");
  }
  out.D_W0_fluid = fem::integral_sym_gradient(grid, tab, fw, W);
  out.div_W0_fluid = fem::integral_div(grid, tab, fw, W);

  // per-voxel Q0 from the initial closure
  {
    const int nc = grid.corners();
    double hd = std::pow(grid.h, d);
    for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
      if (!geom.fluid(v)) continue;
      double dv = 0;
      for (int a = 0; a < nc; ++a)
        for (int i = 0; i < d; ++i)
          dv += tab.G[i][a] * W[std::size_t(grid.vox_nodes[v][a]) * d + i];
      dv /= hd;
      switch (prob) {
        case ViscoProblem::I: out.Q0.values[v] = -vp.nu0 * dv; break;
        case ViscoProblem::II: out.Q0.values[v] = -vp.nu0 * (dv + 1.0); break;
        case ViscoProblem::III: out.Q0.values[v] = -vp.nu0 * dv + vp.beta0f; break;
      }
    }
  }

  // -- stage 2: elastic completion of the pure-solid nodes -------------------
  fem::PhaseOperator solid_op;
  solid_op.grid = &grid;
  solid_op.geom = &geom;
  solid_op.ncomp = d;
  solid_op.solid_mat = fem::vector_elem(tab, vp.lambda0, vp.eta0, 0.0, 0.0);
  std::vector<std::uint8_t> solid_only(nv, 0);
  bool any_solid_only = false;
  for (std::size_t i = 0; i < grid.nnodes; ++i)
    if (!fluid_support[i]) {
      any_solid_only = true;
      for (int c = 0; c < d; ++c) solid_only[i * d + c] = 1;
    }
  fem::NullSpace none;
  if (any_solid_only && m < 1.0) {
    std::vector<double> rhs(nv, 0.0), tmp(nv, 0.0);
    solid_op.apply(W.data(), tmp.data());
    for (std::size_t q = 0; q < nv; ++q) rhs[q] = -tmp[q];
    if (prob == ViscoProblem::II)
      detail::add_div_load(grid, tab, geom, false, -vp.eta0, rhs);
    if (prob == ViscoProblem::III)
      detail::add_div_load(grid, tab, geom, false, vp.beta0s, rhs);
    for (std::size_t q = 0; q < nv; ++q)
      if (!solid_only[q]) rhs[q] = 0.0;
    std::vector<double> corr(nv, 0.0);
    auto diag = solid_op.diagonal();
    auto apply = [&](const double* x, double* y) { solid_op.apply(x, y); };
    auto st = fem::pcg(apply, rhs, corr, diag, solid_only, none, s.cg_tolerance,
                       s.max_iterations);
    detail::require_converged(st, "viscoelastic solid completion");
    for (std::size_t q = 0; q < nv; ++q)
      if (solid_only[q]) W[q] += corr[q];
  }
  out.D_W_solid[0] = fem::integral_sym_gradient(grid, tab, sw, W);
  out.div_W_fluid[0] = out.div_W0_fluid;
  // The t = 0+ rate average <D(dW/dt)(0)>_Yf is evaluated at assembly time
  // from the stationary fields through the weak-form identity
  //   J^ij : <D(R_A)>_Yf = lambda0 int_(Ys) D(W_A):D(W_ij)
  //                      + eta0 int_(Ys) div W_A div W_ij
  //                      + p*   int_(Yf) div W_A div W_ij  (+ source terms),
  // which needs the whole load basis; out.D_rate_fluid[0] stays zero here.

  // -- stage 4: implicit march ------------------------------------------------
  fem::PhaseOperator step_op, hist_op;
  for (auto* op : {&step_op, &hist_op}) {
    op->grid = &grid;
    op->geom = &geom;
    op->ncomp = d;
  }
  step_op.fluid_mat =
      fem::vector_elem(tab, vp.mu0 / s.dt, vp.p_star + vp.nu0 / s.dt, 0.0, 0.0);
  step_op.solid_mat = fem::vector_elem(tab, vp.lambda0, vp.eta0, 0.0, 0.0);
  hist_op.fluid_mat = fem::vector_elem(tab, vp.mu0 / s.dt, vp.nu0 / s.dt, 0.0, 0.0);

  std::vector<std::uint8_t> all_active(nv, 1);
  fem::NullSpace global_ns;
  for (int c = 0; c < d; ++c) {
    std::vector<std::uint32_t> dofs(grid.nnodes);
    for (std::size_t i = 0; i < grid.nnodes; ++i) dofs[i] = std::uint32_t(i * d + c);
    global_ns.add_indicator(dofs);
  }
  std::vector<double> const_src(nv, 0.0);
  if (prob == ViscoProblem::II) {
    detail::add_div_load(grid, tab, geom, true, -vp.p_star, const_src);
    detail::add_div_load(grid, tab, geom, false, -vp.eta0, const_src);
  }
  if (prob == ViscoProblem::III) {
    detail::add_div_load(grid, tab, geom, true, vp.beta0f, const_src);
    detail::add_div_load(grid, tab, geom, false, vp.beta0s, const_src);
  }

  auto step_diag = step_op.diagonal();
  auto apply_step = [&](const double* x, double* y) { step_op.apply(x, y); };
  std::vector<double> Wk = W, rhs(nv), prev(nv);
  Mat3 prevD = fem::integral_sym_gradient(grid, tab, fw, Wk);
  for (int k = 1; k <= nsteps; ++k) {
    hist_op.apply(Wk.data(), rhs.data());
    for (std::size_t q = 0; q < nv; ++q) rhs[q] += const_src[q];
    global_ns.project(rhs.data());
    prev = Wk;
    auto st = fem::pcg(apply_step, rhs, Wk, step_diag, all_active, global_ns,
                       s.cg_tolerance, s.max_iterations);
    detail::require_converged(st, "viscoelastic march step");
    Mat3 Dk = fem::integral_sym_gradient(grid, tab, fw, Wk);
    out.D_rate_fluid[k] = (1.0 / s.dt) * (Dk - prevD);
    prevD = Dk;
    out.D_W_solid[k] = fem::integral_sym_gradient(grid, tab, sw, Wk);
    out.div_W_fluid[k] = fem::integral_div(grid, tab, fw, Wk);
  }
  out.W_final = CellField{FieldKind::Vector, d, geom.n, d, false, Wk, {}, {}};

  double r0 = out.D_rate_fluid[0].norm() + out.D_W_solid[0].norm();
  double rT = out.D_rate_fluid[nsteps].norm();
  if (r0 > 0 && rT > 1e-4 * (out.D_rate_fluid[0].norm() + 1e-300) &&
      out.D_rate_fluid[0].norm() > 0)
    out.warnings.push_back("kernel horizon may be short: rate norm at T is " +
                           std::to_string(rT));

  // output gauge: <W>_Y = 0 for the reported fields
  for (auto* f : {&out.W0, &out.W_final}) {
    Vec3 mean = fem::integral_vector_value(grid, tab,
                                           std::vector<double>(geom.voxel_count(), 1.0),
                                           f->values);
    for (std::size_t i = 0; i < grid.nnodes; ++i)
      for (int c = 0; c < d; ++c) f->values[i * d + c] -= mean[c];
  }
  return out;
}

}  // namespace poroscale
