#pragma once

#include <string>
#include <vector>

#include "poroscale/core.hpp"
#include "poroscale/fem.hpp"
#include "poroscale/geometry.hpp"

namespace poroscale {

enum class FieldKind { Scalar, Vector, PressurePair };

/// A periodic field on the unit-cell grid: nodal values (one dof per
/// periodic equivalence class) or per-voxel values for pressures.
struct CellField {
  FieldKind kind = FieldKind::Scalar;
  int dim = 3;
  int n = 0;
  int ncomp = 1;
  bool voxel_centered = false;
  std::vector<double> values;
  std::vector<double> times;                       // optional time samples
  std::vector<std::vector<double>> time_values;    // decimated field history
};

struct SolverSettings {
  double cg_tolerance = 1e-10;  // relative residual
  int max_iterations = 50000;
  double dt = 1e-3;
  double t_kernel = 1.0;
  static constexpr int scheme_order = 2;  // spatial order of the Q1 scheme

  void validate() const {
    if (!(cg_tolerance > 0 && cg_tolerance <= 1e-4))
      throw ParameterError("cg_tolerance must lie in (0, 1e-4]");
    if (!(dt > 0)) throw ParameterError("time step dt must be positive");
    if (!(max_iterations > 0)) throw ParameterError("max_iterations must be positive");
  }
};

namespace detail {

inline void require_converged(const fem::KrylovStats& st, const std::string& what) {
  if (!st.converged)
    throw SolverError(what + ": iteration limit reached, final relative residual " +
                      std::to_string(st.rel_residual));
}

/// Subtracts the per-component volume mean so <U>_phase = 0 on each
/// node-sharing component of the anchoring phase.
inline void anchor_volume_mean(const fem::PeriodicGrid& grid,
                               const fem::ElementTables& tab,
                               const CellGeometry& geom, bool anchor_fluid,
                               const std::vector<std::int32_t>& vox_comp,
                               std::int32_t ncomps, std::vector<double>& u,
                               int ncomp_field) {
  if (ncomps <= 0) return;
  auto node_comp = fem::node_components(grid, vox_comp);
  std::vector<double> vol(ncomps, 0.0);
  std::vector<double> mean(std::size_t(ncomps) * ncomp_field, 0.0);
  const int nc = grid.corners();
  for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
    if (vox_comp[v] < 0) continue;
    std::int32_t c = vox_comp[v];
    for (int a = 0; a < nc; ++a) {
      vol[c] += tab.NI[a];
      for (int k = 0; k < ncomp_field; ++k)
        mean[std::size_t(c) * ncomp_field + k] +=
            tab.NI[a] * u[std::size_t(grid.vox_nodes[v][a]) * ncomp_field + k];
    }
  }
  for (std::size_t i = 0; i < grid.nnodes; ++i) {
    std::int32_t c = node_comp[i];
    if (c < 0) continue;
    for (int k = 0; k < ncomp_field; ++k)
      u[i * ncomp_field + k] -= mean[std::size_t(c) * ncomp_field + k] / vol[c];
  }
}

}  // namespace detail

struct ElasticCellResult {
  CellField displacement;     // nodal vector field U
  CellField pressure;         // per-voxel Pi (piecewise mean)
  fem::KrylovStats stats;
  bool degenerate = false;
  std::vector<std::string> warnings;
  // phase integrals used by the tensor assembly
  Mat3 D_solid;       // int_Ys D(U)
  Mat3 D_total;       // int_Y (1-chi) D(U) (identical to D_solid)
  double div_solid = 0;
};

namespace detail {

enum class ElasticLoad { StrainJij, UnitDilation, FluidPressure };

/// Shared driver for the three stationary skeleton cell problems: the
/// operator is int_(Ys) [c_dd D(U):D(v) + c_div div U div v], only the load
/// differs.
inline ElasticCellResult solve_elastic_common(const CellGeometry& geom,
                                              double c_dd, double c_div,
                                              ElasticLoad load, int li, int lj,
                                              const SolverSettings& s) {
  s.validate();
  fem::PeriodicGrid grid(geom);
  fem::ElementTables tab(geom.dim, 1.0 / geom.n);
  const int d = geom.dim;

  ElasticCellResult out;
  out.displacement =
      CellField{FieldKind::Vector, d, geom.n, d, false,
                std::vector<double>(grid.nnodes * d, 0.0), {}, {}};
  out.pressure = CellField{FieldKind::Scalar, d, geom.n, 1, true,
                           std::vector<double>(geom.voxel_count(), 0.0), {}, {}};

  double m = porosity(geom);
  if (m >= 1.0) throw SolverError("no solid skeleton: cell is all fluid");

  fem::PhaseOperator op;
  op.grid = &grid;
  op.geom = &geom;
  op.ncomp = d;
  op.solid_mat = fem::vector_elem(tab, c_dd, c_div, 0.0, 0.0);

  auto active_node = fem::node_mask(grid, geom, false, fem::NodeSet::PhaseSupport);
  std::vector<std::uint8_t> active(grid.nnodes * d, 0);
  for (std::size_t i = 0; i < grid.nnodes; ++i)
    for (int c = 0; c < d; ++c) active[i * d + c] = active_node[i];

  auto vox_comp = fem::voxel_components(geom, false);
  std::int32_t ncomps = fem::component_count(vox_comp);
  if (ncomps > 1)
    out.warnings.push_back("solid phase is disconnected: per-component anchoring");
  fem::NullSpace ns = fem::rigid_null_space(grid, geom, false, active_node, true);

  // load assembly
  std::vector<double> rhs(grid.nnodes * d, 0.0);
  Mat3 J = Mat3::J(li, lj);
  for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
    bool fl = geom.fluid(v);
    const auto& nd = grid.vox_nodes[v];
    for (int a = 0; a < grid.corners(); ++a)
      for (int c = 0; c < d; ++c) {
        double r = 0;
        switch (load) {
          case ElasticLoad::StrainJij:
            // -int (1-chi) J : D(phi)
            if (!fl)
              for (int i = 0; i < d; ++i) r -= J.a[i][c] * tab.G[i][a];
            break;
          case ElasticLoad::UnitDilation:
            // -int (1-chi) eta0 div(phi)
            if (!fl) r -= c_div * tab.G[c][a];
            break;
          case ElasticLoad::FluidPressure:
            // +int chi div(phi)
            if (fl) r += tab.G[c][a];
            break;
        }
        rhs[std::size_t(nd[a]) * d + c] += r;
      }
  }
  for (std::size_t i = 0; i < grid.nnodes; ++i)
    for (int c = 0; c < d; ++c)
      if (!active_node[i]) rhs[i * d + c] = 0.0;
  ns.project(rhs.data());

  auto apply = [&](const double* x, double* y) { op.apply(x, y); };
  auto diag = op.diagonal();
  out.stats = fem::pcg(apply, rhs, out.displacement.values, diag, active, ns,
                       s.cg_tolerance, s.max_iterations);
  detail::require_converged(out.stats, "elastic cell solve");

  detail::anchor_volume_mean(grid, tab, geom, false, vox_comp, ncomps,
                             out.displacement.values, d);

  // per-voxel pressure from the closure Pi = -c_div * (1-chi) (div U + extra)
  const int nc = grid.corners();
  double hd = std::pow(1.0 / geom.n, d);
  for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
    if (geom.fluid(v)) continue;
    double dv = 0;
    for (int a = 0; a < nc; ++a)
      for (int i = 0; i < d; ++i)
        dv += tab.G[i][a] * out.displacement.values[std::size_t(grid.vox_nodes[v][a]) * d + i];
    dv /= hd;  // voxel mean of div U
    double extra = load == ElasticLoad::UnitDilation ? 1.0 : 0.0;
    out.pressure.values[v] = -c_div * (dv + extra);
  }

  auto ws = fem::phase_weights(geom, false);
  out.D_solid = fem::integral_sym_gradient(grid, tab, ws, out.displacement.values);
  out.D_total = out.D_solid;
  out.div_solid = fem::integral_div(grid, tab, ws, out.displacement.values);
  return out;
}

}  // namespace detail

/// Cell problem for the unit strain load J^{ij}: the operator is
/// normalized by lambda0, so c_dd = 1 and c_div = eta0/lambda0, and the
/// pressure closure reads (lambda0/eta0) Pi + (1-chi) div U = 0.
inline ElasticCellResult solve_elastic_cell_ij(const CellGeometry& geom,
                                               double lambda0, double eta0,
                                               int i, int j,
                                               const SolverSettings& s = {}) {
  if (!(lambda0 > 0) || !(eta0 > 0))
    throw ParameterError("solve_elastic_cell_ij requires finite lambda0, eta0 > 0");
  if (i < 0 || j < 0 || i >= geom.dim || j >= geom.dim)
    throw ParameterError("load indices out of range");
  auto r = detail::solve_elastic_common(geom, 1.0, eta0 / lambda0,
                                        detail::ElasticLoad::StrainJij,
                                        std::min(i, j), std::max(i, j), s);
  // rescale the closure: Pi^{ij} = -(eta0/lambda0)(1-chi) div U
  return r;
}

/// Unit-dilation cell problem: div{lambda0 (1-chi) D(U0) - Pi0 I} = 0 with
/// Pi0 = -eta0 (1-chi)(div U0 + 1).
inline ElasticCellResult solve_elastic_cell_div(const CellGeometry& geom,
                                                double lambda0, double eta0,
                                                const SolverSettings& s = {}) {
  if (!(lambda0 > 0) || !(eta0 > 0))
    throw ParameterError("solve_elastic_cell_div requires finite lambda0, eta0 > 0");
  return detail::solve_elastic_common(geom, lambda0, eta0,
                                      detail::ElasticLoad::UnitDilation, 0, 0, s);
}

/// Fluid-pressure-loaded cell problem: div{lambda0 (1-chi) D(U1) -
/// (Pi1 + chi) I} = 0 with Pi1 = -eta0 (1-chi) div U1.
inline ElasticCellResult solve_elastic_cell_q(const CellGeometry& geom,
                                              double lambda0, double eta0,
                                              const SolverSettings& s = {}) {
  if (!(lambda0 > 0) || !(eta0 > 0))
    throw ParameterError("solve_elastic_cell_q requires finite lambda0, eta0 > 0");
  return detail::solve_elastic_common(geom, lambda0, eta0,
                                      detail::ElasticLoad::FluidPressure, 0, 0, s);
}

struct ThermalCellResult {
  CellField field;
  fem::KrylovStats stats;
  std::vector<std::string> warnings;
  Vec3 grad_solid = {0, 0, 0};  // int_Ys grad(Theta)
  Vec3 grad_fluid = {0, 0, 0};  // int_Yf grad(Theta)
};

/// Solid heat corrector (Laplace in Y_s, flux -e_i . n on the interface).
/// The interface flux is imposed weakly through the volumetric form
/// div((1-chi)(grad Theta + e_i)) = 0, which is exactly compatible on the
/// voxel grid.
inline ThermalCellResult solve_thermal_cell_solid(const CellGeometry& geom, int i,
                                                  const SolverSettings& s = {}) {
  s.validate();
  if (i < 0 || i >= geom.dim) throw ParameterError("direction out of range");
  if (porosity(geom) >= 1.0) throw SolverError("empty solid phase");
  fem::PeriodicGrid grid(geom);
  fem::ElementTables tab(geom.dim, 1.0 / geom.n);

  ThermalCellResult out;
  out.field = CellField{FieldKind::Scalar, geom.dim, geom.n, 1, false,
                        std::vector<double>(grid.nnodes, 0.0), {}, {}};

  fem::PhaseOperator op;
  op.grid = &grid;
  op.geom = &geom;
  op.ncomp = 1;
  op.solid_mat = fem::scalar_elem(tab, 1.0, 0.0);

  auto active = fem::node_mask(grid, geom, false, fem::NodeSet::PhaseSupport);
  auto vox_comp = fem::voxel_components(geom, false);
  std::int32_t ncomps = fem::component_count(vox_comp);
  if (ncomps > 1)
    out.warnings.push_back("solid phase is disconnected: per-component anchoring");
  auto node_comp = fem::node_components(grid, vox_comp);
  fem::NullSpace ns = fem::translation_null_space(node_comp, active, ncomps, 1);

  std::vector<double> rhs(grid.nnodes, 0.0);
  for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
    if (geom.fluid(v)) continue;
    const auto& nd = grid.vox_nodes[v];
    for (int a = 0; a < grid.corners(); ++a) rhs[nd[a]] -= tab.G[i][a];
  }
  for (std::size_t k = 0; k < grid.nnodes; ++k)
    if (!active[k]) rhs[k] = 0.0;
  ns.project(rhs.data());

  auto apply = [&](const double* x, double* y) { op.apply(x, y); };
  auto diag = op.diagonal();
  out.stats = fem::pcg(apply, rhs, out.field.values, diag, active, ns,
                       s.cg_tolerance, s.max_iterations);
  detail::require_converged(out.stats, "solid thermal cell solve");
  detail::anchor_volume_mean(grid, tab, geom, false, vox_comp, ncomps,
                             out.field.values, 1);

  out.grad_solid = fem::integral_gradient(grid, tab, fem::phase_weights(geom, false),
                                          out.field.values);
  out.grad_fluid = fem::integral_gradient(grid, tab, fem::phase_weights(geom, true),
                                          out.field.values);
  return out;
}

/// Two-phase heat corrector div((chi k0f + (1-chi) k0s) grad Theta + chi e_i) = 0.
inline ThermalCellResult solve_thermal_cell_twophase(const CellGeometry& geom,
                                                     double kappa0f, double kappa0s,
                                                     int i,
                                                     const SolverSettings& s = {}) {
  s.validate();
  if (!(kappa0f > 0) || !(kappa0s > 0))
    throw ParameterError("two-phase thermal solve requires positive conductivities");
  if (i < 0 || i >= geom.dim) throw ParameterError("direction out of range");
  fem::PeriodicGrid grid(geom);
  fem::ElementTables tab(geom.dim, 1.0 / geom.n);

  ThermalCellResult out;
  out.field = CellField{FieldKind::Scalar, geom.dim, geom.n, 1, false,
                        std::vector<double>(grid.nnodes, 0.0), {}, {}};

  fem::PhaseOperator op;
  op.grid = &grid;
  op.geom = &geom;
  op.ncomp = 1;
  op.fluid_mat = fem::scalar_elem(tab, kappa0f, 0.0);
  op.solid_mat = fem::scalar_elem(tab, kappa0s, 0.0);

  std::vector<std::uint8_t> active(grid.nnodes, 1);
  fem::NullSpace ns;
  {
    std::vector<std::uint32_t> all(grid.nnodes);
    for (std::size_t k = 0; k < grid.nnodes; ++k) all[k] = std::uint32_t(k);
    ns.add_indicator(all);
  }

  std::vector<double> rhs(grid.nnodes, 0.0);
  for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
    if (!geom.fluid(v)) continue;
    const auto& nd = grid.vox_nodes[v];
    for (int a = 0; a < grid.corners(); ++a) rhs[nd[a]] -= tab.G[i][a];
  }
  ns.project(rhs.data());

  auto apply = [&](const double* x, double* y) { op.apply(x, y); };
  auto diag = op.diagonal();
  out.stats = fem::pcg(apply, rhs, out.field.values, diag, active, ns,
                       s.cg_tolerance, s.max_iterations);
  detail::require_converged(out.stats, "two-phase thermal cell solve");

  out.grad_solid = fem::integral_gradient(grid, tab, fem::phase_weights(geom, false),
                                          out.field.values);
  out.grad_fluid = fem::integral_gradient(grid, tab, fem::phase_weights(geom, true),
                                          out.field.values);
  return out;
}

}  // namespace poroscale
