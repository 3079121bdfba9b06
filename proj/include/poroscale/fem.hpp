#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "poroscale/core.hpp"
#include "poroscale/geometry.hpp"

namespace poroscale::fem {

/// Periodic voxel grid: n^dim voxels of size h = 1/n, one node per voxel
/// corner after periodic identification (so nodes == voxels). Local corner
/// index a encodes per-axis offsets as bits (a0 + 2*a1 + 4*a2).
struct PeriodicGrid {
  int dim = 3;
  int n = 0;
  double h = 0;
  std::size_t nnodes = 0;
  std::vector<std::array<std::uint32_t, 8>> vox_nodes;

  explicit PeriodicGrid(const CellGeometry& g) : dim(g.dim), n(g.n), h(1.0 / g.n) {
    nnodes = g.voxel_count();
    vox_nodes.resize(nnodes);
    const int nzv = g.nz();
    for (int k = 0; k < nzv; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          auto& c = vox_nodes[g.index(i, j, k)];
          int a = 0;
          for (int dk = 0; dk < (dim == 3 ? 2 : 1); ++dk)
            for (int dj = 0; dj < 2; ++dj)
              for (int di = 0; di < 2; ++di) {
                int ii = (i + di) % n, jj = (j + dj) % n;
                int kk = dim == 3 ? (k + dk) % nzv : 0;
                c[di + 2 * dj + 4 * dk] =
                    std::uint32_t(g.index(ii, jj, kk));
                ++a;
              }
        }
  }
  int corners() const { return 1 << dim; }
};

/// Exact integrals of Q1 shape functions over one physical voxel.
struct ElementTables {
  int dim;
  double h;
  int nc;             // corners
  double K[3][3][8][8] = {};  // int dN_a/dx_al * dN_b/dx_be
  double NG[3][8][8] = {};    // int N_a * dN_b/dx_al
  double M[8][8] = {};        // int N_a N_b
  double G[3][8] = {};        // int dN_a/dx_al
  double NI[8] = {};          // int N_a

  ElementTables(int dim_, double h_) : dim(dim_), h(h_), nc(1 << dim_) {
    // 1D reference blocks on [0,1]
    const double ll[2][2] = {{1.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 3}};
    const double dd[2][2] = {{1, -1}, {-1, 1}};
    const double dl[2][2] = {{-0.5, -0.5}, {0.5, 0.5}};  // dl[a][b] = int l'_a l_b
    const double li[2] = {0.5, 0.5};
    const double di[2] = {-1, 1};
    auto bit = [](int a, int t) { return (a >> t) & 1; };
    for (int a = 0; a < nc; ++a) {
      double v = 1;
      for (int t = 0; t < dim; ++t) v *= li[bit(a, t)];
      NI[a] = v * std::pow(h, dim);
      for (int al = 0; al < dim; ++al) {
        double g = 1;
        for (int t = 0; t < dim; ++t)
          g *= (t == al) ? di[bit(a, t)] : li[bit(a, t)];
        G[al][a] = g * std::pow(h, dim - 1);
      }
      for (int b = 0; b < nc; ++b) {
        double m = 1;
        for (int t = 0; t < dim; ++t) m *= ll[bit(a, t)][bit(b, t)];
        M[a][b] = m * std::pow(h, dim);
        for (int al = 0; al < dim; ++al) {
          double ng = 1;
          for (int t = 0; t < dim; ++t)
            ng *= (t == al) ? dl[bit(b, t)][bit(a, t)] : ll[bit(a, t)][bit(b, t)];
          NG[al][a][b] = ng * std::pow(h, dim - 1);
          for (int be = 0; be < dim; ++be) {
            double kk = 1;
            for (int t = 0; t < dim; ++t) {
              if (t == al && t == be)
                kk *= dd[bit(a, t)][bit(b, t)];
              else if (t == al)
                kk *= dl[bit(a, t)][bit(b, t)];
              else if (t == be)
                kk *= dl[bit(b, t)][bit(a, t)];
              else
                kk *= ll[bit(a, t)][bit(b, t)];
            }
            K[al][be][a][b] = kk * std::pow(h, dim - 2);
          }
        }
      }
    }
  }
};

using ElemMat = std::vector<double>;  // dense local matrix, row-major

/// Scalar local matrix c_lap * int grad.grad + c_mass * int N N.
inline ElemMat scalar_elem(const ElementTables& t, double c_lap, double c_mass) {
  const int nc = t.nc;
  ElemMat e(std::size_t(nc) * nc, 0.0);
  for (int a = 0; a < nc; ++a)
    for (int b = 0; b < nc; ++b) {
      double lap = 0;
      for (int al = 0; al < t.dim; ++al) lap += t.K[al][al][a][b];
      e[std::size_t(a) * nc + b] = c_lap * lap + c_mass * t.M[a][b];
    }
  return e;
}

/// Vector local matrix with local dof (a * dim + c):
///   c_dd * int D(u):D(v) + c_div * int div u div v
/// + c_grad * int grad u : grad v + c_mass * int u.v
inline ElemMat vector_elem(const ElementTables& t, double c_dd, double c_div,
                           double c_grad, double c_mass) {
  const int nc = t.nc, d = t.dim, nl = nc * d;
  ElemMat e(std::size_t(nl) * nl, 0.0);
  for (int a = 0; a < nc; ++a)
    for (int c = 0; c < d; ++c)
      for (int b = 0; b < nc; ++b)
        for (int f = 0; f < d; ++f) {
          double lap = 0;
          for (int al = 0; al < d; ++al) lap += t.K[al][al][a][b];
          double v = 0;
          if (c == f) v += c_dd * 0.5 * lap + c_grad * lap + c_mass * t.M[a][b];
          v += c_dd * 0.5 * t.K[f][c][a][b] + c_div * t.K[c][f][a][b];
          e[std::size_t(a * d + c) * nl + (b * d + f)] = v;
        }
  return e;
}

/// Matrix-free operator: one local matrix per voxel chosen by phase
/// (nullptr skips the voxel). apply() accumulates y = Op x over all voxels.
struct PhaseOperator {
  const PeriodicGrid* grid = nullptr;
  const CellGeometry* geom = nullptr;
  int ncomp = 1;
  ElemMat fluid_mat, solid_mat;  // empty = skip phase

  void apply(const double* x, double* y) const {
    const int nc = grid->corners(), d = ncomp, nl = nc * d;
    const std::size_t nvox = grid->vox_nodes.size();
    std::fill(y, y + grid->nnodes * d, 0.0);
    double xl[24], yl[24];
    for (std::size_t v = 0; v < nvox; ++v) {
      const ElemMat& em = geom->fluid(v) ? fluid_mat : solid_mat;
      if (em.empty()) continue;
      const auto& nd = grid->vox_nodes[v];
      for (int a = 0; a < nc; ++a)
        for (int c = 0; c < d; ++c) xl[a * d + c] = x[std::size_t(nd[a]) * d + c];
      for (int i = 0; i < nl; ++i) {
        double s = 0;
        const double* row = &em[std::size_t(i) * nl];
        for (int j = 0; j < nl; ++j) s += row[j] * xl[j];
        yl[i] = s;
      }
      for (int a = 0; a < nc; ++a)
        for (int c = 0; c < d; ++c) y[std::size_t(nd[a]) * d + c] += yl[a * d + c];
    }
  }

  std::vector<double> diagonal() const {
    const int nc = grid->corners(), d = ncomp, nl = nc * d;
    std::vector<double> diag(grid->nnodes * d, 0.0);
    for (std::size_t v = 0; v < grid->vox_nodes.size(); ++v) {
      const ElemMat& em = geom->fluid(v) ? fluid_mat : solid_mat;
      if (em.empty()) continue;
      const auto& nd = grid->vox_nodes[v];
      for (int a = 0; a < nc; ++a)
        for (int c = 0; c < d; ++c)
          diag[std::size_t(nd[a]) * d + c] += em[std::size_t(a * d + c) * nl + (a * d + c)];
    }
    return diag;
  }
};

enum class NodeSet { PhaseSupport, PhaseInterior };

/// Nodes touching (support) or fully surrounded by (interior) voxels of one
/// phase. Interior nodes of the fluid are exactly the velocity/temperature
/// unknowns with no-slip / zero-Dirichlet walls on the voxel interface.
inline std::vector<std::uint8_t> node_mask(const PeriodicGrid& g,
                                           const CellGeometry& geom,
                                           bool fluid_phase, NodeSet set) {
  std::vector<std::uint8_t> touch_phase(g.nnodes, 0), touch_other(g.nnodes, 0);
  for (std::size_t v = 0; v < g.vox_nodes.size(); ++v) {
    bool in_phase = geom.fluid(v) == fluid_phase;
    for (int a = 0; a < g.corners(); ++a)
      (in_phase ? touch_phase : touch_other)[g.vox_nodes[v][a]] = 1;
  }
  std::vector<std::uint8_t> mask(g.nnodes, 0);
  for (std::size_t i = 0; i < g.nnodes; ++i)
    mask[i] = set == NodeSet::PhaseSupport ? touch_phase[i]
                                           : (touch_phase[i] && !touch_other[i]);
  return mask;
}

/// Connected components of one phase's voxels under node-sharing (corner)
/// adjacency; two voxels sharing any node belong to one component. Returns
/// -1 for voxels of the other phase. Nodes touching the phase then belong to
/// exactly one component, which makes per-component null spaces well defined.
inline std::vector<std::int32_t> voxel_components(const CellGeometry& g,
                                                  bool fluid_phase) {
  const std::size_t total = g.voxel_count();
  std::vector<std::int32_t> parent(total);
  for (std::size_t i = 0; i < total; ++i) parent[i] = std::int32_t(i);
  std::function<std::int32_t(std::int32_t)> find = [&](std::int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[b] = a;
  };
  const int n = g.n, nzv = g.nz();
  auto in_phase = [&](std::size_t id) { return g.fluid(id) == fluid_phase; };
  for (int k = 0; k < nzv; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        std::size_t id = g.index(i, j, k);
        if (!in_phase(id)) continue;
        int zr = g.dim == 3 ? 1 : 0;
        for (int dk = -zr; dk <= zr; ++dk)
          for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
              if (!di && !dj && !dk) continue;
              std::size_t nb = g.index((i + di + n) % n, (j + dj + n) % n,
                                       g.dim == 3 ? (k + dk + nzv) % nzv : 0);
              if (in_phase(nb)) unite(std::int32_t(id), std::int32_t(nb));
            }
      }
  std::vector<std::int32_t> comp(total, -1);
  std::int32_t next = 0;
  std::vector<std::int32_t> label(total, -1);
  for (std::size_t i = 0; i < total; ++i) {
    if (!in_phase(i)) continue;
    std::int32_t r = find(std::int32_t(i));
    if (label[r] < 0) label[r] = next++;
    comp[i] = label[r];
  }
  return comp;
}

inline std::int32_t component_count(const std::vector<std::int32_t>& comp) {
  std::int32_t m = 0;
  for (auto c : comp) m = std::max(m, c + 1);
  return m;
}

/// Component id per node (from any adjacent phase voxel); -1 if none.
inline std::vector<std::int32_t> node_components(const PeriodicGrid& g,
                                                 const std::vector<std::int32_t>& vox_comp) {
  std::vector<std::int32_t> nc(g.nnodes, -1);
  for (std::size_t v = 0; v < g.vox_nodes.size(); ++v) {
    if (vox_comp[v] < 0) continue;
    for (int a = 0; a < g.corners(); ++a) nc[g.vox_nodes[v][a]] = vox_comp[v];
  }
  return nc;
}

/// Orthonormal sparse null-space basis used for projection inside Krylov
/// iterations (rigid translations and rotations per component, constant
/// pressures, ...).
struct NullSpace {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> vecs;

  void add_indicator(const std::vector<std::uint32_t>& dofs) {
    if (dofs.empty()) return;
    double w = 1.0 / std::sqrt(double(dofs.size()));
    std::vector<std::pair<std::uint32_t, double>> v;
    v.reserve(dofs.size());
    for (auto d : dofs) v.emplace_back(d, w);
    vecs.push_back(std::move(v));
  }

  /// Gram-Schmidt against the existing basis, then normalize; degenerate
  /// vectors are dropped.
  void add_general(std::vector<std::pair<std::uint32_t, double>> v) {
    for (const auto& u : vecs) {
      // sparse dot against u (both sorted by dof id not guaranteed; use map-free scan)
      double dot = 0;
      std::size_t i = 0, j = 0;
      std::vector<std::pair<std::uint32_t, double>> merged;
      (void)merged;
      // brute-force: index into a scratch map is avoided by sorting both
      std::sort(v.begin(), v.end());
      auto us = u;
      std::sort(us.begin(), us.end());
      i = j = 0;
      while (i < v.size() && j < us.size()) {
        if (v[i].first < us[j].first)
          ++i;
        else if (us[j].first < v[i].first)
          ++j;
        else {
          dot += v[i].second * us[j].second;
          ++i;
          ++j;
        }
      }
      if (dot != 0.0) {
        // v -= dot * u (u may touch dofs absent from v)
        std::vector<std::pair<std::uint32_t, double>> out;
        out.reserve(v.size() + us.size());
        i = j = 0;
        while (i < v.size() || j < us.size()) {
          if (j >= us.size() || (i < v.size() && v[i].first < us[j].first))
            out.push_back(v[i++]);
          else if (i >= v.size() || us[j].first < v[i].first) {
            out.emplace_back(us[j].first, -dot * us[j].second);
            ++j;
          } else {
            out.emplace_back(v[i].first, v[i].second - dot * us[j].second);
            ++i;
            ++j;
          }
        }
        v = std::move(out);
      }
    }
    double n2 = 0;
    for (auto [d, w] : v) n2 += w * w;
    if (n2 < 1e-20) return;
    double inv = 1.0 / std::sqrt(n2);
    for (auto& [d, w] : v) w *= inv;
    vecs.push_back(std::move(v));
  }

  void project(double* x) const {
    for (const auto& v : vecs) {
      double dot = 0;
      for (auto [d, w] : v) dot += w * x[d];
      for (auto [d, w] : v) x[d] -= dot * w;
    }
  }
  bool empty() const { return vecs.empty(); }
};

/// Translations per component, restricted to active dofs.
inline NullSpace translation_null_space(const std::vector<std::int32_t>& node_comp,
                                        const std::vector<std::uint8_t>& active_node,
                                        std::int32_t ncomps, int dim) {
  NullSpace ns;
  for (std::int32_t comp = 0; comp < ncomps; ++comp)
    for (int c = 0; c < dim; ++c) {
      std::vector<std::uint32_t> dofs;
      for (std::size_t i = 0; i < node_comp.size(); ++i)
        if (node_comp[i] == comp && active_node[i])
          dofs.push_back(std::uint32_t(i * dim + c));
      ns.add_indicator(dofs);
    }
  return ns;
}

/// Unwrapped lattice coordinates for the voxels of one phase under
/// node-sharing adjacency; clusters that wrap around the torus are flagged
/// (their coordinates are only defined modulo n there).
struct UnwrappedClusters {
  std::vector<std::int32_t> comp;                      // per voxel, -1 other phase
  std::vector<std::array<std::int32_t, 3>> coords;     // per voxel
  std::vector<std::uint8_t> wraps;                     // per cluster
  std::int32_t count = 0;
};

inline UnwrappedClusters unwrap_phase(const CellGeometry& g, bool fluid_phase) {
  UnwrappedClusters out;
  const std::size_t total = g.voxel_count();
  out.comp.assign(total, -1);
  out.coords.assign(total, {0, 0, 0});
  const int n = g.n, nzv = g.nz();
  auto in_phase = [&](std::size_t id) { return g.fluid(id) == fluid_phase; };
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < total; ++seed) {
    if (out.comp[seed] >= 0 || !in_phase(seed)) continue;
    std::int32_t cid = out.count++;
    out.wraps.push_back(0);
    out.comp[seed] = cid;
    out.coords[seed] = {0, 0, 0};
    stack.push_back(seed);
    while (!stack.empty()) {
      std::size_t cur = stack.back();
      stack.pop_back();
      int i = int(cur % n), j = int((cur / n) % n), k = int(cur / (std::size_t(n) * n));
      int zr = g.dim == 3 ? 1 : 0;
      for (int dk = -zr; dk <= zr; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            if (!di && !dj && !dk) continue;
            std::size_t nb = g.index((i + di + n) % n, (j + dj + n) % n,
                                     g.dim == 3 ? (k + dk + nzv) % nzv : 0);
            if (!in_phase(nb)) continue;
            std::array<std::int32_t, 3> expect = {out.coords[cur][0] + di,
                                                  out.coords[cur][1] + dj,
                                                  out.coords[cur][2] + dk};
            if (out.comp[nb] < 0) {
              out.comp[nb] = cid;
              out.coords[nb] = expect;
              stack.push_back(nb);
            } else if (out.coords[nb] != expect) {
              out.wraps[cid] = 1;
            }
          }
    }
  }
  return out;
}

/// Rigid-body null space of a symmetrized-gradient operator supported on one
/// phase: translations for every cluster, plus rotations for clusters that
/// do not wrap around the torus (wrapping clusters admit no periodic
/// rotation field).
inline NullSpace rigid_null_space(const PeriodicGrid& grid, const CellGeometry& geom,
                                  bool fluid_phase,
                                  const std::vector<std::uint8_t>& active_node,
                                  bool with_rotations) {
  UnwrappedClusters uc = unwrap_phase(geom, fluid_phase);
  auto node_comp = node_components(grid, uc.comp);
  const int dim = grid.dim;
  NullSpace ns = translation_null_space(node_comp, active_node, uc.count, dim);
  if (!with_rotations) return ns;

  // unwrapped node coordinates from any adjacent cluster voxel
  std::vector<std::array<double, 3>> npos(grid.nnodes, {0, 0, 0});
  std::vector<std::uint8_t> has_pos(grid.nnodes, 0);
  for (std::size_t v = 0; v < grid.vox_nodes.size(); ++v) {
    if (uc.comp[v] < 0 || uc.wraps[uc.comp[v]]) continue;
    for (int a = 0; a < grid.corners(); ++a) {
      std::uint32_t nd = grid.vox_nodes[v][a];
      if (has_pos[nd]) continue;
      npos[nd] = {double(uc.coords[v][0] + ((a >> 0) & 1)),
                  double(uc.coords[v][1] + ((a >> 1) & 1)),
                  double(uc.coords[v][2] + ((a >> 2) & 1))};
      has_pos[nd] = 1;
    }
  }
  const int nrot = dim == 2 ? 1 : 3;
  for (std::int32_t cid = 0; cid < uc.count; ++cid) {
    if (uc.wraps[cid]) continue;
    for (int r = 0; r < nrot; ++r) {
      int ax = dim == 2 ? 2 : r;  // rotation axis
      int c1 = (ax + 1) % 3, c2 = (ax + 2) % 3;
      std::vector<std::pair<std::uint32_t, double>> vec;
      for (std::size_t i = 0; i < grid.nnodes; ++i) {
        if (node_comp[i] != cid || !active_node[i] || !has_pos[i]) continue;
        // v = e_ax x (y - 0): components (c1, c2) = (-y_c2, +y_c1)
        vec.emplace_back(std::uint32_t(i * dim + c1), -npos[i][c2]);
        vec.emplace_back(std::uint32_t(i * dim + c2), npos[i][c1]);
      }
      ns.add_general(std::move(vec));
    }
  }
  return ns;
}

struct KrylovStats {
  int iterations = 0;
  double rel_residual = 0;
  bool converged = false;
};

/// Preconditioned conjugate gradients on the subspace selected by the
/// active-dof mask, with null-space projection applied to every iterate.
template <class ApplyFn>
KrylovStats pcg(ApplyFn&& A, const std::vector<double>& b, std::vector<double>& x,
                const std::vector<double>& diag, const std::vector<std::uint8_t>& active,
                const NullSpace& ns, double tol, int maxit) {
  const std::size_t n = b.size();
  std::vector<double> r(n), z(n), p(n), Ap(n);
  std::vector<double> dinv(n);
  for (std::size_t i = 0; i < n; ++i)
    dinv[i] = (active[i] && diag[i] > 0) ? 1.0 / diag[i] : 0.0;
  auto mask = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i)
      if (!active[i]) v[i] = 0.0;
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& c) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * c[i];
    return s;
  };

  mask(x);
  ns.project(x.data());
  A(x.data(), Ap.data());
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
  mask(r);
  ns.project(r.data());
  double bnorm = std::sqrt(dot(r, r) + 1e-300);
  {
    std::vector<double> b2 = b;
    mask(b2);
    ns.project(b2.data());
    double bn = std::sqrt(dot(b2, b2));
    if (bn > 0) bnorm = bn;
  }
  KrylovStats st;
  double rn = std::sqrt(dot(r, r));
  if (rn <= tol * bnorm) {
    st.converged = true;
    st.rel_residual = rn / bnorm;
    return st;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
  ns.project(z.data());
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= maxit; ++it) {
    A(p.data(), Ap.data());
    mask(Ap);
    ns.project(Ap.data());
    double pAp = dot(p, Ap);
    if (pAp <= 0) {
      st.iterations = it;
      st.rel_residual = std::sqrt(dot(r, r)) / bnorm;
      return st;  // lost positive definiteness: caller reports
    }
    double alpha = rz / pAp;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    rn = std::sqrt(dot(r, r));
    if (rn <= tol * bnorm) {
      ns.project(x.data());
      st.iterations = it;
      st.rel_residual = rn / bnorm;
      st.converged = true;
      return st;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    ns.project(z.data());
    double rz2 = dot(r, z);
    double beta = rz2 / rz;
    rz = rz2;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  st.iterations = maxit;
  st.rel_residual = rn / bnorm;
  return st;
}

/// Preconditioned MINRES for symmetric (possibly indefinite) systems, same
/// masking and projection contract as pcg. Preconditioner is diagonal SPD.
template <class ApplyFn>
KrylovStats minres(ApplyFn&& A, const std::vector<double>& b, std::vector<double>& x,
                   const std::vector<double>& diag, const std::vector<std::uint8_t>& active,
                   const NullSpace& ns, double tol, int maxit) {
  const std::size_t n = b.size();
  std::vector<double> dinv(n);
  for (std::size_t i = 0; i < n; ++i)
    dinv[i] = (active[i] && diag[i] != 0) ? 1.0 / std::abs(diag[i]) : 0.0;
  auto clean = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i)
      if (!active[i]) v[i] = 0.0;
    ns.project(v.data());
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& c) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * c[i];
    return s;
  };
  std::vector<double> r1(n), r2(n), y(n), v(n), w(n, 0.0), w1(n, 0.0), w2(n, 0.0);

  clean(x);
  A(x.data(), y.data());
  for (std::size_t i = 0; i < n; ++i) r1[i] = b[i] - y[i];
  clean(r1);
  for (std::size_t i = 0; i < n; ++i) y[i] = dinv[i] * r1[i];
  ns.project(y.data());
  double beta1 = std::sqrt(std::max(0.0, dot(r1, y)));
  if (beta1 == 0) return {0, 0.0, true};

  double oldb = 0, beta = beta1, dbar = 0, epsln = 0, phibar = beta1;
  double cs = -1, sn = 0;
  r2 = r1;
  KrylovStats st;
  for (int it = 1; it <= maxit; ++it) {
    for (std::size_t i = 0; i < n; ++i) v[i] = y[i] / beta;
    A(v.data(), y.data());
    clean(y);
    if (it >= 2)
      for (std::size_t i = 0; i < n; ++i) y[i] -= (beta / oldb) * r1[i];
    double alfa = dot(v, y);
    for (std::size_t i = 0; i < n; ++i) y[i] -= (alfa / beta) * r2[i];
    r1 = r2;
    r2 = y;
    for (std::size_t i = 0; i < n; ++i) y[i] = dinv[i] * r2[i];
    ns.project(y.data());
    oldb = beta;
    beta = std::sqrt(std::max(0.0, dot(r2, y)));

    double oldeps = epsln;
    double delta = cs * dbar + sn * alfa;
    double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::sqrt(gbar * gbar + beta * beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    double phi = cs * phibar;
    phibar = sn * phibar;

    std::swap(w1, w2);  // w1 <- w_{k-2}
    std::swap(w2, w);   // w2 <- w_{k-1}
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
      x[i] += phi * w[i];
    }
    st.iterations = it;
    st.rel_residual = phibar / beta1;
    if (st.rel_residual <= tol) {
      ns.project(x.data());
      st.converged = true;
      return st;
    }
    if (beta < 1e-300) break;
  }
  ns.project(x.data());
  return st;
}

// ---- phase integrals of fields -------------------------------------------

/// int_phase D(u): symmetrized gradient integral over voxels with weight[v].
inline Mat3 integral_sym_gradient(const PeriodicGrid& g, const ElementTables& t,
                                  const std::vector<double>& weight,
                                  const std::vector<double>& u) {
  Mat3 r;
  const int nc = g.corners(), d = g.dim;
  for (std::size_t v = 0; v < g.vox_nodes.size(); ++v) {
    double wv = weight[v];
    if (wv == 0) continue;
    const auto& nd = g.vox_nodes[v];
    for (int a = 0; a < nc; ++a)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double contrib = 0.5 * (t.G[i][a] * u[std::size_t(nd[a]) * d + j] +
                                  t.G[j][a] * u[std::size_t(nd[a]) * d + i]);
          r.a[i][j] += wv * contrib;
        }
  }
  return r;
}

inline double integral_div(const PeriodicGrid& g, const ElementTables& t,
                           const std::vector<double>& weight,
                           const std::vector<double>& u) {
  double r = 0;
  const int nc = g.corners(), d = g.dim;
  for (std::size_t v = 0; v < g.vox_nodes.size(); ++v) {
    double wv = weight[v];
    if (wv == 0) continue;
    const auto& nd = g.vox_nodes[v];
    for (int a = 0; a < nc; ++a)
      for (int i = 0; i < d; ++i) r += wv * t.G[i][a] * u[std::size_t(nd[a]) * d + i];
  }
  return r;
}

/// int_phase grad(theta) for a scalar field.
inline Vec3 integral_gradient(const PeriodicGrid& g, const ElementTables& t,
                              const std::vector<double>& weight,
                              const std::vector<double>& u) {
  Vec3 r = {0, 0, 0};
  const int nc = g.corners();
  for (std::size_t v = 0; v < g.vox_nodes.size(); ++v) {
    double wv = weight[v];
    if (wv == 0) continue;
    const auto& nd = g.vox_nodes[v];
    for (int a = 0; a < nc; ++a)
      for (int i = 0; i < g.dim; ++i) r[i] += wv * t.G[i][a] * u[nd[a]];
  }
  return r;
}

/// int_phase u for a scalar nodal field (Q1 interpolant integral).
inline double integral_value(const PeriodicGrid& g, const ElementTables& t,
                             const std::vector<double>& weight,
                             const std::vector<double>& u) {
  double r = 0;
  const int nc = g.corners();
  for (std::size_t v = 0; v < g.vox_nodes.size(); ++v) {
    double wv = weight[v];
    if (wv == 0) continue;
    const auto& nd = g.vox_nodes[v];
    for (int a = 0; a < nc; ++a) r += wv * t.NI[a] * u[nd[a]];
  }
  return r;
}

inline Vec3 integral_vector_value(const PeriodicGrid& g, const ElementTables& t,
                                  const std::vector<double>& weight,
                                  const std::vector<double>& u) {
  Vec3 r = {0, 0, 0};
  const int nc = g.corners(), d = g.dim;
  for (std::size_t v = 0; v < g.vox_nodes.size(); ++v) {
    double wv = weight[v];
    if (wv == 0) continue;
    const auto& nd = g.vox_nodes[v];
    for (int a = 0; a < nc; ++a)
      for (int i = 0; i < d; ++i) r[i] += wv * t.NI[a] * u[std::size_t(nd[a]) * d + i];
  }
  return r;
}

/// int_phase D(u):D(v) for two nodal vector fields.
inline double pair_integral_DD(const PeriodicGrid& g, const ElementTables& t,
                               const std::vector<double>& weight,
                               const std::vector<double>& u,
                               const std::vector<double>& v) {
  ElemMat e = vector_elem(t, 1.0, 0.0, 0.0, 0.0);
  const int nc = g.corners(), d = g.dim, nl = nc * d;
  double r = 0;
  double ul[24], vl[24];
  for (std::size_t vox = 0; vox < g.vox_nodes.size(); ++vox) {
    double wv = weight[vox];
    if (wv == 0) continue;
    const auto& nd = g.vox_nodes[vox];
    for (int a = 0; a < nc; ++a)
      for (int c = 0; c < d; ++c) {
        ul[a * d + c] = u[std::size_t(nd[a]) * d + c];
        vl[a * d + c] = v[std::size_t(nd[a]) * d + c];
      }
    double s = 0;
    for (int i = 0; i < nl; ++i) {
      double acc = 0;
      for (int j = 0; j < nl; ++j) acc += e[std::size_t(i) * nl + j] * vl[j];
      s += ul[i] * acc;
    }
    r += wv * s;
  }
  return r;
}

/// int_phase div(u) div(v).
inline double pair_integral_divdiv(const PeriodicGrid& g, const ElementTables& t,
                                   const std::vector<double>& weight,
                                   const std::vector<double>& u,
                                   const std::vector<double>& v) {
  ElemMat e = vector_elem(t, 0.0, 1.0, 0.0, 0.0);
  const int nc = g.corners(), d = g.dim, nl = nc * d;
  double r = 0;
  double ul[24], vl[24];
  for (std::size_t vox = 0; vox < g.vox_nodes.size(); ++vox) {
    double wv = weight[vox];
    if (wv == 0) continue;
    const auto& nd = g.vox_nodes[vox];
    for (int a = 0; a < nc; ++a)
      for (int c = 0; c < d; ++c) {
        ul[a * d + c] = u[std::size_t(nd[a]) * d + c];
        vl[a * d + c] = v[std::size_t(nd[a]) * d + c];
      }
    double s = 0;
    for (int i = 0; i < nl; ++i) {
      double acc = 0;
      for (int j = 0; j < nl; ++j) acc += e[std::size_t(i) * nl + j] * vl[j];
      s += ul[i] * acc;
    }
    r += wv * s;
  }
  return r;
}

inline std::vector<double> phase_weights(const CellGeometry& g, bool fluid_phase) {
  std::vector<double> w(g.voxel_count());
  for (std::size_t v = 0; v < w.size(); ++v)
    w[v] = g.fluid(v) == fluid_phase ? 1.0 : 0.0;
  return w;
}

}  // namespace poroscale::fem
