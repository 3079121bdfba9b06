#pragma once

#include <cstdint>
#include <fstream>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "poroscale/core.hpp"

namespace poroscale {

/**
 * Voxelized periodic unit cell Y = (0,1)^dim. chi marks the fluid part Y_f
 * (true = fluid), the complement is the solid skeleton Y_s. The grid wraps
 * periodically in every axis; the fluid/solid interface is the set of faces
 * between voxels of different phase.
 *
 * Immutable after construction; safe to share across concurrent solves.
 */
struct CellGeometry {
  int dim = 3;  // 2 or 3
  int n = 0;    // voxels per axis
  std::vector<std::uint8_t> chi;

  std::size_t voxel_count() const {
    std::size_t c = std::size_t(n) * n;
    return dim == 3 ? c * n : c;
  }
  int nz() const { return dim == 3 ? n : 1; }

  std::size_t index(int i, int j, int k) const {
    return std::size_t(i) + std::size_t(n) * (std::size_t(j) + std::size_t(n) * k);
  }
  bool fluid(std::size_t id) const { return chi[id] != 0; }
  bool fluid(int i, int j, int k) const { return chi[index(i, j, k)] != 0; }

  static CellGeometry uniform(int dim, int n, bool fluid) {
    CellGeometry g;
    g.dim = dim;
    g.n = n;
    g.chi.assign(g.voxel_count(), fluid ? 1 : 0);
    return g;
  }
  static CellGeometry all_fluid(int dim, int n) { return uniform(dim, n, true); }
  static CellGeometry all_solid(int dim, int n) { return uniform(dim, n, false); }

  /// Laminate: the first fluid_layers voxel slabs normal to `axis` are fluid.
  static CellGeometry laminate(int dim, int n, int axis, int fluid_layers) {
    CellGeometry g = all_solid(dim, n);
    for (int k = 0; k < g.nz(); ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          int c[3] = {i, j, k};
          if (c[axis] < fluid_layers) g.chi[g.index(i, j, k)] = 1;
        }
    return g;
  }

  /// Straight fluid channel of square (slab in 2D) cross-section `width`
  /// running through the solid along `axis`, centered in the cell.
  static CellGeometry channel(int dim, int n, int axis, int width) {
    CellGeometry g = all_solid(dim, n);
    int lo = (n - width) / 2, hi = lo + width;
    for (int k = 0; k < g.nz(); ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          int c[3] = {i, j, k};
          bool inside = true;
          for (int d = 0; d < dim; ++d) {
            if (d == axis) continue;
            if (c[d] < lo || c[d] >= hi) inside = false;
          }
          if (inside) g.chi[g.index(i, j, k)] = 1;
        }
    return g;
  }

  /// Centered spherical (circular in 2D) fluid pore of given radius in cell
  /// units; radius < 0.5 keeps the pore strictly interior (isolated).
  static CellGeometry sphere_pore(int dim, int n, double radius) {
    CellGeometry g = all_solid(dim, n);
    double c = 0.5;
    for (int k = 0; k < g.nz(); ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          double p[3] = {(i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / n};
          double r2 = 0;
          for (int d = 0; d < dim; ++d) r2 += (p[d] - c) * (p[d] - c);
          if (r2 <= radius * radius) g.chi[g.index(i, j, k)] = 1;
        }
    return g;
  }

  static CellGeometry random(int dim, int n, double fluid_fraction,
                             std::uint64_t seed) {
    CellGeometry g = all_solid(dim, n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : g.chi) v = u(rng) < fluid_fraction ? 1 : 0;
    return g;
  }

  CellGeometry complement() const {
    CellGeometry g = *this;
    for (auto& v : g.chi) v = v ? 0 : 1;
    return g;
  }

  /// Periodic translation of the voxel pattern.
  CellGeometry translated(int di, int dj, int dk) const {
    CellGeometry g = *this;
    for (int k = 0; k < nz(); ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          int si = ((i - di) % n + n) % n;
          int sj = ((j - dj) % n + n) % n;
          int sk = dim == 3 ? ((k - dk) % n + n) % n : 0;
          g.chi[g.index(i, j, k)] = chi[index(si, sj, sk)];
        }
    return g;
  }
};

/// Fluid voxel fraction m = <chi>_Y.
inline double porosity(const CellGeometry& g) {
  std::size_t c = 0;
  for (auto v : g.chi) c += v;
  return double(c) / double(g.voxel_count());
}

struct ConnectivityReport {
  bool fluid_connected = false;   // percolates in every axis direction
  bool solid_connected = false;
  bool isolated_pores = false;    // fluid percolates in no direction
  std::array<bool, 3> fluid_axis = {false, false, false};
  std::array<bool, 3> solid_axis = {false, false, false};
};

namespace detail {

/// Percolation of one phase under periodic 6-connectivity (4 in 2D).
/// BFS labels each voxel with unwrapped lattice coordinates; an edge whose
/// endpoints disagree by a multiple of n in axis d closes a periodic loop,
/// i.e. the phase connects to its own translate across the cell in d.
inline std::array<bool, 3> percolation_axes(const CellGeometry& g, bool phase_fluid) {
  const int n = g.n, nzv = g.nz();
  const std::size_t total = g.voxel_count();
  std::vector<std::int8_t> visited(total, 0);
  std::vector<std::array<std::int32_t, 3>> off(total);
  std::array<bool, 3> wrap = {false, false, false};

  auto in_phase = [&](std::size_t id) { return g.fluid(id) == phase_fluid; };

  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < total; ++seed) {
    if (visited[seed] || !in_phase(seed)) continue;
    visited[seed] = 1;
    off[seed] = {0, 0, 0};
    stack.push_back(seed);
    while (!stack.empty()) {
      std::size_t cur = stack.back();
      stack.pop_back();
      int i = int(cur % n), j = int((cur / n) % n), k = int(cur / (std::size_t(n) * n));
      int c[3] = {i, j, k};
      for (int d = 0; d < g.dim; ++d) {
        for (int s = -1; s <= 1; s += 2) {
          int nb[3] = {c[0], c[1], c[2]};
          int lim = d == 2 ? nzv : n;
          nb[d] = (c[d] + s + lim) % lim;
          std::size_t nid = g.index(nb[0], nb[1], nb[2]);
          if (!in_phase(nid)) continue;
          std::array<std::int32_t, 3> expect = off[cur];
          expect[d] += s;
          if (!visited[nid]) {
            visited[nid] = 1;
            off[nid] = expect;
            stack.push_back(nid);
          } else {
            for (int a = 0; a < 3; ++a)
              if (expect[a] != off[nid][a]) wrap[a] = true;
          }
        }
      }
    }
  }
  return wrap;
}

}  // namespace detail

inline ConnectivityReport connectivity(const CellGeometry& g) {
  ConnectivityReport r;
  r.fluid_axis = detail::percolation_axes(g, true);
  r.solid_axis = detail::percolation_axes(g, false);
  bool f_all = true, f_any = false, s_all = true;
  for (int d = 0; d < g.dim; ++d) {
    f_all = f_all && r.fluid_axis[d];
    f_any = f_any || r.fluid_axis[d];
    s_all = s_all && r.solid_axis[d];
  }
  r.fluid_connected = f_all;
  r.solid_connected = s_all;
  r.isolated_pores = !f_any;
  return r;
}

/// Random geometry whose fluid and solid phases both percolate in every
/// axis; tries consecutive seeds deterministically.
inline CellGeometry random_connected(int dim, int n, double fluid_fraction,
                                     std::uint64_t seed) {
  for (std::uint64_t s = seed; s < seed + 1000; ++s) {
    CellGeometry g = CellGeometry::random(dim, n, fluid_fraction, s);
    ConnectivityReport r = connectivity(g);
    if (r.fluid_connected && r.solid_connected) return g;
  }
  throw SolverError("random_connected: no percolating sample found");
}

enum class GeometryFormat { AsciiV1, BinaryV1b };

inline void save_geometry(const CellGeometry& g, const std::string& path,
                          GeometryFormat fmt = GeometryFormat::AsciiV1) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  const char* tag = fmt == GeometryFormat::AsciiV1 ? "v1" : "v1b";
  f << "poroscale-cell " << tag << " dim=" << g.dim << " n=" << g.n << "\n";
  if (fmt == GeometryFormat::AsciiV1) {
    std::size_t per_line = 0;
    for (std::size_t id = 0; id < g.voxel_count(); ++id) {
      f << (g.chi[id] ? '1' : '0');
      if (++per_line == 64) {
        f << '\n';
        per_line = 0;
      }
    }
    if (per_line) f << '\n';
  } else {
    f.write(reinterpret_cast<const char*>(g.chi.data()),
            std::streamsize(g.voxel_count()));
  }
  if (!f) throw IoError("write failed: " + path);
}

inline CellGeometry load_geometry(const std::string& path, int expected_dim = 0) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string header;
  if (!std::getline(f, header)) throw IoError("malformed header: " + path);
  std::istringstream hs(header);
  std::string magic, tag, dimkv, nkv;
  hs >> magic >> tag >> dimkv >> nkv;
  if (magic != "poroscale-cell" || (tag != "v1" && tag != "v1b") ||
      dimkv.rfind("dim=", 0) != 0 || nkv.rfind("n=", 0) != 0)
    throw IoError("malformed header: " + path);
  CellGeometry g;
  try {
    g.dim = std::stoi(dimkv.substr(4));
    g.n = std::stoi(nkv.substr(2));
  } catch (const std::exception&) {
    throw IoError("malformed header: " + path);
  }
  if (g.dim != 2 && g.dim != 3) throw IoError("unsupported dim in " + path);
  if (g.n <= 0) throw IoError("empty grid: " + path);
  if (expected_dim != 0 && g.dim != expected_dim)
    throw IoError("dimension mismatch: file " + path + " is " +
                  std::to_string(g.dim) + "D, expected " +
                  std::to_string(expected_dim) + "D");
  const std::size_t total = CellGeometry{g.dim, g.n, {}}.voxel_count();
  g.chi.assign(total, 0);
  if (tag == "v1") {
    std::size_t got = 0;
    char c;
    while (got < total && f.get(c)) {
      if (c == '0' || c == '1')
        g.chi[got++] = std::uint8_t(c - '0');
      else if (!std::isspace(static_cast<unsigned char>(c)))
        throw IoError("non-binary voxel value in " + path);
    }
    if (got != total) throw IoError("truncated voxel data in " + path);
  } else {
    f.read(reinterpret_cast<char*>(g.chi.data()), std::streamsize(total));
    if (std::size_t(f.gcount()) != total)
      throw IoError("truncated voxel data in " + path);
    for (auto v : g.chi)
      if (v > 1) throw IoError("non-binary voxel value in " + path);
  }
  return g;
}

}  // namespace poroscale
