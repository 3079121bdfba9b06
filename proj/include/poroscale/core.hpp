#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace poroscale {

// Error taxonomy; the CLI maps these onto its exit-code contract.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

using Vec3 = std::array<double, 3>;

/// Dense 3x3 matrix with value semantics; used for phase averages,
/// conduction/permeability matrices and strain loads.
struct Mat3 {
  double a[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

  double& operator()(int i, int j) { return a[i][j]; }
  double operator()(int i, int j) const { return a[i][j]; }

  Mat3& operator+=(const Mat3& o) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a[i][j] += o.a[i][j];
    return *this;
  }
  Mat3& operator-=(const Mat3& o) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a[i][j] -= o.a[i][j];
    return *this;
  }
  Mat3& operator*=(double s) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a[i][j] *= s;
    return *this;
  }
  friend Mat3 operator+(Mat3 x, const Mat3& y) { return x += y; }
  friend Mat3 operator-(Mat3 x, const Mat3& y) { return x -= y; }
  friend Mat3 operator*(double s, Mat3 x) { return x *= s; }

  double trace() const { return a[0][0] + a[1][1] + a[2][2]; }
  double norm() const {
    double s = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += a[i][j] * a[i][j];
    return std::sqrt(s);
  }
  double max_abs() const {
    double s = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s = std::max(s, std::abs(a[i][j]));
    return s;
  }
  static Mat3 identity(int dim = 3) {
    Mat3 m;
    for (int i = 0; i < dim; ++i) m.a[i][i] = 1.0;
    return m;
  }
  /// Symmetrized unit load J^{ij} = (e_i x e_j + e_j x e_i)/2.
  static Mat3 J(int i, int j) {
    Mat3 m;
    m.a[i][j] += 0.5;
    m.a[j][i] += 0.5;
    return m;
  }
};

inline double dot(const Mat3& x, const Mat3& y) {
  double s = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += x.a[i][j] * y.a[i][j];
  return s;
}

/// Fourth-rank tensor on R^{3x3}; only the leading dim x dim block is
/// populated in 2D mode. Contraction convention (B (x) C):A = B (C:A).
struct Tensor4 {
  double a[3][3][3][3] = {};

  Tensor4& operator+=(const Tensor4& o) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) a[i][j][k][l] += o.a[i][j][k][l];
    return *this;
  }
  Tensor4& operator*=(double s) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) a[i][j][k][l] *= s;
    return *this;
  }
  friend Tensor4 operator+(Tensor4 x, const Tensor4& y) { return x += y; }
  friend Tensor4 operator*(double s, Tensor4 x) { return x *= s; }

  /// Adds M (x) J^{pq}.
  void add_dyad(const Mat3& m, int p, int q) {
    Mat3 j = Mat3::J(p, q);
    for (int i = 0; i < 3; ++i)
      for (int jj = 0; jj < 3; ++jj)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l)
            a[i][jj][k][l] += m.a[i][jj] * j.a[k][l];
  }

  Mat3 contract(const Mat3& x) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) s += a[i][j][k][l] * x.a[k][l];
        r.a[i][j] = s;
      }
    return r;
  }

  double norm() const {
    double s = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) s += a[i][j][k][l] * a[i][j][k][l];
    return std::sqrt(s);
  }

  /// Sum_{i,j} J^{ij} (x) J^{ij}: the identity on symmetric matrices.
  static Tensor4 sym_identity(int dim) {
    Tensor4 t;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) t.add_dyad(Mat3::J(i, j), i, j);
    return t;
  }
};

/// Mandel (sqrt-2 shear normalized) matrix form of a minor-symmetric
/// fourth-rank tensor: 6x6 in 3D, 3x3 in 2D. Under this normalization the
/// tensor acting on symmetric matrices and the matrix acting on vectors are
/// isometric, so symmetry and eigenvalue checks are plain matrix checks.
struct MandelMatrix {
  int dim = 3;
  std::array<std::array<double, 6>, 6> m = {};

  int size() const { return dim == 2 ? 3 : 6; }

  static constexpr int pair_i3[6] = {0, 1, 2, 1, 0, 0};
  static constexpr int pair_j3[6] = {0, 1, 2, 2, 2, 1};
  static constexpr int pair_i2[3] = {0, 1, 0};
  static constexpr int pair_j2[3] = {0, 1, 1};

  void pair(int p, int& i, int& j) const {
    if (dim == 2) {
      i = pair_i2[p];
      j = pair_j2[p];
    } else {
      i = pair_i3[p];
      j = pair_j3[p];
    }
  }
  double weight(int p) const {
    int i, j;
    pair(p, i, j);
    return i == j ? 1.0 : std::sqrt(2.0);
  }
};

inline MandelMatrix to_mandel(const Tensor4& t, int dim) {
  MandelMatrix r;
  r.dim = dim;
  int s = r.size();
  for (int p = 0; p < s; ++p)
    for (int q = 0; q < s; ++q) {
      int i, j, k, l;
      r.pair(p, i, j);
      r.pair(q, k, l);
      // symmetrize over the minor index pairs so representation is exact
      double v = 0.25 * (t.a[i][j][k][l] + t.a[j][i][k][l] +
                         t.a[i][j][l][k] + t.a[j][i][l][k]);
      r.m[p][q] = r.weight(p) * r.weight(q) * v;
    }
  return r;
}

/// Eigenvalues of a symmetric n x n matrix (n <= 6) by cyclic Jacobi
/// rotations, returned ascending.
inline std::vector<double> jacobi_eigenvalues(std::array<std::array<double, 6>, 6> a,
                                              int n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

inline std::vector<double> eigenvalues(const MandelMatrix& m) {
  return jacobi_eigenvalues(m.m, m.size());
}

inline std::vector<double> eigenvalues_sym3(const Mat3& m, int dim) {
  std::array<std::array<double, 6>, 6> a = {};
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a[i][j] = 0.5 * (m.a[i][j] + m.a[j][i]);
  return jacobi_eigenvalues(a, dim);
}

/// FNV-1a 64-bit; used for manifest content hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}
inline std::uint64_t fnv1a(const std::string& s) {
  return fnv1a(s.data(), s.size());
}

}  // namespace poroscale
