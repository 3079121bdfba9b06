#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "poroscale/core.hpp"
#include "poroscale/regimes.hpp"
#include "poroscale/tensors.hpp"

namespace poroscale {

namespace macro1d {

/// Dense LU with partial pivoting for the small per-node blocks.
inline void solve_dense(int n, std::vector<double>& A, std::vector<double>& b) {
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(A[r * n + c]) > std::abs(A[piv * n + c])) piv = r;
    if (std::abs(A[piv * n + c]) < 1e-300)
      throw SolverError("macro block solver: singular block");
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(A[c * n + k], A[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (int r = c + 1; r < n; ++r) {
      double f = A[r * n + c] / A[c * n + c];
      if (f == 0) continue;
      for (int k = c; k < n; ++k) A[r * n + k] -= f * A[c * n + k];
      b[r] -= f * b[c];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < n; ++k) s -= A[r * n + k] * b[k];
    b[r] = s / A[r * n + r];
  }
}

/// Block-tridiagonal system with nb x nb blocks, solved by block Thomas
/// elimination.
struct BlockTridiag {
  int nnode = 0, nb = 0;
  std::vector<double> L, D, U, rhs;

  BlockTridiag(int nodes, int block) : nnode(nodes), nb(block) {
    L.assign(std::size_t(nnode) * nb * nb, 0.0);
    D.assign(std::size_t(nnode) * nb * nb, 0.0);
    U.assign(std::size_t(nnode) * nb * nb, 0.0);
    rhs.assign(std::size_t(nnode) * nb, 0.0);
  }
  /// Adds v at (row r of node i) x (field c of node j); |i - j| <= 1.
  void add(int i, int r, int j, int c, double v) {
    std::vector<double>* M = &D;
    if (j == i - 1)
      M = &L;
    else if (j == i + 1)
      M = &U;
    else if (j != i)
      throw InternalError("BlockTridiag: coupling beyond neighbors");
    (*M)[std::size_t(i) * nb * nb + r * nb + c] += v;
  }
  void add_rhs(int i, int r, double v) { rhs[std::size_t(i) * nb + r] += v; }

  void pin(int i, int r, double value) {
    for (int c = 0; c < nb; ++c) {
      L[std::size_t(i) * nb * nb + r * nb + c] = 0;
      D[std::size_t(i) * nb * nb + r * nb + c] = (c == r) ? 1.0 : 0.0;
      U[std::size_t(i) * nb * nb + r * nb + c] = 0;
    }
    rhs[std::size_t(i) * nb + r] = value;
  }

  std::vector<double> solve() {
    const int n = nnode, m = nb;
    std::vector<std::vector<double>> Dw(n), Uw(n), rw(n);
    for (int i = 0; i < n; ++i) {
      Dw[i].assign(&D[std::size_t(i) * m * m], &D[std::size_t(i) * m * m] + m * m);
      Uw[i].assign(&U[std::size_t(i) * m * m], &U[std::size_t(i) * m * m] + m * m);
      rw[i].assign(&rhs[std::size_t(i) * m], &rhs[std::size_t(i) * m] + m);
    }
    for (int i = 1; i < n; ++i) {
      std::vector<double> X(std::size_t(m) * m), y(m);
      for (int c = 0; c < m; ++c) {
        std::vector<double> A = Dw[i - 1], e(m);
        for (int r = 0; r < m; ++r) e[r] = Uw[i - 1][r * m + c];
        solve_dense(m, A, e);
        for (int r = 0; r < m; ++r) X[r * m + c] = e[r];
      }
      {
        std::vector<double> A = Dw[i - 1];
        y = rw[i - 1];
        solve_dense(m, A, y);
      }
      const double* Li = &L[std::size_t(i) * m * m];
      for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) {
          double s = 0;
          for (int k = 0; k < m; ++k) s += Li[r * m + k] * X[k * m + c];
          Dw[i][r * m + c] -= s;
        }
        double s = 0;
        for (int k = 0; k < m; ++k) s += Li[r * m + k] * y[k];
        rw[i][r] -= s;
      }
    }
    std::vector<double> x(std::size_t(n) * m, 0.0);
    {
      std::vector<double> A = Dw[n - 1], b = rw[n - 1];
      solve_dense(m, A, b);
      for (int r = 0; r < m; ++r) x[std::size_t(n - 1) * m + r] = b[r];
    }
    for (int i = n - 2; i >= 0; --i) {
      std::vector<double> b = rw[i];
      for (int r = 0; r < m; ++r) {
        double s = 0;
        for (int k = 0; k < m; ++k) s += Uw[i][r * m + k] * x[std::size_t(i + 1) * m + k];
        b[r] -= s;
      }
      std::vector<double> A = Dw[i];
      solve_dense(m, A, b);
      for (int r = 0; r < m; ++r) x[std::size_t(i) * m + r] = b[r];
    }
    return x;
  }
};

}  // namespace macro1d

/// Scalar (1,1)-contractions of the effective objects for the 1D runs.
struct MacroCoeffs1D {
  double m = 0, rho_hat = 1, cp_hat = 1;
  double A = 1;  // A_s0[1111]
  double Bs0 = 0, Bs1 = 0, Cs0 = 0, as0 = 1, as1 = 0;
  double Btheta = 1;
  double A2 = 0, A3 = 1, B4 = 0, B1t = 0, B0t = 1;
  double B2 = 0, B3 = 0;

  static MacroCoeffs1D from(const EffectiveCoefficients& c) {
    MacroCoeffs1D r;
    r.m = c.m;
    r.rho_hat = c.rho_hat;
    r.cp_hat = c.cp_hat;
    r.A = c.A_s0.a[0][0][0][0];
    r.Bs0 = c.B_s0.a[0][0];
    r.Bs1 = c.B_s1.a[0][0];
    r.Cs0 = c.C_s0.a[0][0];
    r.as0 = c.a_s0;
    r.as1 = c.a_s1;
    r.Btheta = c.B_theta.a[0][0];
    r.A2 = c.A2.a[0][0][0][0];
    r.A3 = c.A3.a[0][0][0][0];
    r.B4 = c.B4.a[0][0];
    r.B1t = c.B1_theta.a[0][0];
    r.B0t = c.B0_theta.a[0][0];
    r.B2 = c.B2_darcy.a[0][0];
    r.B3 = c.B3_darcy.a[0][0];
    return r;
  }
};

/// Scalar kernels for the 1D runs, on a uniform grid matching the run dt.
struct MacroKernels1D {
  double dt = 0;
  std::vector<double> A4, B5, B2t;  // (2.41) memory terms
  std::vector<double> C2a2, a1t;    // (2.43)
  std::vector<double> C3a3, a2t;    // (2.44)
  std::vector<double> B1;           // Darcy kernel
  std::vector<double> b_theta_f;
  double c_theta_f = 0;

  static MacroKernels1D from(const MemoryKernelSet& k) {
    MacroKernels1D r;
    if (k.times.size() >= 2) r.dt = k.times[1] - k.times[0];
    for (std::size_t q = 0; q < k.times.size(); ++q) {
      if (q < k.A4.size()) r.A4.push_back(k.A4[q].a[0][0][0][0]);
      if (q < k.B5.size()) r.B5.push_back(k.B5[q].a[0][0]);
      if (q < k.B2_theta.size()) r.B2t.push_back(k.B2_theta[q].a[0][0]);
      if (q < k.C2.size()) r.C2a2.push_back(k.C2[q].a[0][0] + k.a2[q]);
      if (q < k.a1_theta.size()) r.a1t.push_back(k.a1_theta[q]);
      if (q < k.C3.size()) r.C3a3.push_back(k.C3[q].a[0][0] + k.a3[q]);
      if (q < k.a2_theta.size()) r.a2t.push_back(k.a2_theta[q]);
      if (q < k.B1_darcy.size()) r.B1.push_back(k.B1_darcy[q].a[0][0]);
    }
    r.b_theta_f = k.b_theta_f;
    r.c_theta_f = k.c_theta_f;
    return r;
  }
};

enum class StateEqVariant { Thm2, Lemma58 };     // (2.16) vs (5.32): m on beta0f
enum class DarcyUFactor { M, One };              // (2.26) vs (5.54)
enum class ContinuityThetaSign { Plus, Minus };  // (5.53) vs (2.25)

struct MacroProblemSpec {
  ModelSelection model;
  MacroCoeffs1D coeffs;
  MacroKernels1D kernels;
  int nx = 64;
  double dt = 1e-3;
  double T = 0.1;
  std::function<double(double, double)> F = [](double, double) { return 0.0; };
  std::function<double(double, double)> Psi = [](double, double) { return 0.0; };
  std::function<double(double)> w0 = [](double) { return 0.0; };
  std::function<double(double)> wf0 = [](double) { return 0.0; };  // fluid displacement
  std::function<double(double)> v0 = [](double) { return 0.0; };
  std::function<double(double)> theta0 = [](double) { return 0.0; };
  StateEqVariant state_eq = StateEqVariant::Lemma58;
  DarcyUFactor darcy_u = DarcyUFactor::One;
  ContinuityThetaSign continuity_sign = ContinuityThetaSign::Plus;
  int store_every = 1;

  void validate() const {
    if (nx < 2) throw ParameterError("macro run needs nx >= 2");
    if (!(dt > 0) || !(T > 0)) throw ParameterError("macro run needs dt, T > 0");
  }
};

struct MacroTrajectory {
  std::vector<double> x;
  std::vector<double> times;
  std::map<std::string, std::vector<std::vector<double>>> fields;
  std::vector<double> energy;
  std::vector<std::string> notes;
};

namespace detail {

inline double lim_val(const ExtReal& x, const char* name) {
  if (!x.finite())
    throw ParameterError(std::string("macro run: ") + name + " must be finite");
  return x.value();
}

inline void require_kernel_horizon(const std::vector<double>& kernel,
                                   std::size_t steps, const char* what) {
  if (kernel.size() < steps + 1)
    throw SolverError(std::string("kernel horizon shorter than the run horizon for ") +
                      what + " (no extrapolation)");
}

/// Linear map (pi, p, q) <- (d, tbar, p_prev, s) from the pressure closures
/// (2.14)-(2.16): s is the extra state-equation temperature input (theta_f
/// in the isolated and two-velocity variants, m-weighted theta otherwise).
struct PressureClosure {
  double Pd[3], Pt[3], Pp[3], Ps[3];

  PressureClosure(double eta0, double p_star, double nu0, double dt, double beta0s,
                  double Cs0, double as0, double as1, double m, double onemfac) {
    double A[9] = {1.0, 0.0, eta0 * as1,
                   p_star / eta0, 1.0, 0.0,
                   0.0, -(1.0 + nu0 / (p_star * dt)), 1.0};
    auto solve3 = [&](double b0, double b1, double b2, double* out) {
      std::vector<double> M(A, A + 9), b = {b0, b1, b2};
      macro1d::solve_dense(3, M, b);
      out[0] = b[0];
      out[1] = b[1];
      out[2] = b[2];
    };
    solve3(-eta0 * (Cs0 + as0), -p_star, 0.0, Pd);
    solve3(as0 * beta0s, p_star * onemfac * beta0s / eta0, 0.0, Pt);
    solve3(0.0, 0.0, -(nu0 / (p_star * dt)), Pp);
    solve3(0.0, 0.0, 1.0, Ps);
    (void)m;
  }
  double pi(double d, double t, double pp, double s) const {
    return Pd[0] * d + Pt[0] * t + Pp[0] * pp + Ps[0] * s;
  }
  double p(double d, double t, double pp, double s) const {
    return Pd[1] * d + Pt[1] * t + Pp[1] * pp + Ps[1] * s;
  }
  double q(double d, double t, double pp, double s) const {
    return Pd[2] * d + Pt[2] * t + Pp[2] * pp + Ps[2] * s;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Theorem 2(I)/(II): one-velocity thermo-poroelasticity
// ---------------------------------------------------------------------------

/// Implicit monolithic march of (2.12)-(2.16); the isolated-pores variant
/// (II) tracks the reconstructed fluid temperature (5.45)-(5.47) in the
/// state equation (2.19) and the heat equation (2.20).
inline MacroTrajectory run_thermo_poro_elastic(const MacroProblemSpec& spec) {
  spec.validate();
  const auto& lim = spec.model.effective_limits;
  const bool isolated = spec.model.model == Model::ThermoPoroElastic_IsolatedPores;
  if (spec.model.model != Model::ThermoPoroElastic_OneVelocity && !isolated)
    throw ParameterError("run_thermo_poro_elastic: wrong model selection");
  const double tau0 = detail::lim_val(lim.tau0, "tau0");
  const double nu0 = detail::lim_val(lim.nu0, "nu0");
  const double p_star = detail::lim_val(lim.p_star, "p_star");
  const double eta0 = detail::lim_val(lim.eta0, "eta0");
  const double beta0s = detail::lim_val(lim.beta0s, "beta0s");
  const double beta0f = detail::lim_val(lim.beta0f, "beta0f");
  const double lambda0 = detail::lim_val(lim.lambda0, "lambda0");
  const double c_pf = lim.c_pf, c_ps = lim.c_ps;
  const MacroCoeffs1D& c = spec.coeffs;
  if (!(c.A > 0)) throw SolverError("run_thermo_poro_elastic: A_s0 not positive definite");

  const int nx = spec.nx, nn = nx + 1, nb = 3;  // (u, v, theta)
  const double h = 1.0 / nx, dt = spec.dt;
  const int nsteps = int(std::round(spec.T / dt));
  const double mfac = spec.state_eq == StateEqVariant::Lemma58 ? c.m : 1.0;

  detail::PressureClosure cl(eta0, p_star, nu0, dt, beta0s, c.Cs0, c.as0, c.as1,
                             c.m, 1.0 - c.m);
  // effective elastic weight for the energy functional: the flux coefficient
  // of the instantaneously slaved (nu0 = 0) closure minus the pressure-term
  // shares, so elastic + pressure reproduces the flux-derived storage
  double W_el;
  {
    detail::PressureClosure cl0(eta0, p_star, 0.0, 1.0, beta0s, c.Cs0, c.as0,
                                c.as1, c.m, 1.0 - c.m);
    double qd = cl0.Pd[2], pid = cl0.Pd[0], pdd = cl0.Pd[1];
    double a_eff = lambda0 * c.A + c.Bs0 + (c.Bs1 - 1.0) * qd - pid;
    W_el = a_eff - pdd * pdd / p_star - pid * pid / eta0;
  }

  std::vector<double> u(nn, 0.0), v(nn, 0.0), th(nn, 0.0), tf(nn, 0.0);
  std::vector<double> pe(nx, 0.0), qe(nx, 0.0), pie(nx, 0.0);
  std::vector<std::vector<double>> h_hist(nn);
  for (int i = 0; i < nn; ++i) {
    double x = i * h;
    if (tau0 > 0) {
      u[i] = spec.w0(x);
      v[i] = spec.v0(x);
    }
    if (tau0 + beta0s > 0 || isolated) th[i] = spec.theta0(x);
  }
  u[0] = u[nx] = v[0] = v[nx] = th[0] = th[nx] = 0.0;
  const double tcpf = isolated ? tau0 * c_pf : 0.0;
  const double Ct = isolated
                        ? (tau0 * c_ps + beta0s * beta0s / eta0) * (1 - c.m)
                        : tau0 * c.cp_hat + beta0s * beta0s / eta0 * (1 - c.m);
  const bool tf_convolution = isolated && lim.mu1.finite() && !lim.mu1.is_zero() && tau0 > 0;
  if (tf_convolution && spec.kernels.b_theta_f.empty())
    throw SolverError("isolated-pores run needs the b_theta_f kernel samples");
  if (isolated)
    for (int i = 0; i < nn; ++i) {
      tf[i] = c.m * th[i];
      h_hist[i].push_back(spec.Psi(i * h, 0.0));  // theta stationary at t=0
    }
  // consistent initial element pressures: drop the nu0 rate at t = 0
  {
    detail::PressureClosure cl0(eta0, p_star, 0.0, 1.0, beta0s, c.Cs0, c.as0,
                                c.as1, c.m, 1.0 - c.m);
    for (int e = 0; e < nx; ++e) {
      double d = (u[e + 1] - u[e]) / h, tb = 0.5 * (th[e] + th[e + 1]);
      double s = isolated ? beta0f * 0.5 * (tf[e] + tf[e + 1])
                          : beta0f * mfac * tb;
      pie[e] = cl0.pi(d, tb, 0.0, s);
      pe[e] = cl0.p(d, tb, 0.0, s);
      qe[e] = cl0.q(d, tb, 0.0, s);
    }
  }

  MacroTrajectory out;
  out.x.resize(nn);
  for (int i = 0; i < nn; ++i) out.x[i] = i * h;
  out.notes.push_back(std::string("state_eq_variant: ") +
                      (spec.state_eq == StateEqVariant::Lemma58 ? "lemma58" : "thm2"));
  auto energy = [&]() {
    double E = 0;
    for (int e = 0; e < nx; ++e) {
      double d = (u[e + 1] - u[e]) / h;
      E += h * (0.5 * W_el * d * d + 0.5 * pe[e] * pe[e] / p_star +
                0.5 * pie[e] * pie[e] / eta0);
    }
    for (int i = 0; i < nn; ++i) {
      double w = (i == 0 || i == nx) ? 0.5 * h : h;
      E += w * (0.5 * tau0 * c.rho_hat * v[i] * v[i] + 0.5 * Ct * th[i] * th[i] +
                (c.m > 0 ? 0.5 * tcpf * tf[i] * tf[i] / c.m : 0.0));
    }
    return E;
  };
  auto store = [&](double t) {
    out.times.push_back(t);
    out.fields["u"].push_back(u);
    out.fields["v"].push_back(v);
    out.fields["theta"].push_back(th);
    out.fields["p"].push_back(pe);
    out.fields["q"].push_back(qe);
    out.fields["pi"].push_back(pie);
    if (isolated) out.fields["theta_f"].push_back(tf);
    out.energy.push_back(energy());
  };
  store(0.0);

  for (int k = 1; k <= nsteps; ++k) {
    const double t = k * dt;
    // fluid-temperature update map: tf_new = tf_th * th_new + tf_c[i]
    double tf_th = 0;
    std::vector<double> tf_c(nn, 0.0);
    if (isolated) {
      if (!lim.mu1.finite())
        throw ParameterError("isolated pores with mu1 = inf reduce to the one-velocity model");
      if (lim.mu1.is_zero()) {
        for (int i = 0; i < nn; ++i) {
          double integral = 0;
          for (int j = 1; j <= k; ++j)
            integral += 0.5 * dt * (spec.Psi(i * h, (j - 1) * dt) + spec.Psi(i * h, j * dt));
          tf_c[i] = c.m * spec.theta0(i * h) +
                    (tau0 * c_pf > 0 ? c.m / (tau0 * c_pf) * integral : 0.0);
        }
      } else if (tau0 == 0.0) {
        tf_th = c.m;
        for (int i = 0; i < nn; ++i)
          tf_c[i] = -spec.kernels.c_theta_f * spec.Psi(i * h, t);
      } else {
        detail::require_kernel_horizon(spec.kernels.b_theta_f, std::size_t(k), "b_theta_f");
        const auto& b = spec.kernels.b_theta_f;
        double b0w = 0.5 * dt * b[0];
        tf_th = c.m - b0w * tau0 * c_pf / dt;
        for (int i = 0; i < nn; ++i) {
          double conv = 0;
          for (int j = 0; j < k; ++j)
            conv += (j == 0 ? 0.5 : 1.0) * dt * b[k - j] * h_hist[i][j];
          tf_c[i] = conv + b0w * (spec.Psi(i * h, t) + tau0 * c_pf * th[i] / dt);
        }
      }
    }
    // effective closure inputs: s = beta0f * (tf or mfac*theta)
    const double s_th = isolated ? beta0f * tf_th : beta0f * mfac;
    // flux coefficients: flux_e = cd * d + ct * tbar + cc_e
    const double dq = cl.Pd[2] + cl.Ps[2] * 0.0, dpi = cl.Pd[0];
    const double tq = cl.Pt[2] + cl.Ps[2] * s_th, tpi = cl.Pt[0] + cl.Ps[0] * s_th;
    const double cd = lambda0 * c.A + c.Bs0 + (c.Bs1 - 1.0) * dq - dpi;
    const double ct = -c.Bs0 * beta0s / eta0 + (c.Bs1 - 1.0) * tq - tpi;
    // heat-row pressure-rate coefficients
    const double dp = cl.Pd[1], tp = cl.Pt[1] + cl.Ps[1] * s_th;

    macro1d::BlockTridiag sys(nn, nb);
    for (int i = 0; i < nn; ++i) {
      sys.add(i, 0, i, 0, 1.0);
      sys.add(i, 0, i, 1, -dt);
      sys.add_rhs(i, 0, u[i]);
    }
    // consistent mass rows for v and theta rates
    for (int i = 0; i < nn; ++i) {
      for (int joff = -1; joff <= 1; ++joff) {
        int j = i + joff;
        if (j < 0 || j > nx) continue;
        double w;
        if (joff == 0)
          w = (i == 0 || i == nx) ? h / 3.0 : 2.0 * h / 3.0;
        else
          w = h / 6.0;
        sys.add(i, 1, j, 1, tau0 * c.rho_hat * w / dt);
        sys.add_rhs(i, 1, tau0 * c.rho_hat * w / dt * v[j]);
        sys.add(i, 2, j, 2, (Ct + tcpf * tf_th) * w / dt);
        sys.add_rhs(i, 2, (Ct * th[j] + tcpf * (tf[j] - tf_c[j])) * w / dt);
        double kst = (joff == 0) ? ((i == 0 || i == nx) ? 1.0 : 2.0) : -1.0;
        sys.add(i, 2, j, 2, c.Btheta * kst / h);
      }
      double x = i * h;
      double wl = (i == 0 || i == nx) ? h / 2 : h;
      sys.add_rhs(i, 1, c.rho_hat * spec.F(x, t) * wl);
      sys.add_rhs(i, 2, spec.Psi(x, t) * wl);
    }
    // element couplings
    for (int e = 0; e < nx; ++e) {
      int iL = e, iR = e + 1;
      double sc = isolated ? beta0f * 0.5 * (tf_c[iL] + tf_c[iR]) : 0.0;
      double cq = cl.Pp[2] * pe[e] + cl.Ps[2] * sc;
      double cpi = cl.Pp[0] * pe[e] + cl.Ps[0] * sc;
      double cp = cl.Pp[1] * pe[e] + cl.Ps[1] * sc;
      double cflux = (c.Bs1 - 1.0) * cq - cpi;
      double dold = (u[iR] - u[iL]) / h, tbold = 0.5 * (th[iL] + th[iR]);
      for (int side = 0; side < 2; ++side) {
        int i = side == 0 ? iL : iR;
        double sgn = side == 0 ? -1.0 : 1.0;
        // momentum: + sgn * flux_e = loads
        sys.add(i, 1, iL, 0, sgn * cd * (-1.0 / h));
        sys.add(i, 1, iR, 0, sgn * cd * (1.0 / h));
        sys.add(i, 1, iL, 2, sgn * ct * 0.5);
        sys.add(i, 1, iR, 2, sgn * ct * 0.5);
        sys.add_rhs(i, 1, -sgn * cflux);
        // heat: -(beta0f/p*) dp/dt - (beta0s/eta0) dpi/dt against int_e xi_i
        double wi = h / 2;
        double rate_d = -(beta0f / p_star) * dp - (beta0s / eta0) * dpi;
        double rate_t = -(beta0f / p_star) * tp - (beta0s / eta0) * tpi;
        double rate_c = -(beta0f / p_star) * (cp - pe[e]) -
                        (beta0s / eta0) * (cpi - pie[e]);
        sys.add(i, 2, iL, 0, wi / dt * rate_d * (-1.0 / h));
        sys.add(i, 2, iR, 0, wi / dt * rate_d * (1.0 / h));
        sys.add(i, 2, iL, 2, wi / dt * rate_t * 0.5);
        sys.add(i, 2, iR, 2, wi / dt * rate_t * 0.5);
        sys.add_rhs(i, 2, -wi / dt * rate_c);
        (void)dold;
        (void)tbold;
      }
    }
    for (int i : {0, nx})
      for (int r = 0; r < nb; ++r) sys.pin(i, r, 0.0);

    auto X = sys.solve();
    std::vector<double> u_new(nn), v_new(nn), th_new(nn);
    for (int i = 0; i < nn; ++i) {
      u_new[i] = X[std::size_t(i) * nb + 0];
      v_new[i] = X[std::size_t(i) * nb + 1];
      th_new[i] = X[std::size_t(i) * nb + 2];
    }
    std::vector<double> tf_new(nn, 0.0);
    if (isolated)
      for (int i = 0; i < nn; ++i) tf_new[i] = tf_th * th_new[i] + tf_c[i];
    for (int e = 0; e < nx; ++e) {
      double d = (u_new[e + 1] - u_new[e]) / h;
      double tb = 0.5 * (th_new[e] + th_new[e + 1]);
      double s = isolated ? beta0f * 0.5 * (tf_new[e] + tf_new[e + 1])
                          : beta0f * mfac * tb;
      double p_old = pe[e];
      pie[e] = cl.pi(d, tb, p_old, s);
      pe[e] = cl.p(d, tb, p_old, s);
      qe[e] = cl.q(d, tb, p_old, s);
    }
    if (tf_convolution)
      for (int i = 0; i < nn; ++i)
        h_hist[i].push_back(spec.Psi(i * h, t) - tau0 * c_pf * (th_new[i] - th[i]) / dt);
    u = u_new;
    v = v_new;
    th = th_new;
    tf = tf_new;
    if (k % spec.store_every == 0 || k == nsteps) store(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theorem 2(III): two-velocity thermo-poroelasticity with a Darcy law
// ---------------------------------------------------------------------------

/// Implicit march of (2.24), (2.14), (2.25), (2.19), (2.20) with the Darcy
/// law selected by the classifier: kernel (2.26)/(5.54), steady (2.27) or
/// ideal-fluid (2.28). The fluid temperature enters only through beta0f and
/// is reconstructed per (5.45)-(5.47) with rate inputs lagged one step when
/// the coupled case applies.
inline MacroTrajectory run_two_velocity(const MacroProblemSpec& spec) {
  spec.validate();
  const auto& lim = spec.model.effective_limits;
  if (spec.model.model != Model::ThermoPoroElastic_TwoVelocity)
    throw ParameterError("run_two_velocity: wrong model selection");
  const double tau0 = detail::lim_val(lim.tau0, "tau0");
  const double nu0 = detail::lim_val(lim.nu0, "nu0");
  const double p_star = detail::lim_val(lim.p_star, "p_star");
  const double eta0 = detail::lim_val(lim.eta0, "eta0");
  const double beta0s = detail::lim_val(lim.beta0s, "beta0s");
  const double beta0f = detail::lim_val(lim.beta0f, "beta0f");
  const double lambda0 = detail::lim_val(lim.lambda0, "lambda0");
  const double rho_f = lim.rho_f, c_pf = lim.c_pf, c_ps = lim.c_ps;
  const MacroCoeffs1D& c = spec.coeffs;
  const double sigma = spec.continuity_sign == ContinuityThetaSign::Plus ? 1.0 : -1.0;
  const double ufac = spec.darcy_u == DarcyUFactor::M ? c.m : 1.0;
  const auto darcy = spec.model.darcy_variant;
  if (beta0f > 0)
    throw ParameterError("run_two_velocity: beta0f > 0 requires the fluid-heat "
                         "reconstruction; run with beta0f = 0 or use the "
                         "isolated-pores model for theta_f tracking");

  const int nx = spec.nx, nn = nx + 1, nb = 5;  // (u, v, w, omega, theta)
  const double h = 1.0 / nx, dt = spec.dt;
  const int nsteps = int(std::round(spec.T / dt));

  // element closure (pi, p, q) <- (d, dw, tbar, p_prev) from (2.14), (2.25),
  // (2.19 with theta_f term zero)
  double Pd[3], Pw[3], Pt[3], Pp[3];
  {
    double A[9] = {1.0, 0.0, eta0 * c.as1,
                   p_star / eta0, 1.0, 0.0,
                   0.0, -(1.0 + nu0 / (p_star * dt)), 1.0};
    auto solve3 = [&](double b0, double b1, double b2, double* outv) {
      std::vector<double> M(A, A + 9), b = {b0, b1, b2};
      macro1d::solve_dense(3, M, b);
      outv[0] = b[0];
      outv[1] = b[1];
      outv[2] = b[2];
    };
    solve3(-eta0 * (c.Cs0 + c.as0), p_star * (c.m - 1.0), 0.0, Pd);
    solve3(0.0, -p_star, 0.0, Pw);
    solve3(c.as0 * beta0s, -sigma * p_star * (1 - c.m) * beta0s / eta0, 0.0, Pt);
    solve3(0.0, 0.0, -(nu0 / (p_star * dt)), Pp);
  }

  std::vector<double> u(nn, 0.0), v(nn, 0.0), w(nn, 0.0), om(nn, 0.0), th(nn, 0.0);
  std::vector<double> pe(nx, 0.0), qe(nx, 0.0), pie(nx, 0.0);
  std::vector<std::vector<double>> g_hist(nn);  // Darcy forcing history
  std::vector<double> Gint(nn, 0.0);            // running integral for (2.28)
  for (int i = 0; i < nn; ++i) {
    double x = i * h;
    if (tau0 > 0) {
      u[i] = spec.w0(x);
      v[i] = spec.v0(x);
      w[i] = spec.wf0(x);
    }
    if (tau0 + beta0s > 0) th[i] = spec.theta0(x);
  }
  u[0] = u[nx] = v[0] = v[nx] = th[0] = th[nx] = w[0] = w[nx] = 0.0;
  for (int e = 0; e < nx; ++e) {
    double d = (u[e + 1] - u[e]) / h, tb = 0.5 * (th[e] + th[e + 1]);
    double dw = (w[e + 1] - w[e]) / h;
    pie[e] = Pd[0] * d + Pw[0] * dw + Pt[0] * tb;
    pe[e] = Pd[1] * d + Pw[1] * dw + Pt[1] * tb;
    qe[e] = Pd[2] * d + Pw[2] * dw + Pt[2] * tb;
  }
  auto grad_q_node = [&](const std::vector<double>& q, int i) {
    if (i == 0 || i == nx) return 0.0;
    return (q[i] - q[i - 1]) / h;
  };
  for (int i = 0; i < nn; ++i)
    g_hist[i].push_back(-grad_q_node(qe, i) + rho_f * spec.F(i * h, 0.0));

  if (darcy == DarcyVariant::KernelB1) {
    if (spec.kernels.B1.empty())
      throw SolverError("two-velocity run with kernel Darcy law needs B1 samples");
  }
  const double Ct = (tau0 * c_ps + beta0s * beta0s / eta0) * (1 - c.m);
  const double tcpf = tau0 * c_pf;

  MacroTrajectory out;
  out.x.resize(nn);
  for (int i = 0; i < nn; ++i) out.x[i] = i * h;
  out.notes.push_back(std::string("darcy_u_factor: ") +
                      (spec.darcy_u == DarcyUFactor::M ? "m" : "1"));
  out.notes.push_back(std::string("continuity_theta_sign: ") +
                      (sigma > 0 ? "5.53" : "2.25"));
  std::vector<double> tf(nn, 0.0);
  for (int i = 0; i < nn; ++i) tf[i] = c.m * th[i];
  // energy weights from the instantaneously slaved closure: the quadratic
  // form in (d, dw) whose gradient is the momentum flux, minus the shares
  // carried by the stored pressures
  double W_dd, W_dw, W_ww;
  {
    double A0[9] = {1.0, 0.0, eta0 * c.as1,
                    p_star / eta0, 1.0, 0.0,
                    0.0, -1.0, 1.0};
    auto solve3 = [&](double b0, double b1, double b2, double* outv) {
      std::vector<double> M(A0, A0 + 9), b = {b0, b1, b2};
      macro1d::solve_dense(3, M, b);
      outv[0] = b[0];
      outv[1] = b[1];
      outv[2] = b[2];
    };
    double Pd0[3], Pw0[3];
    solve3(-eta0 * (c.Cs0 + c.as0), p_star * (c.m - 1.0), 0.0, Pd0);
    solve3(0.0, -p_star, 0.0, Pw0);
    double cd0 = lambda0 * c.A + c.Bs0 + (c.Bs1 - 1.0) * Pd0[2] - Pd0[0];
    double cw0 = (c.Bs1 - 1.0) * Pw0[2] - Pw0[0];
    W_dd = cd0 - Pd0[1] * Pd0[1] / p_star - Pd0[0] * Pd0[0] / eta0;
    W_dw = cw0 - Pd0[1] * Pw0[1] / p_star - Pd0[0] * Pw0[0] / eta0;
    // chosen so that on the locked manifold dw = m d the total elastic +
    // pressure storage equals the wave stiffness cd0 + m cw0
    W_ww = (c.m > 0 ? -cw0 / c.m : 0.0) - Pw0[1] * Pw0[1] / p_star -
           Pw0[0] * Pw0[0] / eta0;
  }
  auto energy = [&]() {
    double E = 0;
    for (int e = 0; e < nx; ++e) {
      double d = (u[e + 1] - u[e]) / h;
      double dw = (w[e + 1] - w[e]) / h;
      E += h * (0.5 * W_dd * d * d + W_dw * d * dw + 0.5 * W_ww * dw * dw +
                0.5 * pe[e] * pe[e] / p_star + 0.5 * pie[e] * pie[e] / eta0);
    }
    for (int i = 0; i < nn; ++i) {
      double wt = (i == 0 || i == nx) ? 0.5 * h : h;
      E += wt * ((c.m > 0 ? 0.5 * tau0 * rho_f * om[i] * om[i] / c.m : 0.0) +
                 0.5 * tau0 * lim.rho_s * (1 - c.m) * v[i] * v[i] +
                 0.5 * Ct * th[i] * th[i] +
                 (c.m > 0 ? 0.5 * tcpf * tf[i] * tf[i] / c.m : 0.0));
    }
    return E;
  };
  auto store = [&](double t) {
    out.times.push_back(t);
    out.fields["u"].push_back(u);
    out.fields["v"].push_back(v);
    out.fields["w_f"].push_back(w);
    out.fields["omega_f"].push_back(om);
    out.fields["theta"].push_back(th);
    out.fields["theta_f"].push_back(tf);
    out.fields["p"].push_back(pe);
    out.fields["q"].push_back(qe);
    out.fields["pi"].push_back(pie);
    out.energy.push_back(energy());
  };
  store(0.0);

  for (int k = 1; k <= nsteps; ++k) {
    const double t = k * dt;
    if (darcy == DarcyVariant::KernelB1)
      detail::require_kernel_horizon(spec.kernels.B1, std::size_t(k), "B1");
    macro1d::BlockTridiag sys(nn, nb);
    // kinematic rows: u - dt v = u_old, w - dt omega = w_old
    for (int i = 0; i < nn; ++i) {
      sys.add(i, 0, i, 0, 1.0);
      sys.add(i, 0, i, 1, -dt);
      sys.add_rhs(i, 0, u[i]);
      sys.add(i, 2, i, 2, 1.0);
      sys.add(i, 2, i, 3, -dt);
      sys.add_rhs(i, 2, w[i]);
    }
    // flux coefficients
    const double cd = lambda0 * c.A + c.Bs0 + (c.Bs1 - 1.0) * Pd[2] - Pd[0];
    const double cw = (c.Bs1 - 1.0) * Pw[2] - Pw[0];
    const double ctc = -c.Bs0 * beta0s / eta0 + (c.Bs1 - 1.0) * Pt[2] - Pt[0];
    for (int i = 0; i < nn; ++i) {
      for (int joff = -1; joff <= 1; ++joff) {
        int j = i + joff;
        if (j < 0 || j > nx) continue;
        double wt = joff == 0 ? ((i == 0 || i == nx) ? h / 3.0 : 2.0 * h / 3.0)
                              : h / 6.0;
        // momentum row (row 1): tau0 [rho_f M omdot + rho_s(1-m) M vdot]
        sys.add(i, 1, j, 3, tau0 * rho_f * wt / dt);
        sys.add_rhs(i, 1, tau0 * rho_f * wt / dt * om[j]);
        sys.add(i, 1, j, 1, tau0 * lim.rho_s * (1 - c.m) * wt / dt);
        sys.add_rhs(i, 1, tau0 * lim.rho_s * (1 - c.m) * wt / dt * v[j]);
        // heat row (row 4)
        sys.add(i, 4, j, 4, (Ct + tcpf * c.m) * wt / dt);
        sys.add_rhs(i, 4, (Ct * th[j] + tcpf * tf[j]) * wt / dt);
        double kst = (joff == 0) ? ((i == 0 || i == nx) ? 1.0 : 2.0) : -1.0;
        sys.add(i, 4, j, 4, c.Btheta * kst / h);
      }
      double x = i * h;
      double wl = (i == 0 || i == nx) ? h / 2 : h;
      sys.add_rhs(i, 1, c.rho_hat * spec.F(x, t) * wl);
      sys.add_rhs(i, 4, spec.Psi(x, t) * wl);
    }
    for (int e = 0; e < nx; ++e) {
      int iL = e, iR = e + 1;
      double cq = Pp[2] * pe[e], cpi = Pp[0] * pe[e], cp = Pp[1] * pe[e];
      double cflux = (c.Bs1 - 1.0) * cq - cpi;
      for (int side = 0; side < 2; ++side) {
        int i = side == 0 ? iL : iR;
        double sgn = side == 0 ? -1.0 : 1.0;
        sys.add(i, 1, iL, 0, sgn * cd * (-1.0 / h));
        sys.add(i, 1, iR, 0, sgn * cd * (1.0 / h));
        sys.add(i, 1, iL, 2, sgn * cw * (-1.0 / h));
        sys.add(i, 1, iR, 2, sgn * cw * (1.0 / h));
        sys.add(i, 1, iL, 4, sgn * ctc * 0.5);
        sys.add(i, 1, iR, 4, sgn * ctc * 0.5);
        sys.add_rhs(i, 1, -sgn * cflux);
        // heat pressure-rate terms
        double wi = h / 2;
        double rate_d = -(beta0f / p_star) * Pd[1] - (beta0s / eta0) * Pd[0];
        double rate_w = -(beta0f / p_star) * Pw[1] - (beta0s / eta0) * Pw[0];
        double rate_t = -(beta0f / p_star) * Pt[1] - (beta0s / eta0) * Pt[0];
        double rate_c = -(beta0f / p_star) * (cp - pe[e]) -
                        (beta0s / eta0) * (cpi - pie[e]);
        sys.add(i, 4, iL, 0, wi / dt * rate_d * (-1.0 / h));
        sys.add(i, 4, iR, 0, wi / dt * rate_d * (1.0 / h));
        sys.add(i, 4, iL, 2, wi / dt * rate_w * (-1.0 / h));
        sys.add(i, 4, iR, 2, wi / dt * rate_w * (1.0 / h));
        sys.add(i, 4, iL, 4, wi / dt * rate_t * 0.5);
        sys.add(i, 4, iR, 4, wi / dt * rate_t * 0.5);
        sys.add_rhs(i, 4, -wi / dt * rate_c);
      }
    }
    // Darcy row (row 3): omega - ufac*v - (implicit forcing term) = history
    for (int i = 1; i < nx; ++i) {
      sys.add(i, 3, i, 3, 1.0);
      double kw = 0.0;  // weight on the current forcing sample
      double hist = 0.0;
      if (darcy == DarcyVariant::KernelB1) {
        kw = 0.5 * dt * spec.kernels.B1[0];
        const auto& B1 = spec.kernels.B1;
        for (int j = 0; j < k; ++j)
          hist += (j == 0 ? 0.5 : 1.0) * dt * B1[k - j] * g_hist[i][j];
        sys.add(i, 3, i, 1, -ufac);
        sys.add_rhs(i, 3, hist);
      } else if (darcy == DarcyVariant::MatrixB2) {
        kw = c.B2;
        sys.add(i, 3, i, 1, -1.0);  // (2.27) carries du/dt with factor 1
      } else {  // MatrixB3: B3 is the relative-mobility matrix, (2.28) reads
        // omega = (m - B3) v + (B3 / tau0 rho_f) int_0^t g
        kw = c.B3 / (tau0 * rho_f) * 0.5 * dt;
        hist = c.B3 / (tau0 * rho_f) * (Gint[i] + 0.5 * dt * g_hist[i].back());
        sys.add(i, 3, i, 1, -(c.m - c.B3));
        sys.add_rhs(i, 3, hist);
      }
      // current forcing g = -dq/dx + rho_f F [- tau0 rho_f (v - v_old)/dt]
      // enters the row as -kw * g on the left-hand side;
      // dq/dx|_i = (q_{e=i} - q_{e=i-1})/h with
      // q_e = Pd d + Pw dw + Pt tbar + Pp p_prev
      if (kw != 0.0) {
        for (int e : {i - 1, i}) {
          double Cq = (e == i) ? kw / h : -kw / h;  // LHS coefficient of q_e
          int iL = e, iR = e + 1;
          sys.add(i, 3, iL, 0, Cq * Pd[2] * (-1.0 / h));
          sys.add(i, 3, iR, 0, Cq * Pd[2] * (1.0 / h));
          sys.add(i, 3, iL, 2, Cq * Pw[2] * (-1.0 / h));
          sys.add(i, 3, iR, 2, Cq * Pw[2] * (1.0 / h));
          sys.add(i, 3, iL, 4, Cq * Pt[2] * 0.5);
          sys.add(i, 3, iR, 4, Cq * Pt[2] * 0.5);
          sys.add_rhs(i, 3, -Cq * Pp[2] * pe[e]);
        }
        sys.add_rhs(i, 3, kw * rho_f * spec.F(i * h, t));
        if (darcy == DarcyVariant::KernelB1 && tau0 > 0) {
          sys.add(i, 3, i, 1, kw * tau0 * rho_f / dt);
          sys.add_rhs(i, 3, kw * tau0 * rho_f / dt * v[i]);
        }
      }
    }
    for (int i : {0, nx})
      for (int r = 0; r < nb; ++r) sys.pin(i, r, 0.0);

    auto X = sys.solve();
    std::vector<double> u_n(nn), v_n(nn), w_n(nn), om_n(nn), th_n(nn);
    for (int i = 0; i < nn; ++i) {
      u_n[i] = X[std::size_t(i) * nb + 0];
      v_n[i] = X[std::size_t(i) * nb + 1];
      w_n[i] = X[std::size_t(i) * nb + 2];
      om_n[i] = X[std::size_t(i) * nb + 3];
      th_n[i] = X[std::size_t(i) * nb + 4];
    }
    std::vector<double> q_new(nx);
    for (int e = 0; e < nx; ++e) {
      double d = (u_n[e + 1] - u_n[e]) / h, dw = (w_n[e + 1] - w_n[e]) / h;
      double tb = 0.5 * (th_n[e] + th_n[e + 1]);
      double p_old = pe[e];
      pie[e] = Pd[0] * d + Pw[0] * dw + Pt[0] * tb + Pp[0] * p_old;
      pe[e] = Pd[1] * d + Pw[1] * dw + Pt[1] * tb + Pp[1] * p_old;
      qe[e] = Pd[2] * d + Pw[2] * dw + Pt[2] * tb + Pp[2] * p_old;
      q_new[e] = qe[e];
    }
    for (int i = 0; i < nn; ++i) {
      double g = -grad_q_node(q_new, i) + rho_f * spec.F(i * h, t);
      if (darcy == DarcyVariant::KernelB1 && tau0 > 0)
        g -= tau0 * rho_f * (v_n[i] - v[i]) / dt;
      if (darcy == DarcyVariant::MatrixB3)
        Gint[i] += 0.5 * dt * (g_hist[i].back() + g);
      g_hist[i].push_back(g);
    }
    u = u_n;
    v = v_n;
    w = w_n;
    om = om_n;
    th = th_n;
    for (int i = 0; i < nn; ++i) tf[i] = c.m * th[i];
    if (k % spec.store_every == 0 || k == nsteps) store(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theorem 3(I): filtration problems F1-F3 (rigid skeleton at leading order)
// ---------------------------------------------------------------------------

inline MacroTrajectory run_filtration(const MacroProblemSpec& spec) {
  spec.validate();
  const auto& lim = spec.model.effective_limits;
  const auto model = spec.model.model;
  if (model != Model::Filtration_F1 && model != Model::Filtration_F2 &&
      model != Model::Filtration_F3)
    throw ParameterError("run_filtration: wrong model selection");
  const double tau0 = detail::lim_val(lim.tau0, "tau0");
  const double nu0 = detail::lim_val(lim.nu0, "nu0");
  const double p_star = detail::lim_val(lim.p_star, "p_star");
  const double beta0f = detail::lim_val(lim.beta0f, "beta0f");
  const double rho_f = lim.rho_f, c_pf = lim.c_pf, c_ps = lim.c_ps;
  const MacroCoeffs1D& c = spec.coeffs;

  const int nx = spec.nx, nn = nx + 1, nb = 3;  // (w, omega, theta)
  const double h = 1.0 / nx, dt = spec.dt;
  const int nsteps = int(std::round(spec.T / dt));
  if (model == Model::Filtration_F1 && spec.kernels.B1.empty())
    throw SolverError("filtration F1 needs B1 kernel samples");

  std::vector<double> w(nn, 0.0), om(nn, 0.0), th(nn, 0.0), tf(nn, 0.0);
  std::vector<double> pe(nx, 0.0), qe(nx, 0.0);
  std::vector<std::vector<double>> g_hist(nn);
  std::vector<double> Gint(nn, 0.0);
  std::vector<std::vector<double>> hf_hist(nn);  // theta_f convolution history
  for (int i = 0; i < nn; ++i) {
    double x = i * h;
    w[i] = spec.w0(x);
    if (tau0 > 0) th[i] = spec.theta0(x);
    tf[i] = c.m * th[i];
  }
  w[0] = w[nx] = th[0] = th[nx] = 0.0;
  // q = p + (nu0/p*) dp/dt + beta0f theta_f, p = -p* dw
  auto p_of = [&](double dw) { return -p_star * dw; };
  for (int e = 0; e < nx; ++e) {
    double dw = (w[e + 1] - w[e]) / h;
    pe[e] = p_of(dw);
    qe[e] = pe[e] + beta0f * 0.5 * (tf[e] + tf[e + 1]);
  }
  auto grad_q_node = [&](const std::vector<double>& q, int i) {
    if (i == 0 || i == nx) return 0.0;
    return (q[i] - q[i - 1]) / h;
  };
  for (int i = 0; i < nn; ++i) {
    double g0 = -grad_q_node(qe, i) + rho_f * spec.F(i * h, 0.0);
    g_hist[i].push_back(g0);
    hf_hist[i].push_back(spec.Psi(i * h, 0.0));
    if (i > 0 && i < nx) {
      if (model == Model::Filtration_F2)
        om[i] = c.B2 * g0;
      else
        om[i] = c.m * spec.v0(i * h);  // (2.33)/(2.35) at t = 0+
    }
  }
  const bool tf_conv = beta0f >= 0 && tau0 > 0 && lim.mu1.finite() && !lim.mu1.is_zero();
  if (tf_conv && spec.kernels.b_theta_f.empty() && tau0 * c_pf > 0 &&
      model != Model::Filtration_F3)
    throw SolverError("filtration run needs b_theta_f samples for theta_f");

  MacroTrajectory out;
  out.x.resize(nn);
  for (int i = 0; i < nn; ++i) out.x[i] = i * h;
  auto energy = [&]() {
    double E = 0;
    for (int e = 0; e < nx; ++e) E += h * 0.5 * pe[e] * pe[e] / p_star;
    for (int i = 0; i < nn; ++i) {
      double wt = (i == 0 || i == nx) ? 0.5 * h : h;
      E += wt * (0.5 * tau0 * c_ps * (1 - c.m) * th[i] * th[i] +
                 (c.m > 0 ? 0.5 * tau0 * c_pf * tf[i] * tf[i] / c.m : 0.0));
    }
    return E;
  };
  auto store = [&](double t) {
    out.times.push_back(t);
    out.fields["w_f"].push_back(w);
    out.fields["omega_f"].push_back(om);
    out.fields["theta"].push_back(th);
    out.fields["theta_f"].push_back(tf);
    out.fields["p"].push_back(pe);
    out.fields["q"].push_back(qe);
    out.energy.push_back(energy());
  };
  store(0.0);

  for (int k = 1; k <= nsteps; ++k) {
    const double t = k * dt;
    if (model == Model::Filtration_F1)
      detail::require_kernel_horizon(spec.kernels.B1, std::size_t(k), "B1");
    // theta_f map: tf_new = tf_th * th_new + tf_c (mu1 > 0, tau0 > 0 route)
    double tf_th = 0;
    std::vector<double> tf_c(nn, 0.0);
    if (model == Model::Filtration_F3 || lim.mu1.is_zero()) {
      // (5.47)
      for (int i = 0; i < nn; ++i) {
        double integral = 0;
        for (int j = 1; j <= k; ++j)
          integral += 0.5 * dt * (spec.Psi(i * h, (j - 1) * dt) + spec.Psi(i * h, j * dt));
        tf_c[i] = c.m * spec.theta0(i * h) +
                  (tau0 * c_pf > 0 ? c.m / (tau0 * c_pf) * integral : 0.0);
      }
    } else if (tau0 == 0.0) {
      tf_th = c.m;
      for (int i = 0; i < nn; ++i)
        tf_c[i] = -spec.kernels.c_theta_f * spec.Psi(i * h, t);
    } else {
      detail::require_kernel_horizon(spec.kernels.b_theta_f, std::size_t(k), "b_theta_f");
      const auto& b = spec.kernels.b_theta_f;
      double b0w = 0.5 * dt * b[0];
      tf_th = c.m - b0w * tau0 * c_pf / dt;
      for (int i = 0; i < nn; ++i) {
        double conv = 0;
        for (int j = 0; j < k; ++j)
          conv += (j == 0 ? 0.5 : 1.0) * dt * b[k - j] * hf_hist[i][j];
        tf_c[i] = conv + b0w * (spec.Psi(i * h, t) + tau0 * c_pf * th[i] / dt);
      }
    }

    macro1d::BlockTridiag sys(nn, nb);
    for (int i = 0; i < nn; ++i) {
      sys.add(i, 0, i, 0, 1.0);
      sys.add(i, 0, i, 1, -dt);
      sys.add_rhs(i, 0, w[i]);
    }
    // heat row (2.32): tau0 c_pf d(tf)/dt + tau0 c_ps (1-m) d(th)/dt
    //                  - (beta0f/p*) dp/dt = Btheta th'' + Psi
    const double tcpf = tau0 * c_pf, Cs = tau0 * c_ps * (1 - c.m);
    for (int i = 0; i < nn; ++i) {
      for (int joff = -1; joff <= 1; ++joff) {
        int j = i + joff;
        if (j < 0 || j > nx) continue;
        double wt = joff == 0 ? ((i == 0 || i == nx) ? h / 3.0 : 2.0 * h / 3.0)
                              : h / 6.0;
        sys.add(i, 2, j, 2, (Cs + tcpf * tf_th) * wt / dt);
        sys.add_rhs(i, 2, (Cs * th[j] + tcpf * (tf[j] - tf_c[j])) * wt / dt);
        double kst = (joff == 0) ? ((i == 0 || i == nx) ? 1.0 : 2.0) : -1.0;
        sys.add(i, 2, j, 2, c.Btheta * kst / h);
      }
      double wl = (i == 0 || i == nx) ? h / 2 : h;
      sys.add_rhs(i, 2, spec.Psi(i * h, t) * wl);
    }
    // pressure-rate heat coupling and the Darcy rows
    for (int e = 0; e < nx; ++e) {
      int iL = e, iR = e + 1;
      for (int side = 0; side < 2; ++side) {
        int i = side == 0 ? iL : iR;
        double wi = h / 2;
        // -(beta0f/p*)(p_new - p_old)/dt, p_new = -p* dw_new
        double coef = -(beta0f / p_star) * (-p_star) / dt * wi;
        sys.add(i, 2, iL, 0, coef * (-1.0 / h));
        sys.add(i, 2, iR, 0, coef * (1.0 / h));
        sys.add_rhs(i, 2, -(beta0f / p_star) * (-pe[e]) / dt * wi);
      }
    }
    for (int i = 1; i < nx; ++i) {
      sys.add(i, 1, i, 1, 1.0);
      double kw = 0.0, hist = 0.0;
      if (model == Model::Filtration_F1) {
        kw = 0.5 * dt * spec.kernels.B1[0];
        const auto& B1 = spec.kernels.B1;
        for (int j = 0; j < k; ++j)
          hist += (j == 0 ? 0.5 : 1.0) * dt * B1[k - j] * g_hist[i][j];
        hist += c.m * spec.v0(i * h);
      } else if (model == Model::Filtration_F2) {
        kw = c.B2;
      } else {
        kw = c.B3 / (tau0 * rho_f) * 0.5 * dt;
        hist = c.B3 / (tau0 * rho_f) * (Gint[i] + 0.5 * dt * g_hist[i].back()) +
               c.m * spec.v0(i * h);
      }
      sys.add_rhs(i, 1, hist);
      // current g = -dq/dx + rho_f F enters as -kw * g on the left;
      // q_e = qd * dw_e + qt * tbar_e + qc_e with p = -p* dw
      double qd = -p_star * (1.0 + nu0 / (p_star * dt));
      double qt = beta0f * tf_th;
      for (int e : {i - 1, i}) {
        double Cq = (e == i) ? kw / h : -kw / h;
        int iL = e, iR = e + 1;
        double qc = -(nu0 / (p_star * dt)) * pe[e] +
                    beta0f * 0.5 * (tf_c[iL] + tf_c[iR]);
        sys.add(i, 1, iL, 0, Cq * qd * (-1.0 / h));
        sys.add(i, 1, iR, 0, Cq * qd * (1.0 / h));
        sys.add(i, 1, iL, 2, Cq * qt * 0.5);
        sys.add(i, 1, iR, 2, Cq * qt * 0.5);
        sys.add_rhs(i, 1, -Cq * qc);
      }
      sys.add_rhs(i, 1, kw * rho_f * spec.F(i * h, t));
    }
    for (int i : {0, nx})
      for (int r = 0; r < nb; ++r) sys.pin(i, r, 0.0);

    auto X = sys.solve();
    std::vector<double> w_n(nn), om_n(nn), th_n(nn);
    for (int i = 0; i < nn; ++i) {
      w_n[i] = X[std::size_t(i) * nb + 0];
      om_n[i] = X[std::size_t(i) * nb + 1];
      th_n[i] = X[std::size_t(i) * nb + 2];
    }
    std::vector<double> tf_n(nn);
    for (int i = 0; i < nn; ++i) tf_n[i] = tf_th * th_n[i] + tf_c[i];
    std::vector<double> q_new(nx);
    for (int e = 0; e < nx; ++e) {
      double dw = (w_n[e + 1] - w_n[e]) / h;
      double p_new = p_of(dw);
      double q = p_new + (nu0 / p_star) * (p_new - pe[e]) / dt +
                 beta0f * 0.5 * (tf_n[e] + tf_n[e + 1]);
      pe[e] = p_new;
      qe[e] = q;
      q_new[e] = q;
    }
    for (int i = 0; i < nn; ++i) {
      double g = -grad_q_node(q_new, i) + rho_f * spec.F(i * h, t);
      if (model == Model::Filtration_F3)
        Gint[i] += 0.5 * dt * (g_hist[i].back() + g);
      g_hist[i].push_back(g);
      hf_hist[i].push_back(spec.Psi(i * h, t) - tau0 * c_pf * (th_n[i] - th[i]) / dt);
    }
    w = w_n;
    om = om_n;
    th = th_n;
    tf = tf_n;
    if (k % spec.store_every == 0 || k == nsteps) store(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theorem 3(II): quasi-static second approximation
// ---------------------------------------------------------------------------

struct QuasiStaticResult {
  std::vector<double> x;
  std::vector<double> times;
  std::vector<std::vector<double>> u;   // nodal, per slice
  std::vector<std::vector<double>> pi;  // per element, per slice
};

/// Stationary elliptic solve (2.36)-(2.37) per time slice with q supplied
/// (per element) by a filtration run; coefficients are assembled with
/// eta0 = eta2 and lambda0 = 1.
inline QuasiStaticResult run_quasistatic_second_approx(
    const MacroProblemSpec& spec, const std::vector<double>& slice_times,
    const std::vector<std::vector<double>>& q_slices) {
  spec.validate();
  const auto& lim = spec.model.effective_limits;
  const double eta2 = detail::lim_val(lim.eta0, "eta2");
  const MacroCoeffs1D& c = spec.coeffs;
  const int nx = spec.nx, nn = nx + 1;
  const double h = 1.0 / nx;
  const double stiff = c.A + c.Bs0 + eta2 * (c.Cs0 + c.as0);
  if (!(stiff > 0))
    throw SolverError("quasi-static operator is not positive definite");
  const double qcoef = c.Bs1 - 1.0 + eta2 * c.as1;

  QuasiStaticResult out;
  out.x.resize(nn);
  for (int i = 0; i < nn; ++i) out.x[i] = i * h;
  out.times = slice_times;
  for (std::size_t s = 0; s < q_slices.size(); ++s) {
    if (q_slices[s].size() != std::size_t(nx))
      throw ParameterError("quasi-static: q slice has wrong element count");
    macro1d::BlockTridiag sys(nn, 1);
    for (int e = 0; e < nx; ++e) {
      for (int side = 0; side < 2; ++side) {
        int i = side == 0 ? e : e + 1;
        double sgn = side == 0 ? -1.0 : 1.0;
        sys.add(i, 0, e, 0, sgn * stiff * (-1.0 / h));
        sys.add(i, 0, e + 1, 0, sgn * stiff * (1.0 / h));
        sys.add_rhs(i, 0, -sgn * qcoef * q_slices[s][e]);
      }
    }
    for (int i = 1; i < nx; ++i) {
      double wl = h;
      sys.add_rhs(i, 0, c.rho_hat * spec.F(i * h, slice_times[s]) * wl);
    }
    sys.pin(0, 0, 0.0);
    sys.pin(nx, 0, 0.0);
    auto u = sys.solve();
    std::vector<double> pi(nx);
    for (int e = 0; e < nx; ++e) {
      double d = (u[e + 1] - u[e]) / h;
      pi[e] = -eta2 * ((c.Cs0 + c.as0) * d + c.as1 * q_slices[s][e]);
    }
    out.u.push_back(std::move(u));
    out.pi.push_back(std::move(pi));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theorem 4: thermo-viscoelastic system with memory kernels
// ---------------------------------------------------------------------------

inline MacroTrajectory run_thermo_viscoelastic(const MacroProblemSpec& spec) {
  spec.validate();
  const auto& lim = spec.model.effective_limits;
  if (spec.model.model != Model::ThermoViscoElastic)
    throw ParameterError("run_thermo_viscoelastic: wrong model selection");
  const double tau0 = detail::lim_val(lim.tau0, "tau0");
  const double nu0 = detail::lim_val(lim.nu0, "nu0");
  const double p_star = detail::lim_val(lim.p_star, "p_star");
  const double eta0 = detail::lim_val(lim.eta0, "eta0");
  const double beta0s = detail::lim_val(lim.beta0s, "beta0s");
  const double beta0f = detail::lim_val(lim.beta0f, "beta0f");
  const double c_pf = lim.c_pf;
  (void)c_pf;
  const MacroCoeffs1D& c = spec.coeffs;
  if (c.A2 < -1e-12) throw SolverError("A2 must be positive semidefinite");
  if (c.A2 <= 1e-12 && !(c.A3 > 0))
    throw SolverError("degenerate A2 = 0 requires positive definite A3 "
                      "(nonlocal Lame branch)");

  const int nx = spec.nx, nn = nx + 1, nb = 3;  // (w, v, theta)
  const double h = 1.0 / nx, dt = spec.dt;
  const int nsteps = int(std::round(spec.T / dt));
  const bool with_kernels = !spec.kernels.A4.empty();
  if (with_kernels) {
    if (std::abs(spec.kernels.dt - dt) > 1e-12 * std::max(dt, spec.kernels.dt))
      throw SolverError("kernel sample step must match the run dt");
  }

  std::vector<double> w(nn, 0.0), v(nn, 0.0), th(nn, 0.0);
  std::vector<double> pe(nx, 0.0), qe(nx, 0.0), pie(nx, 0.0);
  std::vector<std::vector<double>> d_hist(nx), tb_hist(nx);
  for (int i = 0; i < nn; ++i) {
    double x = i * h;
    if (tau0 > 0) {
      w[i] = spec.w0(x);
      v[i] = spec.v0(x);
    }
    if (tau0 + beta0s > 0) th[i] = spec.theta0(x);
  }
  w[0] = w[nx] = v[0] = v[nx] = th[0] = th[nx] = 0.0;
  for (int e = 0; e < nx; ++e) {
    double d = (w[e + 1] - w[e]) / h, tb = 0.5 * (th[e] + th[e + 1]);
    d_hist[e].push_back(d);
    tb_hist[e].push_back(tb);
    pe[e] = -p_star * c.m * d;
    qe[e] = pe[e] + beta0f * c.m * tb;
    pie[e] = -eta0 * (1 - c.m) * (d - beta0s / eta0 * tb);
  }
  const double Ct = tau0 * c.cp_hat + beta0s * beta0s / eta0 * (1 - c.m);

  MacroTrajectory out;
  out.x.resize(nn);
  for (int i = 0; i < nn; ++i) out.x[i] = i * h;
  auto energy = [&]() {
    double E = 0;
    for (int e = 0; e < nx; ++e) {
      double d = (w[e + 1] - w[e]) / h;
      E += h * (0.5 * c.A3 * d * d + 0.5 * pe[e] * pe[e] / p_star +
                0.5 * pie[e] * pie[e] / eta0);
    }
    for (int i = 0; i < nn; ++i) {
      double wt = (i == 0 || i == nx) ? 0.5 * h : h;
      E += wt * (0.5 * tau0 * c.rho_hat * v[i] * v[i] + 0.5 * Ct * th[i] * th[i]);
    }
    return E;
  };
  auto store = [&](double t) {
    out.times.push_back(t);
    out.fields["w"].push_back(w);
    out.fields["v"].push_back(v);
    out.fields["theta"].push_back(th);
    out.fields["p"].push_back(pe);
    out.fields["q"].push_back(qe);
    out.fields["pi"].push_back(pie);
    out.energy.push_back(energy());
  };
  store(0.0);

  auto kern = [&](const std::vector<double>& K, std::size_t idx) {
    return idx < K.size() ? K[idx] : 0.0;
  };
  auto is_active = [](const std::vector<double>& K) {
    for (double v : K)
      if (v != 0.0) return true;
    return false;
  };
  const bool act[7] = {is_active(spec.kernels.A4),   is_active(spec.kernels.B5),
                       is_active(spec.kernels.B2t),  is_active(spec.kernels.C2a2),
                       is_active(spec.kernels.a1t),  is_active(spec.kernels.C3a3),
                       is_active(spec.kernels.a2t)};
  for (int k = 1; k <= nsteps; ++k) {
    const double t = k * dt;
    if (with_kernels) {
      detail::require_kernel_horizon(spec.kernels.A4, std::size_t(k), "A4");
      detail::require_kernel_horizon(spec.kernels.C2a2, std::size_t(k), "C2/a2");
    }
    // per-element history convolutions (samples 0..k-1 weighted, current
    // sample handled implicitly with weight dt/2 * K(0)); all-zero kernels
    // are skipped so a single active kernel stays a single dot product
    auto dot_hist = [&](const std::vector<double>& K, const std::vector<double>& X) {
      const double* Kp = K.data();
      const double* Xp = X.data();
      double s = 0.5 * Kp[k] * Xp[0];
      for (int j = 1; j < k; ++j) s += Kp[k - j] * Xp[j];
      return s * dt;
    };
    std::vector<double> conv_mom(nx, 0.0), conv_p(nx, 0.0), conv_pi(nx, 0.0);
    for (int e = 0; e < nx; ++e) {
      double sm = 0, sp = 0, spi = 0;
      if (act[0]) sm += dot_hist(spec.kernels.A4, d_hist[e]);
      if (act[1]) sm += dot_hist(spec.kernels.B5, d_hist[e]);
      if (act[2]) sm += dot_hist(spec.kernels.B2t, tb_hist[e]);
      if (act[3]) sp += dot_hist(spec.kernels.C2a2, d_hist[e]);
      if (act[4]) sp += dot_hist(spec.kernels.a1t, tb_hist[e]);
      if (act[5]) spi += dot_hist(spec.kernels.C3a3, d_hist[e]);
      if (act[6]) spi += dot_hist(spec.kernels.a2t, tb_hist[e]);
      conv_mom[e] = sm;
      conv_p[e] = sp;
      conv_pi[e] = spi;
    }
    const double w0m = with_kernels ? 0.5 * dt : 0.0;
    // closures at the new time:
    //   p = -p*[m d + conv_p + w0m (C2a2(0) d + a1t(0) tb)]
    //   pi = -eta0[(1-m)(d - beta0s/eta0 tb) + conv_pi + w0m (C3a3(0) d + a2t(0) tb)]
    //   q = p + (nu0/p*)(p - p_old)/dt + beta0f m tb
    const double pd = -p_star * (c.m + w0m * kern(spec.kernels.C2a2, 0));
    const double pt = -p_star * w0m * kern(spec.kernels.a1t, 0);
    const double pid = -eta0 * ((1 - c.m) + w0m * kern(spec.kernels.C3a3, 0));
    const double pit = -eta0 * (-(1 - c.m) * beta0s / eta0 + w0m * kern(spec.kernels.a2t, 0));
    const double nufac = 1.0 + nu0 / (p_star * dt);
    // q = nufac * p - (nu0/(p* dt)) p_old + beta0f m tb
    macro1d::BlockTridiag sys(nn, nb);
    for (int i = 0; i < nn; ++i) {
      sys.add(i, 0, i, 0, 1.0);
      sys.add(i, 0, i, 1, -dt);
      sys.add_rhs(i, 0, w[i]);
    }
    for (int i = 0; i < nn; ++i) {
      for (int joff = -1; joff <= 1; ++joff) {
        int j = i + joff;
        if (j < 0 || j > nx) continue;
        double wt = joff == 0 ? ((i == 0 || i == nx) ? h / 3.0 : 2.0 * h / 3.0)
                              : h / 6.0;
        sys.add(i, 1, j, 1, tau0 * c.rho_hat * wt / dt);
        sys.add_rhs(i, 1, tau0 * c.rho_hat * wt / dt * v[j]);
        sys.add(i, 2, j, 2, Ct * wt / dt);
        sys.add_rhs(i, 2, Ct * wt / dt * th[j]);
        double kst = (joff == 0) ? ((i == 0 || i == nx) ? 1.0 : 2.0) : -1.0;
        sys.add(i, 2, j, 2, c.B0t * kst / h);
      }
      double wl = (i == 0 || i == nx) ? h / 2 : h;
      sys.add_rhs(i, 1, c.rho_hat * spec.F(i * h, t) * wl);
      sys.add_rhs(i, 2, spec.Psi(i * h, t) * wl);
    }
    // flux = A2 dv + (A3 + B4) d + B1t tb + conv_mom + w0m(A4(0)+B5(0))d +
    //        w0m B2t(0) tb - (q + pi)
    const double fd = c.A3 + c.B4 + w0m * (kern(spec.kernels.A4, 0) + kern(spec.kernels.B5, 0));
    const double ftb = c.B1t + w0m * kern(spec.kernels.B2t, 0);
    for (int e = 0; e < nx; ++e) {
      int iL = e, iR = e + 1;
      double pc = -p_star * conv_p[e];
      double pic = -eta0 * conv_pi[e];
      double qd = nufac * pd, qt = nufac * pt + beta0f * c.m;
      double qc = nufac * pc - (nu0 / (p_star * dt)) * pe[e];
      double coef_d = fd - qd - pid;
      double coef_dv = c.A2;
      double coef_t = ftb - qt - pit;
      double cflux = conv_mom[e] - qc - pic;
      for (int side = 0; side < 2; ++side) {
        int i = side == 0 ? iL : iR;
        double sgn = side == 0 ? -1.0 : 1.0;
        sys.add(i, 1, iL, 0, sgn * coef_d * (-1.0 / h));
        sys.add(i, 1, iR, 0, sgn * coef_d * (1.0 / h));
        sys.add(i, 1, iL, 1, sgn * coef_dv * (-1.0 / h));
        sys.add(i, 1, iR, 1, sgn * coef_dv * (1.0 / h));
        sys.add(i, 1, iL, 2, sgn * coef_t * 0.5);
        sys.add(i, 1, iR, 2, sgn * coef_t * 0.5);
        sys.add_rhs(i, 1, -sgn * cflux);
        // heat pressure rates
        double wi = h / 2;
        double rate_d = -(beta0f / p_star) * pd - (beta0s / eta0) * pid;
        double rate_t = -(beta0f / p_star) * pt - (beta0s / eta0) * pit;
        double rate_c = -(beta0f / p_star) * (pc - pe[e]) -
                        (beta0s / eta0) * (pic - pie[e]);
        sys.add(i, 2, iL, 0, wi / dt * rate_d * (-1.0 / h));
        sys.add(i, 2, iR, 0, wi / dt * rate_d * (1.0 / h));
        sys.add(i, 2, iL, 2, wi / dt * rate_t * 0.5);
        sys.add(i, 2, iR, 2, wi / dt * rate_t * 0.5);
        sys.add_rhs(i, 2, -wi / dt * rate_c);
      }
    }
    for (int i : {0, nx})
      for (int r = 0; r < nb; ++r) sys.pin(i, r, 0.0);

    auto X = sys.solve();
    std::vector<double> w_n(nn), v_n(nn), th_n(nn);
    for (int i = 0; i < nn; ++i) {
      w_n[i] = X[std::size_t(i) * nb + 0];
      v_n[i] = X[std::size_t(i) * nb + 1];
      th_n[i] = X[std::size_t(i) * nb + 2];
    }
    for (int e = 0; e < nx; ++e) {
      double d = (w_n[e + 1] - w_n[e]) / h, tb = 0.5 * (th_n[e] + th_n[e + 1]);
      double p_new = pd * d + pt * tb - p_star * conv_p[e];
      double pi_new = pid * d + pit * tb - eta0 * conv_pi[e];
      double q_new = nufac * p_new - (nu0 / (p_star * dt)) * pe[e] + beta0f * c.m * tb;
      pe[e] = p_new;
      pie[e] = pi_new;
      qe[e] = q_new;
      d_hist[e].push_back(d);
      tb_hist[e].push_back(tb);
    }
    w = w_n;
    v = v_n;
    th = th_n;
    if (k % spec.store_every == 0 || k == nsteps) store(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fluid temperature reconstruction (5.45)-(5.47), coupled case via (5.50)
// ---------------------------------------------------------------------------

struct ThetaFCase {
  double tau0 = 1, c_pf = 1, nu0 = 0, p_star = 1, beta0f = 0, m = 0.5;
  bool mu1_positive = true;
};

/// Post-hoc reconstruction of theta^f at one spatial point from trajectory
/// series of theta, Psi and q/m; selects (5.45), (5.46), (5.47) or the
/// h-system route per the case flags.
inline std::vector<double> reconstruct_theta_f(const ThetaFCase& cs,
                                               const std::vector<double>& times,
                                               const std::vector<double>& theta,
                                               const std::vector<double>& psi,
                                               const std::vector<double>& q,
                                               const std::vector<double>& b_kernel,
                                               double c_theta_f, double theta0) {
  const std::size_t N = times.size();
  if (theta.size() != N || psi.size() != N)
    throw ParameterError("reconstruct_theta_f: series length mismatch");
  std::vector<double> tf(N, 0.0);
  if (N == 0) return tf;
  const double dt = N >= 2 ? times[1] - times[0] : 1.0;
  if (!cs.mu1_positive) {
    // (5.47)
    double integral = 0;
    tf[0] = cs.m * theta0;
    for (std::size_t k = 1; k < N; ++k) {
      integral += 0.5 * dt * (psi[k - 1] + psi[k]);
      tf[k] = cs.m * theta0 +
              (cs.tau0 * cs.c_pf > 0 ? cs.m / (cs.tau0 * cs.c_pf) * integral : 0.0);
    }
    return tf;
  }
  if (cs.tau0 == 0.0) {
    for (std::size_t k = 0; k < N; ++k) tf[k] = cs.m * theta[k] - c_theta_f * psi[k];
    return tf;
  }
  if (b_kernel.size() < N)
    throw SolverError("reconstruct_theta_f: kernel horizon shorter than the series");
  std::vector<double> hseries(N, 0.0);
  if (cs.beta0f == 0.0) {
    for (std::size_t k = 0; k < N; ++k) {
      double dth = k == 0 ? 0.0 : (theta[k] - theta[k - 1]) / dt;
      hseries[k] = psi[k] - cs.tau0 * cs.c_pf * dth;
    }
  } else if (cs.nu0 == 0.0) {
    // modified (5.45): tau0 c_pf -> tau0 c_pf + beta0f^2/p*, Psi gains the
    // q-rate term from eliminating P
    double ceff = cs.tau0 * cs.c_pf + cs.beta0f * cs.beta0f / cs.p_star;
    if (q.size() != N)
      throw ParameterError("reconstruct_theta_f: q series required when beta0f > 0");
    for (std::size_t k = 0; k < N; ++k) {
      double dth = k == 0 ? 0.0 : (theta[k] - theta[k - 1]) / dt;
      double dq = k == 0 ? 0.0 : (q[k] - q[k - 1]) / dt;
      hseries[k] = psi[k] + cs.beta0f / (cs.m * cs.p_star) * dq - ceff * dth;
    }
  } else {
    // h-system (5.50): implicit Euler on h0 with h algebraic
    if (q.size() != N)
      throw ParameterError("reconstruct_theta_f: q series required when beta0f > 0");
    if (!(cs.tau0 * cs.c_pf > 0))
      throw ParameterError("reconstruct_theta_f: coupled case needs tau0 c_pf > 0");
    double h0 = 0.0;
    const double alpha = cs.beta0f / cs.nu0, gamma = cs.tau0 * cs.c_pf;
    for (std::size_t k = 0; k < N; ++k) {
      double dth = k == 0 ? 0.0 : (theta[k] - theta[k - 1]) / dt;
      double G = q[k] / cs.m - cs.beta0f * theta[k];
      if (k > 0) {
        double denom = 1.0 + dt * cs.p_star / cs.nu0 - dt * alpha / gamma;
        h0 = (h0 + dt * (cs.p_star / cs.nu0 - alpha / gamma) * G -
              dt * (psi[k] - gamma * dth) / gamma) /
             denom;
      }
      hseries[k] = (alpha * (G - h0) + psi[k] - gamma * dth) / gamma;
    }
  }
  for (std::size_t k = 0; k < N; ++k) {
    double conv = 0;
    for (std::size_t j = 0; j <= k; ++j) {
      double wj = (j == 0 || j == k) ? 0.5 : 1.0;
      conv += wj * dt * b_kernel[k - j] * hseries[j];
    }
    if (k == 0) conv = 0;
    tf[k] = cs.m * theta[k] + conv;
  }
  return tf;
}

}  // namespace poroscale
