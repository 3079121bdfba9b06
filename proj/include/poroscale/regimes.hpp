#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "poroscale/core.hpp"
#include "poroscale/geometry.hpp"

namespace poroscale {

/// Extended nonnegative real: a finite value or +infinity. The classifier
/// branches on exact finiteness, so infinity is an explicit variant, never a
/// large float.
struct ExtReal {
  double v = 0.0;
  bool inf = false;

  static ExtReal infinity() { return {0.0, true}; }
  static ExtReal of(double x) { return {x, false}; }

  bool finite() const { return !inf; }
  bool is_zero() const { return !inf && v == 0.0; }
  bool positive() const { return inf || v > 0.0; }
  double value() const {
    if (inf) throw InternalError("ExtReal: value() on infinity");
    return v;
  }
  ExtReal reciprocal() const {
    if (inf) return of(0.0);
    if (v == 0.0) return infinity();
    return of(1.0 / v);
  }
  bool operator==(const ExtReal& o) const {
    return inf == o.inf && (inf || v == o.v);
  }
  std::string str() const { return inf ? "inf" : std::to_string(v); }
};

/// Power law c * eps^k; the recommended symbolic input path for limits.
struct PowerLaw {
  double c = 1.0;
  double k = 0.0;

  double at(double eps) const { return c * std::pow(eps, k); }
  ExtReal limit() const {
    if (c == 0.0) return ExtReal::of(0.0);
    if (k > 0.0) return ExtReal::of(0.0);
    if (k == 0.0) return ExtReal::of(c);
    return ExtReal::infinity();
  }
  PowerLaw over(const PowerLaw& d) const {
    if (d.c == 0.0) {
      if (c == 0.0) return {0.0, 0.0};
      throw ParameterError("power-law ratio with identically zero denominator");
    }
    return {c / d.c, k - d.k};
  }
  PowerLaw times_eps2() const { return {c, k + 2.0}; }
};

/// Dimensionless coefficients of the microscopic model at one value of eps.
struct DimensionlessParams {
  double alpha_tau = 1, alpha_mu = 1, alpha_nu = 0, alpha_lambda = 1,
         alpha_eta = 1, alpha_p = 1, alpha_theta_f = 0, alpha_theta_s = 0,
         alpha_kappa_f = 1, alpha_kappa_s = 1;
  double rho_f = 1, rho_s = 1, c_pf = 1, c_ps = 1;
  double epsilon = 0.1;

  void validate() const {
    const double a[] = {alpha_tau, alpha_mu, alpha_nu, alpha_lambda, alpha_eta,
                        alpha_p,   alpha_theta_f, alpha_theta_s, alpha_kappa_f,
                        alpha_kappa_s};
    for (double x : a)
      if (!(x >= 0.0)) throw ParameterError("alpha coefficients must be >= 0");
    if (!(rho_f > 0 && rho_s > 0 && c_pf > 0 && c_ps > 0))
      throw ParameterError("densities and heat capacities must be > 0");
    if (!(epsilon > 0 && epsilon <= 1))
      throw ParameterError("epsilon must lie in (0,1]");
  }
  /// Assumption 1: the cell count 1/eps must be an integer when a concrete
  /// voxelization of Omega is requested.
  int cell_count() const {
    double inv = 1.0 / epsilon;
    double r = std::round(inv);
    if (std::abs(inv - r) > 1e-9 * inv)
      throw ParameterError("1/epsilon must be an integer (Assumption 1)");
    return int(r);
  }
};

/// Power laws for every alpha; densities and heat capacities are
/// eps-independent constants.
struct AlphaLaws {
  PowerLaw alpha_tau{1, 0}, alpha_mu{1, 0}, alpha_nu{0, 0}, alpha_lambda{1, 0},
      alpha_eta{1, 0}, alpha_p{1, 0}, alpha_theta_f{0, 0}, alpha_theta_s{0, 0},
      alpha_kappa_f{1, 0}, alpha_kappa_s{1, 0};
  double rho_f = 1, rho_s = 1, c_pf = 1, c_ps = 1;

  DimensionlessParams at(double eps) const {
    DimensionlessParams p;
    p.alpha_tau = alpha_tau.at(eps);
    p.alpha_mu = alpha_mu.at(eps);
    p.alpha_nu = alpha_nu.at(eps);
    p.alpha_lambda = alpha_lambda.at(eps);
    p.alpha_eta = alpha_eta.at(eps);
    p.alpha_p = alpha_p.at(eps);
    p.alpha_theta_f = alpha_theta_f.at(eps);
    p.alpha_theta_s = alpha_theta_s.at(eps);
    p.alpha_kappa_f = alpha_kappa_f.at(eps);
    p.alpha_kappa_s = alpha_kappa_s.at(eps);
    p.rho_f = rho_f;
    p.rho_s = rho_s;
    p.c_pf = c_pf;
    p.c_ps = c_ps;
    p.epsilon = eps;
    return p;
  }
};

enum class RenormMap { Thm1_II, Thm3_III, Thm3_IV };

inline const char* renorm_map_name(RenormMap m) {
  switch (m) {
    case RenormMap::Thm1_II: return "Thm1_II";
    case RenormMap::Thm3_III: return "Thm3_III";
    case RenormMap::Thm3_IV: return "Thm3_IV";
  }
  return "?";
}

/// One applied renormalization: field scaling plus the parameter
/// substitutions it induced.
struct RenormStep {
  RenormMap map;
  std::string field_scale;  // factor applied to displacement and temperature
  std::vector<std::pair<std::string, std::string>> substitutions;
};

/// All limit values of the dimensionless parameters as eps -> 0.
struct RegimeLimits {
  ExtReal mu0, lambda0, tau0, p_star, nu0, kappa0f, kappa0s, eta0, beta0s,
      beta0f;                                            // plain limits
  ExtReal kappa1f, mu1, p1, beta1s, beta1f, lambda1, eta1, kappa1s;  // /alpha_mu family
  ExtReal kappa2s, eta2, p2, beta2f, beta2s;             // /alpha_lambda family
  double rho_f = 1, rho_s = 1, c_pf = 1, c_ps = 1;
  bool estimated = false;  // set when obtained from numeric samples
  std::vector<RenormStep> trail;

  /// Assumption 2; violations are classification errors, never silent.
  void check_assumption2() const {
    if (!(tau0.positive() || mu1.positive()))
      throw ParameterError("Assumption 2 violated: tau0 + mu1 must be > 0");
    struct {
      const char* name;
      const ExtReal* x;
    } pos[] = {{"kappa0s", &kappa0s}, {"kappa1f", &kappa1f},
               {"lambda0", &lambda0}, {"p_star", &p_star}, {"eta0", &eta0}};
    for (auto& b : pos)
      if (!b.x->positive())
        throw ParameterError(std::string("Assumption 2 violated: ") + b.name +
                             " must be > 0");
    struct {
      const char* name;
      const ExtReal* x;
    } fin[] = {{"tau0", &tau0}, {"kappa1f", &kappa1f}, {"mu0", &mu0},
               {"nu0", &nu0}};
    for (auto& b : fin)
      if (!b.x->finite())
        throw ParameterError(std::string("Assumption 2 violated: ") + b.name +
                             " must be finite");
  }
};

inline RegimeLimits limits_from_power_laws(const AlphaLaws& a) {
  RegimeLimits r;
  const PowerLaw eps2{1.0, 2.0};
  r.mu0 = a.alpha_mu.limit();
  r.lambda0 = a.alpha_lambda.limit();
  r.tau0 = a.alpha_tau.limit();
  r.p_star = a.alpha_p.limit();
  r.nu0 = a.alpha_nu.limit();
  r.kappa0f = a.alpha_kappa_f.limit();
  r.kappa0s = a.alpha_kappa_s.limit();
  r.eta0 = a.alpha_eta.limit();
  r.beta0s = a.alpha_theta_s.limit();
  r.beta0f = a.alpha_theta_f.limit();
  r.kappa1f = a.alpha_kappa_f.over(a.alpha_mu).limit();
  r.mu1 = a.alpha_mu.over(eps2).limit();
  r.p1 = a.alpha_p.times_eps2().over(a.alpha_mu).limit();
  r.beta1s = a.alpha_theta_s.times_eps2().over(a.alpha_mu).limit();
  r.beta1f = a.alpha_theta_f.times_eps2().over(a.alpha_mu).limit();
  r.lambda1 = a.alpha_lambda.times_eps2().over(a.alpha_mu).limit();
  r.eta1 = a.alpha_eta.times_eps2().over(a.alpha_mu).limit();
  r.kappa1s = a.alpha_kappa_s.times_eps2().over(a.alpha_mu).limit();
  r.kappa2s = a.alpha_kappa_s.over(a.alpha_lambda).limit();
  r.eta2 = a.alpha_eta.over(a.alpha_lambda).limit();
  r.p2 = a.alpha_p.over(a.alpha_lambda).limit();
  r.beta2f = a.alpha_theta_f.over(a.alpha_lambda).limit();
  r.beta2s = a.alpha_theta_s.over(a.alpha_lambda).limit();
  r.rho_f = a.rho_f;
  r.rho_s = a.rho_s;
  r.c_pf = a.c_pf;
  r.c_ps = a.c_ps;
  return r;
}

namespace detail {

/// Log-log slope estimate of one ratio series along decreasing eps.
inline ExtReal estimate_limit(const std::vector<double>& eps,
                              const std::vector<double>& val,
                              const std::string& name) {
  const std::size_t n = eps.size();
  bool all_zero = true;
  for (double v : val) all_zero = all_zero && v == 0.0;
  if (all_zero) return ExtReal::of(0.0);
  for (double v : val)
    if (v <= 0.0)
      throw ParameterError("numeric limit estimation: nonpositive sample in " +
                           name);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = std::log(eps[i]), y = std::log(val[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = double(n) * sxx - sx * sx;
  double k = (double(n) * sxy - sx * sy) / denom;
  if (k > 0.1) return ExtReal::of(0.0);
  if (k < -0.1) return ExtReal::infinity();
  double vmin = val[0], vmax = val[0];
  for (double v : val) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  if (vmax > 1.2 * vmin)
    throw ParameterError("indeterminate limit for " + name +
                         ": slope within +-0.1 of 0 but values drift >20%");
  return ExtReal::of(val.back());  // sample at smallest eps
}

}  // namespace detail

/// Limits from >= 3 numeric samples along strictly decreasing eps. Every
/// limit is estimated by the log-log slope rule and the result is flagged
/// `estimated`.
inline RegimeLimits limits_from_samples(const std::vector<DimensionlessParams>& seq) {
  if (seq.size() < 3)
    throw ParameterError("numeric limit estimation needs >= 3 samples");
  std::vector<double> eps(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    seq[i].validate();
    eps[i] = seq[i].epsilon;
    if (i > 0 && !(eps[i] < eps[i - 1]))
      throw ParameterError("epsilon sequence must be strictly decreasing");
  }
  auto series = [&](auto get) {
    std::vector<double> v(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) v[i] = get(seq[i]);
    return v;
  };
  using P = DimensionlessParams;
  RegimeLimits r;
  auto est = [&](auto get, const char* name) {
    return detail::estimate_limit(eps, series(get), name);
  };
  r.mu0 = est([](const P& p) { return p.alpha_mu; }, "mu0");
  r.lambda0 = est([](const P& p) { return p.alpha_lambda; }, "lambda0");
  r.tau0 = est([](const P& p) { return p.alpha_tau; }, "tau0");
  r.p_star = est([](const P& p) { return p.alpha_p; }, "p_star");
  r.nu0 = est([](const P& p) { return p.alpha_nu; }, "nu0");
  r.kappa0f = est([](const P& p) { return p.alpha_kappa_f; }, "kappa0f");
  r.kappa0s = est([](const P& p) { return p.alpha_kappa_s; }, "kappa0s");
  r.eta0 = est([](const P& p) { return p.alpha_eta; }, "eta0");
  r.beta0s = est([](const P& p) { return p.alpha_theta_s; }, "beta0s");
  r.beta0f = est([](const P& p) { return p.alpha_theta_f; }, "beta0f");
  auto e2 = [](const P& p) { return p.epsilon * p.epsilon; };
  r.kappa1f = est([](const P& p) { return p.alpha_kappa_f / p.alpha_mu; }, "kappa1f");
  r.mu1 = est([&](const P& p) { return p.alpha_mu / e2(p); }, "mu1");
  r.p1 = est([&](const P& p) { return e2(p) * p.alpha_p / p.alpha_mu; }, "p1");
  r.beta1s = est([&](const P& p) { return e2(p) * p.alpha_theta_s / p.alpha_mu; }, "beta1s");
  r.beta1f = est([&](const P& p) { return e2(p) * p.alpha_theta_f / p.alpha_mu; }, "beta1f");
  r.lambda1 = est([&](const P& p) { return p.alpha_lambda * e2(p) / p.alpha_mu; }, "lambda1");
  r.eta1 = est([&](const P& p) { return p.alpha_eta * e2(p) / p.alpha_mu; }, "eta1");
  r.kappa1s = est([&](const P& p) { return p.alpha_kappa_s * e2(p) / p.alpha_mu; }, "kappa1s");
  r.kappa2s = est([](const P& p) { return p.alpha_kappa_s / p.alpha_lambda; }, "kappa2s");
  r.eta2 = est([](const P& p) { return p.alpha_eta / p.alpha_lambda; }, "eta2");
  r.p2 = est([](const P& p) { return p.alpha_p / p.alpha_lambda; }, "p2");
  r.beta2f = est([](const P& p) { return p.alpha_theta_f / p.alpha_lambda; }, "beta2f");
  r.beta2s = est([](const P& p) { return p.alpha_theta_s / p.alpha_lambda; }, "beta2s");
  r.rho_f = seq.back().rho_f;
  r.rho_s = seq.back().rho_s;
  r.c_pf = seq.back().c_pf;
  r.c_ps = seq.back().c_ps;
  r.estimated = true;
  return r;
}

/// Physical constants entering the dimensionless map; names follow the
/// right-hand sides of the defining ratios.
struct PhysicalConstants {
  double L = 1, tau = 1, g = 1, rho0 = 1;
  double mu = 0, nu = 0, lambda = 0, eta = 0;
  double kappa_s = 0, kappa_f = 0;
  double vartheta_star = 1, v_star = 1;
  double c_f_rho = 0, c_f_rho_rho = 0, c_f_rho_vartheta = 0;
  double c_f_vartheta_vartheta = -1, c_s_vartheta_vartheta = -1;
  double gamma_s = 0;
  double rho_s_prime = 1, rho_f_prime = 1;
  double epsilon = 0.1;
};

inline DimensionlessParams params_from_physical(const PhysicalConstants& c) {
  if (!(c.L > 0)) throw ParameterError("L must be positive");
  if (!(c.tau > 0)) throw ParameterError("tau must be positive");
  if (!(c.g > 0)) throw ParameterError("g must be positive");
  if (!(c.rho0 > 0)) throw ParameterError("rho0 must be positive");
  if (!(c.vartheta_star > 0 && c.v_star > 0))
    throw ParameterError("vartheta_star and v_star must be positive");
  DimensionlessParams p;
  p.alpha_tau = c.L / (c.g * c.tau * c.tau);
  p.alpha_mu = 2.0 * c.mu / (c.tau * c.g * c.rho0 * c.L);
  p.alpha_nu = (c.nu - 2.0 / 3.0 * c.mu) / (c.tau * c.g * c.rho0 * c.L);
  p.alpha_eta = (c.eta - 2.0 / 3.0 * c.lambda) / (c.g * c.rho0 * c.L);
  p.alpha_kappa_s = c.kappa_s * c.vartheta_star /
                    (c.v_star * c.v_star * c.tau * c.g * c.rho0 * c.L);
  p.alpha_kappa_f = c.kappa_f * c.vartheta_star /
                    (c.v_star * c.v_star * c.tau * c.g * c.rho0 * c.L);
  p.alpha_lambda = 2.0 * c.lambda / (c.g * c.rho0 * c.L);
  p.alpha_p = (2.0 * c.c_f_rho + c.rho_f_prime * c.c_f_rho_rho) *
              c.rho_f_prime * c.rho_f_prime / (c.g * c.rho0 * c.L);
  p.alpha_theta_s = c.gamma_s * c.eta * c.vartheta_star /
                    (c.v_star * c.tau * c.g * c.rho0);
  p.alpha_theta_f = c.c_f_rho_vartheta * c.rho_f_prime * c.rho_f_prime *
                    c.vartheta_star / (c.v_star * c.tau * c.g * c.rho0);
  p.c_pf = -c.c_f_vartheta_vartheta * c.rho_f_prime * c.vartheta_star *
           c.vartheta_star / (c.rho0 * c.v_star * c.v_star);
  p.c_ps = -c.c_s_vartheta_vartheta * c.rho_s_prime * c.vartheta_star *
           c.vartheta_star / (c.rho0 * c.v_star * c.v_star);
  p.rho_f = c.rho_f_prime / c.rho0;
  p.rho_s = c.rho_s_prime / c.rho0;
  p.epsilon = c.epsilon;
  p.validate();
  return p;
}

/// Re-normalization maps of Theorem 1(II) and Theorem 3(III)-(IV). Returns
/// the tilded limit set and records the field scaling in the trail.
inline RegimeLimits renormalize(const RegimeLimits& in, RenormMap which) {
  for (const auto& s : in.trail)
    if (s.map == which)
      throw ParameterError(std::string("renormalization already applied: ") +
                           renorm_map_name(which));
  auto need_finite = [&](const ExtReal& x, const char* name) {
    if (!x.finite())
      throw ParameterError(std::string(renorm_map_name(which)) +
                           ": condition failed, " + name + " must be finite");
  };
  auto need_inf = [&](const ExtReal& x, const char* name) {
    if (x.finite())
      throw ParameterError(std::string(renorm_map_name(which)) +
                           ": condition failed, " + name + " must be infinite");
  };
  RegimeLimits out = in;
  RenormStep step;
  step.map = which;
  auto sub = [&](const char* n, const ExtReal& v) {
    step.substitutions.emplace_back(n, v.str());
  };
  if (which == RenormMap::Thm3_III) {
    need_inf(in.lambda0, "lambda0");
    need_finite(in.lambda1, "lambda1");
    need_finite(in.p2, "p2");
    need_finite(in.eta2, "eta2");
    need_finite(in.beta2s, "beta2s");
    need_finite(in.beta2f, "beta2f");
    need_finite(in.kappa2s, "kappa2s");
    if (!in.kappa2s.positive())
      throw ParameterError("Thm3_III: condition failed, kappa2s must be > 0");
    out.tau0 = ExtReal::of(0.0);
    out.mu0 = ExtReal::of(0.0);
    out.nu0 = ExtReal::of(0.0);
    out.mu1 = in.lambda1.is_zero() ? ExtReal::infinity() : in.lambda1.reciprocal();
    out.lambda0 = ExtReal::of(1.0);
    out.p_star = in.p2;
    out.eta0 = in.eta2;
    out.beta0s = in.beta2s;
    out.beta0f = in.beta2f;
    out.kappa0s = in.kappa2s;
    out.kappa0f = ExtReal::of(0.0);  // alpha_kappa_f / alpha_lambda -> 0
    step.field_scale = "alpha_lambda";
  } else {
    // Thm1_II and Thm3_IV share the eps^-2 alpha_mu scaling.
    need_inf(in.mu1, "mu1");
    if (which == RenormMap::Thm1_II) {
      need_inf(in.lambda0, "lambda0");
      need_inf(in.kappa0s, "kappa0s");
    }
    if (!in.lambda1.positive())
      throw ParameterError(std::string(renorm_map_name(which)) +
                           ": condition failed, lambda1 must be > 0");
    need_finite(in.p1, "p1");
    need_finite(in.eta1, "eta1");
    need_finite(in.beta1s, "beta1s");
    need_finite(in.beta1f, "beta1f");
    need_finite(in.kappa1s, "kappa1s");
    out.tau0 = ExtReal::of(0.0);
    out.mu0 = ExtReal::of(0.0);
    out.nu0 = ExtReal::of(0.0);
    out.mu1 = ExtReal::of(1.0);
    out.lambda0 = in.lambda1;
    out.p_star = in.p1;
    out.eta0 = in.eta1;
    out.beta0s = in.beta1s;
    out.beta0f = in.beta1f;
    out.kappa0s = in.kappa1s;
    out.kappa0f = in.kappa1f;
    step.field_scale = "alpha_mu/eps^2";
  }
  sub("tau0", out.tau0);
  sub("mu1", out.mu1);
  sub("lambda0", out.lambda0);
  sub("p_star", out.p_star);
  sub("eta0", out.eta0);
  sub("beta0s", out.beta0s);
  sub("beta0f", out.beta0f);
  sub("kappa0s", out.kappa0s);
  out.trail.push_back(step);
  return out;
}

enum class Model {
  ThermoPoroElastic_OneVelocity,  // Thm 2(I)
  ThermoPoroElastic_IsolatedPores,  // Thm 2(II)
  ThermoPoroElastic_TwoVelocity,  // Thm 2(III)
  Filtration_F1,
  Filtration_F2,
  Filtration_F3,                  // Thm 3(I)
  QuasiStaticElliptic,            // Thm 3(II)
  ThermoViscoElastic              // Thm 4
};

inline const char* model_name(Model m) {
  switch (m) {
    case Model::ThermoPoroElastic_OneVelocity: return "ThermoPoroElastic_OneVelocity";
    case Model::ThermoPoroElastic_IsolatedPores: return "ThermoPoroElastic_IsolatedPores";
    case Model::ThermoPoroElastic_TwoVelocity: return "ThermoPoroElastic_TwoVelocity";
    case Model::Filtration_F1: return "Filtration_F1";
    case Model::Filtration_F2: return "Filtration_F2";
    case Model::Filtration_F3: return "Filtration_F3";
    case Model::QuasiStaticElliptic: return "QuasiStaticElliptic";
    case Model::ThermoViscoElastic: return "ThermoViscoElastic";
  }
  return "?";
}

enum class DarcyVariant { KernelB1, MatrixB2, MatrixB3, NotApplicable };

inline const char* darcy_variant_name(DarcyVariant v) {
  switch (v) {
    case DarcyVariant::KernelB1: return "KernelB1";
    case DarcyVariant::MatrixB2: return "MatrixB2";
    case DarcyVariant::MatrixB3: return "MatrixB3";
    case DarcyVariant::NotApplicable: return "NotApplicable";
  }
  return "?";
}

/// Hypothesis metadata the paper leaves to the user: which of the
/// alternative condition sets of Theorem 1(III)/Theorem 3 is asserted, and
/// whether the second-approximation problem of Theorem 3(II) is requested.
struct HypothesisAssertions {
  bool asserts_2_8 = true;    // p*, beta0f < inf route
  bool asserts_2_9 = false;   // potential forcing F = grad(Phi), Psi = 0
  bool assumption3 = false;
  bool assumption4 = false;
  bool second_approximation = false;
};

struct ModelSelection {
  Model model = Model::ThermoPoroElastic_OneVelocity;
  DarcyVariant darcy_variant = DarcyVariant::NotApplicable;
  std::vector<RenormStep> renormalization_trail;
  RegimeLimits effective_limits;
  std::vector<std::string> notes;
};

namespace detail {

inline void require_finite(const ExtReal& x, const char* name, const char* ctx) {
  if (!x.finite())
    throw ParameterError(std::string("outside admissible parameter range: ") +
                         name + " must be finite for " + ctx);
}

inline DarcyVariant darcy_from(const RegimeLimits& l) {
  if (l.mu1.is_zero()) return DarcyVariant::MatrixB3;
  if (l.tau0.is_zero()) return DarcyVariant::MatrixB2;
  return DarcyVariant::KernelB1;
}

inline ModelSelection classify_impl(const RegimeLimits& l,
                                    const ConnectivityReport& conn,
                                    const HypothesisAssertions& hyp,
                                    int depth);

/// Theorem 2 family: mu0 = 0, lambda0 < inf.
inline ModelSelection classify_theorem2(const RegimeLimits& l,
                                        const ConnectivityReport& conn) {
  for (auto [x, n] : {std::pair<const ExtReal*, const char*>{&l.kappa0s, "kappa0s"},
                      {&l.p_star, "p_star"},
                      {&l.eta0, "eta0"},
                      {&l.beta0f, "beta0f"},
                      {&l.beta0s, "beta0s"}})
    require_finite(*x, n, "Theorem 2 (condition 2.11)");
  ModelSelection sel;
  sel.effective_limits = l;
  sel.renormalization_trail = l.trail;
  if (!l.mu1.finite()) {
    sel.model = Model::ThermoPoroElastic_OneVelocity;
    sel.darcy_variant = DarcyVariant::NotApplicable;
  } else if (conn.isolated_pores) {
    sel.model = Model::ThermoPoroElastic_IsolatedPores;
    sel.darcy_variant = DarcyVariant::NotApplicable;
    sel.notes.push_back("isolated pores: fluid temperature theta_f tracked separately");
  } else {
    sel.model = Model::ThermoPoroElastic_TwoVelocity;
    sel.darcy_variant = darcy_from(l);
  }
  return sel;
}

/// Theorem 3 family: lambda0 = inf.
inline ModelSelection classify_theorem3(const RegimeLimits& l,
                                        const ConnectivityReport& conn,
                                        const HypothesisAssertions& hyp,
                                        int depth) {
  if (depth > 2) throw InternalError("classify: renormalization recursion");
  if (l.mu1.finite()) {
    require_finite(l.kappa0s, "kappa0s", "Theorem 3(I)");
    require_finite(l.beta0f, "beta0f", "Theorem 3(I)");
    bool c28 = hyp.asserts_2_8 && l.p_star.finite() && l.beta0f.finite();
    bool c29 = hyp.asserts_2_9 && l.p2.finite() && l.p2.positive() &&
               l.eta2.finite() && l.eta2.positive();
    if (!c28 && !c29)
      throw ParameterError(
          "Theorem 3(I) hypotheses not satisfied: need condition (2.8) or (2.9)");
    ModelSelection sel;
    sel.effective_limits = l;
    sel.renormalization_trail = l.trail;
    if (hyp.second_approximation) {
      if (!(c29 && hyp.assumption3 && l.beta0s.finite()))
        throw ParameterError(
            "Theorem 3(II) requires conditions (2.9), Assumption 3 and finite beta0s");
      sel.model = Model::QuasiStaticElliptic;
      sel.darcy_variant = darcy_from(l);
      sel.notes.push_back(
          "second approximation: q supplied by the matching filtration problem; "
          "coefficients use eta0 = eta2, lambda0 = 1");
      return sel;
    }
    if (l.mu1.is_zero()) {
      if (l.tau0.is_zero())
        throw ParameterError("Assumption 2 violated: tau0 + mu1 must be > 0");
      sel.model = Model::Filtration_F3;
    } else if (l.tau0.is_zero()) {
      sel.model = Model::Filtration_F2;
    } else {
      sel.model = Model::Filtration_F1;
    }
    sel.darcy_variant = darcy_from(l);
    if (conn.isolated_pores)
      sel.notes.push_back("isolated pores: permeability degenerates (B2 = 0, B1 = 0)");
    return sel;
  }
  // mu1 = inf: reach Theorem 2 through a re-normalization.
  bool iii_ok = l.lambda1.finite() && l.kappa2s.finite() && l.kappa2s.positive() &&
                l.beta2f.finite() && l.beta2s.finite() && l.p2.finite() &&
                l.eta2.finite() && hyp.assumption3;
  if (iii_ok) {
    RegimeLimits t = renormalize(l, RenormMap::Thm3_III);
    t.check_assumption2();
    return classify_impl(t, conn, hyp, depth + 1);
  }
  bool iv_ok = l.lambda1.positive() && l.p1.finite() && l.eta1.finite() &&
               l.beta1s.finite() && l.beta1f.finite() && l.kappa1s.finite();
  if (iv_ok) {
    RegimeLimits t = renormalize(l, RenormMap::Thm3_IV);
    t.check_assumption2();
    return classify_impl(t, conn, hyp, depth + 1);  // lambda1=inf lands in 3(V)
  }
  throw ParameterError(
      "outside admissible parameter range: lambda0 = mu1 = inf but neither "
      "Theorem 3(III) nor 3(IV)/(V) conditions hold");
}

inline ModelSelection classify_impl(const RegimeLimits& l,
                                    const ConnectivityReport& conn,
                                    const HypothesisAssertions& hyp,
                                    int depth) {
  l.check_assumption2();
  if (!l.lambda0.finite()) return classify_theorem3(l, conn, hyp, depth);
  if (l.mu0.positive()) {
    for (auto [x, n] : {std::pair<const ExtReal*, const char*>{&l.kappa0s, "kappa0s"},
                        {&l.p_star, "p_star"},
                        {&l.eta0, "eta0"},
                        {&l.beta0f, "beta0f"},
                        {&l.beta0s, "beta0s"}})
      require_finite(*x, n, "Theorem 4");
    ModelSelection sel;
    sel.model = Model::ThermoViscoElastic;
    sel.darcy_variant = DarcyVariant::NotApplicable;
    sel.effective_limits = l;
    sel.renormalization_trail = l.trail;
    if (conn.isolated_pores)
      sel.notes.push_back("isolated pores: A2 = 0 expected (Lemma 7.4)");
    return sel;
  }
  return classify_theorem2(l, conn);
}

}  // namespace detail

/// Deterministic model selection over the admissible parameter region.
inline ModelSelection classify(const RegimeLimits& limits,
                               const ConnectivityReport& conn,
                               const HypothesisAssertions& hyp = {}) {
  return detail::classify_impl(limits, conn, hyp, 0);
}

}  // namespace poroscale
