#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "poroscale/core.hpp"
#include "poroscale/regimes.hpp"
#include "poroscale/tensors.hpp"

namespace poroscale {

using json = nlohmann::ordered_json;

inline json to_json(const Mat3& m, int dim) {
  json rows = json::array();
  for (int i = 0; i < dim; ++i) {
    json row = json::array();
    for (int j = 0; j < dim; ++j) row.push_back(m.a[i][j]);
    rows.push_back(row);
  }
  return rows;
}

inline Mat3 mat_from_json(const json& j) {
  Mat3 m;
  for (std::size_t i = 0; i < j.size(); ++i)
    for (std::size_t k = 0; k < j[i].size(); ++k)
      m.a[i][k] = j[i][k].get<double>();
  return m;
}

/// Fourth-rank tensors travel in the sqrt(2)-normalized Voigt form.
inline json to_json(const Tensor4& t, int dim) {
  MandelMatrix m = to_mandel(t, dim);
  json rows = json::array();
  for (int p = 0; p < m.size(); ++p) {
    json row = json::array();
    for (int q = 0; q < m.size(); ++q) row.push_back(m.m[p][q]);
    rows.push_back(row);
  }
  return rows;
}

inline Tensor4 tensor_from_json(const json& j, int dim) {
  MandelMatrix m;
  m.dim = dim;
  for (std::size_t p = 0; p < j.size(); ++p)
    for (std::size_t q = 0; q < j[p].size(); ++q)
      m.m[p][q] = j[p][q].get<double>();
  Tensor4 t;
  int s = m.size();
  for (int p = 0; p < s; ++p)
    for (int q = 0; q < s; ++q) {
      int i, jj, k, l;
      m.pair(p, i, jj);
      m.pair(q, k, l);
      double v = m.m[p][q] / (m.weight(p) * m.weight(q));
      t.a[i][jj][k][l] = v;
      t.a[jj][i][k][l] = v;
      t.a[i][jj][l][k] = v;
      t.a[jj][i][l][k] = v;
    }
  return t;
}

inline json to_json(const EffectiveCoefficients& c) {
  json j;
  j["dim"] = c.dim;
  j["m"] = c.m;
  j["rho_hat"] = c.rho_hat;
  j["cp_hat"] = c.cp_hat;
  j["kappa0_hat"] = c.kappa0_hat;
  j["A_s0"] = to_json(c.A_s0, c.dim);
  j["A_s1"] = to_json(c.A_s1, c.dim);
  j["B_s0"] = to_json(c.B_s0, c.dim);
  j["B_s1"] = to_json(c.B_s1, c.dim);
  j["C_s0"] = to_json(c.C_s0, c.dim);
  j["a_s0"] = c.a_s0;
  j["a_s1"] = c.a_s1;
  j["B_theta"] = to_json(c.B_theta, c.dim);
  j["A2"] = to_json(c.A2, c.dim);
  j["A3"] = to_json(c.A3, c.dim);
  j["A0_f"] = to_json(c.A0_f, c.dim);
  j["B4"] = to_json(c.B4, c.dim);
  j["B1_theta"] = to_json(c.B1_theta, c.dim);
  j["B0_theta"] = to_json(c.B0_theta, c.dim);
  j["literal_7_38"] = c.literal_7_38;
  j["B2_darcy"] = to_json(c.B2_darcy, c.dim);
  j["B3_darcy"] = to_json(c.B3_darcy, c.dim);
  j["b2_degenerate"] = c.b2_degenerate;
  j["b3_degenerate"] = c.b3_degenerate;
  j["notes"] = c.notes;
  return j;
}

inline EffectiveCoefficients coefficients_from_json(const json& j) {
  EffectiveCoefficients c;
  c.dim = j.at("dim").get<int>();
  c.m = j.at("m").get<double>();
  c.rho_hat = j.at("rho_hat").get<double>();
  c.cp_hat = j.at("cp_hat").get<double>();
  c.kappa0_hat = j.at("kappa0_hat").get<double>();
  c.A_s0 = tensor_from_json(j.at("A_s0"), c.dim);
  c.A_s1 = tensor_from_json(j.at("A_s1"), c.dim);
  c.B_s0 = mat_from_json(j.at("B_s0"));
  c.B_s1 = mat_from_json(j.at("B_s1"));
  c.C_s0 = mat_from_json(j.at("C_s0"));
  c.a_s0 = j.at("a_s0").get<double>();
  c.a_s1 = j.at("a_s1").get<double>();
  c.B_theta = mat_from_json(j.at("B_theta"));
  c.A2 = tensor_from_json(j.at("A2"), c.dim);
  c.A3 = tensor_from_json(j.at("A3"), c.dim);
  c.A0_f = tensor_from_json(j.at("A0_f"), c.dim);
  c.B4 = mat_from_json(j.at("B4"));
  c.B1_theta = mat_from_json(j.at("B1_theta"));
  c.B0_theta = mat_from_json(j.at("B0_theta"));
  c.literal_7_38 = j.at("literal_7_38").get<bool>();
  c.B2_darcy = mat_from_json(j.at("B2_darcy"));
  c.B3_darcy = mat_from_json(j.at("B3_darcy"));
  c.b2_degenerate = j.at("b2_degenerate").get<bool>();
  c.b3_degenerate = j.at("b3_degenerate").get<bool>();
  c.notes = j.at("notes").get<std::vector<std::string>>();
  return c;
}

inline json kernel_series(const std::vector<double>& t, const json& values) {
  json j;
  j["t"] = t;
  j["values"] = values;
  return j;
}

inline json to_json(const MemoryKernelSet& k, int dim) {
  json j;
  auto tensors = [&](const std::vector<Tensor4>& v) {
    json arr = json::array();
    for (const auto& x : v) arr.push_back(to_json(x, dim));
    return arr;
  };
  auto mats = [&](const std::vector<Mat3>& v) {
    json arr = json::array();
    for (const auto& x : v) arr.push_back(to_json(x, dim));
    return arr;
  };
  j["A4"] = kernel_series(k.times, tensors(k.A4));
  j["A1_f"] = kernel_series(k.times, tensors(k.A1_f));
  j["B5"] = kernel_series(k.times, mats(k.B5));
  j["B2_theta"] = kernel_series(k.times, mats(k.B2_theta));
  j["C2"] = kernel_series(k.times, mats(k.C2));
  j["C3"] = kernel_series(k.times, mats(k.C3));
  j["a2"] = kernel_series(k.times, json(k.a2));
  j["a3"] = kernel_series(k.times, json(k.a3));
  j["a1_theta"] = kernel_series(k.times, json(k.a1_theta));
  j["a2_theta"] = kernel_series(k.times, json(k.a2_theta));
  j["B1_darcy"] = kernel_series(k.times, mats(k.B1_darcy));
  j["b_theta_f"] = kernel_series(k.times, json(k.b_theta_f));
  j["c_theta_f"] = k.c_theta_f;
  return j;
}

inline MemoryKernelSet kernels_from_json(const json& j, int dim) {
  MemoryKernelSet k;
  auto times = j.at("A4").at("t");
  k.times = times.get<std::vector<double>>();
  for (const auto& x : j.at("A4").at("values")) k.A4.push_back(tensor_from_json(x, dim));
  for (const auto& x : j.at("A1_f").at("values")) k.A1_f.push_back(tensor_from_json(x, dim));
  auto mats = [&](const char* name, std::vector<Mat3>& out) {
    for (const auto& x : j.at(name).at("values")) out.push_back(mat_from_json(x));
  };
  mats("B5", k.B5);
  mats("B2_theta", k.B2_theta);
  mats("C2", k.C2);
  mats("C3", k.C3);
  mats("B1_darcy", k.B1_darcy);
  k.a2 = j.at("a2").at("values").get<std::vector<double>>();
  k.a3 = j.at("a3").at("values").get<std::vector<double>>();
  k.a1_theta = j.at("a1_theta").at("values").get<std::vector<double>>();
  k.a2_theta = j.at("a2_theta").at("values").get<std::vector<double>>();
  k.b_theta_f = j.at("b_theta_f").at("values").get<std::vector<double>>();
  k.c_theta_f = j.at("c_theta_f").get<double>();
  return k;
}

inline json to_json(const VerificationReport& r) {
  json j;
  j["all_pass"] = r.all_pass;
  json checks = json::array();
  for (const auto& c : r.checks) {
    json jc;
    jc["name"] = c.name;
    jc["pass"] = c.pass;
    jc["margin"] = c.margin;
    if (!c.detail.empty()) jc["detail"] = c.detail;
    checks.push_back(jc);
  }
  j["checks"] = checks;
  j["notes"] = r.notes;
  return j;
}

inline json to_json(const ExtReal& x) {
  if (x.inf) return json("inf");
  return json(x.v);
}

inline ExtReal extreal_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return ExtReal::infinity();
    throw ParameterError("expected a number or \"inf\"");
  }
  return ExtReal::of(j.get<double>());
}

inline json to_json(const RegimeLimits& l) {
  json j;
  j["mu0"] = to_json(l.mu0);
  j["lambda0"] = to_json(l.lambda0);
  j["tau0"] = to_json(l.tau0);
  j["p_star"] = to_json(l.p_star);
  j["nu0"] = to_json(l.nu0);
  j["kappa0f"] = to_json(l.kappa0f);
  j["kappa0s"] = to_json(l.kappa0s);
  j["eta0"] = to_json(l.eta0);
  j["beta0s"] = to_json(l.beta0s);
  j["beta0f"] = to_json(l.beta0f);
  j["kappa1f"] = to_json(l.kappa1f);
  j["mu1"] = to_json(l.mu1);
  j["p1"] = to_json(l.p1);
  j["beta1s"] = to_json(l.beta1s);
  j["beta1f"] = to_json(l.beta1f);
  j["lambda1"] = to_json(l.lambda1);
  j["eta1"] = to_json(l.eta1);
  j["kappa1s"] = to_json(l.kappa1s);
  j["kappa2s"] = to_json(l.kappa2s);
  j["eta2"] = to_json(l.eta2);
  j["p2"] = to_json(l.p2);
  j["beta2f"] = to_json(l.beta2f);
  j["beta2s"] = to_json(l.beta2s);
  j["rho_f"] = l.rho_f;
  j["rho_s"] = l.rho_s;
  j["c_pf"] = l.c_pf;
  j["c_ps"] = l.c_ps;
  j["estimated"] = l.estimated;
  return j;
}

inline RegimeLimits limits_from_json(const json& j) {
  RegimeLimits l;
  auto get = [&](const char* name, ExtReal& out) {
    if (j.contains(name)) out = extreal_from_json(j.at(name));
  };
  get("mu0", l.mu0);
  get("lambda0", l.lambda0);
  get("tau0", l.tau0);
  get("p_star", l.p_star);
  get("nu0", l.nu0);
  get("kappa0f", l.kappa0f);
  get("kappa0s", l.kappa0s);
  get("eta0", l.eta0);
  get("beta0s", l.beta0s);
  get("beta0f", l.beta0f);
  get("kappa1f", l.kappa1f);
  get("mu1", l.mu1);
  get("p1", l.p1);
  get("beta1s", l.beta1s);
  get("beta1f", l.beta1f);
  get("lambda1", l.lambda1);
  get("eta1", l.eta1);
  get("kappa1s", l.kappa1s);
  get("kappa2s", l.kappa2s);
  get("eta2", l.eta2);
  get("p2", l.p2);
  get("beta2f", l.beta2f);
  get("beta2s", l.beta2s);
  if (j.contains("rho_f")) l.rho_f = j.at("rho_f").get<double>();
  if (j.contains("rho_s")) l.rho_s = j.at("rho_s").get<double>();
  if (j.contains("c_pf")) l.c_pf = j.at("c_pf").get<double>();
  if (j.contains("c_ps")) l.c_ps = j.at("c_ps").get<double>();
  return l;
}

inline json to_json(const ModelSelection& sel) {
  json j;
  j["model"] = model_name(sel.model);
  j["darcy_variant"] = darcy_variant_name(sel.darcy_variant);
  json trail = json::array();
  for (const auto& s : sel.renormalization_trail) {
    json js;
    js["map"] = renorm_map_name(s.map);
    js["field_scale"] = s.field_scale;
    json subs;
    for (const auto& [k, v] : s.substitutions) subs[k] = v;
    js["substitutions"] = subs;
    trail.push_back(js);
  }
  j["renormalization_trail"] = trail;
  j["effective_limits"] = to_json(sel.effective_limits);
  j["notes"] = sel.notes;
  return j;
}

/// CellField export: flat binary of 64-bit doubles plus a JSON sidecar.
inline void save_cell_field(const CellField& f, const std::string& path_bin,
                            const std::string& path_json) {
  std::ofstream b(path_bin, std::ios::binary);
  if (!b) throw IoError("cannot open for writing: " + path_bin);
  b.write(reinterpret_cast<const char*>(f.values.data()),
          std::streamsize(f.values.size() * sizeof(double)));
  for (const auto& snap : f.time_values)
    b.write(reinterpret_cast<const char*>(snap.data()),
            std::streamsize(snap.size() * sizeof(double)));
  if (!b) throw IoError("write failed: " + path_bin);
  json j;
  j["kind"] = f.kind == FieldKind::Scalar ? "scalar"
              : f.kind == FieldKind::Vector ? "vector"
                                            : "pressure-pair";
  j["dim"] = f.dim;
  j["resolution"] = f.n;
  j["components"] = f.ncomp;
  j["voxel_centered"] = f.voxel_centered;
  j["values_per_sample"] = f.values.size();
  j["time_grid"] = f.times;
  std::ofstream s(path_json);
  if (!s) throw IoError("cannot open for writing: " + path_json);
  s << j.dump(2) << "\n";
}

}  // namespace poroscale
