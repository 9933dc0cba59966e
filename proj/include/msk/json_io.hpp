#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "msk/covariance.hpp"
#include "msk/errors.hpp"
#include "msk/model.hpp"
#include "msk/parisi.hpp"
#include "msk/rs_solver.hpp"
#include "msk/simulator.hpp"
#include "msk/spectral_phase.hpp"

namespace msk {

using json = nlohmann::json;

constexpr const char* kSchemaVersion = "1";

inline json to_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Vector vector_from_json(const json& a) {
  Vector v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

inline Matrix matrix_from_json(const json& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw DimensionMismatch("ragged matrix in JSON");
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

/// Canonical model-spec file: {"m": int, "lambda": [...], "delta2": [[...]]}.
inline SpeciesStructure model_from_json(const json& j) {
  SpeciesStructure s;
  if (!j.contains("m") || !j.contains("lambda") || !j.contains("delta2"))
    throw BadRatios("model spec must contain m, lambda and delta2");
  s.m = j.at("m").get<int>();
  s.lambda = vector_from_json(j.at("lambda"));
  s.delta2 = matrix_from_json(j.at("delta2"));
  validate_structure(s);
  return s;
}

inline SpeciesStructure load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadRatios("cannot open model file: " + path);
  json j;
  in >> j;
  return model_from_json(j);
}

inline json model_to_json(const SpeciesStructure& s) {
  return json{{"m", s.m}, {"lambda", to_json(s.lambda)}, {"delta2", to_json(s.delta2)}};
}

inline json to_json(const RsSolution& sol) {
  return json{{"q", to_json(sol.q)},
              {"Qvec", to_json(sol.Qvec)},
              {"qhat", to_json(sol.qhat)},
              {"gamma", to_json(sol.gamma)},
              {"gamma_p", to_json(sol.gamma_p)},
              {"gamma_pp", to_json(sol.gamma_pp)},
              {"residual", sol.residual},
              {"unique_certified", sol.unique_certified},
              {"method", to_string(sol.method)},
              {"iterations", sol.iterations}};
}

inline json to_json(const PhasePoint& pt) {
  json j{{"beta", pt.beta},
         {"h", pt.h},
         {"beta_c", pt.beta_c},
         {"beta_0", pt.beta_0},
         {"region", to_string(pt.region)},
         {"conjectural", pt.conjectural},
         {"unique_certified", pt.unique_certified}};
  if (std::isfinite(pt.beta_at)) j["beta_at"] = pt.beta_at;
  if (pt.rsb_witness) j["rsb_witness"] = to_json(*pt.rsb_witness);
  return j;
}

inline json to_json(const OverlapCovariance& c) {
  return json{{"Sigma0", to_json(c.Sigma0)},
              {"Sigma1", to_json(c.Sigma1)},
              {"Sigma2", to_json(c.Sigma2)},
              {"Sigmahat0", to_json(c.Sigmahat0)},
              {"Sigmahat1", to_json(c.Sigmahat1)},
              {"Sigmahat2", to_json(c.Sigmahat2)},
              {"rho_gamma", c.rho_gamma},
              {"abscissa_gamma_p", c.absc_gamma_p},
              {"source", c.source == SigmaSource::ClosedForm ? "closed_form" : "lyapunov_integral"}};
}

inline json to_json(const CltParams& c) {
  json j{{"rs_value", c.rs_value}, {"b_h", c.b_h}};
  if (std::isfinite(c.cN_linear)) {
    j["cN_linear"] = c.cN_linear;
    j["cN_logdet"] = c.cN_logdet;
    j["b_zero"] = c.b_zero;
  }
  return j;
}

inline json to_json(const OverlapMoments& u) {
  return json{{"U0", to_json(u.U0)},
              {"U1", to_json(u.U1)},
              {"U2", to_json(u.U2)},
              {"std_err0", to_json(u.std_err0)},
              {"std_err1", to_json(u.std_err1)},
              {"std_err2", to_json(u.std_err2)},
              {"q_used", to_json(u.q_used)},
              {"n_disorder", u.n_disorder}};
}

inline json summary_json(const GibbsEstimate& g) {
  json j{{"logZ", g.logZ}, {"F_N", g.F_N}, {"exact", g.exact}};
  if (g.one_point.size() > 0 && g.one_point.size() <= 64)
    j["one_point"] = to_json(g.one_point);
  if (!g.exact) {
    j["se_logZ"] = g.se_logZ;
    j["tau_int"] = g.tau_int;
  }
  return j;
}

/// Writes through a temp file in the same directory followed by a rename,
/// so readers never observe partial output.
inline void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("IoError", "cannot rename " + tmp + " to " + path);
}

inline std::string format_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace msk
