#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "nmgme/errors.hpp"
#include "nmgme/me_coefficients.hpp"
#include "nmgme/propagator.hpp"

namespace nmgme {

using json = nlohmann::ordered_json;

/// {scenario, params, source, times, observables, diagnostics[, rho]}.
/// Density matrices are flattened row-major with re/im interleaved.
inline json trajectory_to_json(const Trajectory& tr, const std::string& scenario, const json& params,
                               bool dump_rho = false) {
  json j;
  j["scenario"] = scenario;
  j["params"] = params;
  j["source"] = tr.source;
  j["times"] = tr.times;
  json obs = json::object();
  for (const auto& [name, values] : tr.observables) obs[name] = values;
  j["observables"] = obs;
  json diag;
  std::vector<double> trace, herm, mineig, pur;
  for (const auto& d : tr.diagnostics) {
    trace.push_back(d.trace);
    herm.push_back(d.hermiticity_defect);
    mineig.push_back(d.min_eigenvalue);
    pur.push_back(d.purity);
  }
  diag["trace"] = trace;
  diag["hermiticity_defect"] = herm;
  diag["min_eigenvalue"] = mineig;
  diag["purity"] = pur;
  diag["max_trace_drift"] = tr.max_trace_drift;
  diag["trace_drift_per_time"] = tr.trace_drift_per_time;
  diag["max_hermiticity_defect"] = tr.max_hermiticity_defect;
  diag["min_eigenvalue_overall"] = tr.min_eigenvalue;
  if (!std::isnan(tr.richardson_error)) diag["richardson_error"] = tr.richardson_error;
  diag["warnings"] = tr.warnings;
  j["diagnostics"] = diag;
  if (dump_rho) {
    json rho = json::array();
    for (const auto& s : tr.states) {
      std::vector<double> flat;
      flat.reserve(static_cast<std::size_t>(s.size()) * 2);
      for (Eigen::Index r = 0; r < s.rows(); ++r)
        for (Eigen::Index c = 0; c < s.cols(); ++c) {
          flat.push_back(s(r, c).real());
          flat.push_back(s(r, c).imag());
        }
      rho.push_back(flat);
    }
    j["rho"] = rho;
  }
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error("failed writing " + path);
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void write_coefficients_csv(const std::string& path, const MECoefficients& c) {
  std::ostringstream os;
  c.write_csv(os);
  write_text(path, os.str());
}

inline void write_series_csv(const std::string& path, const MECoefficients& c) {
  std::ostringstream os;
  c.write_series_csv(os);
  write_text(path, os.str());
}

}  // namespace nmgme
