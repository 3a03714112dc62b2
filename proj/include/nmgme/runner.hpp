#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "nmgme/bath_kernels.hpp"
#include "nmgme/errors.hpp"
#include "nmgme/io.hpp"
#include "nmgme/me_coefficients.hpp"
#include "nmgme/oracle.hpp"
#include "nmgme/propagator.hpp"
#include "nmgme/system_model.hpp"

namespace nmgme {

/// Invalid configuration; `field()` is the dotted path of the culprit.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& msg) : Error(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"dephasing", "hpz", "qmupl", "joos-zeh", "oracle-check", "coeffs"};
  return names;
}

struct KernelSpec {
  std::string family = "exponential";
  double gamma = 1.0;
  double tau_c = 0.5;
  double strength = 1.0;
  double eps = 0.05;
  std::vector<double> freqs;
  std::vector<std::vector<cplx>> couplings;  // [channel][mode]
};

struct RunConfig {
  std::string scenario = "coeffs";
  std::string model = "hpz";
  KernelSpec kernel;
  double mass = 1.0, omega = 1.0, lambda = 1.0, mu = 0.0, splitting = 0.0;
  double t_max = 2.0;
  std::size_t points = 0;  // 0: 65 points per unit time
  int max_order = 3;
  double eps_series = 1e-6;
  unsigned threads = 0;
  int fock_dim = 30;
  double h = 1e-3;
  double sample_dt = 0.05;
  double tol_pos = 1e-8;
  bool richardson = false;
  double q0 = 1.0, p0 = 0.0, nbar = 0.0;
  std::vector<int> mode_dims;
  std::size_t cap = 4096;
  std::vector<double> eps_values;
  double t_eval = 2.0;
  std::string out_dir = "out";
  bool dump_rho = false;

  TimeGrid grid() const { return points ? TimeGrid(t_max, points) : TimeGrid::with_density(t_max); }
  SeriesConfig series() const { return SeriesConfig{max_order, eps_series}; }
};

namespace detail {

class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed) : path_(std::move(path)) {
    if (j.is_null()) return;
    if (!j.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    for (const auto& [key, value] : j.items())
      if (!allowed.count(key)) throw ConfigError(at(key), "unknown field");
    j_ = &j;
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_ && j_->contains(key); }
  const json& raw(const std::string& key) const { return j_->at(key); }

  double number(const std::string& key, double def) const {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(at(key), "must be finite");
    return d;
  }

  long long integer(const std::string& key, long long def) const {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
    return v.get<long long>();
  }

  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    if (!raw(key).is_boolean()) throw ConfigError(at(key), "expected true or false");
    return raw(key).get<bool>();
  }

  std::string text(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    if (!raw(key).is_string()) throw ConfigError(at(key), "expected a string");
    return raw(key).get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

 private:
  const json* j_ = nullptr;
  std::string path_;
};

inline const json& child(const json& j, const char* key) {
  static const json null_json;
  return j.is_object() && j.contains(key) ? j.at(key) : null_json;
}

inline cplx parse_coupling(const json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError(path, "expected a number or a [re, im] pair");
}

}  // namespace detail

/// Parses and validates a config tree. `scenario` (if non-empty) takes
/// precedence over the "scenario" field.
inline RunConfig parse_config(const json& root, const std::string& scenario = "") {
  using detail::child;
  using detail::Section;
  RunConfig c;
  const Section top(root, "",
                    {"scenario", "model", "kernel", "system", "grid", "series", "propagation", "initial", "oracle",
                     "joos_zeh", "output"});
  c.scenario = scenario.empty() ? top.text("scenario", c.scenario) : scenario;
  const auto& names = scenario_names();
  if (std::find(names.begin(), names.end(), c.scenario) == names.end())
    throw ConfigError("scenario", "unknown scenario '" + c.scenario + "'");
  const std::string default_model =
      (c.scenario == "coeffs" || c.scenario == "oracle-check") ? std::string("hpz") : c.scenario;
  c.model = top.text("model", default_model);
  if (c.model != "hpz" && c.model != "qmupl" && c.model != "dephasing" && c.model != "joos-zeh")
    throw ConfigError("model", "expected hpz, qmupl, dephasing or joos-zeh");
  if (c.scenario != "coeffs" && c.scenario != "oracle-check" && c.model != c.scenario)
    throw ConfigError("model", "must equal the scenario for scenario '" + c.scenario + "'");

  const Section k(child(root, "kernel"), "kernel", {"family", "gamma", "tau_c", "strength", "eps", "freqs", "couplings"});
  c.kernel.family = k.text("family", c.kernel.family);
  c.kernel.gamma = k.number("gamma", c.kernel.gamma);
  c.kernel.tau_c = k.number("tau_c", c.kernel.tau_c);
  c.kernel.strength = k.number("strength", c.kernel.strength);
  c.kernel.eps = k.number("eps", c.kernel.eps);
  c.kernel.freqs = k.numbers("freqs");
  if (c.kernel.family == "exponential") {
    if (!(c.kernel.tau_c > 0.0)) throw ConfigError("kernel.tau_c", "must be > 0");
    if (!(c.kernel.gamma >= 0.0)) throw ConfigError("kernel.gamma", "must be >= 0");
  } else if (c.kernel.family == "white_noise") {
    if (!(c.kernel.eps > 0.0)) throw ConfigError("kernel.eps", "must be > 0");
    if (!(c.kernel.strength > 0.0)) throw ConfigError("kernel.strength", "must be > 0");
  } else if (c.kernel.family == "discrete_modes") {
    if (c.kernel.freqs.empty()) throw ConfigError("kernel.freqs", "at least one mode required");
    for (std::size_t i = 0; i < c.kernel.freqs.size(); ++i)
      if (!(c.kernel.freqs[i] > 0.0)) throw ConfigError("kernel.freqs[" + std::to_string(i) + "]", "must be > 0");
    if (!k.has("couplings") || !k.raw("couplings").is_array())
      throw ConfigError("kernel.couplings", "expected an array of rows, one row of per-mode couplings per channel");
    const json& rows = k.raw("couplings");
    const auto parse_row = [&](const json& row, const std::string& path) {
      if (!row.is_array() || row.size() != c.kernel.freqs.size())
        throw ConfigError(path, "expected one coupling per mode (" + std::to_string(c.kernel.freqs.size()) + ")");
      std::vector<cplx> out;
      for (std::size_t i = 0; i < row.size(); ++i)
        out.push_back(detail::parse_coupling(row[i], path + "[" + std::to_string(i) + "]"));
      return out;
    };
    for (std::size_t r = 0; r < rows.size(); ++r)
      c.kernel.couplings.push_back(parse_row(rows[r], "kernel.couplings[" + std::to_string(r) + "]"));
    if (c.kernel.couplings.size() != 1) throw ConfigError("kernel.couplings", "exactly one channel is supported by the scenarios");
  } else {
    throw ConfigError("kernel.family", "expected exponential, white_noise or discrete_modes");
  }

  const Section s(child(root, "system"), "system", {"mass", "omega", "lambda", "mu", "splitting"});
  c.mass = s.number("mass", c.mass);
  c.omega = s.number("omega", c.omega);
  c.lambda = s.number("lambda", c.lambda);
  c.mu = s.number("mu", c.mu);
  c.splitting = s.number("splitting", c.splitting);
  if (!(c.mass > 0.0)) throw ConfigError("system.mass", "must be > 0");
  if (!(c.omega >= 0.0)) throw ConfigError("system.omega", "must be >= 0");
  if (!(c.lambda >= 0.0)) throw ConfigError("system.lambda", "must be >= 0");
  if (!(c.mu >= 0.0)) throw ConfigError("system.mu", "must be >= 0");
  if (c.model != "dephasing" && !(c.omega > 0.0) && c.scenario != "coeffs")
    throw ConfigError("system.omega", "must be > 0 for Fock-space propagation");
  if (c.model == "qmupl" && !(c.omega * c.omega > c.lambda * c.lambda * c.mu * c.mu))
    throw ConfigError("system.omega", "omega_tilde = sqrt(omega^2 - lambda^2 mu^2) must be real");
  if (c.model == "qmupl" && c.kernel.family == "discrete_modes")
    throw ConfigError("kernel.family", "qmupl needs a real symmetric base kernel (exponential or white_noise)");
  if (c.model == "joos-zeh" && c.kernel.family == "discrete_modes")
    throw ConfigError("kernel.family", "joos-zeh needs a real kernel (exponential or white_noise)");
  if (c.model == "qmupl" && !(c.lambda > 0.0)) throw ConfigError("system.lambda", "must be > 0 for qmupl");

  const Section g(child(root, "grid"), "grid", {"t_max", "points"});
  c.t_max = g.number("t_max", c.t_max);
  const long long pts = g.integer("points", 0);
  if (!(c.t_max > 0.0)) throw ConfigError("grid.t_max", "must be > 0");
  if (pts != 0 && pts < 2) throw ConfigError("grid.points", "must be >= 2");
  c.points = static_cast<std::size_t>(pts);

  const Section se(child(root, "series"), "series", {"max_order", "eps_series", "threads"});
  c.max_order = static_cast<int>(se.integer("max_order", c.max_order));
  c.eps_series = se.number("eps_series", c.eps_series);
  const long long th = se.integer("threads", 0);
  if (c.max_order < 0) throw ConfigError("series.max_order", "must be >= 0");
  if (!(c.eps_series > 0.0)) throw ConfigError("series.eps_series", "must be > 0");
  if (th < 0) throw ConfigError("series.threads", "must be >= 0");
  c.threads = static_cast<unsigned>(th);

  const Section p(child(root, "propagation"), "propagation", {"fock_dim", "h", "sample_dt", "tol_pos", "richardson"});
  c.fock_dim = static_cast<int>(p.integer("fock_dim", c.fock_dim));
  c.h = p.number("h", c.h);
  c.sample_dt = p.number("sample_dt", c.sample_dt);
  c.tol_pos = p.number("tol_pos", c.tol_pos);
  c.richardson = p.boolean("richardson", c.richardson);
  if (c.fock_dim < 2) throw ConfigError("propagation.fock_dim", "must be >= 2");
  if (!(c.h > 0.0)) throw ConfigError("propagation.h", "must be > 0");
  const auto divides = [](double span, double step) {
    const double r = span / step;
    return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
  };
  if (!divides(c.t_max, c.h)) throw ConfigError("propagation.h", "must divide grid.t_max");
  if (!(c.sample_dt > 0.0) || !divides(c.sample_dt, c.h))
    throw ConfigError("propagation.sample_dt", "must be a positive multiple of propagation.h");
  if (!(c.tol_pos >= 0.0)) throw ConfigError("propagation.tol_pos", "must be >= 0");

  const Section in(child(root, "initial"), "initial", {"q0", "p0", "nbar"});
  c.q0 = in.number("q0", c.q0);
  c.p0 = in.number("p0", c.p0);
  c.nbar = in.number("nbar", c.nbar);
  if (!(c.nbar >= 0.0)) throw ConfigError("initial.nbar", "must be >= 0");

  const Section o(child(root, "oracle"), "oracle", {"mode_dims", "cap"});
  for (double d : o.numbers("mode_dims")) {
    if (d < 2 || d != std::floor(d)) throw ConfigError("oracle.mode_dims", "entries must be integers >= 2");
    c.mode_dims.push_back(static_cast<int>(d));
  }
  const long long cap = o.integer("cap", static_cast<long long>(c.cap));
  if (cap < 2) throw ConfigError("oracle.cap", "must be >= 2");
  c.cap = static_cast<std::size_t>(cap);
  if (c.scenario == "oracle-check") {
    if (c.kernel.family != "discrete_modes")
      throw ConfigError("kernel.family", "oracle-check needs discrete_modes (the oracle bath)");
    if (c.model != "hpz" && c.model != "dephasing") throw ConfigError("model", "oracle-check supports hpz or dephasing");
    if (c.mode_dims.empty()) c.mode_dims.assign(c.kernel.freqs.size(), 6);
    if (c.mode_dims.size() != c.kernel.freqs.size())
      throw ConfigError("oracle.mode_dims", "one Fock dimension per mode required");
    std::size_t dim = c.model == "dephasing" ? 2 : static_cast<std::size_t>(c.fock_dim);
    for (int m : c.mode_dims) dim *= static_cast<std::size_t>(m);
    if (dim > c.cap)
      throw ConfigError("oracle.mode_dims", "joint dimension " + std::to_string(dim) + " exceeds oracle.cap");
  }

  const Section jz(child(root, "joos_zeh"), "joos_zeh", {"eps_values", "t_eval"});
  c.eps_values = jz.numbers("eps_values");
  c.t_eval = jz.number("t_eval", c.t_eval);
  for (std::size_t i = 0; i < c.eps_values.size(); ++i)
    if (!(c.eps_values[i] > 0.0)) throw ConfigError("joos_zeh.eps_values[" + std::to_string(i) + "]", "must be > 0");
  if (!(c.t_eval > 0.0)) throw ConfigError("joos_zeh.t_eval", "must be > 0");
  if (c.eps_values.size() == 1) throw ConfigError("joos_zeh.eps_values", "need at least two values to extrapolate");

  const Section out(child(root, "output"), "output", {"dir", "dump_rho"});
  c.out_dir = out.text("dir", c.out_dir);
  c.dump_rho = out.boolean("dump_rho", c.dump_rho);
  return c;
}

inline RunConfig load_config(const std::string& path, const std::string& scenario = "") {
  std::ifstream f(path);
  if (!f) throw ConfigError("--config", "cannot open " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("parse error: ") + e.what());
  }
  return parse_config(j, scenario);
}

/// Fully resolved configuration, defaults included.
inline json to_json(const RunConfig& c) {
  json k;
  k["family"] = c.kernel.family;
  if (c.kernel.family == "exponential") {
    k["gamma"] = c.kernel.gamma;
    k["tau_c"] = c.kernel.tau_c;
  } else if (c.kernel.family == "white_noise") {
    k["strength"] = c.kernel.strength;
    k["eps"] = c.kernel.eps;
  } else {
    k["freqs"] = c.kernel.freqs;
    json rows = json::array();
    for (const auto& row : c.kernel.couplings) {
      json r = json::array();
      for (const cplx& g : row) r.push_back(json::array({g.real(), g.imag()}));
      rows.push_back(r);
    }
    k["couplings"] = rows;
  }
  const TimeGrid grid = c.grid();
  json j;
  j["scenario"] = c.scenario;
  j["model"] = c.model;
  j["kernel"] = k;
  j["system"] = {{"mass", c.mass}, {"omega", c.omega}, {"lambda", c.lambda}, {"mu", c.mu}, {"splitting", c.splitting}};
  j["grid"] = {{"t_max", c.t_max}, {"points", grid.size()}};
  j["series"] = {{"max_order", c.max_order}, {"eps_series", c.eps_series}, {"threads", c.threads}};
  j["propagation"] = {{"fock_dim", c.fock_dim},
                      {"h", c.h},
                      {"sample_dt", c.sample_dt},
                      {"tol_pos", c.tol_pos},
                      {"richardson", c.richardson}};
  j["initial"] = {{"q0", c.q0}, {"p0", c.p0}, {"nbar", c.nbar}};
  j["oracle"] = {{"mode_dims", c.mode_dims}, {"cap", c.cap}};
  j["joos_zeh"] = {{"eps_values", c.eps_values}, {"t_eval", c.t_eval}};
  j["output"] = {{"dir", c.out_dir}, {"dump_rho", c.dump_rho}};
  return j;
}

inline CorrelationKernel build_kernel(const KernelSpec& k) {
  if (k.family == "exponential") return make_exponential(k.gamma, k.tau_c);
  if (k.family == "white_noise") return make_white_noise_approximant(k.strength, k.eps);
  return make_discrete_modes(k.freqs, [&] {
    Eigen::MatrixXcd g(static_cast<Eigen::Index>(k.couplings.size()), static_cast<Eigen::Index>(k.freqs.size()));
    for (std::size_t j = 0; j < k.couplings.size(); ++j)
      for (std::size_t m = 0; m < k.freqs.size(); ++m)
        g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) = k.couplings[j][m];
    return g;
  }());
}

inline MECoefficients scenario_coefficients(const RunConfig& c, const TimeGrid& grid) {
  const CorrelationKernel D = build_kernel(c.kernel);
  if (c.model == "hpz") return coefficients_hpz(D, c.mass, c.omega, grid, c.series(), c.threads);
  if (c.model == "qmupl") return coefficients_qmupl(c.lambda, c.mu, c.mass, c.omega, D, grid, c.series(), c.threads);
  if (c.model == "dephasing") return coefficients_dephasing(D, grid);
  Eigen::MatrixXd M(1, 2);
  M << 1.0, 0.0;
  return coefficients_nondissipative(D.scaled(c.lambda), harmonic_kernels(c.mass, c.omega), M, grid, "joos-zeh");
}

inline Eigen::Matrix2d scenario_hamiltonian(const RunConfig& c) {
  return oscillator_hamiltonian(c.mass, c.omega, c.model == "qmupl" ? c.lambda * c.mu : 0.0);
}

inline MeGenerator scenario_generator(const RunConfig& c, std::shared_ptr<const MECoefficients> coeffs) {
  if (c.model == "dephasing") return dephasing_generator(std::move(coeffs), c.splitting);
  return linear_generator(std::move(coeffs), c.fock_dim, c.mass, c.omega, scenario_hamiltonian(c));
}

inline DensityMatrix scenario_initial_state(const RunConfig& c) {
  if (c.model == "dephasing") return DensityMatrix::Constant(2, 2, cplx(0.5, 0.0));
  return displaced_thermal_state(c.fock_dim, c.mass, c.omega, c.q0, c.p0, c.nbar);
}

inline EvolveOptions scenario_evolve_options(const RunConfig& c, const MeGenerator& gen) {
  EvolveOptions opt;
  opt.sample_dt = c.sample_dt;
  opt.tol_pos = c.tol_pos;
  opt.richardson = c.richardson;
  if (c.model == "dephasing") {
    Eigen::MatrixXcd sx = Eigen::MatrixXcd::Zero(2, 2), sy = Eigen::MatrixXcd::Zero(2, 2);
    sx(0, 1) = sx(1, 0) = 1.0;
    sy(0, 1) = cplx(0.0, -1.0);
    sy(1, 0) = cplx(0.0, 1.0);
    opt.observables = {{"sigma_x", sx}, {"sigma_y", sy}, {"sigma_z", sigma_z()}};
  } else {
    const auto& q = gen.basis()[0];
    const auto& p = gen.basis()[1];
    opt.observables = {{"q", q}, {"p", p}, {"q2", q * q}, {"p2", p * p}, {"qp_sym", 0.5 * (q * p + p * q)}};
  }
  return opt;
}

inline void add_derived_observables(Trajectory& tr, const RunConfig& c) {
  if (c.model != "dephasing") return;
  auto& coh = tr.observables["coherence_abs"];
  for (const auto& s : tr.states) coh.push_back(std::abs(s(0, 1)));
}

inline json series_summary(const MECoefficients& c) {
  int max_order = 0;
  bool converged = true;
  double worst = 0.0;
  std::size_t unconverged = 0;
  for (const auto& s : c.series) {
    max_order = std::max(max_order, s.achieved_order);
    worst = std::max(worst, s.last_order_norm);
    if (!s.converged) {
      converged = false;
      ++unconverged;
    }
  }
  return {{"max_achieved_order", max_order},
          {"all_converged", converged},
          {"max_last_order_norm", worst},
          {"unconverged_times", unconverged}};
}

/// Largest moment deviation between two moment sources, each moment scaled
/// by its own peak magnitude along the reference run.
inline double moment_relative_error(const std::vector<GaussianMoments>& a, const std::vector<GaussianMoments>& ref) {
  if (a.size() != ref.size()) throw DimensionMismatch("moment_relative_error: sample counts differ");
  const auto get = [](const GaussianMoments& g, int i) {
    switch (i) {
      case 0: return g.mean(0);
      case 1: return g.mean(1);
      case 2: return g.cov(0, 0);
      case 3: return g.cov(0, 1);
      default: return g.cov(1, 1);
    }
  };
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    double scale = 0.0;
    for (const auto& g : ref) scale = std::max(scale, std::abs(get(g, i)));
    if (scale == 0.0) scale = 1.0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(get(a[k], i) - get(ref[k], i)) / scale);
  }
  return worst;
}

struct WhiteNoisePoint {
  double eps = 0.0;
  double gamma_ratio = 0.0;
  double theta = 0.0;
  std::size_t points = 0;
};

/// Gamma~(t)/int_0^t D(t,s) ds and Theta~(t) for the normalized narrow
/// exponential of width eps, on a grid that resolves eps (h <= eps / 10).
inline WhiteNoisePoint white_noise_point(double eps, double strength, double m, double w, double t_eval) {
  const double per_unit = std::max(64.0, 10.0 / eps);
  const auto panels = static_cast<std::size_t>(std::ceil(t_eval * per_unit - 1e-9));
  const TimeGrid grid(t_eval, panels + 1);
  const CorrelationKernel D = make_white_noise_approximant(strength, eps);
  Eigen::MatrixXd M(1, 2);
  M << 1.0, 0.0;
  const MECoefficients c = coefficients_nondissipative(D, harmonic_kernels(m, w), M, grid, "joos-zeh");
  const std::size_t K = grid.size() - 1;
  std::vector<double> d(K + 1);
  for (std::size_t s = 0; s <= K; ++s) d[s] = D.re_part(0, 0, grid[K], grid[s]);
  const double integral = integrate_1d(d, grid.step()).real();
  return {eps, c.Gamma[K].real() / integral, c.Theta[K].real(), grid.size()};
}

/// Linear extrapolation in eps^2 from the two smallest widths.
inline double extrapolate_eps2(const std::vector<WhiteNoisePoint>& pts) {
  if (pts.size() < 2) throw ParameterError("extrapolate_eps2: need two widths");
  std::vector<WhiteNoisePoint> sorted = pts;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.eps < b.eps; });
  const auto& a = sorted[0];
  const auto& b = sorted[1];
  const double x1 = a.eps * a.eps, x2 = b.eps * b.eps;
  return a.gamma_ratio - (b.gamma_ratio - a.gamma_ratio) * x1 / (x2 - x1);
}

inline json white_noise_sweep(const RunConfig& c) {
  std::vector<WhiteNoisePoint> pts;
  for (double eps : c.eps_values) pts.push_back(white_noise_point(eps, c.kernel.strength, c.mass, c.omega, c.t_eval));
  std::vector<WhiteNoisePoint> by_eps = pts;
  std::sort(by_eps.begin(), by_eps.end(), [](const auto& a, const auto& b) { return a.eps > b.eps; });
  bool monotone = true;
  for (std::size_t i = 1; i < by_eps.size(); ++i)
    if (!(std::abs(by_eps[i].theta) < std::abs(by_eps[i - 1].theta))) monotone = false;
  json rows = json::array();
  for (const auto& p : pts)
    rows.push_back({{"eps", p.eps}, {"gamma_ratio", p.gamma_ratio}, {"theta", p.theta}, {"grid_points", p.points}});
  return {{"t_eval", c.t_eval},
          {"points", rows},
          {"gamma_ratio_limit", extrapolate_eps2(pts)},
          {"theta_abs_decreasing", monotone},
          {"theta_final", std::abs(by_eps.back().theta)}};
}

/// Executes one scenario, writes coefficients.csv, series.csv,
/// trajectory.json and report.json into c.out_dir, and returns the report.
inline json run(const RunConfig& c) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) throw ConfigError("output.dir", "cannot create directory: " + ec.message());
  const TimeGrid grid = c.grid();
  json report;
  report["scenario"] = c.scenario;
  report["config"] = to_json(c);

  const auto coeffs = std::make_shared<const MECoefficients>(scenario_coefficients(c, grid));
  write_coefficients_csv((fs::path(c.out_dir) / "coefficients.csv").string(), *coeffs);
  write_series_csv((fs::path(c.out_dir) / "series.csv").string(), *coeffs);
  report["series"] = series_summary(*coeffs);
  const std::string violation = coeffs->invariant_violation();
  report["coefficient_invariants"] = violation.empty() ? json("ok") : json(violation);

  if (c.model == "joos-zeh" && !c.eps_values.empty()) report["white_noise"] = white_noise_sweep(c);

  if (c.scenario == "coeffs") {
    write_json((fs::path(c.out_dir) / "report.json").string(), report);
    return report;
  }

  const MeGenerator gen = scenario_generator(c, coeffs);
  const DensityMatrix rho0 = scenario_initial_state(c);
  const EvolveOptions opt = scenario_evolve_options(c, gen);
  Trajectory tr = evolve(rho0, gen, c.t_max, c.h, opt);
  add_derived_observables(tr, c);
  report["trajectory"] = {{"max_trace_drift", tr.max_trace_drift},
                          {"trace_drift_per_time", tr.trace_drift_per_time},
                          {"max_hermiticity_defect", tr.max_hermiticity_defect},
                          {"min_eigenvalue", tr.min_eigenvalue},
                          {"warnings", tr.warnings}};
  if (!std::isnan(tr.richardson_error)) report["trajectory"]["richardson_error"] = tr.richardson_error;

  if (c.model == "qmupl" || c.model == "hpz" || c.model == "joos-zeh") {
    const FockOperators ops = fock_operators(c.fock_dim, c.mass, c.omega);
    std::vector<GaussianMoments> fock;
    for (const auto& s : tr.states) fock.push_back(moments_of(s, ops));
    const MomentTrajectory mt =
        evolve_moments(moments_of(rho0, ops), MomentGenerator{coeffs, scenario_hamiltonian(c)}, c.t_max, c.h, c.sample_dt);
    report["moments"] = {{"max_relative_deviation_vs_fock", moment_relative_error(mt.moments, fock)},
                         {"min_uncertainty_margin", mt.min_uncertainty_margin}};
  }

  if (c.scenario == "oracle-check") {
    const CorrelationKernel D = build_kernel(c.kernel);
    JointModel jm;
    if (c.model == "dephasing") {
      jm.system_hamiltonian = 0.5 * c.splitting * sigma_z();
      jm.coupling_ops = {sigma_z()};
    } else {
      const FockOperators ops = fock_operators(c.fock_dim, c.mass, c.omega);
      jm.system_hamiltonian = quadratic_operator(scenario_hamiltonian(c), ops);
      jm.coupling_ops = {ops.q};
    }
    jm.bath.freqs = c.kernel.freqs;
    jm.bath.couplings = Eigen::MatrixXcd(1, static_cast<Eigen::Index>(c.kernel.freqs.size()));
    for (std::size_t m = 0; m < c.kernel.freqs.size(); ++m)
      jm.bath.couplings(0, static_cast<Eigen::Index>(m)) = c.kernel.couplings[0][m];
    jm.mode_dims = c.mode_dims;
    jm.dimension_cap = c.cap;
    const Trajectory orc = evolve_joint(jm, rho0, tr.times);
    const Comparison cmp = compare_with_me(orc, tr);
    json oc = {{"max_trace_distance", cmp.max_distance},
               {"t_at_max", cmp.t_at_max},
               {"recurrence_time", recurrence_time(c.kernel.freqs)},
               {"window_below_recurrence", c.t_max < recurrence_time(c.kernel.freqs)},
               {"trace_distance", cmp.trace_distance}};
    JointModel bigger = jm;
    bigger.mode_dims[0] *= 2;
    if (bigger.joint_dim() <= bigger.dimension_cap) {
      const Trajectory orc2 = evolve_joint(bigger, rho0, tr.times);
      double shift = 0.0;
      for (std::size_t i = 0; i < orc.states.size(); ++i)
        shift = std::max(shift, trace_distance(orc.states[i], orc2.states[i]));
      oc["mode_convergence_shift"] = shift;
    } else {
      oc["mode_convergence_shift"] = nullptr;
      oc["mode_convergence_note"] = "doubled mode dimension exceeds oracle.cap";
    }
    report["oracle"] = oc;
    write_json((fs::path(c.out_dir) / "oracle_trajectory.json").string(),
               trajectory_to_json(orc, c.scenario, report["config"], c.dump_rho));
  }

  write_json((fs::path(c.out_dir) / "trajectory.json").string(),
             trajectory_to_json(tr, c.scenario, report["config"], c.dump_rho));
  write_json((fs::path(c.out_dir) / "report.json").string(), report);
  return report;
}

}  // namespace nmgme
