#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nmgme/errors.hpp"
#include "nmgme/me_coefficients.hpp"
#include "nmgme/system_model.hpp"

namespace nmgme {

/// Hermitian, unit-trace matrix in a truncated basis. Invariants are
/// checked by `diagnose`, never enforced by clipping.
using DensityMatrix = Eigen::MatrixXcd;

struct StateDiagnostics {
  double trace = 0.0;
  double hermiticity_defect = 0.0;
  double min_eigenvalue = 0.0;
  double purity = 0.0;
};

inline double hermiticity_defect(const Eigen::MatrixXcd& rho) { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

inline double min_eigenvalue(const Eigen::MatrixXcd& rho) {
  const Eigen::MatrixXcd herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double purity(const Eigen::MatrixXcd& rho) { return (rho * rho).trace().real(); }

/// Half the sum of singular values of the difference.
inline double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("trace_distance: shapes differ");
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a - b);
  return 0.5 * svd.singularValues().sum();
}

inline StateDiagnostics diagnose(const Eigen::MatrixXcd& rho) {
  return {rho.trace().real(), hermiticity_defect(rho), min_eigenvalue(rho), purity(rho)};
}

/// First and second moments of (q, p); cov is the symmetrized covariance.
struct GaussianMoments {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity() * 0.5;

  /// sigma_qq sigma_pp - sigma_qp^2 - 1/4; negative values violate uncertainty.
  double uncertainty_margin() const { return cov.determinant() - 0.25; }
};

/// Moments of a Fock-space state.
inline GaussianMoments moments_of(const DensityMatrix& rho, const FockOperators& ops) {
  GaussianMoments g;
  const auto ev = [&](const Eigen::MatrixXcd& o) { return (o * rho).trace().real(); };
  g.mean << ev(ops.q), ev(ops.p);
  const Eigen::MatrixXcd qp = 0.5 * (ops.q * ops.p + ops.p * ops.q);
  g.cov(0, 0) = ev(ops.q * ops.q) - g.mean(0) * g.mean(0);
  g.cov(1, 1) = ev(ops.p * ops.p) - g.mean(1) * g.mean(1);
  g.cov(0, 1) = g.cov(1, 0) = ev(qp) - g.mean(0) * g.mean(1);
  return g;
}

/// Displaced thermal oscillator state with mean occupation nbar, centred at
/// (q0, p0). Built in an enlarged basis, then truncated and renormalized.
inline DensityMatrix displaced_thermal_state(int dim, double m, double w, double q0, double p0, double nbar = 0.0) {
  if (dim < 2) throw ParameterError("initial state: dim must be >= 2");
  if (!(nbar >= 0.0)) throw ParameterError("initial state: nbar must be >= 0");
  const int big = dim + 40;
  const cplx alpha(std::sqrt(m * w / 2.0) * q0, p0 / std::sqrt(2.0 * m * w));
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(big, big);
  for (int n = 1; n < big; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  // D(alpha) = exp(-i K) with K = i(alpha a^+ - conj(alpha) a) Hermitian.
  const Eigen::MatrixXcd K = cplx(0.0, 1.0) * (alpha * a.adjoint() - std::conj(alpha) * a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (K + K.adjoint()));
  const Eigen::VectorXcd phases = (es.eigenvalues().cast<cplx>() * cplx(0.0, -1.0)).array().exp();
  const Eigen::MatrixXcd Dop = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  Eigen::MatrixXcd th = Eigen::MatrixXcd::Zero(big, big);
  const double r = nbar / (1.0 + nbar);
  for (int n = 0; n < big; ++n) th(n, n) = std::pow(r, n) / (1.0 + nbar);
  const Eigen::MatrixXcd full = Dop * th * Dop.adjoint();
  DensityMatrix rho = full.topLeftCorner(dim, dim);
  rho = 0.5 * (rho + rho.adjoint());
  return rho / rho.trace().real();
}

inline DensityMatrix coherent_state(int dim, double m, double w, double q0, double p0) {
  return displaced_thermal_state(dim, m, w, q0, p0, 0.0);
}

/// Moments of the untruncated displaced thermal state.
inline GaussianMoments displaced_thermal_moments(double m, double w, double q0, double p0, double nbar = 0.0) {
  GaussianMoments g;
  g.mean << q0, p0;
  g.cov << (2.0 * nbar + 1.0) / (2.0 * m * w), 0.0, 0.0, (2.0 * nbar + 1.0) * m * w / 2.0;
  return g;
}

/// Time-dependent generator in operator form.
///
/// `X` is the operator basis of the coefficient matrices, `H0` the static
/// system Hamiltonian; G and E are linearly interpolated in time.
class MeGenerator {
 public:
  MeGenerator(std::shared_ptr<const MECoefficients> coeffs, std::vector<Eigen::MatrixXcd> X, Eigen::MatrixXcd H0,
              bool fock_basis)
      : coeffs_(std::move(coeffs)), X_(std::move(X)), H0_(std::move(H0)), fock_(fock_basis) {
    if (!coeffs_) throw ParameterError("MeGenerator: missing coefficient table");
    if (static_cast<int>(X_.size()) != coeffs_->basis_size())
      throw DimensionMismatch("MeGenerator: operator basis does not match coefficient matrices");
    for (const auto& x : X_)
      if (x.rows() != H0_.rows() || x.cols() != H0_.cols()) throw DimensionMismatch("MeGenerator: operator shapes differ");
  }

  int dim() const { return static_cast<int>(H0_.rows()); }
  bool fock_basis() const noexcept { return fock_; }
  const MECoefficients& coefficients() const { return *coeffs_; }
  const std::vector<Eigen::MatrixXcd>& basis() const noexcept { return X_; }
  const Eigen::MatrixXcd& hamiltonian() const noexcept { return H0_; }

  Eigen::MatrixXcd rhs(double t, const Eigen::MatrixXcd& rho) const {
    Eigen::MatrixXcd g, e;
    coeffs_->generator_at(t, g, e);
    return me_rhs(rho, g, e);
  }

  /// -i[H0, rho] + G_ab [X_a, [X_b, rho]] + E_ab [X_a, {X_b, rho}].
  Eigen::MatrixXcd me_rhs(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& g, const Eigen::MatrixXcd& e) const {
    if (rho.rows() != dim() || rho.cols() != dim()) throw DimensionMismatch("me_rhs: state dimension mismatch");
    const cplx I(0.0, 1.0);
    const std::size_t n = X_.size();
    Eigen::MatrixXcd out = -I * (H0_ * rho - rho * H0_);
    std::vector<Eigen::MatrixXcd> comm(n), anti(n);
    for (std::size_t b = 0; b < n; ++b) {
      const Eigen::MatrixXcd xr = X_[b] * rho, rx = rho * X_[b];
      comm[b] = xr - rx;
      anti[b] = xr + rx;
    }
    for (std::size_t a = 0; a < n; ++a) {
      Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(dim(), dim());
      for (std::size_t b = 0; b < n; ++b) y += g(a, b) * comm[b] + e(a, b) * anti[b];
      out += X_[a] * y - y * X_[a];
    }
    return out;
  }

  /// Same generator assembled from the Kossakowski form.
  Eigen::MatrixXcd kossakowski_rhs(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& g,
                                   const Eigen::MatrixXcd& e) const {
    const cplx I(0.0, 1.0);
    const KossakowskiForm kf = kossakowski_form(g, e);
    const std::size_t n = X_.size();
    Eigen::MatrixXcd H = H0_;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) H += kf.S(a, b) * X_[a] * X_[b];
    Eigen::MatrixXcd out = -I * (H * rho - rho * H);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const Eigen::MatrixXcd ba = X_[b] * X_[a];
        out += kf.K(a, b) * (X_[a] * rho * X_[b] - 0.5 * (ba * rho + rho * ba));
      }
    return out;
  }

 private:
  std::shared_ptr<const MECoefficients> coeffs_;
  std::vector<Eigen::MatrixXcd> X_;
  Eigen::MatrixXcd H0_;
  bool fock_;
};

/// Quadratic Hamiltonian H = 1/2 sum_ab h_ab X_a X_b (h real symmetric).
inline Eigen::Matrix2d oscillator_hamiltonian(double m, double w, double qp_coupling = 0.0) {
  Eigen::Matrix2d h;
  h << m * w * w, qp_coupling, qp_coupling, 1.0 / m;
  return h;
}

inline Eigen::MatrixXcd quadratic_operator(const Eigen::Matrix2d& h, const FockOperators& ops) {
  const Eigen::MatrixXcd* X[2] = {&ops.q, &ops.p};
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(ops.q.rows(), ops.q.cols());
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) H += 0.5 * h(a, b) * (*X[a]) * (*X[b]);
  return 0.5 * (H + H.adjoint());
}

/// Oscillator generator over X = (q, p) in a truncated Fock basis.
inline MeGenerator linear_generator(std::shared_ptr<const MECoefficients> coeffs, int fock_dim, double m, double w,
                                    const Eigen::Matrix2d& h) {
  const FockOperators ops = fock_operators(fock_dim, m, w);
  return MeGenerator(std::move(coeffs), {ops.q, ops.p}, quadratic_operator(h, ops), true);
}

/// Two-level generator over X = (sigma_z) with H0 = (splitting / 2) sigma_z.
inline MeGenerator dephasing_generator(std::shared_ptr<const MECoefficients> coeffs, double splitting = 0.0) {
  return MeGenerator(std::move(coeffs), {sigma_z()}, 0.5 * splitting * sigma_z(), false);
}

struct EvolveOptions {
  double sample_dt = 0.0;  // 0: every step
  double tol_pos = 1e-8;
  bool truncation_guard = true;
  double truncation_limit = 1e-6;
  bool richardson = false;
  bool keep_states = true;
  std::vector<std::pair<std::string, Eigen::MatrixXcd>> observables;
};

struct Trajectory {
  std::string source = "me";
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::map<std::string, std::vector<double>> observables;
  std::vector<StateDiagnostics> diagnostics;
  double max_trace_drift = 0.0;
  double trace_drift_per_time = 0.0;
  double max_hermiticity_defect = 0.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double richardson_error = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

namespace detail {

inline std::size_t step_count(double span, double h, const char* what) {
  if (!(h > 0.0)) throw ParameterError(std::string(what) + ": step must be > 0");
  if (!(span >= 0.0)) throw ParameterError(std::string(what) + ": negative time span");
  const double r = span / h;
  const auto n = static_cast<std::size_t>(std::llround(r));
  if (std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r))
    throw ParameterError(std::string(what) + ": step does not divide the time span");
  return n;
}

inline void record(Trajectory& tr, double t, const DensityMatrix& rho, const EvolveOptions& opt) {
  const StateDiagnostics d = diagnose(rho);
  tr.times.push_back(t);
  tr.diagnostics.push_back(d);
  if (opt.keep_states) tr.states.push_back(rho);
  for (const auto& [name, op] : opt.observables) tr.observables[name].push_back((op * rho).trace().real());
  tr.max_trace_drift = std::max(tr.max_trace_drift, std::abs(d.trace - 1.0));
  tr.max_hermiticity_defect = std::max(tr.max_hermiticity_defect, d.hermiticity_defect);
  tr.min_eigenvalue = std::min(tr.min_eigenvalue, d.min_eigenvalue);
}

inline DensityMatrix rk4_run(const DensityMatrix& rho0, const MeGenerator& gen, std::size_t steps, double h,
                             std::size_t every, const EvolveOptions& opt, Trajectory* tr) {
  DensityMatrix rho = rho0;
  if (tr) record(*tr, 0.0, rho, opt);
  const int d = gen.dim();
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * h;
    const Eigen::MatrixXcd k1 = gen.rhs(t, rho);
    const Eigen::MatrixXcd k2 = gen.rhs(t + 0.5 * h, rho + 0.5 * h * k1);
    const Eigen::MatrixXcd k3 = gen.rhs(t + 0.5 * h, rho + 0.5 * h * k2);
    const Eigen::MatrixXcd k4 = gen.rhs(t + h, rho + h * k3);
    DensityMatrix next = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw EvolutionAborted("evolve: non-finite state", t);
    if (opt.truncation_guard && gen.fock_basis()) {
      const double top = std::abs(next(d - 1, d - 1)) + std::abs(next(d - 2, d - 2));
      if (top > opt.truncation_limit)
        throw EvolutionAborted("evolve: population of the top two Fock levels " + std::to_string(top) +
                                   " exceeds the truncation limit; increase fock_dim",
                               t);
    }
    rho = std::move(next);
    if (tr && ((i + 1) % every == 0 || i + 1 == steps)) record(*tr, static_cast<double>(i + 1) * h, rho, opt);
  }
  return rho;
}

}  // namespace detail

/// Classical fixed-step RK4 without renormalization.
inline Trajectory evolve(const DensityMatrix& rho0, const MeGenerator& gen, double t_final, double h,
                         const EvolveOptions& opt = {}) {
  if (rho0.rows() != gen.dim() || rho0.cols() != gen.dim()) throw DimensionMismatch("evolve: state dimension mismatch");
  const std::size_t steps = detail::step_count(t_final, h, "evolve");
  const std::size_t every =
      opt.sample_dt > 0.0 ? std::max<std::size_t>(1, detail::step_count(opt.sample_dt, h, "evolve sampling")) : 1;
  Trajectory tr;
  const DensityMatrix final_state = detail::rk4_run(rho0, gen, steps, h, every, opt, &tr);
  tr.trace_drift_per_time = t_final > 0.0 ? tr.max_trace_drift / t_final : 0.0;
  if (tr.max_trace_drift > 1e-6) tr.warnings.push_back("trace drift exceeds 1e-6");
  if (tr.min_eigenvalue < -opt.tol_pos) tr.warnings.push_back("negative eigenvalue below -tol_pos");
  if (opt.richardson) {
    EvolveOptions quiet = opt;
    quiet.observables.clear();
    const DensityMatrix half = detail::rk4_run(rho0, gen, 2 * steps, 0.5 * h, 1, quiet, nullptr);
    // RK4 global error scales as h^4: err(h) ~ 16/15 |rho_h - rho_{h/2}|.
    tr.richardson_error = trace_distance(final_state, half) * 16.0 / 15.0;
  }
  return tr;
}

/// Drift and diffusion of the moment equations for a generator over (q, p):
///   d<X>/dt = K <X>,  d sigma/dt = K sigma + sigma K^T + Dn
/// with K = J h + 2i J E and Dn = -J (G + G^T) J^T, J = [[0, 1], [-1, 0]].
struct MomentGenerator {
  std::shared_ptr<const MECoefficients> coeffs;
  Eigen::Matrix2d h;

  void at(double t, Eigen::Matrix2d& K, Eigen::Matrix2d& Dn) const {
    if (coeffs->basis_size() != 2) throw ParameterError("evolve_moments: scenario is not linear in (q, p)");
    Eigen::MatrixXcd g, e;
    coeffs->generator_at(t, g, e);
    Eigen::Matrix2d J;
    J << 0.0, 1.0, -1.0, 0.0;
    const Eigen::Matrix2cd Kc = J.cast<cplx>() * (h.cast<cplx>() + cplx(0.0, 2.0) * Eigen::Matrix2cd(e));
    const Eigen::Matrix2cd Dc = -J.cast<cplx>() * (Eigen::Matrix2cd(g) + Eigen::Matrix2cd(g).transpose()) *
                                J.transpose().cast<cplx>();
    K = Kc.real();
    Dn = Dc.real();
  }
};

struct MomentTrajectory {
  std::vector<double> times;
  std::vector<GaussianMoments> moments;
  double min_uncertainty_margin = std::numeric_limits<double>::infinity();
};

inline MomentTrajectory evolve_moments(const GaussianMoments& m0, const MomentGenerator& gen, double t_final, double h,
                                       double sample_dt = 0.0) {
  const std::size_t steps = detail::step_count(t_final, h, "evolve_moments");
  const std::size_t every =
      sample_dt > 0.0 ? std::max<std::size_t>(1, detail::step_count(sample_dt, h, "evolve_moments sampling")) : 1;
  MomentTrajectory tr;
  GaussianMoments m = m0;
  const auto rec = [&](double t) {
    tr.times.push_back(t);
    tr.moments.push_back(m);
    tr.min_uncertainty_margin = std::min(tr.min_uncertainty_margin, m.uncertainty_margin());
  };
  const auto f = [&](double t, const GaussianMoments& s) {
    Eigen::Matrix2d K, Dn;
    gen.at(t, K, Dn);
    GaussianMoments d;
    d.mean = K * s.mean;
    d.cov = K * s.cov + s.cov * K.transpose() + Dn;
    return d;
  };
  const auto axpy = [](const GaussianMoments& a, double c, const GaussianMoments& b) {
    GaussianMoments r;
    r.mean = a.mean + c * b.mean;
    r.cov = a.cov + c * b.cov;
    return r;
  };
  rec(0.0);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * h;
    const GaussianMoments k1 = f(t, m);
    const GaussianMoments k2 = f(t + 0.5 * h, axpy(m, 0.5 * h, k1));
    const GaussianMoments k3 = f(t + 0.5 * h, axpy(m, 0.5 * h, k2));
    const GaussianMoments k4 = f(t + h, axpy(m, h, k3));
    m.mean += (h / 6.0) * (k1.mean + 2.0 * k2.mean + 2.0 * k3.mean + k4.mean);
    m.cov += (h / 6.0) * (k1.cov + 2.0 * k2.cov + 2.0 * k3.cov + k4.cov);
    m.cov = 0.5 * (m.cov + m.cov.transpose()).eval();
    if (!m.mean.allFinite() || !m.cov.allFinite()) throw EvolutionAborted("evolve_moments: non-finite moments", t);
    if ((i + 1) % every == 0 || i + 1 == steps) rec(static_cast<double>(i + 1) * h);
  }
  return tr;
}

}  // namespace nmgme
