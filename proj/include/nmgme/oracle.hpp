#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nmgme/bath_kernels.hpp"
#include "nmgme/errors.hpp"
#include "nmgme/me_coefficients.hpp"
#include "nmgme/propagator.hpp"

// Ground truth for the master equation: the system plus a few bath modes in
// their vacuum, evolved exactly and traced over the bath.
//
// For linear systems a second, truncation-free reference follows from the
// linear Heisenberg equations of system and mode quadratures; it yields the
// exact time-local generator (G, E) in the same form as MECoefficients.

namespace nmgme {

struct JointModel {
  Eigen::MatrixXcd system_hamiltonian;
  std::vector<Eigen::MatrixXcd> coupling_ops;  // A^j, one per bath channel
  DiscreteBath bath;
  std::vector<int> mode_dims;
  std::size_t dimension_cap = 4096;

  int system_dim() const { return static_cast<int>(system_hamiltonian.rows()); }

  std::size_t joint_dim() const {
    std::size_t d = static_cast<std::size_t>(system_dim());
    for (int m : mode_dims) d *= static_cast<std::size_t>(m);
    return d;
  }

  void validate() const {
    bath.validate();
    if (system_dim() < 1 || system_hamiltonian.cols() != system_dim())
      throw DimensionMismatch("joint model: system Hamiltonian must be square");
    if (static_cast<int>(coupling_ops.size()) != bath.n_channels())
      throw DimensionMismatch("joint model: one coupling operator per bath channel required");
    for (const auto& a : coupling_ops)
      if (a.rows() != system_dim() || a.cols() != system_dim())
        throw DimensionMismatch("joint model: coupling operator shape differs from the system");
    if (static_cast<int>(mode_dims.size()) != bath.n_modes())
      throw DimensionMismatch("joint model: one Fock dimension per mode required");
    for (int m : mode_dims)
      if (m < 2) throw ParameterError("joint model: mode Fock dimensions must be >= 2");
    if (joint_dim() > dimension_cap)
      throw ParameterError("joint model: joint dimension " + std::to_string(joint_dim()) + " exceeds cap " +
                           std::to_string(dimension_cap));
  }

  /// Kernel of the bath as seen by the master equation.
  CorrelationKernel kernel() const { return make_discrete_modes(bath); }
};

namespace detail {

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Eigen::MatrixXcd annihilation(int dim) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// Operator `op` acting on factor `which` of the product space with the
/// given factor dimensions (factor 0 is the system).
inline Eigen::MatrixXcd embed(const Eigen::MatrixXcd& op, std::size_t which, const std::vector<int>& dims) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
  for (std::size_t f = 0; f < dims.size(); ++f)
    out = kron(out, f == which ? op : Eigen::MatrixXcd::Identity(dims[f], dims[f]).eval());
  return out;
}

}  // namespace detail

/// H = H_S x 1 + sum_m w_m n_m + sum_j A^j x phi_j, phi_j = sum_m g_jm b_m + conj(g_jm) b_m^+.
inline Eigen::MatrixXcd build_joint(const JointModel& model) {
  model.validate();
  std::vector<int> dims{model.system_dim()};
  dims.insert(dims.end(), model.mode_dims.begin(), model.mode_dims.end());
  Eigen::MatrixXcd H = detail::embed(model.system_hamiltonian, 0, dims);
  std::vector<Eigen::MatrixXcd> b(model.bath.n_modes());
  for (int m = 0; m < model.bath.n_modes(); ++m) {
    b[m] = detail::embed(detail::annihilation(model.mode_dims[m]), m + 1, dims);
    H += model.bath.freqs[m] * b[m].adjoint() * b[m];
  }
  for (int j = 0; j < model.bath.n_channels(); ++j) {
    Eigen::MatrixXcd phi = Eigen::MatrixXcd::Zero(H.rows(), H.cols());
    for (int m = 0; m < model.bath.n_modes(); ++m) {
      const cplx g = model.bath.couplings(j, m);
      phi += g * b[m] + std::conj(g) * b[m].adjoint();
    }
    H += detail::embed(model.coupling_ops[j], 0, dims) * phi;
  }
  return 0.5 * (H + H.adjoint());
}

struct OracleOptions {
  double norm_tol = 1e-8;
  double unitarity_tol = 1e-9;
};

/// Exact evolution of rho_S x |vac><vac| sampled at `times`, reduced to the
/// system. H is diagonalized once; each sample applies exp(-i Lambda t) in
/// the eigenbasis, so samples carry no integrator error.
inline Trajectory evolve_joint(const JointModel& model, const DensityMatrix& rho_s, const std::vector<double>& times,
                               const OracleOptions& opt = {}) {
  const Eigen::MatrixXcd H = build_joint(model);
  const int ds = model.system_dim();
  if (rho_s.rows() != ds || rho_s.cols() != ds) throw DimensionMismatch("evolve_joint: system state dimension mismatch");
  const Eigen::Index D = H.rows();
  const Eigen::Index denv = D / ds;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  if (es.info() != Eigen::Success) throw Error("evolve_joint: eigendecomposition failed");
  const Eigen::MatrixXcd& V = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double unitary_defect = (V.adjoint() * V - Eigen::MatrixXcd::Identity(D, D)).cwiseAbs().maxCoeff();
  if (unitary_defect > opt.unitarity_tol)
    throw EvolutionAborted("evolve_joint: eigenbasis unitarity defect " + std::to_string(unitary_defect), 0.0);

  // rho_S = sum_k p_k |psi_k><psi_k|; each component evolves as a vector.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> rs(0.5 * (rho_s + rho_s.adjoint()));
  std::vector<double> weights;
  std::vector<Eigen::VectorXcd> comps;  // components in the H eigenbasis
  for (int k = 0; k < ds; ++k) {
    const double p = rs.eigenvalues()(k);
    if (p < -1e-12) throw ParameterError("evolve_joint: initial system state is not positive");
    if (p <= 1e-15) continue;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(D);
    for (int a = 0; a < ds; ++a) psi(a * denv) = rs.eigenvectors()(a, k);  // bath vacuum = index 0
    weights.push_back(p);
    comps.push_back(V.adjoint() * psi);
  }

  Trajectory tr;
  tr.source = "oracle";
  double last = 0.0;
  for (double t : times) {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(ds, ds);
    for (std::size_t k = 0; k < comps.size(); ++k) {
      Eigen::VectorXcd c = comps[k];
      for (Eigen::Index i = 0; i < D; ++i) c(i) *= std::exp(cplx(0.0, -lam(i) * t));
      const Eigen::VectorXcd psi = V * c;
      const Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Psi(psi.data(), ds,
                                                                                                      denv);
      rho += weights[k] * (Psi * Psi.adjoint());
    }
    const StateDiagnostics d = diagnose(rho);
    if (!rho.allFinite() || std::abs(d.trace - 1.0) > opt.norm_tol)
      throw EvolutionAborted("evolve_joint: norm drift " + std::to_string(std::abs(d.trace - 1.0)), last);
    tr.times.push_back(t);
    tr.states.push_back(rho);
    tr.diagnostics.push_back(d);
    tr.max_trace_drift = std::max(tr.max_trace_drift, std::abs(d.trace - 1.0));
    tr.max_hermiticity_defect = std::max(tr.max_hermiticity_defect, d.hermiticity_defect);
    tr.min_eigenvalue = std::min(tr.min_eigenvalue, d.min_eigenvalue);
    last = t;
  }
  return tr;
}

/// Bath recurrence estimate 2 pi / (smallest gap among {0} and the mode frequencies).
inline double recurrence_time(const std::vector<double>& freqs) {
  std::vector<double> f{0.0};
  f.insert(f.end(), freqs.begin(), freqs.end());
  std::sort(f.begin(), f.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < f.size(); ++i)
    if (f[i] - f[i - 1] > 0.0) gap = std::min(gap, f[i] - f[i - 1]);
  return 2.0 * std::numbers::pi / gap;
}

struct Comparison {
  std::vector<double> times;
  std::vector<double> trace_distance;
  double max_distance = 0.0;
  double t_at_max = 0.0;
};

/// Pointwise trace distance between two trajectories sampled at the same times.
inline Comparison compare_with_me(const Trajectory& oracle, const Trajectory& me) {
  if (oracle.states.size() != me.states.size() || oracle.times.size() != me.times.size())
    throw DimensionMismatch("compare_with_me: trajectories have different sample counts");
  Comparison c;
  for (std::size_t i = 0; i < oracle.states.size(); ++i) {
    if (std::abs(oracle.times[i] - me.times[i]) > 1e-9)
      throw DimensionMismatch("compare_with_me: sample times differ at index " + std::to_string(i));
    const double d = trace_distance(oracle.states[i], me.states[i]);
    c.times.push_back(oracle.times[i]);
    c.trace_distance.push_back(d);
    if (d > c.max_distance) {
      c.max_distance = d;
      c.t_at_max = oracle.times[i];
    }
  }
  return c;
}

/// True when the errors strictly decrease with increasing series order.
inline bool strictly_decreasing(const std::vector<double>& errors) {
  for (std::size_t i = 1; i < errors.size(); ++i)
    if (!(errors[i] < errors[i - 1])) return false;
  return true;
}

namespace detail {

/// Real matrix exponential by scaling and squaring of a Taylor series.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd B = A / std::ldexp(1.0, s);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::MatrixXd out = term;
  for (int k = 1; k <= 24; ++k) {
    term = (term * B) / static_cast<double>(k);
    out += term;
  }
  for (int i = 0; i < s; ++i) out = (out * out).eval();
  return out;
}

}  // namespace detail

/// Linear system (q, p) with quadratic Hamiltonian 1/2 X^T h X, channels
/// A^j = M_j . X, coupled to modes with arbitrary real frequencies (negative
/// ones allowed: their vacuum is still stationary).
struct LinearBathModel {
  Eigen::Matrix2d h;
  Eigen::MatrixXd channel_ops;  // n_channels x 2
  std::vector<double> freqs;
  Eigen::MatrixXcd couplings;  // n_channels x n_modes

  /// Correlation kernel of the modes (also valid for negative frequencies).
  CorrelationKernel kernel() const {
    auto fr = freqs;
    Eigen::MatrixXcd g = couplings;
    return CorrelationKernel(
        static_cast<int>(g.rows()),
        [fr, g](int j, int k, double t, double s) {
          cplx acc = 0.0;
          for (std::size_t m = 0; m < fr.size(); ++m)
            acc += g(j, static_cast<Eigen::Index>(m)) * std::conj(g(k, static_cast<Eigen::Index>(m))) *
                   std::exp(cplx(0.0, -fr[m] * (t - s)));
          return acc;
        },
        "linear_modes");
  }
};

/// Exact time-local generator of a linear model on `grid`.
///
/// With z = (q, p, x_1, y_1, ...), b_m = (x_m + i y_m)/sqrt(2), the total
/// Hamiltonian is 1/2 z^T Hz z and U(t) = exp(J Hz t). The reduced moments
/// obey <X>(t) = U_ss <X>(0) and sigma(t) = U_ss sigma(0) U_ss^T + N(t) with
/// N = 1/2 U_sb U_sb^T, so K = U_ss' U_ss^{-1} and Dn = N' - K N - N K^T.
/// G (symmetric) and E follow from K = J h + 2i J E, Dn = -J (G + G^T) J^T.
inline MECoefficients exact_linear_coefficients(const LinearBathModel& model, const TimeGrid& grid,
                                                bool extras = false, std::string scenario = "exact") {
  const int c = static_cast<int>(model.channel_ops.rows());
  const int nm = static_cast<int>(model.freqs.size());
  if (model.channel_ops.cols() != 2 || model.couplings.rows() != c || model.couplings.cols() != nm)
    throw DimensionMismatch("exact_linear_coefficients: inconsistent model shapes");
  const int n = 2 + 2 * nm;
  Eigen::MatrixXd Hz = Eigen::MatrixXd::Zero(n, n);
  Hz.topLeftCorner(2, 2) = model.h;
  for (int m = 0; m < nm; ++m) {
    Hz(2 + 2 * m, 2 + 2 * m) = model.freqs[m];
    Hz(3 + 2 * m, 3 + 2 * m) = model.freqs[m];
    // A^j phi_j with phi_j = sqrt(2)(Re g x - Im g y) and A^j = M_j0 q + M_j1 p.
    for (int j = 0; j < c; ++j) {
      const cplx g = model.couplings(j, m);
      for (int a = 0; a < 2; ++a) {
        const double cx = std::sqrt(2.0) * g.real() * model.channel_ops(j, a);
        const double cy = -std::sqrt(2.0) * g.imag() * model.channel_ops(j, a);
        Hz(a, 2 + 2 * m) += cx;
        Hz(2 + 2 * m, a) += cx;
        Hz(a, 3 + 2 * m) += cy;
        Hz(3 + 2 * m, a) += cy;
      }
    }
  }
  Eigen::MatrixXd Jz = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; i += 2) {
    Jz(i, i + 1) = 1.0;
    Jz(i + 1, i) = -1.0;
  }
  const Eigen::MatrixXd L = Jz * Hz;
  Eigen::Matrix2d J;
  J << 0.0, 1.0, -1.0, 0.0;
  const cplx I(0.0, 1.0);

  MECoefficients out;
  out.scenario = std::move(scenario);
  out.times.assign(grid.points().begin(), grid.points().end());
  out.series.resize(grid.size());
  for (std::size_t K = 0; K < grid.size(); ++K) {
    const Eigen::MatrixXd U = detail::expm(L * grid[K]);
    const Eigen::MatrixXd Ud = L * U;
    const Eigen::Matrix2d Gs = U.topLeftCorner(2, 2);
    const Eigen::Matrix2d Gsd = Ud.topLeftCorner(2, 2);
    const Eigen::MatrixXd Usb = U.topRightCorner(2, n - 2);
    const Eigen::MatrixXd Usbd = Ud.topRightCorner(2, n - 2);
    const Eigen::Matrix2d Kd = Gsd * Gs.inverse();
    const Eigen::Matrix2d N = 0.5 * Usb * Usb.transpose();
    const Eigen::Matrix2d Nd = 0.5 * (Usbd * Usb.transpose() + Usb * Usbd.transpose());
    const Eigen::Matrix2d Dn = Nd - Kd * N - N * Kd.transpose();
    // J^{-1} = J^T = -J
    const Eigen::Matrix2d Gsym = -0.5 * J.transpose() * Dn * J;
    const Eigen::Matrix2cd E = (-0.5 * I) * (J.transpose() * Kd - model.h).cast<cplx>();
    out.G.push_back(Gsym.cast<cplx>());
    out.E.push_back(E);
  }
  detail::fill_named(out, extras);
  return out;
}

}  // namespace nmgme
