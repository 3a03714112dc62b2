#pragma once

#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "nmgme/errors.hpp"
#include "nmgme/grid_quadrature.hpp"

namespace nmgme {

/// Harmonic oscillator parameters (hbar = 1). `mu` and `lambda` only enter
/// through the {q,p} term of the dissipative collapse model.
struct LinearSystem {
  double mass = 1.0;
  double omega = 1.0;
  double mu = 0.0;
  double lambda = 0.0;

  double lambda_mu() const noexcept { return lambda * mu; }

  /// Frequency of the {q,p}-shifted oscillator; throws when it is not real.
  double omega_tilde() const {
    const double w2 = omega * omega - lambda_mu() * lambda_mu();
    if (!(w2 > 0.0))
      throw ParameterError("omega_tilde = sqrt(omega^2 - lambda^2 mu^2) is not real: need omega^2 > lambda^2 mu^2");
    return std::sqrt(w2);
  }
};

/// Homogeneous solution kernels of the linear Heisenberg equations.
///
/// A^j(s) = C^j_k(t - s) A^k(t) + C~^j_k(t - s) Adot^k(t), where Adot is
/// the operator that C~ multiplies (p for position coupling).
/// `phase` is the full phase-space map (q_s, p_s) = phase(t - s) (q_t, p_t).
struct PropagatorKernels {
  int dim = 1;
  std::function<Eigen::MatrixXd(double)> C;
  std::function<Eigen::MatrixXd(double)> C_tilde;
  std::function<Eigen::Matrix2d(double)> phase;
};

inline Eigen::Matrix2d harmonic_phase(double m, double w, double u) {
  Eigen::Matrix2d P;
  if (w == 0.0) {
    P << 1.0, -u / m, 0.0, 1.0;
  } else {
    const double c = std::cos(w * u), s = std::sin(w * u);
    P << c, -s / (m * w), m * w * s, c;
  }
  return P;
}

/// Position-coupled oscillator: C(u) = cos wu, C~(u) = -sin(wu)/(m w).
/// w = 0 gives the free particle C = 1, C~ = -u/m.
inline PropagatorKernels harmonic_kernels(double m, double w) {
  if (!(m > 0.0)) throw ParameterError("harmonic_kernels: mass must be > 0");
  if (!(w >= 0.0)) throw ParameterError("harmonic_kernels: omega must be >= 0");
  PropagatorKernels k;
  k.dim = 1;
  k.phase = [m, w](double u) { return harmonic_phase(m, w, u); };
  k.C = [m, w](double u) { return Eigen::MatrixXd::Constant(1, 1, harmonic_phase(m, w, u)(0, 0)); };
  k.C_tilde = [m, w](double u) { return Eigen::MatrixXd::Constant(1, 1, harmonic_phase(m, w, u)(0, 1)); };
  return k;
}

/// Oscillator with the extra (lambda mu / 2){q, p} term: C(u) = exp(-L u)
/// with L the Heisenberg generator, written in closed form through
/// omega_tilde. C~ is the transpose of C.
inline PropagatorKernels qmupl_kernels(double m, double w, double lambda, double mu) {
  if (!(m > 0.0)) throw ParameterError("qmupl_kernels: mass must be > 0");
  const LinearSystem sys{m, w, mu, lambda};
  const double wt = sys.omega_tilde();
  const double lm = sys.lambda_mu();
  auto phase = [m, w, wt, lm](double u) {
    const double c = std::cos(wt * u), s = std::sin(wt * u);
    Eigen::Matrix2d P;
    P << c - lm / wt * s, -s / (m * wt), m * w * w / wt * s, c + lm / wt * s;
    return P;
  };
  PropagatorKernels k;
  k.dim = 2;
  k.phase = phase;
  k.C = [phase](double u) { return Eigen::MatrixXd(phase(u)); };
  k.C_tilde = [phase](double u) { return Eigen::MatrixXd(phase(u).transpose()); };
  return k;
}

/// f^{jk}(t, s) = [A^j(t), A^k(s)], a c-number for linear channels.
class CommutatorKernel {
 public:
  using Evaluator = std::function<cplx(int, int, double, double)>;

  CommutatorKernel() = default;
  CommutatorKernel(int n, Evaluator eval) : n_(n), eval_(std::move(eval)) {}

  /// Constant commuting coupling operators (pure dephasing): f = 0.
  static CommutatorKernel zero(int n) {
    return CommutatorKernel(n, [](int, int, double, double) { return cplx(0.0); });
  }

  int n_channels() const noexcept { return n_; }
  cplx operator()(int j, int k, double t, double s) const { return eval_(j, k, t, s); }

 private:
  int n_ = 0;
  Evaluator eval_;
};

/// Channels given as rows of (q, p) coefficients, A^j = M_j0 q + M_j1 p.
inline CommutatorKernel commutator_kernel(const PropagatorKernels& kernels, const Eigen::MatrixXd& channel_ops) {
  if (channel_ops.cols() != 2 || channel_ops.rows() < 1)
    throw ParameterError("commutator_kernel: channels must be linear combinations of q and p (n x 2 matrix)");
  const Eigen::MatrixXd M = channel_ops;
  auto phase = kernels.phase;
  Eigen::Matrix2d J;
  J << 0.0, 1.0, -1.0, 0.0;
  return CommutatorKernel(static_cast<int>(M.rows()), [M, phase, J](int j, int k, double t, double s) {
    // Heisenberg picture X(t) = phase(-t) X(0), [X_a, X_b] = i J_ab.
    const Eigen::Matrix2d Et = phase(-t), Es = phase(-s);
    const double v = M.row(j) * Et * J * Es.transpose() * M.row(k).transpose();
    return cplx(0.0, v);
  });
}

struct FockOperators {
  Eigen::MatrixXcd q, p, number;
};

/// Truncated ladder construction: q = (a + a^+)/sqrt(2 m w), p = i sqrt(m w / 2)(a^+ - a).
/// The top basis state breaks [q, p] = i.
inline FockOperators fock_operators(int dim, double m, double w) {
  if (dim < 2) throw ParameterError("fock_operators: dim must be >= 2");
  if (!(m > 0.0) || !(w > 0.0)) throw ParameterError("fock_operators: need m > 0 and omega > 0");
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXcd ad = a.adjoint();
  FockOperators ops;
  ops.q = (a + ad) / std::sqrt(2.0 * m * w);
  ops.p = cplx(0.0, std::sqrt(m * w / 2.0)) * (ad - a);
  ops.number = Eigen::MatrixXcd::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) ops.number(n, n) = static_cast<double>(n);
  return ops;
}

inline Eigen::MatrixXcd sigma_z() {
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(2, 2);
  s(0, 0) = 1.0;
  s(1, 1) = -1.0;
  return s;
}

}  // namespace nmgme
