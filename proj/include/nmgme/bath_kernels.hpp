#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nmgme/errors.hpp"
#include "nmgme/grid_quadrature.hpp"

namespace nmgme {

/// Two-time bath correlation D_jk(t, s) = <phi_j(t) phi_k(s)>.
///
/// The real-symmetric and imaginary-antisymmetric parts are exposed as
/// re_part / im_part; both are real numbers, with D = re_part + i im_part.
/// Evaluation is pure and the object is immutable, so one kernel may be
/// shared between threads.
class CorrelationKernel {
 public:
  using Evaluator = std::function<cplx(int j, int k, double t, double s)>;

  CorrelationKernel() = default;

  CorrelationKernel(int n_channels, Evaluator eval, std::string family = "custom")
      : n_(n_channels), eval_(std::make_shared<Evaluator>(std::move(eval))), family_(std::move(family)) {
    if (n_channels < 1) throw ParameterError("CorrelationKernel: need at least one channel");
  }

  int n_channels() const noexcept { return n_; }
  const std::string& family() const noexcept { return family_; }

  cplx operator()(int j, int k, double t, double s) const { return (*eval_)(j, k, t, s); }
  double re_part(int j, int k, double t, double s) const { return (*eval_)(j, k, t, s).real(); }
  double im_part(int j, int k, double t, double s) const { return (*eval_)(j, k, t, s).imag(); }

  /// Kernel multiplied by a real factor.
  CorrelationKernel scaled(double factor) const {
    auto base = eval_;
    return CorrelationKernel(
        n_, [base, factor](int j, int k, double t, double s) { return factor * (*base)(j, k, t, s); }, family_);
  }

  /// Kernel with its imaginary part removed (classical noise).
  CorrelationKernel real_part_only() const {
    auto base = eval_;
    return CorrelationKernel(
        n_, [base](int j, int k, double t, double s) { return cplx((*base)(j, k, t, s).real(), 0.0); },
        family_ + "/re");
  }

 private:
  int n_ = 0;
  std::shared_ptr<const Evaluator> eval_;
  std::string family_;
};

/// Zero-temperature discrete bath: phi_j = sum_m g_jm b_m + conj(g_jm) b_m^dagger.
/// The oracle builds its joint Hamiltonian from the same object.
struct DiscreteBath {
  std::vector<double> freqs;
  Eigen::MatrixXcd couplings;  // n_channels x n_modes

  int n_channels() const { return static_cast<int>(couplings.rows()); }
  int n_modes() const { return static_cast<int>(freqs.size()); }

  void validate() const {
    if (freqs.empty()) throw ParameterError("discrete bath: empty mode list");
    if (couplings.cols() != static_cast<Eigen::Index>(freqs.size()) || couplings.rows() < 1)
      throw DimensionMismatch("discrete bath: coupling matrix must be n_channels x n_modes");
    for (double w : freqs)
      if (!(w > 0.0) || !std::isfinite(w)) throw ParameterError("discrete bath: mode frequencies must be > 0");
  }
};

/// D(t, s) = gamma / (2 tau_c) * exp(-|t - s| / tau_c).
inline CorrelationKernel make_exponential(double gamma, double tau_c) {
  if (!(tau_c > 0.0)) throw ParameterError("make_exponential: tau_c must be > 0");
  if (!(gamma >= 0.0)) throw ParameterError("make_exponential: gamma must be >= 0");
  const double amp = gamma / (2.0 * tau_c);
  return CorrelationKernel(
      1, [amp, tau_c](int, int, double t, double s) { return cplx(amp * std::exp(-std::abs(t - s) / tau_c), 0.0); },
      "exponential");
}

/// D_jk(t, s) = sum_m g_jm conj(g_km) exp(-i w_m (t - s)).
inline CorrelationKernel make_discrete_modes(const DiscreteBath& bath) {
  bath.validate();
  auto data = std::make_shared<const DiscreteBath>(bath);
  return CorrelationKernel(
      bath.n_channels(),
      [data](int j, int k, double t, double s) {
        cplx acc = 0.0;
        for (int m = 0; m < data->n_modes(); ++m)
          acc += data->couplings(j, m) * std::conj(data->couplings(k, m)) *
                 std::exp(cplx(0.0, -data->freqs[m] * (t - s)));
        return acc;
      },
      "discrete_modes");
}

inline CorrelationKernel make_discrete_modes(const std::vector<double>& freqs, const Eigen::MatrixXcd& couplings) {
  return make_discrete_modes(DiscreteBath{freqs, couplings});
}

/// Two-channel kernel for the dissipative collapse model:
/// Re D_11 = -Im D_12 = Im D_21 = Re D_22 = lambda * D, all other parts zero.
inline CorrelationKernel make_qmupl_matrix(double lambda, const CorrelationKernel& base) {
  if (!(lambda >= 0.0)) throw ParameterError("make_qmupl_matrix: lambda must be >= 0");
  if (base.n_channels() != 1) throw DimensionMismatch("make_qmupl_matrix: base kernel must be single-channel");
  for (double t : {0.0, 0.37, 1.3})
    for (double s : {0.0, 0.81, 2.2}) {
      const cplx a = base(0, 0, t, s);
      const cplx b = base(0, 0, s, t);
      if (std::abs(a.imag()) > 1e-14 * (1.0 + std::abs(a)) || std::abs(a - b) > 1e-12 * (1.0 + std::abs(a)))
        throw ParameterError("make_qmupl_matrix: base kernel must be real and symmetric");
    }
  return CorrelationKernel(
      2,
      [lambda, base](int j, int k, double t, double s) -> cplx {
        const double d = lambda * base(0, 0, t, s).real();
        if (j == k) return {d, 0.0};
        return j == 0 ? cplx(0.0, -d) : cplx(0.0, d);
      },
      "qmupl/" + base.family());
}

/// Narrow exponential of unit area times `strength`; tends to strength * delta(t - s).
inline CorrelationKernel make_white_noise_approximant(double strength, double eps) {
  if (!(eps > 0.0)) throw ParameterError("make_white_noise_approximant: eps must be > 0");
  if (!(strength > 0.0)) throw ParameterError("make_white_noise_approximant: strength must be > 0");
  const double amp = strength / (2.0 * eps);
  return CorrelationKernel(
      1, [amp, eps](int, int, double t, double s) { return cplx(amp * std::exp(-std::abs(t - s) / eps), 0.0); },
      "white_noise");
}

}  // namespace nmgme
