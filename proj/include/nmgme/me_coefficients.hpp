#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nmgme/bath_kernels.hpp"
#include "nmgme/errors.hpp"
#include "nmgme/grid_quadrature.hpp"
#include "nmgme/series_kernels.hpp"
#include "nmgme/system_model.hpp"

// Time-local master equation in generator form over an operator basis X:
//
//   rho' = -i[H0, rho] + sum_ab G_ab [X_a, [X_b, rho]] + sum_ab E_ab [X_a, {X_b, rho}]
//
// For linear channels A^j = sum_a M_ja X_a with X = (q, p) and
// X(s) = Phi(t - s) X(t),
//
//   G_ab(t) = -sum_jk M_ja int_0^t A_jk(t, s) (M Phi(t - s))_kb ds
//   E_ab(t) = -i sum_jk M_ja int_0^t B_jk(t, s) (M Phi(t - s))_kb ds
//
// The named coefficients follow from G and E with [q,[p,.]] = [p,[q,.]] and
// [p,{q,.}] = [{q,p},.] - [q,{p,.}]:
//
//   Gamma = G_qq   Theta = G_qp + G_pq   gamma = G_pp
//   Xi = 2 E_qq    Upsilon = 2 (E_qp - E_pq)
//   alpha = i E_pp (shift alpha p^2)   beta = i E_pq (shift beta {q,p})
//
// Xi and Upsilon carry the -2i prefactor, so the equation reads
// Gamma[q,[q,.]] + Theta[q,[p,.]] + Xi/2 [q,{q,.}] + Upsilon/2 [q,{p,.}] + ...

namespace nmgme {

struct SeriesPoint {
  int achieved_order = 0;
  double last_order_norm = 0.0;
  bool converged = true;
  std::vector<double> norm_alpha;
  std::vector<double> norm_beta;
};

struct MECoefficients {
  std::string scenario;
  std::vector<double> times;
  std::vector<Eigen::MatrixXcd> G;
  std::vector<Eigen::MatrixXcd> E;
  std::vector<cplx> Gamma, Theta, Xi, Upsilon;
  bool has_extras = false;
  std::vector<double> alpha, beta, gamma;
  std::vector<SeriesPoint> series;

  std::size_t size() const noexcept { return times.size(); }
  int basis_size() const { return G.empty() ? 0 : static_cast<int>(G.front().rows()); }

  /// Linear interpolation of the generator matrices at time t (clamped).
  void generator_at(double t, Eigen::MatrixXcd& g, Eigen::MatrixXcd& e) const {
    if (times.empty()) throw ParameterError("MECoefficients: empty table");
    if (t <= times.front()) {
      g = G.front();
      e = E.front();
      return;
    }
    if (t >= times.back()) {
      g = G.back();
      e = E.back();
      return;
    }
    const double h = times[1] - times[0];
    auto i = static_cast<std::size_t>(std::floor(t / h));
    if (i + 1 >= times.size()) i = times.size() - 2;
    const double w = (t - times[i]) / h;
    g = (1.0 - w) * G[i] + w * G[i + 1];
    e = (1.0 - w) * E[i] + w * E[i + 1];
  }

  /// Reality of Gamma, Theta, gamma; imaginarity of Xi, Upsilon; finiteness.
  /// Returns an empty string when all hold.
  std::string invariant_violation(double tol = 1e-9) const {
    for (std::size_t i = 0; i < size(); ++i) {
      const auto bad = [&](const char* what) { return std::string(what) + " at t=" + std::to_string(times[i]); };
      for (const cplx& v : {Gamma[i], Theta[i], Xi[i], Upsilon[i]})
        if (!detail::finite(v)) return bad("non-finite coefficient");
      if (std::abs(Gamma[i].imag()) > tol || std::abs(Theta[i].imag()) > tol) return bad("Gamma/Theta not real");
      if (std::abs(Xi[i].real()) > tol || std::abs(Upsilon[i].real()) > tol) return bad("Xi/Upsilon not imaginary");
    }
    return {};
  }

  /// Per-order sup-norms; columns t, n, norm_alpha, norm_beta.
  void write_series_csv(std::ostream& os) const {
    os << "t,n,norm_alpha,norm_beta\n";
    char buf[128];
    for (std::size_t i = 0; i < series.size(); ++i)
      for (std::size_t n = 0; n < series[i].norm_alpha.size(); ++n) {
        std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g\n", times[i], n + 1, series[i].norm_alpha[n],
                      series[i].norm_beta[n]);
        os << buf;
      }
  }

  /// One row per grid time, 17 significant digits.
  void write_csv(std::ostream& os) const {
    os << "t,Gamma_re,Gamma_im,Theta_re,Theta_im,Xi_re,Xi_im,Upsilon_re,Upsilon_im";
    if (has_extras) os << ",alpha,beta,gamma";
    os << '\n';
    char buf[64];
    const auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf;
    };
    for (std::size_t i = 0; i < size(); ++i) {
      put(times[i]);
      for (const cplx& v : {Gamma[i], Theta[i], Xi[i], Upsilon[i]}) {
        os << ',';
        put(v.real());
        os << ',';
        put(v.imag());
      }
      if (has_extras)
        for (double v : {alpha[i], beta[i], gamma[i]}) {
          os << ',';
          put(v);
        }
      os << '\n';
    }
  }
};

namespace detail {

inline void fill_named(MECoefficients& c, bool extras) {
  const std::size_t n = c.size();
  c.Gamma.assign(n, 0.0);
  c.Theta.assign(n, 0.0);
  c.Xi.assign(n, 0.0);
  c.Upsilon.assign(n, 0.0);
  c.has_extras = extras;
  if (extras) {
    c.alpha.assign(n, 0.0);
    c.beta.assign(n, 0.0);
    c.gamma.assign(n, 0.0);
  }
  const cplx I(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& G = c.G[i];
    const auto& E = c.E[i];
    c.Gamma[i] = G(0, 0);
    c.Xi[i] = 2.0 * E(0, 0);
    if (G.rows() == 2) {
      c.Theta[i] = G(0, 1) + G(1, 0);
      c.Upsilon[i] = 2.0 * (E(0, 1) - E(1, 0));
      if (extras) {
        c.alpha[i] = (I * E(1, 1)).real();
        c.beta[i] = (I * E(1, 0)).real();
        c.gamma[i] = G(1, 1).real();
      }
    }
  }
}

inline void check_channels(const Eigen::MatrixXd& M, int n_channels) {
  if (M.cols() != 2 || M.rows() != n_channels)
    throw DimensionMismatch("channel matrix must be n_channels x 2 over (q, p)");
}

}  // namespace detail

/// G and E on the grid from assembled kernels at every outer time.
inline MECoefficients coefficients_linear(const std::vector<AssembledKernels>& AB, const TimeGrid& grid,
                                          const PropagatorKernels& kernels, const Eigen::MatrixXd& channel_ops,
                                          bool extras = false, std::string scenario = "linear") {
  if (AB.size() != grid.size()) throw DimensionMismatch("coefficients_linear: kernels do not cover the grid");
  if (AB.empty()) throw DimensionMismatch("coefficients_linear: empty kernel list");
  const int c = AB.front().A.channels;
  detail::check_channels(channel_ops, c);
  const double h = grid.step();
  const cplx I(0.0, 1.0);
  MECoefficients out;
  out.scenario = std::move(scenario);
  out.times.assign(grid.points().begin(), grid.points().end());
  out.G.resize(grid.size());
  out.E.resize(grid.size());
  out.series.resize(grid.size());
  for (std::size_t K = 0; K < grid.size(); ++K) {
    const auto& ab = AB[K];
    if (ab.outer_index != K || ab.A.cols != K + 1) throw DimensionMismatch("coefficients_linear: kernel/grid mismatch");
    const auto w = prefix_weights(K, h);
    // Y_jb = int A_jk(t, s) (M Phi(t - s))_kb ds, Z likewise with B.
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(c, 2), Z = Eigen::MatrixXcd::Zero(c, 2);
    for (std::size_t s = 0; s <= K; ++s) {
      if (w[s] == 0.0) continue;
      const Eigen::MatrixXd MP = channel_ops * kernels.phase(grid[K] - grid[s]);
      for (int j = 0; j < c; ++j)
        for (int k = 0; k < c; ++k) {
          const cplx a = w[s] * ab.A.at(j, k, 0, s);
          const cplx b = w[s] * ab.B.at(j, k, 0, s);
          for (int col = 0; col < 2; ++col) {
            Y(j, col) += a * MP(k, col);
            Z(j, col) += b * MP(k, col);
          }
        }
    }
    out.G[K] = -channel_ops.transpose().cast<cplx>() * Y;
    out.E[K] = -I * (channel_ops.transpose().cast<cplx>() * Z);
    out.series[K] = SeriesPoint{ab.achieved_order, ab.last_order_norm, ab.converged, ab.norm_alpha, ab.norm_beta};
  }
  detail::fill_named(out, extras);
  return out;
}

/// Runs the series at every grid time and reduces to coefficients.
inline MECoefficients coefficients_from_series(const CorrelationKernel& D, const PropagatorKernels& kernels,
                                               const Eigen::MatrixXd& channel_ops, const TimeGrid& grid,
                                               const SeriesConfig& cfg, bool extras = false,
                                               std::string scenario = "linear", unsigned threads = 0) {
  detail::check_channels(channel_ops, D.n_channels());
  const CommutatorKernel f = commutator_kernel(kernels, channel_ops);
  const SeriesInputs in(D, f, grid);
  return coefficients_linear(assemble_all(in, cfg, threads), grid, kernels, channel_ops, extras, std::move(scenario));
}

/// Position-coupled oscillator, A = q.
inline MECoefficients coefficients_hpz(const CorrelationKernel& D, double m, double w, const TimeGrid& grid,
                                       const SeriesConfig& cfg, unsigned threads = 0) {
  if (D.n_channels() != 1) throw DimensionMismatch("coefficients_hpz: single-channel kernel required");
  Eigen::MatrixXd M(1, 2);
  M << 1.0, 0.0;
  return coefficients_from_series(D, harmonic_kernels(m, w), M, grid, cfg, false, "hpz", threads);
}

/// Direct quadrature Gamma~ = -int D^Re C, Theta~ = -int D^Re C~ for a
/// purely real kernel, bypassing the series.
inline MECoefficients coefficients_nondissipative(const CorrelationKernel& D, const PropagatorKernels& kernels,
                                                  const Eigen::MatrixXd& channel_ops, const TimeGrid& grid,
                                                  std::string scenario = "nondissipative") {
  const int c = D.n_channels();
  detail::check_channels(channel_ops, c);
  for (int j = 0; j < c; ++j)
    for (int k = 0; k < c; ++k)
      for (std::size_t a = 0; a < grid.size(); ++a)
        for (std::size_t b = 0; b < grid.size(); ++b)
          if (D.im_part(j, k, grid[a], grid[b]) != 0.0)
            throw ParameterError("coefficients_nondissipative: kernel has a nonzero imaginary part");
  const double h = grid.step();
  MECoefficients out;
  out.scenario = std::move(scenario);
  out.times.assign(grid.points().begin(), grid.points().end());
  out.G.resize(grid.size());
  out.E.assign(grid.size(), Eigen::MatrixXcd::Zero(2, 2));
  out.series.resize(grid.size());
  for (std::size_t K = 0; K < grid.size(); ++K) {
    const auto w = prefix_weights(K, h);
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(c, 2);
    for (std::size_t s = 0; s <= K; ++s) {
      if (w[s] == 0.0) continue;
      const Eigen::MatrixXd MP = channel_ops * kernels.phase(grid[K] - grid[s]);
      for (int j = 0; j < c; ++j)
        for (int k = 0; k < c; ++k) {
          const cplx a = w[s] * D.re_part(j, k, grid[K], grid[s]);
          for (int col = 0; col < 2; ++col) Y(j, col) += a * MP(k, col);
        }
    }
    out.G[K] = -channel_ops.transpose().cast<cplx>() * Y;
  }
  detail::fill_named(out, false);
  return out;
}

/// Dissipative collapse model: channels (q, -mu p) with the two-channel
/// kernel built from `base`.
inline MECoefficients coefficients_qmupl(double lambda, double mu, double m, double w, const CorrelationKernel& base,
                                         const TimeGrid& grid, const SeriesConfig& cfg, unsigned threads = 0) {
  if (!(mu >= 0.0)) throw ParameterError("coefficients_qmupl: mu must be >= 0");
  const CorrelationKernel D = make_qmupl_matrix(lambda, base);
  const PropagatorKernels kernels = qmupl_kernels(m, w, lambda, mu);
  Eigen::MatrixXd M(2, 2);
  M << 1.0, 0.0, 0.0, -mu;
  return coefficients_from_series(D, kernels, M, grid, cfg, true, "qmupl", threads);
}

/// Constant coupling operator (sigma_z). The commutator kernel vanishes, so
/// A = D^Re and B = D^Im exactly; X = (sigma_z) and Theta = Upsilon = 0.
inline MECoefficients coefficients_dephasing(const CorrelationKernel& D, const TimeGrid& grid) {
  if (D.n_channels() != 1) throw DimensionMismatch("coefficients_dephasing: single-channel kernel required");
  const SeriesInputs in(D, CommutatorKernel::zero(1), grid);
  const auto AB = assemble_all(in, SeriesConfig{}, 1);
  const double h = grid.step();
  const cplx I(0.0, 1.0);
  MECoefficients out;
  out.scenario = "dephasing";
  out.times.assign(grid.points().begin(), grid.points().end());
  out.G.resize(grid.size());
  out.E.resize(grid.size());
  out.series.resize(grid.size());
  for (std::size_t K = 0; K < grid.size(); ++K) {
    const auto w = prefix_weights(K, h);
    cplx a = 0.0, b = 0.0;
    for (std::size_t s = 0; s <= K; ++s) {
      a += w[s] * AB[K].A.at(0, 0, 0, s);
      b += w[s] * AB[K].B.at(0, 0, 0, s);
    }
    out.G[K] = Eigen::MatrixXcd::Constant(1, 1, -a);
    out.E[K] = Eigen::MatrixXcd::Constant(1, 1, -I * b);
  }
  detail::fill_named(out, false);
  return out;
}

/// Kossakowski form of the generator over the basis X:
///   rho' = -i[H0 + H_shift, rho] + sum_ab K_ab (X_a rho X_b - 1/2 {X_b X_a, rho})
/// with K = -(G + G^T) + (E - E^T) and H_shift = sum_ab S_ab X_a X_b,
/// S = (i/2)(E + E^T).
struct KossakowskiForm {
  Eigen::MatrixXcd K;
  Eigen::MatrixXcd S;
};

inline KossakowskiForm kossakowski_form(const Eigen::MatrixXcd& G, const Eigen::MatrixXcd& E) {
  if (G.rows() != G.cols() || E.rows() != G.rows() || E.cols() != G.cols())
    throw DimensionMismatch("kossakowski_form: G and E must be square and of equal size");
  const cplx I(0.0, 1.0);
  return {-(G + G.transpose()) + (E - E.transpose()), 0.5 * I * (E + E.transpose())};
}

inline std::vector<KossakowskiForm> kossakowski_form(const MECoefficients& c) {
  std::vector<KossakowskiForm> out;
  out.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back(kossakowski_form(c.G[i], c.E[i]));
  return out;
}

}  // namespace nmgme
