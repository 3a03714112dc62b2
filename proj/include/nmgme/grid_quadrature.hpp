#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "nmgme/errors.hpp"

namespace nmgme {

using cplx = std::complex<double>;

enum class Rule { Trapezoid, Simpson };

/// Uniform grid t_i = i * h on [0, t_max].
class TimeGrid {
 public:
  TimeGrid() = default;

  TimeGrid(double t_max, std::size_t n_points) : t_max_(t_max) {
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ParameterError("TimeGrid: t_max must be positive and finite");
    if (n_points < 2) throw ParameterError("TimeGrid: need at least 2 points");
    h_ = t_max / static_cast<double>(n_points - 1);
    points_.resize(n_points);
    for (std::size_t i = 0; i < n_points; ++i) points_[i] = static_cast<double>(i) * h_;
    points_.back() = t_max;
  }

  /// Grid with `per_unit` points per unit time (65 gives h = 1/64).
  static TimeGrid with_density(double t_max, std::size_t per_unit = 65) {
    const auto panels = static_cast<std::size_t>(std::ceil(t_max * static_cast<double>(per_unit - 1) - 1e-9));
    return TimeGrid(t_max, std::max<std::size_t>(panels, 1) + 1);
  }

  double t_max() const noexcept { return t_max_; }
  double step() const noexcept { return h_; }
  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  std::span<const double> points() const noexcept { return points_; }

  /// Index of the grid point nearest to t (clamped to the grid).
  std::size_t nearest_index(double t) const {
    if (t <= 0.0) return 0;
    const auto i = static_cast<std::size_t>(std::llround(t / h_));
    return std::min(i, points_.size() - 1);
  }

  bool same_as(const TimeGrid& other) const noexcept {
    return points_.size() == other.points_.size() && std::abs(t_max_ - other.t_max_) <= 1e-12 * t_max_;
  }

 private:
  double t_max_ = 0.0;
  double h_ = 0.0;
  std::vector<double> points_;
};

/// Unit step with the symmetric value 1/2 at coincidence.
inline double step(double x) noexcept { return x > 0.0 ? 1.0 : (x < 0.0 ? 0.0 : 0.5); }

/// Same convention expressed on grid indices, where coincidence is exact.
inline double step_index(std::size_t later, std::size_t earlier) noexcept {
  return later > earlier ? 1.0 : (later == earlier ? 0.5 : 0.0);
}

/// Weights of the rule on the prefix [t_0, t_k] (k + 1 samples).
///
/// Simpson is applied on the largest even number of panels; an odd panel
/// count leaves the last panel to the trapezoid rule.
inline std::vector<double> prefix_weights(std::size_t k, double h, Rule rule = Rule::Trapezoid) {
  std::vector<double> w(k + 1, 0.0);
  if (k == 0) return w;
  if (rule == Rule::Trapezoid || k == 1) {
    for (std::size_t i = 0; i <= k; ++i) w[i] = h;
    w[0] = w[k] = 0.5 * h;
    return w;
  }
  const std::size_t even = (k % 2 == 0) ? k : k - 1;
  for (std::size_t i = 0; i <= even; ++i) {
    const double c = (i == 0 || i == even) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    w[i] += c * h / 3.0;
  }
  if (even != k) {
    w[k - 1] += 0.5 * h;
    w[k] += 0.5 * h;
  }
  return w;
}

/// Trapezoid weights on the sub-interval [t_first, t_last]; entries are
/// indexed from `first`.
inline std::vector<double> segment_weights(std::size_t first, std::size_t last, double h) {
  std::vector<double> w(last >= first ? last - first + 1 : 0, h);
  if (w.empty()) return w;
  if (w.size() == 1) {
    w[0] = 0.0;
    return w;
  }
  w.front() = w.back() = 0.5 * h;
  return w;
}

namespace detail {
template <class T>
bool finite(const T& v) {
  if constexpr (std::is_arithmetic_v<T>) {
    return std::isfinite(v);
  } else {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  }
}
}  // namespace detail

/// Integral over [0, t_k] of samples f(t_0) ... f(t_k).
template <class T>
cplx integrate_1d(std::span<const T> samples, double h, Rule rule = Rule::Trapezoid) {
  if (samples.empty()) throw ParameterError("integrate_1d: no samples");
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!detail::finite(samples[i])) throw NonFiniteSample(i);
  const auto w = prefix_weights(samples.size() - 1, h, rule);
  cplx acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) acc += w[i] * cplx(samples[i]);
  return acc;
}

template <class T>
cplx integrate_1d(const std::vector<T>& samples, double h, Rule rule = Rule::Trapezoid) {
  return integrate_1d(std::span<const T>(samples), h, rule);
}

/// Iterated integral over {0 <= s <= tau <= t_k}. `f(a, b)` returns the
/// sample at (tau_a, s_b) with b <= a; diagonal samples get the inner
/// rule's boundary weight.
template <class F>
cplx integrate_triangular(F&& f, std::size_t k, double h, Rule rule = Rule::Trapezoid) {
  const auto outer = prefix_weights(k, h, rule);
  cplx acc = 0.0;
  std::size_t flat = 0;
  for (std::size_t a = 0; a <= k; ++a) {
    const auto inner = prefix_weights(a, h, rule);
    cplx row = 0.0;
    for (std::size_t b = 0; b <= a; ++b, ++flat) {
      const cplx v = f(a, b);
      if (!detail::finite(v)) throw NonFiniteSample(flat);
      row += inner[b] * v;
    }
    acc += outer[a] * row;
  }
  return acc;
}

}  // namespace nmgme
