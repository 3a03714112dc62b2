#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nmgme/bath_kernels.hpp"
#include "nmgme/errors.hpp"
#include "nmgme/grid_quadrature.hpp"
#include "nmgme/system_model.hpp"

// Contraction-chain expansion of the nonlocal kernels A(t, s) and B(t, s).
//
// Starting from B_j(t, s1), each Wick contraction either pairs the open B
// with an A_Delta(x) of some pair (x, y), leaving B(x, y) open ("b" chain),
// or pairs it with B(x, y), leaving A_Delta(x) open ("a" chain). An open
// A_Delta can only contract with a further B. With c-number commutators the
// single contractions are
//
//   B_j(tau, s) . A^{j2}(x)     : 2i D^Im_jk(tau, s) f^{j2 k}(x, s) step(x - s)
//   B_j(tau, s) . B_j2(x, y)    : 2i [D^Re_jk(tau,s) D^Im_j2l(x,y) + D^Im_jk(tau,s) D^Re_j2l(x,y)]
//                                    f^{lk}(y, s) step(y - s)
//   A^k(tau) . B_j2(x, y)       : 2i D^Im_j2l(x, y) f^{lk}(y, tau) step(y - tau)
//
// Chains are extended on the right, so the outer time t stays fixed and the
// pair integrals over the inner time y collapse into transfer matrices
// W_BA, W_BB, W_AB on the full grid (computed once, O(c^3 G^3)).
//
// Tables are indexed (channel j of B_j(t, s1), channel j2 of the open
// operator, row s1, column x = time of the open operator). The row index
// may be integrated out in advance: alpha and beta only need the s1
// integral, and the recursion is linear in the rows.

namespace nmgme {

struct SeriesConfig {
  int max_order = 3;
  double eps_series = 1e-6;

  void validate() const {
    if (max_order < 0) throw ParameterError("SeriesConfig: max_order must be >= 0");
    if (!(eps_series > 0.0)) throw ParameterError("SeriesConfig: eps_series must be > 0");
  }
};

enum class TableKind { b, a, alpha, beta, A, B };

inline const char* to_string(TableKind k) {
  switch (k) {
    case TableKind::b: return "b";
    case TableKind::a: return "a";
    case TableKind::alpha: return "alpha";
    case TableKind::beta: return "beta";
    case TableKind::A: return "A";
    case TableKind::B: return "B";
  }
  return "?";
}

/// Grid-sampled two-time complex function at a fixed outer time t_K.
struct KernelTable {
  TableKind kind = TableKind::b;
  int order = 0;
  std::size_t outer_index = 0;
  double outer_time = 0.0;
  int channels = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool rows_integrated = false;
  std::vector<cplx> values;

  KernelTable() = default;
  KernelTable(TableKind k, int n, std::size_t K, double t, int c, std::size_t r, std::size_t cl, bool integrated)
      : kind(k), order(n), outer_index(K), outer_time(t), channels(c), rows(r), cols(cl), rows_integrated(integrated),
        values(static_cast<std::size_t>(c) * c * r * cl, cplx(0.0)) {}

  std::size_t offset(int j, int j2, std::size_t r, std::size_t x) const {
    return ((static_cast<std::size_t>(j) * channels + j2) * rows + r) * cols + x;
  }
  cplx& at(int j, int j2, std::size_t r, std::size_t x) { return values[offset(j, j2, r, x)]; }
  const cplx& at(int j, int j2, std::size_t r, std::size_t x) const { return values[offset(j, j2, r, x)]; }

  double sup_norm() const {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](const cplx& v) { return detail::finite(v); });
  }
};

/// D^Re, D^Im and f sampled on all grid pairs.
class SeriesInputs {
 public:
  SeriesInputs(const CorrelationKernel& D, const CommutatorKernel& f, const TimeGrid& grid)
      : grid_(grid), c_(D.n_channels()), n_(grid.size()) {
    if (f.n_channels() != c_) throw DimensionMismatch("series inputs: kernel and commutator channel counts differ");
    const std::size_t total = static_cast<std::size_t>(c_) * c_ * n_ * n_;
    dre_.resize(total);
    dim_.resize(total);
    f_.resize(total);
    for (int j = 0; j < c_; ++j)
      for (int k = 0; k < c_; ++k)
        for (std::size_t a = 0; a < n_; ++a)
          for (std::size_t b = 0; b < n_; ++b) {
            const std::size_t o = idx(j, k, a, b);
            const cplx d = D(j, k, grid[a], grid[b]);
            dre_[o] = d.real();
            dim_[o] = d.imag();
            f_[o] = f(j, k, grid[a], grid[b]);
            if (!detail::finite(d) || !detail::finite(f_[o])) throw NonFiniteSample(o);
          }
    im_zero_ = std::all_of(dim_.begin(), dim_.end(), [](double v) { return v == 0.0; });
    f_zero_ = std::all_of(f_.begin(), f_.end(), [](const cplx& v) { return v == cplx(0.0); });
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  int channels() const noexcept { return c_; }
  std::size_t size() const noexcept { return n_; }
  double h() const noexcept { return grid_.step(); }

  double dre(int j, int k, std::size_t a, std::size_t b) const { return dre_[idx(j, k, a, b)]; }
  double dim(int j, int k, std::size_t a, std::size_t b) const { return dim_[idx(j, k, a, b)]; }
  cplx f(int j, int k, std::size_t a, std::size_t b) const { return f_[idx(j, k, a, b)]; }

  bool im_is_zero() const noexcept { return im_zero_; }
  bool commutator_is_zero() const noexcept { return f_zero_; }
  /// Every contraction vanishes, so the series stops at order zero.
  bool trivially_closed() const noexcept { return im_zero_ || f_zero_; }

 private:
  std::size_t idx(int j, int k, std::size_t a, std::size_t b) const {
    return ((static_cast<std::size_t>(j) * c_ + k) * n_ + a) * n_ + b;
  }

  TimeGrid grid_;
  int c_;
  std::size_t n_;
  std::vector<double> dre_, dim_;
  std::vector<cplx> f_;
  bool im_zero_ = false;
  bool f_zero_ = false;
};

/// Single-link transfer matrices between open operators at grid times x -> x'.
class ChainTransfer {
 public:
  explicit ChainTransfer(const SeriesInputs& in) : c_(in.channels()), n_(in.size()) {
    const std::size_t total = static_cast<std::size_t>(c_) * c_ * n_ * n_;
    ba_.assign(total, 0.0);
    bb_.assign(total, 0.0);
    ab_.assign(total, 0.0);
    const double h = in.h();
    std::vector<std::vector<double>> w(n_);
    for (std::size_t x = 0; x < n_; ++x) w[x] = prefix_weights(x, h);
    const cplx two_i(0.0, 2.0);

    // W_BA(x, x') = 2i sum_y w_y D^Im_jk(x, y) f^{j2 k}(x', y) step(x' - y)
    for (int j = 0; j < c_; ++j)
      for (int j2 = 0; j2 < c_; ++j2)
        for (std::size_t x = 0; x < n_; ++x)
          for (std::size_t xp = 0; xp < n_; ++xp) {
            cplx acc = 0.0;
            const std::size_t ymax = std::min(x, xp);
            for (std::size_t y = 0; y <= ymax; ++y) {
              const double wy = w[x][y] * step_index(xp, y);
              for (int k = 0; k < c_; ++k) acc += wy * in.dim(j, k, x, y) * in.f(j2, k, xp, y);
            }
            ba_[idx(j, j2, x, xp)] = two_i * acc;
          }

    // W_AB(x, x') = 2i sum_{y' <= x'} w_y' D^Im_j2l(x', y') f^{lk}(y', x) step(y' - x)
    for (int k = 0; k < c_; ++k)
      for (int j2 = 0; j2 < c_; ++j2)
        for (std::size_t x = 0; x < n_; ++x)
          for (std::size_t xp = x; xp < n_; ++xp) {
            cplx acc = 0.0;
            for (std::size_t yp = x; yp <= xp; ++yp) {
              const double wy = w[xp][yp] * step_index(yp, x);
              for (int l = 0; l < c_; ++l) acc += wy * in.dim(j2, l, xp, yp) * in.f(l, k, yp, x);
            }
            ab_[idx(k, j2, x, xp)] = two_i * acc;
          }

    // W_BB(x, x') = 2i sum_y w_y sum_k [D^Re_jk(x,y) P^Im_j2k(x',y) + D^Im_jk(x,y) P^Re_j2k(x',y)]
    // with P^{Re|Im}_j2k(x', y) = sum_{y'} w_y' D^{Re|Im}_j2l(x', y') f^{lk}(y', y) step(y' - y).
    std::vector<cplx> p_re(total, 0.0), p_im(total, 0.0);
    for (int j2 = 0; j2 < c_; ++j2)
      for (int k = 0; k < c_; ++k)
        for (std::size_t xp = 0; xp < n_; ++xp)
          for (std::size_t y = 0; y <= xp; ++y) {
            cplx acc_re = 0.0, acc_im = 0.0;
            for (std::size_t yp = y; yp <= xp; ++yp) {
              const double wy = w[xp][yp] * step_index(yp, y);
              for (int l = 0; l < c_; ++l) {
                const cplx fv = in.f(l, k, yp, y);
                acc_re += wy * in.dre(j2, l, xp, yp) * fv;
                acc_im += wy * in.dim(j2, l, xp, yp) * fv;
              }
            }
            p_re[idx(j2, k, xp, y)] = acc_re;
            p_im[idx(j2, k, xp, y)] = acc_im;
          }
    for (int j = 0; j < c_; ++j)
      for (int j2 = 0; j2 < c_; ++j2)
        for (std::size_t x = 0; x < n_; ++x)
          for (std::size_t xp = 0; xp < n_; ++xp) {
            cplx acc = 0.0;
            const std::size_t ymax = std::min(x, xp);
            for (std::size_t y = 0; y <= ymax; ++y)
              for (int k = 0; k < c_; ++k)
                acc += w[x][y] * (in.dre(j, k, x, y) * p_im[idx(j2, k, xp, y)] +
                                  in.dim(j, k, x, y) * p_re[idx(j2, k, xp, y)]);
            bb_[idx(j, j2, x, xp)] = two_i * acc;
          }
  }

  int channels() const noexcept { return c_; }
  std::size_t size() const noexcept { return n_; }

  const cplx* ba_row(int j, int j2, std::size_t x) const { return &ba_[idx(j, j2, x, 0)]; }
  const cplx* bb_row(int j, int j2, std::size_t x) const { return &bb_[idx(j, j2, x, 0)]; }
  const cplx* ab_row(int j, int j2, std::size_t x) const { return &ab_[idx(j, j2, x, 0)]; }

 private:
  std::size_t idx(int j, int k, std::size_t a, std::size_t b) const {
    return ((static_cast<std::size_t>(j) * c_ + k) * n_ + a) * n_ + b;
  }

  int c_;
  std::size_t n_;
  std::vector<cplx> ba_, bb_, ab_;
};

enum class RowMode { Full, Integrated };

namespace detail {

inline void check_outer(const SeriesInputs& in, std::size_t K) {
  if (K >= in.size()) throw DimensionMismatch("outer time index outside the grid");
}

inline void check_same_shape(const KernelTable& a, const KernelTable& b, const char* what) {
  if (a.outer_index != b.outer_index || a.rows != b.rows || a.cols != b.cols || a.channels != b.channels ||
      a.rows_integrated != b.rows_integrated)
    throw DimensionMismatch(std::string(what) + ": tables do not share grid and outer time");
}

// out(r, j, j2, x') += sum_{j', x} w_x prev(r, j, j', x) W(j', j2, x, x')
template <class RowFn>
void chain_step(const KernelTable& prev, RowFn&& w_row, const std::vector<double>& wx, KernelTable& out) {
  const std::size_t K1 = prev.cols;
  const int c = prev.channels;
  for (int j = 0; j < c; ++j)
    for (int jp = 0; jp < c; ++jp)
      for (std::size_t r = 0; r < prev.rows; ++r)
        for (std::size_t x = 0; x < K1; ++x) {
          const cplx coef = wx[x] * prev.at(j, jp, r, x);
          if (coef == cplx(0.0)) continue;
          for (int j2 = 0; j2 < c; ++j2) {
            const cplx* W = w_row(jp, j2, x);
            cplx* dst = &out.at(j, j2, r, 0);
            for (std::size_t xp = 0; xp < K1; ++xp) dst[xp] += coef * W[xp];
          }
        }
}

}  // namespace detail

/// Order-1 b kernel: contraction of B_j(t, s1) with A^{j2}_Delta(x).
inline KernelTable contraction_BA(const SeriesInputs& in, std::size_t K, RowMode mode = RowMode::Full) {
  detail::check_outer(in, K);
  const int c = in.channels();
  const std::size_t K1 = K + 1;
  const bool integ = mode == RowMode::Integrated;
  KernelTable b(TableKind::b, 1, K, in.grid()[K], c, integ ? 1 : K1, K1, integ);
  const auto ws = prefix_weights(K, in.h());
  const cplx two_i(0.0, 2.0);
  for (int j = 0; j < c; ++j)
    for (int j2 = 0; j2 < c; ++j2)
      for (std::size_t s1 = 0; s1 < K1; ++s1)
        for (std::size_t x = s1; x < K1; ++x) {
          cplx acc = 0.0;
          for (int k = 0; k < c; ++k) acc += in.dim(j, k, K, s1) * in.f(j2, k, x, s1);
          const cplx v = two_i * acc * step_index(x, s1);
          if (integ)
            b.at(j, j2, 0, x) += ws[s1] * v;
          else
            b.at(j, j2, s1, x) = v;
        }
  return b;
}

/// Order-1 a kernel: contraction of B_j(t, s1) with B_j2(x, y), integrated
/// over the inner time y of the contracted pair; column x is the time of
/// the A^{j2}_Delta(x) left open.
inline KernelTable contraction_BB(const SeriesInputs& in, std::size_t K, RowMode mode = RowMode::Full) {
  detail::check_outer(in, K);
  const int c = in.channels();
  const std::size_t K1 = K + 1;
  const double h = in.h();
  const cplx two_i(0.0, 2.0);
  std::vector<std::vector<double>> w(K1);
  for (std::size_t x = 0; x < K1; ++x) w[x] = prefix_weights(x, h);

  if (mode == RowMode::Full) {
    KernelTable a(TableKind::a, 1, K, in.grid()[K], c, K1, K1, false);
    for (int j = 0; j < c; ++j)
      for (int j2 = 0; j2 < c; ++j2)
        for (std::size_t s1 = 0; s1 < K1; ++s1)
          for (std::size_t x = s1; x < K1; ++x) {
            cplx acc = 0.0;
            for (std::size_t y = s1; y <= x; ++y) {
              const double wy = w[x][y] * step_index(y, s1);
              for (int k = 0; k < c; ++k)
                for (int l = 0; l < c; ++l)
                  acc += wy *
                         (in.dre(j, k, K, s1) * in.dim(j2, l, x, y) + in.dim(j, k, K, s1) * in.dre(j2, l, x, y)) *
                         in.f(l, k, y, s1);
            }
            a.at(j, j2, s1, x) = two_i * acc;
          }
    return a;
  }

  // Integrated rows: R^{Re|Im}_jl(y) = sum_s1 w_s1 D^{Re|Im}_jk(t, s1) f^{lk}(y, s1) step(y - s1)
  const auto ws = w[K];
  std::vector<cplx> r_re(static_cast<std::size_t>(c) * c * K1, 0.0), r_im(r_re.size(), 0.0);
  for (int j = 0; j < c; ++j)
    for (int l = 0; l < c; ++l)
      for (std::size_t y = 0; y < K1; ++y) {
        cplx acc_re = 0.0, acc_im = 0.0;
        for (std::size_t s1 = 0; s1 <= y; ++s1) {
          const double wt = ws[s1] * step_index(y, s1);
          for (int k = 0; k < c; ++k) {
            const cplx fv = in.f(l, k, y, s1);
            acc_re += wt * in.dre(j, k, K, s1) * fv;
            acc_im += wt * in.dim(j, k, K, s1) * fv;
          }
        }
        r_re[(static_cast<std::size_t>(j) * c + l) * K1 + y] = acc_re;
        r_im[(static_cast<std::size_t>(j) * c + l) * K1 + y] = acc_im;
      }
  KernelTable a(TableKind::a, 1, K, in.grid()[K], c, 1, K1, true);
  for (int j = 0; j < c; ++j)
    for (int j2 = 0; j2 < c; ++j2)
      for (std::size_t x = 0; x < K1; ++x) {
        cplx acc = 0.0;
        for (std::size_t y = 0; y <= x; ++y)
          for (int l = 0; l < c; ++l) {
            const std::size_t o = (static_cast<std::size_t>(j) * c + l) * K1 + y;
            acc += w[x][y] * (in.dim(j2, l, x, y) * r_re[o] + in.dre(j2, l, x, y) * r_im[o]);
          }
        a.at(j, j2, 0, x) = two_i * acc;
      }
  return a;
}

/// b^n = b^{n-1} extended by one B-A link.
inline KernelTable recurse_b(int n, const ChainTransfer& W, const KernelTable& b_prev) {
  if (n < 2) throw ParameterError("recurse_b: order must be >= 2");
  if (b_prev.kind != TableKind::b || b_prev.order != n - 1) throw ParameterError("recurse_b: need b^{n-1}");
  if (W.channels() != b_prev.channels || b_prev.cols > W.size()) throw DimensionMismatch("recurse_b: grid mismatch");
  KernelTable out(TableKind::b, n, b_prev.outer_index, b_prev.outer_time, b_prev.channels, b_prev.rows, b_prev.cols,
                  b_prev.rows_integrated);
  const double h = b_prev.cols > 1 ? b_prev.outer_time / static_cast<double>(b_prev.cols - 1) : 0.0;
  const auto wx = prefix_weights(b_prev.cols - 1, h);
  detail::chain_step(b_prev, [&](int jp, int j2, std::size_t x) { return W.ba_row(jp, j2, x); }, wx, out);
  return out;
}

/// a^n = b^{n-1} closed by a B-B link, plus a^{n-1} extended by an A-B link.
inline KernelTable recurse_a(int n, const ChainTransfer& W, const KernelTable& a_prev, const KernelTable& b_prev) {
  if (n < 2) throw ParameterError("recurse_a: order must be >= 2");
  if (a_prev.kind != TableKind::a || a_prev.order != n - 1) throw ParameterError("recurse_a: need a^{n-1}");
  if (b_prev.kind != TableKind::b || b_prev.order != n - 1) throw ParameterError("recurse_a: need b^{n-1}");
  detail::check_same_shape(a_prev, b_prev, "recurse_a");
  if (W.channels() != a_prev.channels || a_prev.cols > W.size()) throw DimensionMismatch("recurse_a: grid mismatch");
  KernelTable out(TableKind::a, n, a_prev.outer_index, a_prev.outer_time, a_prev.channels, a_prev.rows, a_prev.cols,
                  a_prev.rows_integrated);
  const double h = a_prev.cols > 1 ? a_prev.outer_time / static_cast<double>(a_prev.cols - 1) : 0.0;
  const auto wx = prefix_weights(a_prev.cols - 1, h);
  detail::chain_step(b_prev, [&](int jp, int j2, std::size_t x) { return W.bb_row(jp, j2, x); }, wx, out);
  detail::chain_step(a_prev, [&](int jp, int j2, std::size_t x) { return W.ab_row(jp, j2, x); }, wx, out);
  return out;
}

struct AlphaBeta {
  KernelTable alpha;
  KernelTable beta;
};

namespace detail {
inline KernelTable integrate_rows(const KernelTable& t, double h) {
  if (t.rows_integrated) return t;
  KernelTable out(t.kind, t.order, t.outer_index, t.outer_time, t.channels, 1, t.cols, true);
  const auto ws = prefix_weights(t.rows - 1, h);
  for (int j = 0; j < t.channels; ++j)
    for (int j2 = 0; j2 < t.channels; ++j2)
      for (std::size_t r = 0; r < t.rows; ++r)
        for (std::size_t x = 0; x < t.cols; ++x) out.at(j, j2, 0, x) += ws[r] * t.at(j, j2, r, x);
  return out;
}
}  // namespace detail

/// Order-n corrections alpha^n_jk(t, s1), beta^n_jk(t, s1) from b^n and a^n.
inline AlphaBeta alpha_beta(int n, const KernelTable& b_n, const KernelTable& a_n, const SeriesInputs& in) {
  if (n < 1) throw ParameterError("alpha_beta: order must be >= 1");
  if (b_n.kind != TableKind::b || a_n.kind != TableKind::a || b_n.order != n || a_n.order != n)
    throw ParameterError("alpha_beta: missing b^n or a^n at the requested order");
  if (b_n.outer_index != a_n.outer_index || b_n.cols != a_n.cols) throw DimensionMismatch("alpha_beta: shape mismatch");
  const std::size_t K = b_n.outer_index;
  detail::check_outer(in, K);
  const double h = in.h();
  const KernelTable bbar = detail::integrate_rows(b_n, h);
  const KernelTable abar = detail::integrate_rows(a_n, h);
  const int c = in.channels();
  const std::size_t K1 = K + 1;
  const double sign = (n % 2 == 0) ? 1.0 : -1.0;
  AlphaBeta ab{KernelTable(TableKind::alpha, n, K, in.grid()[K], c, 1, K1, true),
               KernelTable(TableKind::beta, n, K, in.grid()[K], c, 1, K1, true)};
  for (std::size_t sig = 0; sig < K1; ++sig) {
    const auto wseg = segment_weights(sig, K, h);
    for (int j = 0; j < c; ++j)
      for (int k = 0; k < c; ++k) {
        cplx acc_re = 0.0, acc_im = 0.0;
        for (std::size_t x = sig; x < K1; ++x) {
          const double wx = wseg[x - sig];
          for (int l = 0; l < c; ++l) {
            const cplx bv = wx * bbar.at(j, l, 0, x);
            acc_re += bv * in.dre(l, k, x, sig);
            acc_im += bv * in.dim(l, k, x, sig);
          }
        }
        ab.alpha.at(j, k, 0, sig) = sign * (acc_re + abar.at(j, k, 0, sig));
        ab.beta.at(j, k, 0, sig) = sign * acc_im;
      }
  }
  return ab;
}

/// Truncated kernels A, B at one outer time plus series diagnostics.
struct AssembledKernels {
  std::size_t outer_index = 0;
  double outer_time = 0.0;
  KernelTable A;
  KernelTable B;
  int achieved_order = 0;
  double last_order_norm = 0.0;
  bool converged = true;
  std::vector<double> norm_alpha;  // sup-norm of alpha^n, n = 1..achieved_order
  std::vector<double> norm_beta;
};

/// Truncated sums A = D^Re + sum alpha^n, B = D^Im + sum beta^n up to the
/// first order whose relative sup-norm drops below eps_series, or max_order.
inline AssembledKernels assemble_AB(const SeriesInputs& in, const ChainTransfer* W, const SeriesConfig& cfg,
                                    std::size_t K) {
  cfg.validate();
  detail::check_outer(in, K);
  const int c = in.channels();
  const std::size_t K1 = K + 1;
  AssembledKernels out;
  out.outer_index = K;
  out.outer_time = in.grid()[K];
  out.A = KernelTable(TableKind::A, 0, K, out.outer_time, c, 1, K1, true);
  out.B = KernelTable(TableKind::B, 0, K, out.outer_time, c, 1, K1, true);
  double ref = 0.0;
  for (int j = 0; j < c; ++j)
    for (int k = 0; k < c; ++k)
      for (std::size_t s = 0; s < K1; ++s) {
        out.A.at(j, k, 0, s) = in.dre(j, k, K, s);
        out.B.at(j, k, 0, s) = in.dim(j, k, K, s);
        ref = std::max({ref, std::abs(in.dre(j, k, K, s)), std::abs(in.dim(j, k, K, s))});
      }
  if (in.trivially_closed() || cfg.max_order == 0 || K == 0) return out;
  if (W == nullptr) throw ParameterError("assemble_AB: transfer matrices required for a non-trivial series");

  KernelTable b = contraction_BA(in, K, RowMode::Integrated);
  KernelTable a = contraction_BB(in, K, RowMode::Integrated);
  for (int n = 1; n <= cfg.max_order; ++n) {
    if (n > 1) {
      KernelTable a_next = recurse_a(n, *W, a, b);
      b = recurse_b(n, *W, b);
      a = std::move(a_next);
    }
    const AlphaBeta ab = alpha_beta(n, b, a, in);
    for (std::size_t i = 0; i < out.A.values.size(); ++i) {
      out.A.values[i] += ab.alpha.values[i];
      out.B.values[i] += ab.beta.values[i];
    }
    const double na = ab.alpha.sup_norm(), nb = ab.beta.sup_norm();
    out.norm_alpha.push_back(na);
    out.norm_beta.push_back(nb);
    out.achieved_order = n;
    out.last_order_norm = ref > 0.0 ? std::max(na, nb) / ref : std::max(na, nb);
    if (out.last_order_norm < cfg.eps_series) break;
  }
  out.converged = out.last_order_norm < cfg.eps_series;
  out.A.order = out.B.order = out.achieved_order;
  if (!out.A.all_finite() || !out.B.all_finite()) throw NonFiniteSample(K);
  return out;
}

/// Series at every grid time. Outer times are independent; they are split
/// across `threads` workers with disjoint output slots, so the result does
/// not depend on the thread count.
inline std::vector<AssembledKernels> assemble_all(const SeriesInputs& in, const SeriesConfig& cfg,
                                                  unsigned threads = 0) {
  cfg.validate();
  std::optional<ChainTransfer> W;
  if (!in.trivially_closed() && cfg.max_order > 0) W.emplace(in);
  const ChainTransfer* wp = W ? &*W : nullptr;
  std::vector<AssembledKernels> out(in.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(in.size()));
  if (threads <= 1) {
    for (std::size_t K = 0; K < in.size(); ++K) out[K] = assemble_AB(in, wp, cfg, K);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t K = t; K < in.size(); K += threads) out[K] = assemble_AB(in, wp, cfg, K);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace nmgme
