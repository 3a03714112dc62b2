#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "nmgme/system_model.hpp"

using namespace nmgme;
using std::numbers::pi;

TEST(Harmonic, Examples) {
  const auto k = harmonic_kernels(1.0, 2.0);
  EXPECT_NEAR(k.C(pi / 4)(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(k.C_tilde(pi / 4)(0, 0), -0.5, 1e-15);
  for (auto [m, w] : {std::pair{1.0, 1.0}, std::pair{2.5, 0.3}, std::pair{0.7, 4.0}}) {
    const auto h = harmonic_kernels(m, w);
    EXPECT_EQ(h.C(0.0)(0, 0), 1.0);
    EXPECT_EQ(h.C_tilde(0.0)(0, 0), 0.0);
  }
}

TEST(Harmonic, FreeParticleLimit) {
  const auto free = harmonic_kernels(1.0, 0.0);
  EXPECT_EQ(free.C(1.7)(0, 0), 1.0);
  EXPECT_EQ(free.C_tilde(1.7)(0, 0), -1.7);
  EXPECT_NEAR(harmonic_kernels(1.0, 1e-6).C_tilde(1.7)(0, 0), -1.7, 1e-9);
}

TEST(Harmonic, BoundaryDerivatives) {
  const auto k = harmonic_kernels(1.5, 1.2);
  const double h = 1e-4;
  EXPECT_NEAR((k.C(h)(0, 0) - k.C(-h)(0, 0)) / (2 * h), 0.0, 1e-10);
  EXPECT_NEAR((k.C_tilde(h)(0, 0) - k.C_tilde(-h)(0, 0)) / (2 * h), -1.0 / 1.5, 1e-8);
}

TEST(Harmonic, Rejections) {
  EXPECT_THROW(harmonic_kernels(0.0, 1.0), ParameterError);
  EXPECT_THROW(harmonic_kernels(1.0, -1.0), ParameterError);
}

TEST(Qmupl, ReducesToHarmonic) {
  const auto q = qmupl_kernels(1.3, 0.9, 0.5, 0.0);
  const auto h = harmonic_kernels(1.3, 0.9);
  for (double u : {0.0, 0.4, 2.1}) {
    EXPECT_NEAR(q.C(u)(0, 0), h.C(u)(0, 0), 1e-14);
    EXPECT_NEAR(q.C(u)(0, 1), h.C_tilde(u)(0, 0), 1e-14);
  }
}

TEST(Qmupl, IdentityAtZeroAndTranspose) {
  const auto q = qmupl_kernels(1.0, 1.0, 0.6, 1.0);
  EXPECT_TRUE(q.C(0.0).isApprox(Eigen::MatrixXd::Identity(2, 2)));
  EXPECT_TRUE(q.C_tilde(0.7).isApprox(q.C(0.7).transpose()));
}

TEST(Qmupl, DerivedValue) {
  const auto q = qmupl_kernels(1.0, 1.0, 0.6, 1.0);
  EXPECT_NEAR(q.C(pi / 0.8 * 0.5)(0, 0), -0.75, 1e-14);
}

TEST(Qmupl, RejectsImaginaryOmegaTilde) {
  try {
    qmupl_kernels(1.0, 0.5, 1.0, 1.0);
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("omega_tilde"), std::string::npos);
  }
}

TEST(Qmupl, SatisfiesHeisenbergOde) {
  // phase(u) = exp(-L u) with L = J h the Heisenberg generator.
  const double m = 1.2, w = 1.1, lm = 0.3 * 0.8;
  const auto q = qmupl_kernels(m, w, 0.3, 0.8);
  Eigen::Matrix2d L;
  L << lm, 1.0 / m, -m * w * w, -lm;
  const double u = 0.5;
  for (double h : {1e-2, 5e-3}) {
    const Eigen::Matrix2d fd = (q.phase(u + h) - q.phase(u - h)) / (2 * h);
    const Eigen::Matrix2d exact = -L * q.phase(u);
    EXPECT_LT((fd - exact).norm(), h * h);
  }
}

TEST(Commutator, HarmonicClosedForm) {
  const double m = 1.4, w = 0.8;
  Eigen::MatrixXd M(1, 2);
  M << 1.0, 0.0;
  const auto f = commutator_kernel(harmonic_kernels(m, w), M);
  for (double t : {0.0, 0.6, 1.9})
    for (double s : {0.0, 1.1, 2.0}) {
      const cplx expect(0.0, std::sin(w * (s - t)) / (m * w));
      EXPECT_NEAR(std::abs(f(0, 0, t, s) - expect), 0.0, 1e-14);
    }
}

TEST(Commutator, Examples) {
  Eigen::MatrixXd M(1, 2);
  M << 1.0, 0.0;
  const auto f = commutator_kernel(harmonic_kernels(1.0, 1.0), M);
  EXPECT_NEAR(std::abs(f(0, 0, 0.8, 0.8)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(f(0, 0, 0.0, pi / 2) - cplx(0.0, 1.0)), 0.0, 1e-15);

  const double mu = 0.7;
  Eigen::MatrixXd Q(2, 2);
  Q << 1.0, 0.0, 0.0, -mu;
  const auto g = commutator_kernel(qmupl_kernels(1.0, 1.0, 0.4, mu), Q);
  EXPECT_NEAR(std::abs(g(0, 1, 0.9, 0.9) - cplx(0.0, -mu)), 0.0, 1e-14);
}

TEST(Commutator, AntisymmetryAndImaginary) {
  Eigen::MatrixXd Q(2, 2);
  Q << 1.0, 0.0, 0.0, -0.5;
  const auto f = commutator_kernel(qmupl_kernels(1.0, 1.3, 0.6, 0.5), Q);
  for (double t : {0.0, 0.5, 1.5})
    for (double s : {0.0, 0.7, 2.0})
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          EXPECT_NEAR(std::abs(f(j, k, t, s) + f(k, j, s, t)), 0.0, 1e-14);
          EXPECT_EQ(f(j, k, t, s).real(), 0.0);
        }
}

TEST(Commutator, Rejections) {
  EXPECT_THROW(commutator_kernel(harmonic_kernels(1.0, 1.0), Eigen::MatrixXd::Ones(1, 3)), ParameterError);
  EXPECT_EQ(CommutatorKernel::zero(2)(1, 0, 0.3, 0.1), cplx(0.0));
}

TEST(Commutator, MatchesFockHeisenbergEvolution) {
  // Heisenberg operators in a dim-30 Fock space, with H = p^2/2m + m w^2 q^2/2
  // + (lm/2){q,p}; the identity coefficient of [A(t), A(s)] is read off from
  // the vacuum corner where truncation does not reach.
  const double m = 1.0, w = 1.3, lambda = 0.5, mu = 0.6;
  const int dim = 30;
  const auto ops = fock_operators(dim, m, w);
  const Eigen::MatrixXcd H = ops.p * ops.p / (2 * m) + 0.5 * m * w * w * ops.q * ops.q +
                             0.5 * lambda * mu * (ops.q * ops.p + ops.p * ops.q);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (H + H.adjoint()));
  const auto heis = [&](const Eigen::MatrixXcd& X, double t) -> Eigen::MatrixXcd {
    const Eigen::VectorXcd ph = (es.eigenvalues().cast<cplx>() * cplx(0.0, t)).array().exp();
    const Eigen::MatrixXcd U = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    return U * X * U.adjoint();
  };
  Eigen::MatrixXd Q(2, 2);
  Q << 1.0, 0.0, 0.0, -mu;
  const auto f = commutator_kernel(qmupl_kernels(m, w, lambda, mu), Q);
  const Eigen::MatrixXcd A[2] = {ops.q, -mu * ops.p};
  for (double t : {0.0, 0.8, 2.0})
    for (double s : {0.0, 1.3, 2.0})
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          const Eigen::MatrixXcd At = heis(A[j], t), As = heis(A[k], s);
          const cplx c = (At * As - As * At)(0, 0);
          EXPECT_NEAR(std::abs(c - f(j, k, t, s)), 0.0, 1e-6) << j << k << " t=" << t << " s=" << s;
        }
}

TEST(Fock, Examples) {
  const double m = 1.7, w = 0.6;
  const auto two = fock_operators(2, m, w);
  EXPECT_NEAR(two.q(0, 1).real(), 1.0 / std::sqrt(2 * m * w), 1e-15);
  EXPECT_NEAR(two.q(1, 0).real(), 1.0 / std::sqrt(2 * m * w), 1e-15);
  const int dim = 8;
  const auto ops = fock_operators(dim, m, w);
  const Eigen::MatrixXcd c = ops.q * ops.p - ops.p * ops.q;
  EXPECT_LT((c.topLeftCorner(dim - 1, dim - 1) - cplx(0.0, 1.0) * Eigen::MatrixXcd::Identity(dim - 1, dim - 1)).norm(),
            1e-13);
  for (int n = 0; n < dim; ++n) EXPECT_EQ(ops.number(n, n), cplx(n));
  EXPECT_THROW(fock_operators(1, 1.0, 1.0), ParameterError);
}
