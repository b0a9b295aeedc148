#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <random>

#include "conservo/analysis.hpp"
#include "conservo/gpe.hpp"
#include "conservo/projection.hpp"
#include "support.hpp"

using namespace conservo;
using cplx = std::complex<double>;

namespace {

constexpr double kPi = 3.14159265358979323846;

GpeConfig box(double lo, double hi, std::size_t n, double beta, double omega, bool harmonic) {
  GpeConfig c;
  c.x_min = c.y_min = lo;
  c.x_max = c.y_max = hi;
  c.nx = c.ny = n;
  c.beta = beta;
  c.omega = omega;
  if (harmonic) c.potential = harmonic_potential();
  return c;
}

GpeConfig plane_wave_box(std::size_t n, double beta) { return box(0.0, 2 * kPi, n, beta, 0.0, false); }

/// Dense Fourier differentiation matrices on an even periodic grid of length L.
Eigen::MatrixXd dense_d1(std::size_t n, double length) {
  const double h = 2 * kPi / static_cast<double>(n);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double m = static_cast<double>(i) - static_cast<double>(j);
      const double sign = (static_cast<long>(m) % 2 == 0) ? 1.0 : -1.0;
      d(i, j) = 0.5 * sign / std::tan(m * h / 2);
    }
  }
  return d * (2 * kPi / length);
}

Eigen::MatrixXd dense_d2(std::size_t n, double length) {
  const double h = 2 * kPi / static_cast<double>(n);
  Eigen::MatrixXd d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        d(i, j) = -kPi * kPi / (3 * h * h) - 1.0 / 6;
        continue;
      }
      const double m = static_cast<double>(i) - static_cast<double>(j);
      const double sign = (static_cast<long>(m) % 2 == 0) ? 1.0 : -1.0;
      const double s = std::sin(m * h / 2);
      d(i, j) = -sign / (2 * s * s);
    }
  }
  const double scale = 2 * kPi / length;
  return d * scale * scale;
}

ComplexGrid random_grid(std::size_t nx, std::size_t ny, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  ComplexGrid g({nx, ny});
  for (auto& v : g.data()) v = {n(rng), n(rng)};
  return g;
}

double max_abs_diff(const ComplexGrid& a, const ComplexGrid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double max_abs(const ComplexGrid& a) {
  double m = 0.0;
  for (const auto& v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

/// Smooth state off the plane-wave family: vortex plus a low mode.
ComplexGrid smooth_state(const GpeModel& m) {
  ComplexGrid psi = m.vortex_state();
  for (std::size_t k = 0; k < m.config().ny; ++k) {
    for (std::size_t j = 0; j < m.config().nx; ++j) {
      psi(j, k) += 0.1 * std::exp(-(m.x(j) * m.x(j) + m.y(k) * m.y(k))) * cplx(1.0, 0.5);
    }
  }
  return psi;
}

}  // namespace

TEST(Spectral, FftPathMatchesDenseMatrices) {
  const std::size_t nx = 8, ny = 8;
  const double lx = 4.0, ly = 6.0;
  const SpectralOperators ops(nx, ny, lx, ly);
  const ComplexGrid u = random_grid(nx, ny, 3);
  const Eigen::MatrixXd d1x = dense_d1(nx, lx), d2x = dense_d2(nx, lx);
  const Eigen::MatrixXd d1y = dense_d1(ny, ly), d2y = dense_d2(ny, ly);
  Eigen::MatrixXcd U(nx, ny);
  for (std::size_t j = 0; j < nx; ++j) {
    for (std::size_t k = 0; k < ny; ++k) U(j, k) = u(j, k);
  }
  const Eigen::MatrixXcd ex1 = d1x.cast<cplx>() * U;
  const Eigen::MatrixXcd ex2 = d2x.cast<cplx>() * U;
  const Eigen::MatrixXcd ey1 = U * d1y.transpose().cast<cplx>();
  const Eigen::MatrixXcd ey2 = U * d2y.transpose().cast<cplx>();
  const auto g1x = ops.d1x(u), g2x = ops.d2x(u), g1y = ops.d1y(u), g2y = ops.d2y(u);
  const auto lap = ops.laplacian(u);
  const auto all = ops.all(u, true);
  for (std::size_t j = 0; j < nx; ++j) {
    for (std::size_t k = 0; k < ny; ++k) {
      EXPECT_LE(std::abs(g1x(j, k) - ex1(j, k)), 1e-12 * std::max(1.0, std::abs(ex1(j, k))));
      EXPECT_LE(std::abs(g2x(j, k) - ex2(j, k)), 1e-12 * std::max(1.0, std::abs(ex2(j, k))));
      EXPECT_LE(std::abs(g1y(j, k) - ey1(j, k)), 1e-12 * std::max(1.0, std::abs(ey1(j, k))));
      EXPECT_LE(std::abs(g2y(j, k) - ey2(j, k)), 1e-12 * std::max(1.0, std::abs(ey2(j, k))));
      const cplx l = ex2(j, k) + ey2(j, k);
      EXPECT_LE(std::abs(lap(j, k) - l), 1e-12 * std::max(1.0, std::abs(l)));
      EXPECT_LE(std::abs(all.laplacian(j, k) - l), 1e-12 * std::max(1.0, std::abs(l)));
      EXPECT_LE(std::abs(all.dx(j, k) - ex1(j, k)), 1e-12 * std::max(1.0, std::abs(ex1(j, k))));
      EXPECT_LE(std::abs(all.dy(j, k) - ey1(j, k)), 1e-12 * std::max(1.0, std::abs(ey1(j, k))));
    }
  }
}

TEST(Spectral, SecondDerivativeEigenfunctions) {
  const std::size_t n = 16;
  const double length = 2 * kPi;
  const SpectralOperators ops(n, n, length, length);
  for (int kx = -7; kx <= 7; ++kx) {
    ComplexGrid u({n, n});
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) u(j, k) = std::polar(1.0, kx * length * j / n);
    }
    const auto d2 = ops.d2x(u);
    ComplexGrid expected = u;
    for (auto& v : expected.data()) v *= -static_cast<double>(kx * kx);
    EXPECT_LE(max_abs_diff(d2, expected), 1e-12 * std::max(1, kx * kx)) << kx;
  }
}

TEST(Spectral, FirstDerivativeOfConstantIsZero) {
  const SpectralOperators ops(16, 8, 3.0, 5.0);
  ComplexGrid u({16, 8});
  for (auto& v : u.data()) v = {2.5, -1.0};
  EXPECT_LE(max_abs(ops.d1x(u)), 1e-12);
  EXPECT_LE(max_abs(ops.d1y(u)), 1e-12);
}

TEST(GpeConfig, Validation) {
  GpeConfig c = plane_wave_box(6, 1.0);
  EXPECT_THROW(c.validate(), Error);
  c = plane_wave_box(9, 1.0);
  EXPECT_THROW(c.validate(), Error);
  c = plane_wave_box(8, 1.0);
  c.x_max = c.x_min;
  EXPECT_THROW(c.validate(), Error);
}

TEST(GpeRhs, ZeroStateGivesZero) {
  const GpeModel m(box(-2, 2, 16, 1.0, 0.5, true));
  const ComplexGrid zero({16, 16});
  EXPECT_EQ(max_abs(m.rhs(zero)), 0.0);
}

TEST(GpeRhs, LinearPlaneWaveEigenfunction) {
  const GpeModel m(plane_wave_box(32, 0.0));
  const ComplexGrid psi = m.plane_wave(1.0, 2.0, -3.0, 0.0);
  ComplexGrid expected = psi;
  for (auto& v : expected.data()) v *= cplx(0.0, -0.5 * 13.0);
  EXPECT_LE(max_abs_diff(m.rhs(psi), expected), 1e-12 * max_abs(expected));
}

TEST(GpeRhs, NonlinearPlaneWaveIsExact) {
  const GpeModel m(plane_wave_box(32, 1.0));
  const double w = 0.5 * 2.0 + 1.0;
  const ComplexGrid psi = m.plane_wave(1.0, 1.0, 1.0, 0.0);
  // i psi_t = w psi for the exact solution
  const ComplexGrid f = m.rhs(psi);
  double worst = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const cplx i_psi_t = cplx(0, 1) * (cplx(0, -w) * psi.data()[i]);
    const cplx rhs_term = cplx(0, 1) * f.data()[i];
    worst = std::max(worst, std::abs(i_psi_t - rhs_term));
  }
  EXPECT_LE(worst, 1e-11);
}

TEST(GpeRhs, ShapeMismatchThrows) {
  const GpeModel m(plane_wave_box(16, 1.0));
  EXPECT_THROW(m.rhs(ComplexGrid({8, 8})), DimensionError);
}

TEST(GpeMass, Values) {
  const GpeModel m(box(-2, 2, 16, 1.0, 0.0, false));
  EXPECT_EQ(m.mass(ComplexGrid({16, 16})), 0.0);
  ComplexGrid one({16, 16});
  for (auto& v : one.data()) v = 1.0;
  EXPECT_NEAR(m.mass(one), 16.0, 1e-13);
  const GpeModel pw(plane_wave_box(32, 1.0));
  EXPECT_NEAR(pw.mass(pw.plane_wave(1.5, 1.0, 2.0, 0.3)), 2.25 * 4 * kPi * kPi, 1e-12 * 2.25 * 4 * kPi * kPi);
}

TEST(GpeEnergy, Values) {
  const GpeModel m(box(-2, 2, 16, 1.0, 0.5, true));
  EXPECT_EQ(m.energy(ComplexGrid({16, 16})), 0.0);
  const GpeModel free(plane_wave_box(32, 0.0));
  const ComplexGrid psi = free.plane_wave(1.0, 1.0, 2.0, 0.0);
  const double expected = 0.5 * 5.0 * free.mass(psi);
  EXPECT_NEAR(free.energy(psi), expected, 1e-11 * expected);
}

TEST(GpeEnergy, FirstIntegralIdentity) {
  const GpeModel m(box(-2, 2, 16, 1.0, 0.5, true));
  const auto sys = m.as_conservative_system(GpeInvariants::Both, smooth_state(m));
  for (const auto& y : conservo::testing::flowed_states(sys, 5, 0.05, 1e-3, 41)) {
    const StateVector f = sys.rhs(y);
    const GradientMatrix g = sys.invariants.gradients(y);
    for (Eigen::Index i = 0; i < 2; ++i) {
      EXPECT_LE(std::abs(g.col(i).dot(f)), 1e-10 * g.col(i).norm() * f.norm()) << i;
    }
    const StateVector fd = conservo::testing::fd_gradient(sys.invariants.invariants()[1].value, y);
    EXPECT_LE((fd - g.col(1)).norm(), 1e-6 * g.col(1).norm());
  }
}

TEST(GpeSystem, MassGradientIsScaledState) {
  const GpeModel m(box(-2, 2, 8, 1.0, 0.5, true));
  const ComplexGrid psi = smooth_state(m);
  const auto sys = m.as_conservative_system(GpeInvariants::Mass, psi);
  const StateVector y = vectorize(psi);
  const StateVector g = sys.invariants.gradients(y).col(0);
  EXPECT_LE((g - 2 * m.hx() * m.hy() * y).cwiseAbs().maxCoeff(), 1e-15 * y.cwiseAbs().maxCoeff());
  const StateVector fd = conservo::testing::fd_gradient(sys.invariants.invariants()[0].value, y);
  EXPECT_LE((fd - g).norm(), 1e-6 * g.norm());
}

TEST(GpeSystem, EnergyGradientMatchesFiniteDifferences) {
  const GpeModel m(box(-2, 2, 8, 1.0, 0.5, true));
  std::mt19937_64 rng(43);
  const auto sys = m.as_conservative_system(GpeInvariants::Energy, smooth_state(m));
  for (int trial = 0; trial < 5; ++trial) {
    const StateVector y = conservo::testing::perturbed(sys.initial_state, 0.1, rng);
    const StateVector g = sys.invariants.gradients(y).col(0);
    const StateVector fd = conservo::testing::fd_gradient(sys.invariants.invariants()[0].value, y);
    EXPECT_LE((fd - g).norm(), 1e-6 * g.norm());
  }
}

TEST(GpeSystem, BothInvariantsGiveDefiniteNormalMatrix) {
  const GpeModel m(box(-2, 2, 16, 1.0, 0.5, true));
  const auto sys = m.as_conservative_system(GpeInvariants::Both, m.vortex_state());
  ASSERT_EQ(sys.invariants.size(), 2u);
  const GradientMatrix g = sys.invariants.gradients(sys.initial_state);
  const Eigen::Matrix2d n = g.transpose() * g;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(n);
  EXPECT_GT(es.eigenvalues().minCoeff(), 1e-8 * es.eigenvalues().maxCoeff());
}

TEST(GpeSystem, PlaneWaveGradientsAreParallel) {
  // On a plane wave H(psi) psi = w psi, so grad E = w grad M.
  const GpeModel m(plane_wave_box(32, 1.0));
  const auto sys = m.as_conservative_system(GpeInvariants::Both, m.plane_wave(1.0, 1.0, 1.0, 0.0));
  EXPECT_THROW(eip_step(sys, sys.initial_state, 1e-3, tableau("RK4")), SingularDirectionError);
}

TEST(GpeSnapshot, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "conservo_snapshot_test.bin";
  const ComplexGrid field = random_grid(8, 4, 5);
  write_snapshot(path, field, 0.375);
  const Snapshot s = read_snapshot(path);
  EXPECT_EQ(s.time, 0.375);
  EXPECT_EQ(s.field, field);
  std::filesystem::remove(path);
}

TEST(GpeSnapshot, RejectsForeignFile) {
  const auto path = std::filesystem::temp_directory_path() / "conservo_snapshot_bad.bin";
  write_text_atomic(path, "not a snapshot");
  EXPECT_THROW(read_snapshot(path), Error);
  std::filesystem::remove(path);
}

TEST(GpePlaneWave, FourthOrderInTime) {
  const GpeModel m(plane_wave_box(32, 1.0));
  for (auto which : {GpeInvariants::Mass, GpeInvariants::Energy}) {
    auto sys = m.as_conservative_system(which, m.plane_wave(1.0, 1.0, 1.0, 0.0));
    sys.exact_solution = [m](double t) { return vectorize(m.plane_wave(1.0, 1.0, 1.0, t)); };
    const auto series =
        exact_error_study(sys, MethodSpec{}, {0.01, 0.005, 0.0025, 0.00125}, 1.0, ErrorNorm::ComplexLInf);
    EXPECT_NEAR(finest_order(estimate_order(series)), 4.0, 0.1);
  }
}

TEST(GpePlaneWave, SelectedInvariantsHeld) {
  const GpeModel m(plane_wave_box(32, 1.0));
  const ComplexGrid psi0 = m.plane_wave(1.0, 1.0, 1.0, 0.0);
  const auto mass = run_invariant_study(m.as_conservative_system(GpeInvariants::Mass, psi0),
                                        MethodSpec{}, 0.01, 1.0, 1);
  EXPECT_LE(mass.max_abs_residual("M"), 1e-11);
  const auto energy = run_invariant_study(m.as_conservative_system(GpeInvariants::Energy, psi0),
                                          MethodSpec{}, 0.01, 1.0, 1);
  EXPECT_LE(energy.max_abs_residual("E"), 1e-10);
}

TEST(GpeVortex, BothInvariantsHeld) {
  const GpeModel m(box(-2, 2, 32, 1.0, 0.5, true));
  const auto run = run_invariant_study(m.as_conservative_system(GpeInvariants::Both, m.vortex_state()),
                                       MethodSpec{}, 2e-3, 0.2, 1);
  ASSERT_FALSE(run.failure);
  EXPECT_LE(run.max_abs_residual("M"), 1e-11);
  EXPECT_LE(run.max_abs_residual("E"), 1e-10);
}

TEST(GpeVortex, UnitDiscreteMass) {
  const GpeModel m(box(-2, 2, 32, 1.0, 0.5, true));
  EXPECT_NEAR(m.mass(m.vortex_state()), 1.0, 1e-14);
}
