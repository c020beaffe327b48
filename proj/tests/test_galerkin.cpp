/// @file test_galerkin.cpp
/// @brief Mass/stiffness assembly, diagonalized Helmholtz solves and residuals
///        against dense Kronecker and brute-force contraction oracles.
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "speconet/basis.hpp"
#include "speconet/galerkin.hpp"

using namespace speconet;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

// Dense Galerkin matrix of tau*u - nu*Lap(u) on the tensor basis, row-major.
Eigen::MatrixXd dense_system(double tau, double nu, const Eigen::MatrixXd& b, const Eigen::MatrixXd& s, int d) {
  if (d == 2) return tau * kron(b, b) + nu * (kron(s, b) + kron(b, s));
  return tau * kron(kron(b, b), b) + nu * (kron(kron(s, b), b) + kron(kron(b, s), b) + kron(kron(b, b), s));
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("Dirichlet mass matrix entries and structure") {
  for (int n : {6, 22, 40}) {
    const BasisSpec spec{BasisKind::LegendreDirichlet, n};
    const auto b = assemble_mass(spec).entries;
    CHECK(b(0, 0) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(b(0, 2) == doctest::Approx(-2.0 / 5.0 / std::sqrt(6.0 * 14.0)).epsilon(1e-13));
    CHECK(std::abs(b(0, 2) + 0.043644) < 1e-6);
    CHECK(std::abs(b(0, 1)) <= 1e-15);
    const auto cf = mass_closed_form(spec);
    CHECK((b - cf).cwiseAbs().maxCoeff() <= 1e-12);
    for (int l = 0; l < n; ++l)
      for (int m = 0; m < n; ++m)
        if (l != m && std::abs(l - m) != 2) CHECK(std::abs(b(l, m)) <= 1e-12);
  }
}

TEST_CASE("Neumann mass matrix matches its closed form") {
  const BasisSpec spec{BasisKind::LegendreNeumann, 18};
  const auto b = assemble_mass(spec).entries;
  CHECK((b - mass_closed_form(spec)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(b(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("stiffness matrices") {
  for (int n : {6, 22, 62}) {
    const auto sd = assemble_stiffness({BasisKind::LegendreDirichlet, n});
    CHECK((sd - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-12);
    const auto sn = assemble_stiffness({BasisKind::LegendreNeumann, n});
    CHECK(sn.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sn.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sn - sn.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
    // Observed: identity on the non-constant modes as well.
    Eigen::MatrixXd expect = Eigen::MatrixXd::Identity(n, n);
    expect(0, 0) = 0.0;
    CHECK((sn - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("operator eigendecomposition and preconditioner") {
  LegendreHelmholtz op(150.0, 0.1, {BasisKind::LegendreDirichlet, 22}, 2);
  const auto& e = op.eigvecs();
  const auto& b = op.mass();
  CHECK(op.eigvals().minCoeff() > 0.0);
  Eigen::MatrixXd ebe = e.transpose() * b * e;
  CHECK((ebe - Eigen::MatrixXd(op.eigvals().asDiagonal())).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((e.transpose() * e - Eigen::MatrixXd::Identity(22, 22)).cwiseAbs().maxCoeff() <= 1e-12);
  for (std::size_t j = 0; j < op.columns(); ++j) {
    const auto& m = op.preconditioned(j);
    for (int i = 0; i < m.rows(); ++i) CHECK(std::abs(m(i, i) - 1.0) <= 1e-13);
    // Closed form (tau*lambda + nu) B + nu*lambda I for the Dirichlet basis.
    const double lam = op.eigvals()(j);
    Eigen::MatrixXd closed = (150.0 * lam + 0.1) * b + 0.1 * lam * Eigen::MatrixXd::Identity(22, 22);
    CHECK((op.column_matrix(j) - closed).cwiseAbs().maxCoeff() <= 1e-12 * closed.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("preconditioning does not worsen conditioning") {
  for (int d : {2, 3}) {
    for (double tau : {0.0, 1.5, 150.0}) {
      for (auto kind : {BasisKind::LegendreDirichlet, BasisKind::LegendreNeumann}) {
        if (kind == BasisKind::LegendreDirichlet && tau == 0.0) continue;
        LegendreHelmholtz op(tau, tau == 0.0 ? 1.0 : 0.1, {kind, d == 2 ? 22 : 10}, d);
        for (std::size_t j = 0; j < op.columns(); ++j) {
          Eigen::JacobiSVD<Eigen::MatrixXd> sa(op.column_matrix(j)), sm(op.preconditioned(j));
          const double ca = sa.singularValues()(0) / sa.singularValues().tail(1)(0);
          const double cm = sm.singularValues()(0) / sm.singularValues().tail(1)(0);
          CHECK(cm <= ca * (1 + 1e-12));
        }
      }
    }
  }
}

TEST_CASE("residual_2d matches brute-force Sylvester residual") {
  std::mt19937_64 rng(5);
  const int n = 4;
  const double tau = 2.5, nu = 0.3;
  LegendreHelmholtz op(tau, nu, {BasisKind::LegendreDirichlet, n}, 2);
  auto f = random_vec(n * n, rng);
  auto sys = make_system(op, f);
  auto w = random_vec(n * n, rng);
  auto res = residual_2d(w, sys);
  auto alpha = op.reconstruct(w);
  Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>> a(alpha.data(), n, n);
  Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>> fm(f.data(), n, n);
  const auto& b = op.mass();
  Eigen::MatrixXd ra = tau * b * a * b + nu * (a * b + b * a) - fm;
  // Transform the alpha-space residual: E^T along axis 0, then C per column.
  Eigen::MatrixXd rt = op.eigvecs().transpose() * ra;
  double err = 0, sq = 0;
  for (int p = 0; p < n; ++p)
    for (int m = 0; m < n; ++m) {
      const double expect = op.preconditioner(p)(m) * rt(p, m);
      err = std::max(err, std::abs(expect - res.r[p * n + m]));
      sq += res.r[p * n + m] * res.r[p * n + m];
    }
  CHECK(err <= 1e-12 * std::sqrt(res.norm2));
  CHECK(res.norm2 == doctest::Approx(sq).epsilon(1e-14));

  std::vector<double> zero(n * n, 0.0);
  auto r0 = residual_2d(zero, sys);
  double hn = 0;
  for (std::size_t i = 0; i < r0.r.size(); ++i) {
    CHECK(r0.r[i] == -sys.rhs[i]);
    hn += sys.rhs[i] * sys.rhs[i];
  }
  CHECK(r0.norm2 == doctest::Approx(hn));

  auto exact = op.solve(sys.rhs);
  CHECK(residual_2d(exact, sys).norm2 <= 1e-20);
}

TEST_CASE("residual_3d matches brute-force tensor contraction") {
  std::mt19937_64 rng(9);
  const int n = 3;
  const double tau = 1.7, nu = 0.4;
  LegendreHelmholtz op(tau, nu, {BasisKind::LegendreDirichlet, n}, 3);
  auto f = random_vec(n * n * n, rng);
  auto sys = make_system(op, f);
  auto w = random_vec(n * n * n, rng);
  auto res = residual_3d(w, sys);
  auto alpha = op.reconstruct(w);
  const auto& b = op.mass();
  auto at = [&](int i, int j, int k) { return alpha[(i * n + j) * n + k]; };
  std::vector<double> ra(n * n * n);
  for (int l = 0; l < n; ++l)
    for (int m = 0; m < n; ++m)
      for (int q = 0; q < n; ++q) {
        double s = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
              const double bbb = b(l, i) * b(m, j) * b(q, k);
              const double lap = (l == i ? b(m, j) * b(q, k) : 0) + (m == j ? b(l, i) * b(q, k) : 0) +
                                 (q == k ? b(l, i) * b(m, j) : 0);
              s += (tau * bbb + nu * lap) * at(i, j, k);
            }
        ra[(l * n + m) * n + q] = s - f[(l * n + m) * n + q];
      }
  // E^T along axes 0 and 1, then C per (j,k) column.
  const auto& e = op.eigvecs();
  double err = 0;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int q = 0; q < n; ++q) {
        double s = 0;
        for (int l = 0; l < n; ++l)
          for (int m = 0; m < n; ++m) s += e(l, j) * e(m, k) * ra[(l * n + m) * n + q];
        const double expect = op.preconditioner(j * n + k)(q) * s;
        err = std::max(err, std::abs(expect - res.r[(j * n + k) * n + q]));
      }
  CHECK(err <= 1e-12 * std::sqrt(res.norm2));
  std::vector<double> zero(n * n * n, 0.0);
  auto z = make_system(op, zero);
  CHECK(residual_3d(zero, z).norm2 == 0.0);
  CHECK(residual_3d(op.solve(sys.rhs), sys).norm2 <= 1e-18);
  CHECK_THROWS_AS(residual_2d(w, sys), ContractViolation);
}

TEST_CASE("diagonalized solves match dense Kronecker solves") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = trial % 2 == 0 ? 2 : 3;
    const int n = 2 + trial % 5;
    const double tau = 200.0 * u(rng);
    const double nu = 0.01 + u(rng);
    for (auto kind : {BasisKind::LegendreDirichlet, BasisKind::LegendreNeumann}) {
      const BasisSpec spec{kind, n};
      auto op = build_operator(tau, nu, spec, d);
      const std::size_t tot = op->unknowns();
      auto f = random_vec(tot, rng);
      auto alpha = solve_direct(make_system(*op, f));
      const auto b = assemble_mass(spec).entries;
      const auto s = assemble_stiffness(spec);
      Eigen::VectorXd x = dense_system(tau, nu, b, s, d).fullPivLu().solve(Eigen::Map<Eigen::VectorXd>(f.data(), tot));
      double err = 0;
      for (std::size_t i = 0; i < tot; ++i) err = std::max(err, std::abs(x(i) - alpha[i]));
      CHECK(err <= 1e-9 * x.cwiseAbs().maxCoeff());
    }
  }
}

TEST_CASE("manufactured sin(pi x) sin(pi y) converges spectrally") {
  auto max_error = [](int n) {
    const double tau = 3.0, nu = 0.5;
    const BasisSpec spec{BasisKind::LegendreDirichlet, n};
    auto t = build_tables(spec, n + 3);
    const int p = n + 3;
    std::vector<double> f(p * p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        f[i * p + j] = (tau + 2 * nu * kPi * kPi) * std::sin(kPi * t.quadrature.nodes[i]) *
                       std::sin(kPi * t.quadrature.nodes[j]);
    LegendreHelmholtz op(tau, nu, spec, 2);
    SpectralField a;
    a.dim = 2;
    a.basis = spec;
    a.real = solve_direct(make_system(op, project_rhs(f, 2, t)));
    auto fine = build_tables(spec, 41);
    auto u = synthesize(a, fine);
    double err = 0;
    for (int i = 0; i < 41; ++i)
      for (int j = 0; j < 41; ++j)
        err = std::max(err, std::abs(u[i * 41 + j] - std::sin(kPi * fine.quadrature.nodes[i]) *
                                                         std::sin(kPi * fine.quadrature.nodes[j])));
    return err;
  };
  const double e8 = max_error(8), e16 = max_error(16);
  CHECK(e16 <= 1e-8);
  CHECK(e16 * 1e3 <= e8);
}

TEST_CASE("Neumann Poisson solve with the gauge pin") {
  const int n = 20;
  const BasisSpec spec{BasisKind::LegendreNeumann, n};
  auto t = build_tables(spec, n + 3);
  const int p = n + 3;
  std::vector<double> f(p * p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      f[i * p + j] = 2 * kPi * kPi * std::cos(kPi * t.quadrature.nodes[i]) * std::cos(kPi * t.quadrature.nodes[j]);
  LegendreHelmholtz op(0.0, 1.0, spec, 2);
  CHECK(op.pinned().has_value());
  SpectralField a;
  a.dim = 2;
  a.basis = spec;
  a.real = solve_direct(make_system(op, project_rhs(f, 2, t)));
  CHECK(a.real[0] == 0.0);
  auto u = synthesize(a, t);
  double err = 0;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      err = std::max(err, std::abs(u[i * p + j] - std::cos(kPi * t.quadrature.nodes[i]) *
                                                      std::cos(kPi * t.quadrature.nodes[j])));
  CHECK(err <= 1e-9);

  std::vector<double> ones(p * p, 1.0);
  CHECK_THROWS_AS(make_system(op, project_rhs(ones, 2, t)), CompatibilityError);
}

TEST_CASE("Fourier Helmholtz solves") {
  const int n = 16;
  const double tau = 1.0, nu = 0.1;
  auto t = build_tables({BasisKind::Fourier, n}, n);
  std::vector<double> f(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f[i * n + j] = (tau + nu) * std::sin(t.quadrature.nodes[i]);
  auto u = synthesize(solve_fourier(tau, nu, analyze_fourier(f, 2, 1, t)), t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) CHECK(std::abs(u[i * n + j] - std::sin(t.quadrature.nodes[i])) <= 1e-12);

  std::vector<double> zero(n * n, 0.0);
  for (double v : synthesize(solve_fourier(tau, nu, analyze_fourier(zero, 2, 1, t)), t)) CHECK(v == 0.0);

  // Random band-limited f: nodal residual tau*u - nu*Lap(u) - f by spectral differentiation.
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  SpectralField fh;
  fh.dim = 2;
  fh.basis = t.spec;
  fh.complex.assign(n * n, cplx{});
  for (int kx = -4; kx <= 4; ++kx)
    for (int ky = 0; ky <= 4; ++ky) {
      if (ky == 0 && kx < 0) continue;
      const cplx c(g(rng), (kx == 0 && ky == 0) ? 0.0 : g(rng));
      const int i = t.spec.index_of_wavenumber(kx), j = t.spec.index_of_wavenumber(ky);
      fh.complex[i * n + j] = c;
      fh.complex[t.spec.index_of_wavenumber(-kx) * n + t.spec.index_of_wavenumber(-ky)] = std::conj(c);
    }
  auto fn = synthesize(fh, t);
  auto a = solve_fourier(tau, nu, fh);
  SpectralField lap = a;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double k2 = std::pow(t.spec.wavenumber(i), 2) + std::pow(t.spec.wavenumber(j), 2);
      lap.complex[i * n + j] *= tau + nu * k2;
    }
  auto res = synthesize(lap, t);
  for (std::size_t i = 0; i < res.size(); ++i) CHECK(std::abs(res[i] - fn[i]) <= 1e-11);

  // tau = 0 requires a mean-free right-hand side.
  std::vector<double> ones(n * n, 1.0);
  CHECK_THROWS_AS(solve_fourier(0.0, 1.0, analyze_fourier(ones, 2, 1, t)), CompatibilityError);
}
