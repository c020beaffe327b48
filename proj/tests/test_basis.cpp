/// @file test_basis.cpp
/// @brief GLL quadrature, Shen bases and Fourier transforms against
///        closed-form and brute-force oracles.
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "speconet/basis.hpp"
#include "speconet/galerkin.hpp"

using namespace speconet;

namespace {

constexpr double kPi = std::numbers::pi;

// Exact integral of sum c_k x^k over [-1, 1].
double monomial_integral(const std::vector<double>& c) {
  double s = 0;
  for (std::size_t k = 0; k < c.size(); k += 2) s += c[k] * 2.0 / (k + 1.0);
  return s;
}

double horner(const std::vector<double>& c, double x) {
  double s = 0;
  for (std::size_t k = c.size(); k-- > 0;) s = s * x + c[k];
  return s;
}

}  // namespace

TEST_CASE("gll_rule small cases") {
  auto q2 = gll_rule(2);
  CHECK(q2.nodes[0] == doctest::Approx(-1.0));
  CHECK(q2.nodes[1] == doctest::Approx(1.0));
  CHECK(q2.weights[0] == doctest::Approx(1.0));
  CHECK(q2.weights[1] == doctest::Approx(1.0));

  auto q3 = gll_rule(3);
  CHECK(std::abs(q3.nodes[1]) < 1e-15);
  CHECK(q3.weights[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(q3.weights[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  double x2 = 0;
  for (int j = 0; j < 3; ++j) x2 += q3.weights[j] * q3.nodes[j] * q3.nodes[j];
  CHECK(x2 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  CHECK_THROWS_AS(gll_rule(1), ContractViolation);
}

TEST_CASE("gll weights sum to 2 and integrate degree 2P-3 exactly") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int p = 2; p <= 66; ++p) {
    auto q = gll_rule(p);
    double s = 0;
    for (double w : q.weights) s += w;
    CHECK(std::abs(s - 2.0) <= 1e-13);
    for (int j = 1; j < p; ++j) CHECK(q.nodes[j] > q.nodes[j - 1]);
    std::vector<double> c(2 * p - 2);
    for (auto& v : c) v = u(rng);
    double quad = 0;
    for (int j = 0; j < p; ++j) quad += q.weights[j] * horner(c, q.nodes[j]);
    double cn = 0;
    for (double v : c) cn += v * v;
    CHECK(std::abs(quad - monomial_integral(c)) <= 1e-12 * std::sqrt(cn));
  }
}

TEST_CASE("Shen basis values and boundary conditions") {
  const auto d0 = legendre_mode(BasisKind::LegendreDirichlet, 0, 0.0);
  CHECK(d0.v == doctest::Approx(3.0 / (2.0 * std::sqrt(6.0))).epsilon(1e-14));
  CHECK(neumann_b(1) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));

  for (int n : {4, 22, 62}) {
    auto td = build_tables({BasisKind::LegendreDirichlet, n}, n + 3);
    auto tn = build_tables({BasisKind::LegendreNeumann, n}, n + 3);
    const int last = n + 2;
    for (int m = 0; m < n; ++m) {
      CHECK(std::abs(td.values(m, 0)) <= 1e-12);
      CHECK(std::abs(td.values(m, last)) <= 1e-12);
      CHECK(std::abs(tn.derivatives(m, 0)) <= 1e-10);
      CHECK(std::abs(tn.derivatives(m, last)) <= 1e-10);
      CHECK(std::isfinite(tn.values(m, 1)));
    }
  }
}

TEST_CASE("Dirichlet synthesis vanishes on the boundary for random coefficients") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const int n = 12;
  auto t = build_tables({BasisKind::LegendreDirichlet, n}, n + 3);
  SpectralField f;
  f.dim = 2;
  f.basis = t.spec;
  f.real.resize(n * n);
  for (auto& v : f.real) v = g(rng);
  auto nodal = synthesize(f, t);
  const int p = n + 3;
  for (int j = 0; j < p; ++j) {
    CHECK(std::abs(nodal[0 * p + j]) <= 1e-12);
    CHECK(std::abs(nodal[(p - 1) * p + j]) <= 1e-12);
    CHECK(std::abs(nodal[j * p + 0]) <= 1e-12);
    CHECK(std::abs(nodal[j * p + p - 1]) <= 1e-12);
  }
}

TEST_CASE("Fourier synthesis of a single mode") {
  const int n = 8;
  auto t = build_tables({BasisKind::Fourier, n}, n);
  SpectralField f;
  f.dim = 1;
  f.basis = t.spec;
  f.complex.assign(n, cplx{});
  f.complex[t.spec.index_of_wavenumber(1)] = 2.0 * kPi;
  auto z = synthesize_complex(f, t);
  for (int j = 0; j < n; ++j) {
    const double x = t.quadrature.nodes[j];
    CHECK(std::abs(z[j] - cplx(std::cos(x), std::sin(x))) <= 1e-14);
  }
  SpectralField zero = f;
  std::fill(zero.complex.begin(), zero.complex.end(), cplx{});
  for (double v : synthesize(zero, t)) CHECK(v == 0.0);
}

TEST_CASE("analyze_fourier against direct summation") {
  const int n = 8;
  auto t = build_tables({BasisKind::Fourier, n}, n);
  const double h = 2 * kPi / n;
  std::vector<double> ones(n * n, 1.0);
  auto f1 = analyze_fourier(ones, 2, 1, t);
  const std::size_t z = t.spec.index_of_wavenumber(0);
  for (std::size_t i = 0; i < f1.complex.size(); ++i) {
    if (i == z * n + z)
      CHECK(std::abs(f1.complex[i] - cplx(4 * kPi * kPi, 0)) <= 1e-12);
    else
      CHECK(std::abs(f1.complex[i]) <= 1e-12);
  }
  std::vector<double> c(n);
  for (int j = 0; j < n; ++j) c[j] = std::cos(h * j);
  auto fc = analyze_fourier(c, 1, 1, t);
  for (int m = 0; m < n; ++m) {
    const int xi = t.spec.wavenumber(m);
    cplx brute{};
    for (int j = 0; j < n; ++j) brute += h * c[j] * std::exp(cplx(0, -xi * h * j));
    CHECK(std::abs(fc.complex[m] - brute) <= 1e-12);
  }
  CHECK(std::abs(fc.complex[t.spec.index_of_wavenumber(1)] - cplx(kPi, 0)) <= 1e-12);
  CHECK(std::abs(fc.complex[t.spec.index_of_wavenumber(-1)] - cplx(kPi, 0)) <= 1e-12);
}

TEST_CASE("Fourier round trip, conjugate symmetry and Parseval") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int d : {2, 3}) {
    const int n = d == 2 ? 16 : 8;
    auto t = build_tables({BasisKind::Fourier, n}, n);
    std::size_t pts = 1;
    for (int a = 0; a < d; ++a) pts *= n;
    std::vector<double> f(pts);
    for (auto& v : f) v = g(rng);
    auto a = analyze_fourier(f, d, 1, t);
    auto back = synthesize(a, t);
    double err = 0, nf = 0;
    for (std::size_t i = 0; i < pts; ++i) {
      err = std::max(err, std::abs(back[i] - f[i]));
      nf += f[i] * f[i];
    }
    CHECK(err <= 1e-12);
    auto a2 = analyze_fourier(back, d, 1, t);
    double aerr = 0, anorm = 0;
    for (std::size_t i = 0; i < pts; ++i) {
      aerr = std::max(aerr, std::abs(a2.complex[i] - a.complex[i]));
      anorm += std::norm(a.complex[i]);
    }
    CHECK(aerr <= 1e-12 * std::sqrt(anorm));

    // alpha_{-xi} = conj(alpha_xi) for modes away from Nyquist.
    FourierHelmholtz op(1.0, 1.0, n, d);
    for (std::size_t i = 0; i < pts; ++i)
      if (op.partner()[i] != i || op.active()[i])
        CHECK(std::abs(a.complex[op.partner()[i]] - std::conj(a.complex[i])) <= 1e-12 * std::sqrt(anorm));

    const double h = 2 * kPi / n;
    CHECK(std::abs(nf * std::pow(h, d) - anorm / std::pow(2 * kPi, d)) <= 1e-10 * nf * std::pow(h, d));
  }
}

TEST_CASE("project_rhs of a basis product reproduces the mass matrix") {
  const int n = 8;
  const BasisSpec spec{BasisKind::LegendreDirichlet, n};
  auto t = build_tables(spec, n + 3);
  const int p = n + 3;
  std::vector<double> f(p * p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) f[i * p + j] = t.values(0, i) * t.values(0, j);
  auto r = project_rhs(f, 2, t);
  const auto b = assemble_mass(spec).entries;
  for (int l = 0; l < n; ++l)
    for (int m = 0; m < n; ++m) CHECK(std::abs(r[l * n + m] - b(l, 0) * b(m, 0)) <= 1e-14);

  std::vector<double> zero(p * p, 0.0);
  for (double v : project_rhs(zero, 2, t)) CHECK(v == 0.0);

  // int L_1 psi_l = c_l * 2/3 for l = 1, else 0.
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) f[i * p + j] = t.quadrature.nodes[i] * t.quadrature.nodes[j];
  r = project_rhs(f, 2, t);
  const double e = 2.0 / 3.0 / std::sqrt(10.0);
  for (int l = 0; l < n; ++l)
    for (int m = 0; m < n; ++m) CHECK(std::abs(r[l * n + m] - ((l == 1 && m == 1) ? e * e : 0.0)) <= 1e-14);
}

TEST_CASE("build_tables preconditions") {
  CHECK_THROWS_AS(build_tables({BasisKind::LegendreDirichlet, 8}, 9), ContractViolation);
  CHECK_THROWS_AS(build_tables({BasisKind::Fourier, 7}, 7), ContractViolation);
  CHECK_NOTHROW(build_tables({BasisKind::LegendreNeumann, 8}, 10));
}
