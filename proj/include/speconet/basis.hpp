/// @file basis.hpp
/// @brief Shen-type Legendre bases (Dirichlet, Neumann), full Legendre,
///        Fourier modes, Gauss-Lobatto-Legendre quadrature and transforms.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "speconet/tensor.hpp"

namespace speconet {

// Codes are persisted in field files; do not renumber.
enum class BasisKind : std::uint32_t {
  LegendreDirichlet = 0,
  LegendreNeumann = 1,
  Fourier = 2,
  Legendre = 3,     // plain L_0..L_{N-1}, used for velocity/pressure state
  NodalGLL = 4,     // nodal values on a GLL grid
  NodalUniform = 5  // nodal values on an equispaced periodic grid
};

const char* basis_kind_name(BasisKind k);
bool is_legendre(BasisKind k);

struct BasisSpec {
  BasisKind kind = BasisKind::LegendreDirichlet;
  int n_modes = 0;

  double lower() const;
  double upper() const;
  // Fourier wavenumber of storage index i: -N/2+1+i.
  int wavenumber(int i) const { return -n_modes / 2 + 1 + i; }
  int index_of_wavenumber(int xi) const { return xi + n_modes / 2 - 1; }
  void validate() const;
};

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int point_count() const { return static_cast<int>(nodes.size()); }
};

// Gauss-Lobatto-Legendre points: roots of (1-x^2) L'_{P-1}, ascending.
QuadratureRule gll_rule(int point_count);
// Equispaced nodes 2*pi*j/P with weights 2*pi/P.
QuadratureRule fourier_rule(int point_count);

// L_0..L_nmax and first/second derivatives at x by three-term recurrence.
void legendre_all(int nmax, double x, std::span<double> l, std::span<double> dl, std::span<double> d2l);
double legendre(int n, double x);

// Shen normalization factor and Neumann b_n.
double neumann_b(int n);

// Value and derivatives of basis mode n at x for Legendre kinds.
struct ModeValue {
  double v, d1, d2;
};
ModeValue legendre_mode(BasisKind kind, int n, double x);

struct BasisTables {
  BasisSpec spec;
  QuadratureRule quadrature;
  // Legendre kinds: [mode x node].
  DenseMatrix<double> values, derivatives, second_derivatives;
  // Fourier: [mode x node] of e^{i xi x_j}/(2 pi).
  DenseMatrix<cplx> fourier_values;
};

// Legendre kinds need quad_points >= n_modes + 2; Fourier needs >= n_modes.
BasisTables build_tables(const BasisSpec& spec, int quad_points);

// d-dimensional coefficient array, isotropic per-axis basis.
struct SpectralField {
  int dim = 2;
  BasisSpec basis;
  int components = 1;
  // Real kinds: components x N^d doubles. Fourier: components x N^d complex.
  std::vector<double> real;
  std::vector<cplx> complex;

  std::size_t per_component() const;
};

// Nodal values (components x P^d) on the tables' quadrature grid.
std::vector<double> synthesize(const SpectralField& field, const BasisTables& tables);
// Complex synthesis for Fourier fields (keeps the imaginary part).
std::vector<cplx> synthesize_complex(const SpectralField& field, const BasisTables& tables);
// F_xi = h^d sum_j f(x_j) e^{-i xi x_j} for every component.
SpectralField analyze_fourier(std::span<const double> nodal, int dim, int components, const BasisTables& tables);
// Integrals of f against every test function by tensor quadrature.
// Legendre kinds return N^d reals; Fourier returns N^d complex interleaved.
std::vector<double> project_rhs(std::span<const double> nodal_f, int dim, const BasisTables& tables);

}  // namespace speconet
