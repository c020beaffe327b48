#include "speconet/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "speconet/errors.hpp"

namespace speconet {

const char* basis_kind_name(BasisKind k) {
  switch (k) {
    case BasisKind::LegendreDirichlet: return "legendre-dirichlet";
    case BasisKind::LegendreNeumann: return "legendre-neumann";
    case BasisKind::Fourier: return "fourier";
    case BasisKind::Legendre: return "legendre";
    case BasisKind::NodalGLL: return "nodal-gll";
    case BasisKind::NodalUniform: return "nodal-uniform";
  }
  return "unknown";
}

bool is_legendre(BasisKind k) {
  return k == BasisKind::LegendreDirichlet || k == BasisKind::LegendreNeumann || k == BasisKind::Legendre;
}

double BasisSpec::lower() const { return kind == BasisKind::Fourier ? 0.0 : -1.0; }
double BasisSpec::upper() const { return kind == BasisKind::Fourier ? 2.0 * std::numbers::pi : 1.0; }

void BasisSpec::validate() const {
  require(n_modes > 0, "basis: n_modes must be positive");
  require(kind == BasisKind::Fourier || is_legendre(kind), "basis: not a spectral kind");
  if (kind == BasisKind::Fourier) require(n_modes % 2 == 0, "basis: Fourier N must be even");
}

void legendre_all(int nmax, double x, std::span<double> l, std::span<double> dl, std::span<double> d2l) {
  l[0] = 1.0;
  dl[0] = 0.0;
  d2l[0] = 0.0;
  if (nmax == 0) return;
  l[1] = x;
  dl[1] = 1.0;
  d2l[1] = 0.0;
  for (int n = 1; n < nmax; ++n) {
    l[n + 1] = ((2.0 * n + 1.0) * x * l[n] - n * l[n - 1]) / (n + 1.0);
    dl[n + 1] = dl[n - 1] + (2.0 * n + 1.0) * l[n];
    d2l[n + 1] = d2l[n - 1] + (2.0 * n + 1.0) * dl[n];
  }
}

double legendre(int n, double x) {
  if (n == 0) return 1.0;
  double p0 = 1.0, p1 = x;
  for (int k = 1; k < n; ++k) {
    const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

double neumann_b(int n) { return n * (n + 1.0) / ((n + 2.0) * (n + 3.0)); }

ModeValue legendre_mode(BasisKind kind, int n, double x) {
  std::vector<double> l(n + 3), dl(n + 3), d2l(n + 3);
  legendre_all(n + 2, x, l, dl, d2l);
  switch (kind) {
    case BasisKind::Legendre:
      return {l[n], dl[n], d2l[n]};
    case BasisKind::LegendreDirichlet: {
      const double c = 1.0 / std::sqrt(4.0 * n + 6.0);
      return {c * (l[n] - l[n + 2]), c * (dl[n] - dl[n + 2]), c * (d2l[n] - d2l[n + 2])};
    }
    case BasisKind::LegendreNeumann: {
      // The normalization is singular at n=0; the constant mode is kept as L_0
      // and its coefficient is gauge-fixed to zero by the solvers.
      if (n == 0) return {1.0, 0.0, 0.0};
      const double b = neumann_b(n);
      const double c = 1.0 / std::sqrt(b * (4.0 * n + 6.0));
      return {c * (l[n] - b * l[n + 2]), c * (dl[n] - b * dl[n + 2]), c * (d2l[n] - b * d2l[n + 2])};
    }
    default:
      throw ContractViolation("legendre_mode: not a Legendre kind");
  }
}

QuadratureRule gll_rule(int p) {
  require(p >= 2, "gll_rule: point_count must be >= 2");
  QuadratureRule q;
  q.nodes.assign(p, 0.0);
  q.weights.assign(p, 0.0);
  const int n = p - 1;
  for (int j = 0; j < p; ++j) {
    double x = -std::cos(std::numbers::pi * j / n);
    if (j == 0 || j == n) {
      q.nodes[j] = x < 0 ? -1.0 : 1.0;
      continue;
    }
    // Newton iteration on (1-x^2) L'_n via x L_n - L_{n-1} = 0 form.
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      const double ln = legendre(n, x);
      const double lm = legendre(n - 1, x);
      const double dx = (x * ln - lm) / (p * ln);
      x -= dx;
      if (std::abs(dx) <= 1e-15) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NumericalError("gll_rule: Newton iteration did not converge for node " + std::to_string(j));
    q.nodes[j] = x;
  }
  // Exact antisymmetry of the node set.
  for (int j = 0; j < p / 2; ++j) {
    const double s = 0.5 * (q.nodes[p - 1 - j] - q.nodes[j]);
    q.nodes[j] = -s;
    q.nodes[p - 1 - j] = s;
  }
  if (p % 2 == 1) q.nodes[p / 2] = 0.0;
  for (int j = 0; j < p; ++j) {
    const double ln = legendre(n, q.nodes[j]);
    q.weights[j] = 2.0 / (p * (p - 1.0) * ln * ln);
  }
  return q;
}

QuadratureRule fourier_rule(int p) {
  require(p >= 1, "fourier_rule: point_count must be positive");
  QuadratureRule q;
  const double h = 2.0 * std::numbers::pi / p;
  for (int j = 0; j < p; ++j) {
    q.nodes.push_back(h * j);
    q.weights.push_back(h);
  }
  return q;
}

BasisTables build_tables(const BasisSpec& spec, int quad_points) {
  spec.validate();
  BasisTables t;
  t.spec = spec;
  const int n = spec.n_modes;
  if (spec.kind == BasisKind::Fourier) {
    require(quad_points >= n, "build_tables: Fourier grid coarser than the mode count");
    t.quadrature = fourier_rule(quad_points);
    t.fourier_values = DenseMatrix<cplx>(n, quad_points);
    for (int m = 0; m < n; ++m) {
      const int xi = spec.wavenumber(m);
      for (int j = 0; j < quad_points; ++j) {
        // Integer phase keeps the table exact on the grid.
        const long long ph = (static_cast<long long>(xi) * j) % quad_points;
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(ph) / quad_points;
        t.fourier_values(m, j) = cplx(std::cos(ang), std::sin(ang)) / (2.0 * std::numbers::pi);
      }
    }
    return t;
  }
  require(quad_points >= n + 2, "build_tables: Legendre kinds need quad_points >= n_modes + 2");
  t.quadrature = gll_rule(quad_points);
  t.values = DenseMatrix<double>(n, quad_points);
  t.derivatives = DenseMatrix<double>(n, quad_points);
  t.second_derivatives = DenseMatrix<double>(n, quad_points);
  std::vector<double> l(n + 3), dl(n + 3), d2l(n + 3);
  for (int j = 0; j < quad_points; ++j) {
    const double x = t.quadrature.nodes[j];
    legendre_all(n + 2, x, l, dl, d2l);
    for (int m = 0; m < n; ++m) {
      double v = 0, d1 = 0, d2 = 0;
      if (spec.kind == BasisKind::Legendre) {
        v = l[m];
        d1 = dl[m];
        d2 = d2l[m];
      } else if (spec.kind == BasisKind::LegendreDirichlet) {
        const double c = 1.0 / std::sqrt(4.0 * m + 6.0);
        v = c * (l[m] - l[m + 2]);
        d1 = c * (dl[m] - dl[m + 2]);
        d2 = c * (d2l[m] - d2l[m + 2]);
      } else if (m == 0) {
        v = 1.0;
      } else {
        const double b = neumann_b(m);
        const double c = 1.0 / std::sqrt(b * (4.0 * m + 6.0));
        v = c * (l[m] - b * l[m + 2]);
        d1 = c * (dl[m] - b * dl[m + 2]);
        d2 = c * (d2l[m] - b * d2l[m + 2]);
      }
      t.values(m, j) = v;
      t.derivatives(m, j) = d1;
      t.second_derivatives(m, j) = d2;
    }
  }
  return t;
}

std::size_t SpectralField::per_component() const {
  std::size_t n = 1;
  for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(basis.n_modes);
  return n;
}

namespace {

template <class T>
DenseMatrix<T> transpose(const DenseMatrix<T>& m) {
  DenseMatrix<T> t(m.cols, m.rows);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) t(c, r) = m(r, c);
  return t;
}

template <class T>
std::vector<const DenseMatrix<T>*> repeat(const DenseMatrix<T>& m, int d) {
  return std::vector<const DenseMatrix<T>*>(d, &m);
}

}  // namespace

std::vector<cplx> synthesize_complex(const SpectralField& field, const BasisTables& tables) {
  require(field.basis.kind == BasisKind::Fourier && tables.spec.kind == BasisKind::Fourier,
          "synthesize_complex: Fourier field and tables required");
  require(field.basis.n_modes == tables.spec.n_modes, "synthesize: mode count mismatch");
  const std::size_t per = field.per_component();
  require(field.complex.size() == per * field.components, "synthesize: coefficient shape mismatch");
  const auto m = transpose(tables.fourier_values);
  const auto mats = repeat(m, field.dim);
  std::vector<cplx> out;
  for (int c = 0; c < field.components; ++c) {
    std::span<const cplx> x(field.complex.data() + c * per, per);
    auto y = tensor_apply<cplx, cplx>(mats, x);
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

std::vector<double> synthesize(const SpectralField& field, const BasisTables& tables) {
  require(field.dim == 2 || field.dim == 3 || field.dim == 1, "synthesize: dim must be 1, 2 or 3");
  if (field.basis.kind == BasisKind::Fourier) {
    const auto z = synthesize_complex(field, tables);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i].real();
    return out;
  }
  require(field.basis.kind == tables.spec.kind && field.basis.n_modes == tables.spec.n_modes,
          "synthesize: axis basis does not match tables");
  const std::size_t per = field.per_component();
  require(field.real.size() == per * field.components, "synthesize: coefficient shape mismatch");
  const auto m = transpose(tables.values);
  const auto mats = repeat(m, field.dim);
  std::vector<double> out;
  for (int c = 0; c < field.components; ++c) {
    std::span<const double> x(field.real.data() + c * per, per);
    auto y = tensor_apply<double, double>(mats, x);
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

SpectralField analyze_fourier(std::span<const double> nodal, int dim, int components, const BasisTables& tables) {
  require(tables.spec.kind == BasisKind::Fourier, "analyze_fourier: non-Fourier axis");
  const int p = tables.quadrature.point_count();
  const int n = tables.spec.n_modes;
  std::size_t per = 1;
  for (int a = 0; a < dim; ++a) per *= static_cast<std::size_t>(p);
  require(nodal.size() == per * components, "analyze_fourier: grid mismatch");
  DenseMatrix<cplx> m(n, p);
  const double h = 2.0 * std::numbers::pi / p;
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < p; ++j) m(r, j) = std::conj(tables.fourier_values(r, j)) * (2.0 * std::numbers::pi) * h;
  const auto mats = repeat(m, dim);
  SpectralField f;
  f.dim = dim;
  f.basis = tables.spec;
  f.components = components;
  for (int c = 0; c < components; ++c) {
    std::span<const double> x(nodal.data() + c * per, per);
    auto y = tensor_apply<cplx, double>(mats, x);
    f.complex.insert(f.complex.end(), y.begin(), y.end());
  }
  return f;
}

std::vector<double> project_rhs(std::span<const double> nodal_f, int dim, const BasisTables& tables) {
  const int p = tables.quadrature.point_count();
  std::size_t per = 1;
  for (int a = 0; a < dim; ++a) per *= static_cast<std::size_t>(p);
  require(nodal_f.size() == per, "project_rhs: grid mismatch");
  if (tables.spec.kind == BasisKind::Fourier) {
    const auto f = analyze_fourier(nodal_f, dim, 1, tables);
    std::vector<double> out(2 * f.complex.size());
    for (std::size_t i = 0; i < f.complex.size(); ++i) {
      out[2 * i] = f.complex[i].real();
      out[2 * i + 1] = f.complex[i].imag();
    }
    return out;
  }
  DenseMatrix<double> m(tables.spec.n_modes, p);
  for (int r = 0; r < m.rows; ++r)
    for (int j = 0; j < p; ++j) m(r, j) = tables.values(r, j) * tables.quadrature.weights[j];
  const auto mats = repeat(m, dim);
  return tensor_apply<double, double>(mats, nodal_f);
}

}  // namespace speconet
