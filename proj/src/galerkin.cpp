#include "speconet/galerkin.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "speconet/errors.hpp"

namespace speconet {

namespace {

// GLL points needed for exact mass/stiffness integrands of degree 2N+2.
int exact_quad_points(const BasisSpec& spec) { return spec.n_modes + 3; }

std::size_t ipow(int n, int d) {
  std::size_t r = 1;
  for (int a = 0; a < d; ++a) r *= static_cast<std::size_t>(n);
  return r;
}

double norm2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

MassMatrix assemble_mass(const BasisSpec& spec) {
  require(is_legendre(spec.kind), "assemble_mass: Legendre kind required");
  const auto t = build_tables(spec, exact_quad_points(spec));
  const int n = spec.n_modes;
  MassMatrix m{spec, Eigen::MatrixXd::Zero(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int q = 0; q < t.quadrature.point_count(); ++q) s += t.quadrature.weights[q] * t.values(i, q) * t.values(j, q);
      m.entries(i, j) = s;
    }
  m.entries = 0.5 * (m.entries + m.entries.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.entries, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("assemble_mass: mass matrix is not positive definite");
  return m;
}

Eigen::MatrixXd assemble_stiffness(const BasisSpec& spec) {
  require(is_legendre(spec.kind), "assemble_stiffness: Legendre kind required");
  const auto t = build_tables(spec, exact_quad_points(spec));
  const int n = spec.n_modes;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0;
      for (int q = 0; q < t.quadrature.point_count(); ++q)
        acc += t.quadrature.weights[q] * t.derivatives(i, q) * t.derivatives(j, q);
      s(i, j) = acc;
    }
  return 0.5 * (s + s.transpose());
}

Eigen::MatrixXd mass_closed_form(const BasisSpec& spec) {
  const int n = spec.n_modes;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  auto lnorm = [](int k) { return 2.0 / (2.0 * k + 1.0); };
  switch (spec.kind) {
    case BasisKind::Legendre:
      for (int l = 0; l < n; ++l) b(l, l) = lnorm(l);
      break;
    case BasisKind::LegendreDirichlet: {
      auto c = [](int l) { return 1.0 / std::sqrt(4.0 * l + 6.0); };
      for (int l = 0; l < n; ++l) {
        b(l, l) = c(l) * c(l) * (lnorm(l) + lnorm(l + 2));
        if (l + 2 < n) b(l, l + 2) = b(l + 2, l) = -c(l) * c(l + 2) * lnorm(l + 2);
      }
      break;
    }
    case BasisKind::LegendreNeumann: {
      auto c = [](int l) { return l == 0 ? 1.0 : 1.0 / std::sqrt(neumann_b(l) * (4.0 * l + 6.0)); };
      auto bb = [](int l) { return l == 0 ? 0.0 : neumann_b(l); };
      for (int l = 0; l < n; ++l) {
        b(l, l) = c(l) * c(l) * (lnorm(l) + bb(l) * bb(l) * lnorm(l + 2));
        if (l >= 1 && l + 2 < n) b(l, l + 2) = b(l + 2, l) = -c(l) * c(l + 2) * bb(l) * lnorm(l + 2);
      }
      break;
    }
    default:
      throw ContractViolation("mass_closed_form: Legendre kind required");
  }
  return b;
}

double HelmholtzOperator::residual(std::span<const double> w, std::span<const double> h, std::span<double> r) const {
  require(w.size() == unknowns() && h.size() == unknowns() && r.size() == unknowns(), "residual: shape mismatch");
  std::vector<double> wp(w.begin(), w.end());
  constrain(wp);
  apply(wp, r);
  double s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] -= h[i];
    s += r[i] * r[i];
  }
  return s;
}

void HelmholtzOperator::residual_gradient(std::span<const double> r, std::span<double> g) const {
  apply(r, g);
  for (double& x : g) x *= 2.0;
  constrain(g);
}

// ---------------------------------------------------------------------------
// Legendre
// ---------------------------------------------------------------------------

LegendreHelmholtz::LegendreHelmholtz(double tau, double nu, const BasisSpec& spec, int dim)
    : tau_(tau), nu_(nu), spec_(spec), dim_(dim), n_(spec.n_modes), total_(ipow(spec.n_modes, dim)) {
  require(tau >= 0.0 && nu > 0.0, "build_operator: need tau >= 0 and nu > 0");
  require(dim == 2 || dim == 3, "build_operator: dim must be 2 or 3");
  require(spec.kind == BasisKind::LegendreDirichlet || spec.kind == BasisKind::LegendreNeumann,
          "build_operator: Dirichlet or Neumann basis required");
  b_ = assemble_mass(spec).entries;
  s_ = assemble_stiffness(spec);
  const int n = n_;
  const bool neumann = spec.kind == BasisKind::LegendreNeumann;
  e_ = Eigen::MatrixXd::Zero(n, n);
  lambda_ = Eigen::VectorXd::Zero(n);
  if (neumann) {
    // B = [B_00] (+) B_r; the constant eigenvector is e_0 by construction.
    for (int j = 1; j < n; ++j)
      if (std::abs(b_(0, j)) > 1e-12) throw NumericalError("build_operator: Neumann mass matrix not block diagonal");
    e_(0, 0) = 1.0;
    lambda_(0) = b_(0, 0);
    if (n > 1) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b_.bottomRightCorner(n - 1, n - 1));
      if (es.info() != Eigen::Success) throw NumericalError("build_operator: eigen-solve failed");
      e_.bottomRightCorner(n - 1, n - 1) = es.eigenvectors();
      lambda_.tail(n - 1) = es.eigenvalues();
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b_);
    if (es.info() != Eigen::Success) throw NumericalError("build_operator: eigen-solve failed");
    e_ = es.eigenvectors();
    lambda_ = es.eigenvalues();
  }
  if (lambda_.minCoeff() <= 0.0) throw NumericalError("build_operator: non-positive mass eigenvalue");
  const Eigen::MatrixXd ese = e_.transpose() * s_ * e_;
  sdiag_ = ese.diagonal();
  const double off = (ese - Eigen::MatrixXd(sdiag_.asDiagonal())).cwiseAbs().maxCoeff();
  if (off > 1e-10 * std::max(1.0, s_.cwiseAbs().maxCoeff()))
    throw NumericalError("build_operator: stiffness not diagonal in the mass eigenbasis");

  et_ = DenseMatrix<double>(n, n);
  ev_ = DenseMatrix<double>(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      et_(i, j) = e_(j, i);
      ev_(i, j) = e_(i, j);
    }

  const std::size_t ncols = ipow(n, dim - 1);
  cols_.resize(ncols);
  for (std::size_t jc = 0; jc < ncols; ++jc) {
    std::array<int, 2> idx{0, 0};
    std::size_t rem = jc;
    for (int a = dim - 2; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % n);
      rem /= n;
    }
    double prod = 1.0, sum = 0.0;
    for (int a = 0; a < dim - 1; ++a) prod *= lambda_(idx[a]);
    for (int a = 0; a < dim - 1; ++a) {
      double p = sdiag_(idx[a]);
      for (int b = 0; b < dim - 1; ++b)
        if (b != a) p *= lambda_(idx[b]);
      sum += p;
    }
    Column& col = cols_[jc];
    col.cb = tau * prod + nu * sum;
    col.cs = nu * prod;
    Eigen::MatrixXd a = col.cb * b_ + col.cs * s_;
    bool all_const = neumann;
    for (int k = 0; k < dim - 1; ++k) all_const = all_const && idx[k] == 0;
    if (all_const && tau == 0.0) {
      pinned_ = jc * n;
      a.row(0).setZero();
      a.col(0).setZero();
      a(0, 0) = 1.0;
    }
    col.c = a.diagonal().cwiseSqrt().cwiseInverse();
    col.m = col.c.asDiagonal() * a * col.c.asDiagonal();
    col.llt.compute(col.m);
    if (col.llt.info() != Eigen::Success)
      throw NumericalError("build_operator: singular eigencolumn system " + std::to_string(jc) +
                           " (tau=0 requires the constant-mode gauge pin)");
  }
}

Eigen::MatrixXd LegendreHelmholtz::column_matrix(std::size_t j) const {
  Eigen::MatrixXd a = cols_[j].cb * b_ + cols_[j].cs * s_;
  if (pinned_ && *pinned_ / n_ == j) {
    a.row(0).setZero();
    a.col(0).setZero();
    a(0, 0) = 1.0;
  }
  return a;
}

void LegendreHelmholtz::transform_axes(std::span<const double> in, std::span<double> out, bool forward) const {
  const std::array<int, 3> ext{n_, n_, n_};
  std::span<const int> e(ext.data(), dim_);
  const DenseMatrix<double>& m = forward ? et_ : ev_;
  if (dim_ == 2) {
    apply_axis<double, double, double>(m, in, e, 0, out);
    return;
  }
  std::vector<double> tmp(total_);
  apply_axis<double, double, double>(m, in, e, 0, tmp);
  apply_axis<double, double, double>(m, tmp, e, 1, out);
}

std::vector<double> LegendreHelmholtz::transform_rhs(std::span<const double> f) const {
  require(f.size() == total_, "transform_rhs: shape mismatch");
  std::vector<double> g(total_);
  transform_axes(f, g, true);
  if (pinned_) {
    const double mean = g[*pinned_];
    if (std::abs(mean) > 1e-8 * norm2(f) + kCompatibilityFloor)
      throw CompatibilityError("Neumann Poisson right-hand side has nonzero mean: integral = " + std::to_string(mean));
    g[*pinned_] = 0.0;
  }
  for (std::size_t j = 0; j < cols_.size(); ++j)
    for (int i = 0; i < n_; ++i) g[j * n_ + i] *= cols_[j].c(i);
  return g;
}

void LegendreHelmholtz::apply(std::span<const double> w, std::span<double> out) const {
  require(w.size() == total_ && out.size() == total_, "apply: shape mismatch");
  for (std::size_t j = 0; j < cols_.size(); ++j) {
    Eigen::Map<const Eigen::VectorXd> wj(w.data() + j * n_, n_);
    Eigen::Map<Eigen::VectorXd> oj(out.data() + j * n_, n_);
    oj.noalias() = cols_[j].m * wj;
  }
}

void LegendreHelmholtz::constrain(std::span<double> w) const {
  if (pinned_) w[*pinned_] = 0.0;
}

std::vector<double> LegendreHelmholtz::solve(std::span<const double> h) const {
  require(h.size() == total_, "solve: shape mismatch");
  std::vector<double> w(total_);
  for (std::size_t j = 0; j < cols_.size(); ++j) {
    Eigen::Map<const Eigen::VectorXd> hj(h.data() + j * n_, n_);
    Eigen::Map<Eigen::VectorXd> wj(w.data() + j * n_, n_);
    wj = cols_[j].llt.solve(hj);
  }
  constrain(w);
  return w;
}

std::vector<double> LegendreHelmholtz::reconstruct(std::span<const double> w) const {
  require(w.size() == total_, "reconstruct: shape mismatch");
  std::vector<double> v(w.begin(), w.end());
  constrain(v);
  for (std::size_t j = 0; j < cols_.size(); ++j)
    for (int i = 0; i < n_; ++i) v[j * n_ + i] *= cols_[j].c(i);
  std::vector<double> a(total_);
  transform_axes(v, a, false);
  return a;
}

// ---------------------------------------------------------------------------
// Fourier
// ---------------------------------------------------------------------------

FourierHelmholtz::FourierHelmholtz(double tau, double nu, int n_modes, int dim)
    : tau_(tau), nu_(nu), n_(n_modes), dim_(dim), count_(ipow(n_modes, dim)), zero_index_(0) {
  require(tau >= 0.0 && nu > 0.0, "build_operator: need tau >= 0 and nu > 0");
  require(dim == 2 || dim == 3, "build_operator: dim must be 2 or 3");
  require(n_modes % 2 == 0 && n_modes >= 2, "build_operator: Fourier N must be even");
  diag_.resize(count_);
  pre_.resize(count_);
  active_.resize(count_);
  partner_.resize(count_);
  const int half = n_ / 2;
  for (std::size_t f = 0; f < count_; ++f) {
    std::size_t rem = f;
    std::array<int, 3> xi{};
    for (int a = dim - 1; a >= 0; --a) {
      xi[a] = static_cast<int>(rem % n_) - half + 1;
      rem /= n_;
    }
    bool nyq = false, zero = true;
    double k2 = 0;
    std::size_t p = 0;
    for (int a = 0; a < dim; ++a) {
      nyq = nyq || xi[a] == half;
      zero = zero && xi[a] == 0;
      k2 += static_cast<double>(xi[a]) * xi[a];
      const int neg = xi[a] == half ? xi[a] : -xi[a];
      p = p * n_ + static_cast<std::size_t>(neg + half - 1);
    }
    diag_[f] = tau + nu * k2;
    active_[f] = !nyq && !(zero && tau == 0.0);
    pre_[f] = active_[f] ? 1.0 / std::sqrt(diag_[f]) : 0.0;
    partner_[f] = nyq ? f : p;
    if (zero) zero_index_ = f;
  }
}

std::vector<double> FourierHelmholtz::transform_rhs(std::span<const double> f) const {
  require(f.size() == 2 * count_, "transform_rhs: shape mismatch");
  if (tau_ == 0.0) {
    const double re = f[2 * zero_index_], im = f[2 * zero_index_ + 1];
    const double mean = std::hypot(re, im);
    if (mean > 1e-8 * norm2(f) + kCompatibilityFloor)
      throw CompatibilityError("periodic Poisson right-hand side has nonzero mean: |F_0| = " + std::to_string(mean));
  }
  std::vector<double> h(f.begin(), f.end());
  constrain(h);
  for (std::size_t m = 0; m < count_; ++m) {
    h[2 * m] *= pre_[m];
    h[2 * m + 1] *= pre_[m];
  }
  return h;
}

void FourierHelmholtz::apply(std::span<const double> w, std::span<double> out) const {
  require(w.size() == 2 * count_ && out.size() == 2 * count_, "apply: shape mismatch");
  for (std::size_t f = 0; f < count_; ++f) {
    const double m = pre_[f] * diag_[f] * pre_[f];
    out[2 * f] = m * w[2 * f];
    out[2 * f + 1] = m * w[2 * f + 1];
  }
}

void FourierHelmholtz::constrain(std::span<double> w) const {
  require(w.size() == 2 * count_, "constrain: shape mismatch");
  std::vector<double> out(w.size(), 0.0);
  for (std::size_t f = 0; f < count_; ++f) {
    if (!active_[f]) continue;
    const std::size_t p = partner_[f];
    out[2 * f] = 0.5 * (w[2 * f] + w[2 * p]);
    out[2 * f + 1] = 0.5 * (w[2 * f + 1] - w[2 * p + 1]);
  }
  std::copy(out.begin(), out.end(), w.begin());
}

std::vector<double> FourierHelmholtz::solve(std::span<const double> h) const {
  require(h.size() == 2 * count_, "solve: shape mismatch");
  std::vector<double> w(2 * count_, 0.0);
  for (std::size_t f = 0; f < count_; ++f) {
    if (!active_[f]) continue;
    const double m = pre_[f] * diag_[f] * pre_[f];
    w[2 * f] = h[2 * f] / m;
    w[2 * f + 1] = h[2 * f + 1] / m;
  }
  constrain(w);
  return w;
}

std::vector<double> FourierHelmholtz::reconstruct(std::span<const double> w) const {
  std::vector<double> a(w.begin(), w.end());
  constrain(a);
  for (std::size_t f = 0; f < count_; ++f) {
    a[2 * f] *= pre_[f];
    a[2 * f + 1] *= pre_[f];
  }
  return a;
}

std::unique_ptr<HelmholtzOperator> build_operator(double tau, double nu, const BasisSpec& spec, int dim) {
  if (spec.kind == BasisKind::Fourier) return std::make_unique<FourierHelmholtz>(tau, nu, spec.n_modes, dim);
  return std::make_unique<LegendreHelmholtz>(tau, nu, spec, dim);
}

ResidualSystem make_system(const HelmholtzOperator& op, std::span<const double> f) {
  return ResidualSystem{&op, op.transform_rhs(f)};
}

namespace {

ResidualResult residual_any(std::span<const double> w, const ResidualSystem& sys) {
  ResidualResult res;
  res.r.resize(sys.op->unknowns());
  res.norm2 = sys.op->residual(w, sys.rhs, res.r);
  return res;
}

}  // namespace

ResidualResult residual_2d(std::span<const double> w, const ResidualSystem& sys) {
  require(sys.op && sys.op->dim() == 2, "residual_2d: 2D system required");
  return residual_any(w, sys);
}

ResidualResult residual_3d(std::span<const double> w, const ResidualSystem& sys) {
  require(sys.op && sys.op->dim() == 3, "residual_3d: 3D system required");
  return residual_any(w, sys);
}

std::vector<double> solve_direct(const ResidualSystem& sys) {
  require(sys.op != nullptr, "solve_direct: operator missing");
  return sys.op->reconstruct(sys.op->solve(sys.rhs));
}

SpectralField solve_fourier(double tau, double nu, const SpectralField& f_hat) {
  require(f_hat.basis.kind == BasisKind::Fourier, "solve_fourier: Fourier field required");
  FourierHelmholtz op(tau, nu, f_hat.basis.n_modes, f_hat.dim);
  SpectralField out = f_hat;
  const std::size_t per = f_hat.per_component();
  require(f_hat.complex.size() == per * f_hat.components, "solve_fourier: coefficient shape mismatch");
  for (int c = 0; c < f_hat.components; ++c) {
    std::vector<double> f(2 * per);
    for (std::size_t i = 0; i < per; ++i) {
      f[2 * i] = f_hat.complex[c * per + i].real();
      f[2 * i + 1] = f_hat.complex[c * per + i].imag();
    }
    const auto a = op.reconstruct(op.solve(op.transform_rhs(f)));
    for (std::size_t i = 0; i < per; ++i) out.complex[c * per + i] = cplx(a[2 * i], a[2 * i + 1]);
  }
  return out;
}

}  // namespace speconet
