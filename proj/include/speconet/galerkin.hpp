/// @file galerkin.hpp
/// @brief Mass/stiffness assembly and diagonalized Helmholtz systems
///        tau*u - nu*Lap(u) = f in weak form for Legendre and Fourier bases.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "speconet/basis.hpp"

namespace speconet {

struct MassMatrix {
  BasisSpec basis;
  Eigen::MatrixXd entries;
};

// Quadrature-assembled (authoritative) mass and stiffness matrices.
MassMatrix assemble_mass(const BasisSpec& spec);
Eigen::MatrixXd assemble_stiffness(const BasisSpec& spec);
// Closed-form pentadiagonal mass matrix, used as a structural cross-check.
Eigen::MatrixXd mass_closed_form(const BasisSpec& spec);

// Absolute floor added to the relative compatibility tolerance for tau=0.
inline constexpr double kCompatibilityFloor = 1e-11;

// Linear system M w = h in solver coordinates w, with alpha = reconstruct(w).
// The solvers and the training losses share this object. P (constrain) is the
// orthogonal projector onto admissible unknowns (gauge pin, Fourier symmetry).
class HelmholtzOperator {
 public:
  virtual ~HelmholtzOperator() = default;

  virtual int dim() const = 0;
  virtual double tau() const = 0;
  virtual double nu() const = 0;
  // Doubles per scalar field (Fourier counts re/im separately).
  virtual std::size_t unknowns() const = 0;
  // Test-function integrals F -> transformed right-hand side h.
  virtual std::vector<double> transform_rhs(std::span<const double> f) const = 0;
  // out = M w (M symmetric).
  virtual void apply(std::span<const double> w, std::span<double> out) const = 0;
  virtual void constrain(std::span<double> w) const = 0;
  virtual std::vector<double> solve(std::span<const double> h) const = 0;
  // Physical coefficients alpha from unknowns (P applied first).
  virtual std::vector<double> reconstruct(std::span<const double> w) const = 0;

  // r = M P w - h; returns ||r||^2.
  double residual(std::span<const double> w, std::span<const double> h, std::span<double> r) const;
  // d||M P w - h||^2 / dw = 2 P M r.
  void residual_gradient(std::span<const double> r, std::span<double> g) const;
};

class LegendreHelmholtz final : public HelmholtzOperator {
 public:
  LegendreHelmholtz(double tau, double nu, const BasisSpec& spec, int dim);

  int dim() const override { return dim_; }
  double tau() const override { return tau_; }
  double nu() const override { return nu_; }
  std::size_t unknowns() const override { return total_; }
  std::vector<double> transform_rhs(std::span<const double> f) const override;
  void apply(std::span<const double> w, std::span<double> out) const override;
  void constrain(std::span<double> w) const override;
  std::vector<double> solve(std::span<const double> h) const override;
  std::vector<double> reconstruct(std::span<const double> w) const override;

  const BasisSpec& basis() const { return spec_; }
  const Eigen::MatrixXd& mass() const { return b_; }
  const Eigen::MatrixXd& stiffness() const { return s_; }
  const Eigen::MatrixXd& eigvecs() const { return e_; }
  const Eigen::VectorXd& eigvals() const { return lambda_; }
  // Diagonal of E^T S E (1 for Dirichlet; 0 on the constant Neumann mode).
  const Eigen::VectorXd& stiffness_diag() const { return sdiag_; }
  std::size_t columns() const { return cols_.size(); }
  // Unpreconditioned per-eigencolumn matrix A_J and its preconditioner C_J.
  Eigen::MatrixXd column_matrix(std::size_t j) const;
  const Eigen::VectorXd& preconditioner(std::size_t j) const { return cols_[j].c; }
  const Eigen::MatrixXd& preconditioned(std::size_t j) const { return cols_[j].m; }
  std::optional<std::size_t> pinned() const { return pinned_; }

 private:
  struct Column {
    double cb = 0, cs = 0;  // A_J = cb*B + cs*S
    Eigen::VectorXd c;      // preconditioner diagonal
    Eigen::MatrixXd m;      // C A_J C (pinned row/col replaced by identity)
    Eigen::LLT<Eigen::MatrixXd> llt;
  };
  void transform_axes(std::span<const double> in, std::span<double> out, bool forward) const;

  double tau_, nu_;
  BasisSpec spec_;
  int dim_, n_;
  std::size_t total_;
  Eigen::MatrixXd b_, s_, e_;
  Eigen::VectorXd lambda_, sdiag_;
  DenseMatrix<double> et_, ev_;
  std::vector<Column> cols_;
  std::optional<std::size_t> pinned_;
};

// Diagonal system in preconditioned unknowns w: alpha = C P w with
// C = diag(1/sqrt(tau + nu |xi|^2)), so C D C is the identity on active modes.
class FourierHelmholtz final : public HelmholtzOperator {
 public:
  FourierHelmholtz(double tau, double nu, int n_modes, int dim);

  int dim() const override { return dim_; }
  double tau() const override { return tau_; }
  double nu() const override { return nu_; }
  std::size_t unknowns() const override { return 2 * count_; }
  std::vector<double> transform_rhs(std::span<const double> f) const override;
  void apply(std::span<const double> w, std::span<double> out) const override;
  void constrain(std::span<double> w) const override;
  std::vector<double> solve(std::span<const double> h) const override;
  std::vector<double> reconstruct(std::span<const double> w) const override;

  int modes() const { return n_; }
  // Flat index of -xi for every mode (self for inactive Nyquist modes).
  const std::vector<std::size_t>& partner() const { return partner_; }
  const std::vector<char>& active() const { return active_; }
  const std::vector<double>& diagonal() const { return diag_; }
  const std::vector<double>& preconditioner() const { return pre_; }

 private:
  double tau_, nu_;
  int n_, dim_;
  std::size_t count_;
  std::vector<double> diag_, pre_;
  std::vector<char> active_;
  std::vector<std::size_t> partner_;
  std::size_t zero_index_;
};

std::unique_ptr<HelmholtzOperator> build_operator(double tau, double nu, const BasisSpec& spec, int dim);

struct ResidualSystem {
  const HelmholtzOperator* op = nullptr;
  std::vector<double> rhs;  // h
};

ResidualSystem make_system(const HelmholtzOperator& op, std::span<const double> f);

struct ResidualResult {
  std::vector<double> r;
  double norm2 = 0;
};

// Per-eigencolumn residual C A_J C w_J - h_J and its squared norm.
ResidualResult residual_2d(std::span<const double> w, const ResidualSystem& sys);
ResidualResult residual_3d(std::span<const double> w, const ResidualSystem& sys);

// Exact solve through the per-column factorizations; returns alpha.
std::vector<double> solve_direct(const ResidualSystem& sys);

// alpha_xi = F_xi/(tau + nu|xi|^2); Nyquist modes dropped, alpha_0 = 0 for tau=0.
SpectralField solve_fourier(double tau, double nu, const SpectralField& f_hat);

}  // namespace speconet
