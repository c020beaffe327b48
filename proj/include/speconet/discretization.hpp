/// @file discretization.hpp
/// @brief Problem-level spectral space: the three coefficient roles used by the
///        pressure-correction scheme, their nodal grids, and the transforms.
///
/// Legendre (Dirichlet walls on [-1,1]^d):
///   Velocity   = Shen Dirichlet basis, N modes/axis (intermediate velocity)
///   Correction = Shen Neumann basis, N modes/axis (Phi)
///   State      = plain Legendre L_0..L_{N+1} (corrected velocity, pressure)
/// Fourier ([0,2pi)^d): all roles are the N-mode Fourier basis stored as
/// interleaved re/im doubles with the Nyquist modes held at zero.
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "speconet/basis.hpp"
#include "speconet/galerkin.hpp"

namespace speconet {

enum class Boundary { Dirichlet, Periodic };
enum class Role { Velocity = 0, State = 1, Correction = 2 };
enum class GridId { Quad = 0, Dealias = 1, Model = 2 };

struct Deriv {
  std::array<int, 3> order{0, 0, 0};
  static Deriv along(int axis, int k = 1) {
    Deriv d;
    d.order[axis] = k;
    return d;
  }
};

struct Grid {
  int dim = 2;
  QuadratureRule axis;

  int points() const { return axis.point_count(); }
  std::size_t size() const;
  std::array<double, 3> coord(std::size_t flat) const;
  std::vector<double> weights() const;
};

struct DiscretizationConfig {
  int dim = 2;
  Boundary bc = Boundary::Periodic;
  int modes = 16;
  bool dealias = false;
};

class Discretization {
 public:
  static std::shared_ptr<const Discretization> create(const DiscretizationConfig& cfg);
  virtual ~Discretization() = default;

  int dim() const { return cfg_.dim; }
  int modes() const { return cfg_.modes; }
  Boundary boundary() const { return cfg_.bc; }
  const DiscretizationConfig& config() const { return cfg_; }
  BasisSpec basis(Role r) const;
  const Grid& grid(GridId g) const { return grids_[static_cast<int>(g)]; }
  GridId nonlinear_grid() const { return cfg_.dealias ? GridId::Dealias : GridId::Quad; }

  virtual std::size_t coeff_count(Role r) const = 0;
  // nodal = sum_c c * D^deriv Psi on grid g (real part for Fourier).
  virtual void evaluate(Role r, std::span<const double> c, GridId g, std::span<double> nodal, Deriv d = {}) const = 0;
  // Integrals of the nodal field against every test function of role r.
  virtual void project(std::span<const double> nodal, GridId g, Role r, std::span<double> f) const = 0;
  // State coefficients from nodal values on the quadrature grid (exact for
  // Legendre polynomials of degree <= N+1 and Fourier band-limited data).
  virtual void fit_state(std::span<const double> nodal, std::span<double> c) const = 0;

  std::vector<double> evaluate(Role r, std::span<const double> c, GridId g, Deriv d = {}) const;
  std::vector<double> project(std::span<const double> nodal, GridId g, Role r) const;
  std::vector<double> fit_state(std::span<const double> nodal) const;
  // Exact conversion of Velocity or Correction coefficients into State.
  std::vector<double> to_state(Role r, std::span<const double> c) const;

  std::unique_ptr<HelmholtzOperator> make_operator(double tau, double nu, Role r) const;

  std::vector<double> sample(GridId g, const std::function<double(const std::array<double, 3>&)>& fn) const;

 protected:
  explicit Discretization(const DiscretizationConfig& cfg) : cfg_(cfg) {}
  DiscretizationConfig cfg_;
  std::array<Grid, 3> grids_;
};

// GLL points per axis used for each grid of a Legendre space with N modes.
int legendre_quad_points(int n);
int legendre_model_points(int n);
int legendre_dealias_points(int n);

}  // namespace speconet
