/// @file nse_solver.hpp
/// @brief Rotational pressure-correction (BDF2) spectral Galerkin solver for
///        the incompressible Navier-Stokes equations.
///
/// Per step, with tau = 3/(2 dt):
///   tau*u~ - nu*Lap(u~) = g - grad p^k + (4u^k - u^{k-1})/(2 dt)
///   g = f(t^{k+1}) - (2 (u^k.grad)u^k - (u^{k-1}.grad)u^{k-1})
///   Lap(Phi) = (3/(2 dt)) div u~,  dPhi/dn = 0
///   u^{k+1} = u~ - (2 dt/3) grad Phi,  p^{k+1} = p^k + Phi - nu div u~
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "speconet/discretization.hpp"

namespace speconet {

using PointFn = std::function<void(const std::array<double, 3>& x, std::span<double> out)>;
using ScalarPointFn = std::function<double(const std::array<double, 3>& x)>;

// f(t, x) = time(t) * space(x); every input family in this code has this form.
struct SeparableField {
  std::function<double(double)> time;  // empty means 1
  PointFn space;                       // empty means zero
  double factor(double t) const { return time ? time(t) : 1.0; }
};

// Nonhomogeneous tangential velocity on the wall y = 1 (2D Legendre only):
// u(x, 1, t) = time(t) * profile(x).
struct TopWallData {
  std::function<double(double)> time;
  std::function<double(double)> profile;
};

struct FlowInputs {
  SeparableField forcing;
  PointFn initial_velocity;         // empty means zero
  ScalarPointFn initial_pressure;   // empty means zero
  std::optional<TopWallData> top_wall;
};

struct SolverConfig {
  double dt = 0.01;
  int steps = 100;
  double nu = 0.1;
  int record_every = 1;  // 0 keeps only the initial and final states
  double blowup_threshold = 1e6;
};

using Components = std::vector<std::vector<double>>;

struct FlowState {
  int step = 0;
  double time = 0.0;
  Components u;        // State coefficients per component
  std::vector<double> p;
  Components u_tilde;  // Velocity coefficients (homogeneous part when lifted)
  std::vector<double> phi;
};

struct StepDiagnostics {
  int step = 0;
  double div_tilde = 0;      // ||weak div u~||
  double div_corrected = 0;  // ||weak div u^{k+1}||
  double max_abs_u = 0;
};

struct Trajectory {
  std::vector<FlowState> states;
  std::vector<StepDiagnostics> diagnostics;
};

// Everything a step needs from the past; frozen while forming step k+1.
struct History {
  int step = 0;  // index k of u_curr
  Components u_prev, u_curr;
  std::vector<double> p_curr;
  // (u.grad)u of u_curr on the nonlinear grid, reused as the k-1 term next step.
  Components conv_curr;
  Components conv_prev;
};

// Factorized momentum (tau = 3/(2 dt)) and Poisson operators; immutable and
// shared by every sample that uses the same space, dt and nu.
struct SolverOperators {
  std::shared_ptr<const HelmholtzOperator> momentum, poisson;
  static SolverOperators build(const Discretization& space, const SolverConfig& cfg);
};

class NseSolver {
 public:
  NseSolver(std::shared_ptr<const Discretization> space, const SolverConfig& cfg, FlowInputs inputs);
  NseSolver(std::shared_ptr<const Discretization> space, const SolverConfig& cfg, FlowInputs inputs,
            SolverOperators ops);

  const Discretization& space() const { return *space_; }
  std::shared_ptr<const Discretization> space_ptr() const { return space_; }
  const SolverConfig& config() const { return cfg_; }
  const FlowInputs& inputs() const { return inputs_; }
  const HelmholtzOperator& momentum_operator() const { return *ops_.momentum; }
  const HelmholtzOperator& poisson_operator() const { return *ops_.poisson; }
  const SolverOperators& operators() const { return ops_; }
  double tau() const { return 1.5 / cfg_.dt; }
  int dim() const { return space_->dim(); }

  FlowState initial_state() const;
  Components stokes_startup(const FlowState& s0) const;
  History start(const FlowState& s0) const;

  // Forcing components sampled on grid g at time t.
  Components forcing(GridId g, double t) const;
  // Lifting field (u-component) on grid g at time t; empty without a top wall.
  std::vector<double> lifting(GridId g, double t, Deriv d = {}) const;
  bool lifted() const { return !lifting_state_.empty(); }

  // g^{k+1} on the nonlinear grid; fills hist.conv_* caches.
  Components nonlinear_rhs(History& hist, double t_next) const;
  // Test-function integrals of the momentum right-hand side per component.
  Components momentum_rhs(History& hist, double t_next) const;
  Components momentum_step(const Components& rhs) const;
  // Nodal div u~ (including any lifting) on grid g.
  std::vector<double> divergence_tilde(const Components& u_tilde, double t_next, GridId g) const;
  std::vector<double> poisson_rhs(const Components& u_tilde, double t_next) const;
  std::vector<double> pressure_poisson(const std::vector<double>& rhs) const;
  // Applies the correction and advances the history; returns the new state.
  FlowState correct(const Components& u_tilde, const std::vector<double>& phi, double t_next, History& hist,
                    StepDiagnostics* diag = nullptr) const;

  FlowState step(History& hist, StepDiagnostics* diag = nullptr) const;
  Trajectory run() const;

  // ||project(div u)|| against the Correction test space for State velocity.
  double weak_divergence(const Components& u_state) const;
  double weak_divergence_tilde(const Components& u_tilde, double t_next) const;

 private:
  Components convection(const Components& u_state, GridId g) const;

  std::shared_ptr<const Discretization> space_;
  SolverConfig cfg_;
  FlowInputs inputs_;
  SolverOperators ops_;
  std::array<Components, 3> forcing_space_;  // per grid
  std::vector<double> lifting_state_;
};

}  // namespace speconet
