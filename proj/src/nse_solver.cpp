#include "speconet/nse_solver.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "speconet/errors.hpp"

namespace speconet {

namespace {

double l2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

SolverOperators SolverOperators::build(const Discretization& space, const SolverConfig& cfg) {
  require(cfg.dt > 0 && cfg.nu > 0, "solver: need dt > 0 and nu > 0");
  return {space.make_operator(1.5 / cfg.dt, cfg.nu, Role::Velocity), space.make_operator(0.0, 1.0, Role::Correction)};
}

NseSolver::NseSolver(std::shared_ptr<const Discretization> space, const SolverConfig& cfg, FlowInputs inputs)
    : NseSolver(space, cfg, std::move(inputs), SolverOperators::build(*space, cfg)) {}

NseSolver::NseSolver(std::shared_ptr<const Discretization> space, const SolverConfig& cfg, FlowInputs inputs,
                     SolverOperators ops)
    : space_(std::move(space)), cfg_(cfg), inputs_(std::move(inputs)), ops_(std::move(ops)) {
  require(space_ != nullptr, "solver: discretization missing");
  require(cfg_.dt > 0 && cfg_.nu > 0 && cfg_.steps >= 0, "solver: need dt > 0, nu > 0, steps >= 0");
  require(ops_.momentum && ops_.poisson, "solver: operators missing");
  require(std::abs(ops_.momentum->tau() - tau()) <= 1e-12 * tau() && ops_.momentum->nu() == cfg_.nu,
          "solver: momentum operator does not match dt and nu");
  const int d = dim();
  for (int g = 0; g < 3; ++g) {
    const Grid& gr = space_->grid(static_cast<GridId>(g));
    forcing_space_[g].assign(d, std::vector<double>(gr.size(), 0.0));
    if (!inputs_.forcing.space) continue;
    std::array<double, 3> buf{};
    for (std::size_t f = 0; f < gr.size(); ++f) {
      inputs_.forcing.space(gr.coord(f), std::span<double>(buf.data(), d));
      for (int c = 0; c < d; ++c) forcing_space_[g][c][f] = buf[c];
    }
  }
  if (inputs_.top_wall) {
    require(d == 2 && space_->boundary() == Boundary::Dirichlet, "solver: top-wall data needs a 2D Legendre space");
    // g~(x) = g(x) - g(-1)(1-x)/2 - g(1)(1+x)/2, L2-projected onto the
    // Dirichlet basis; lifting L = g~_N(x)(1+y)/2 is then a polynomial.
    const auto& prof = inputs_.top_wall->profile;
    const double gm = prof(-1.0), gp = prof(1.0);
    const BasisSpec spec = space_->basis(Role::Velocity);
    const int n = spec.n_modes;
    const QuadratureRule q = gll_rule(4 * n + 12);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < q.point_count(); ++j) {
      const double x = q.nodes[j];
      const double gt = prof(x) - gm * (1 - x) / 2 - gp * (1 + x) / 2;
      for (int l = 0; l < n; ++l) rhs(l) += q.weights[j] * gt * legendre_mode(spec.kind, l, x).v;
    }
    const Eigen::VectorXd beta = assemble_mass(spec).entries.llt().solve(rhs);
    const std::vector<double> lnodal = space_->sample(GridId::Quad, [&](const std::array<double, 3>& x) {
      double s = 0;
      for (int l = 0; l < n; ++l) s += beta(l) * legendre_mode(spec.kind, l, x[0]).v;
      return s * (1.0 + x[1]) / 2.0;
    });
    lifting_state_ = space_->fit_state(lnodal);
  }
}

Components NseSolver::forcing(GridId g, double t) const {
  const double a = inputs_.forcing.factor(t);
  Components out = forcing_space_[static_cast<int>(g)];
  for (auto& c : out)
    for (double& v : c) v *= a;
  return out;
}

std::vector<double> NseSolver::lifting(GridId g, double t, Deriv d) const {
  if (lifting_state_.empty()) return {};
  auto v = space_->evaluate(Role::State, lifting_state_, g, d);
  const double a = inputs_.top_wall->time ? inputs_.top_wall->time(t) : 1.0;
  for (double& x : v) x *= a;
  return v;
}

FlowState NseSolver::initial_state() const {
  const int d = dim();
  FlowState s;
  s.step = 0;
  s.time = 0.0;
  const Grid& q = space_->grid(GridId::Quad);
  Components nodal(d, std::vector<double>(q.size(), 0.0));
  if (inputs_.initial_velocity) {
    std::array<double, 3> buf{};
    for (std::size_t f = 0; f < q.size(); ++f) {
      inputs_.initial_velocity(q.coord(f), std::span<double>(buf.data(), d));
      for (int c = 0; c < d; ++c) nodal[c][f] = buf[c];
    }
  }
  for (int c = 0; c < d; ++c) s.u.push_back(space_->fit_state(nodal[c]));
  std::vector<double> p(q.size(), 0.0);
  if (inputs_.initial_pressure)
    for (std::size_t f = 0; f < q.size(); ++f) p[f] = inputs_.initial_pressure(q.coord(f));
  s.p = space_->fit_state(p);
  return s;
}

Components NseSolver::stokes_startup(const FlowState& s0) const {
  const int d = dim();
  const auto f0 = forcing(GridId::Quad, s0.time);
  Components out;
  for (int c = 0; c < d; ++c) {
    auto v = space_->evaluate(Role::State, s0.u[c], GridId::Quad);
    std::vector<double> rate = f0[c];
    for (int a = 0; a < d; ++a) axpy(cfg_.nu, space_->evaluate(Role::State, s0.u[c], GridId::Quad, Deriv::along(a, 2)), rate);
    axpy(-1.0, space_->evaluate(Role::State, s0.p, GridId::Quad, Deriv::along(c)), rate);
    axpy(-cfg_.dt, rate, v);
    out.push_back(space_->fit_state(v));
  }
  return out;
}

History NseSolver::start(const FlowState& s0) const {
  History h;
  h.step = s0.step;
  h.u_curr = s0.u;
  h.p_curr = s0.p;
  h.u_prev = stokes_startup(s0);
  return h;
}

Components NseSolver::convection(const Components& u, GridId g) const {
  const int d = dim();
  Components vals;
  for (int a = 0; a < d; ++a) vals.push_back(space_->evaluate(Role::State, u[a], g));
  const std::size_t n = space_->grid(g).size();
  Components out(d, std::vector<double>(n, 0.0));
  for (int c = 0; c < d; ++c)
    for (int a = 0; a < d; ++a) {
      const auto du = space_->evaluate(Role::State, u[c], g, Deriv::along(a));
      for (std::size_t i = 0; i < n; ++i) out[c][i] += vals[a][i] * du[i];
    }
  return out;
}

Components NseSolver::nonlinear_rhs(History& hist, double t_next) const {
  const GridId g = space_->nonlinear_grid();
  if (hist.conv_curr.empty()) hist.conv_curr = convection(hist.u_curr, g);
  if (hist.conv_prev.empty()) hist.conv_prev = convection(hist.u_prev, g);
  Components out = forcing(g, t_next);
  for (int c = 0; c < dim(); ++c) {
    axpy(-2.0, hist.conv_curr[c], out[c]);
    axpy(1.0, hist.conv_prev[c], out[c]);
  }
  return out;
}

Components NseSolver::momentum_rhs(History& hist, double t_next) const {
  const GridId g = space_->nonlinear_grid();
  Components rhs = nonlinear_rhs(hist, t_next);
  Components out;
  const double inv = 1.0 / (2.0 * cfg_.dt);
  for (int c = 0; c < dim(); ++c) {
    std::vector<double> bdf(hist.u_curr[c].size());
    for (std::size_t i = 0; i < bdf.size(); ++i) bdf[i] = (4.0 * hist.u_curr[c][i] - hist.u_prev[c][i]) * inv;
    axpy(1.0, space_->evaluate(Role::State, bdf, g), rhs[c]);
    axpy(-1.0, space_->evaluate(Role::State, hist.p_curr, g, Deriv::along(c)), rhs[c]);
    if (c == 0 && lifted()) {
      axpy(-tau(), lifting(g, t_next), rhs[c]);
      for (int a = 0; a < dim(); ++a) axpy(cfg_.nu, lifting(g, t_next, Deriv::along(a, 2)), rhs[c]);
    }
    out.push_back(space_->project(rhs[c], g, Role::Velocity));
  }
  return out;
}

Components NseSolver::momentum_step(const Components& rhs) const {
  Components out;
  for (const auto& f : rhs) out.push_back(ops_.momentum->reconstruct(ops_.momentum->solve(ops_.momentum->transform_rhs(f))));
  return out;
}

std::vector<double> NseSolver::divergence_tilde(const Components& u_tilde, double t_next, GridId g) const {
  std::vector<double> div(space_->grid(g).size(), 0.0);
  for (int c = 0; c < dim(); ++c) axpy(1.0, space_->evaluate(Role::Velocity, u_tilde[c], g, Deriv::along(c)), div);
  if (lifted()) axpy(1.0, lifting(g, t_next, Deriv::along(0)), div);
  return div;
}

std::vector<double> NseSolver::poisson_rhs(const Components& u_tilde, double t_next) const {
  auto f = space_->project(divergence_tilde(u_tilde, t_next, GridId::Quad), GridId::Quad, Role::Correction);
  const double s = -1.5 / cfg_.dt;
  for (double& v : f) v *= s;
  return f;
}

std::vector<double> NseSolver::pressure_poisson(const std::vector<double>& rhs) const {
  return ops_.poisson->reconstruct(ops_.poisson->solve(ops_.poisson->transform_rhs(rhs)));
}

FlowState NseSolver::correct(const Components& u_tilde, const std::vector<double>& phi, double t_next, History& hist,
                             StepDiagnostics* diag) const {
  const int d = dim();
  const GridId q = GridId::Quad;
  const auto div = divergence_tilde(u_tilde, t_next, q);
  FlowState s;
  s.step = hist.step + 1;
  s.time = t_next;
  double umax = 0;
  bool finite = true;
  for (int c = 0; c < d; ++c) {
    auto v = space_->evaluate(Role::Velocity, u_tilde[c], q);
    if (c == 0 && lifted()) axpy(1.0, lifting(q, t_next), v);
    axpy(-2.0 * cfg_.dt / 3.0, space_->evaluate(Role::Correction, phi, q, Deriv::along(c)), v);
    for (double x : v) {
      finite = finite && std::isfinite(x);
      umax = std::max(umax, std::abs(x));
    }
    s.u.push_back(space_->fit_state(v));
  }
  if (!finite || umax > cfg_.blowup_threshold)
    throw NumericalError("solver blow-up at step " + std::to_string(s.step) + " (max |u| = " + std::to_string(umax) + ")");
  auto p = space_->evaluate(Role::State, hist.p_curr, q);
  axpy(1.0, space_->evaluate(Role::Correction, phi, q), p);
  axpy(-cfg_.nu, div, p);
  s.p = space_->fit_state(p);
  s.u_tilde = u_tilde;
  s.phi = phi;
  if (diag) {
    diag->step = s.step;
    diag->div_tilde = l2(space_->project(div, q, Role::Correction));
    diag->div_corrected = weak_divergence(s.u);
    diag->max_abs_u = umax;
  }
  hist.u_prev = std::move(hist.u_curr);
  hist.u_curr = s.u;
  hist.p_curr = s.p;
  hist.conv_prev = std::move(hist.conv_curr);
  hist.conv_curr.clear();
  hist.step = s.step;
  return s;
}

FlowState NseSolver::step(History& hist, StepDiagnostics* diag) const {
  const double t_next = (hist.step + 1) * cfg_.dt;
  const auto rhs = momentum_rhs(hist, t_next);
  const auto ut = momentum_step(rhs);
  const auto phi = pressure_poisson(poisson_rhs(ut, t_next));
  return correct(ut, phi, t_next, hist, diag);
}

Trajectory NseSolver::run() const {
  Trajectory tr;
  FlowState s0 = initial_state();
  History h = start(s0);
  tr.states.push_back(std::move(s0));
  for (int k = 0; k < cfg_.steps; ++k) {
    StepDiagnostics dg;
    FlowState s = step(h, &dg);
    tr.diagnostics.push_back(dg);
    const bool last = k + 1 == cfg_.steps;
    if (last || (cfg_.record_every > 0 && (k + 1) % cfg_.record_every == 0)) tr.states.push_back(std::move(s));
  }
  return tr;
}

double NseSolver::weak_divergence(const Components& u) const {
  std::vector<double> div(space_->grid(GridId::Quad).size(), 0.0);
  for (int c = 0; c < dim(); ++c) axpy(1.0, space_->evaluate(Role::State, u[c], GridId::Quad, Deriv::along(c)), div);
  return l2(space_->project(div, GridId::Quad, Role::Correction));
}

double NseSolver::weak_divergence_tilde(const Components& u_tilde, double t_next) const {
  return l2(space_->project(divergence_tilde(u_tilde, t_next, GridId::Quad), GridId::Quad, Role::Correction));
}

}  // namespace speconet
