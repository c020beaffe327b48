/// @file test_trainer.cpp
/// @brief L-BFGS on problems with known optima, and sequential training
///        contracts: freezing, determinism, resume and oracle accuracy.
#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "speconet/rng.hpp"
#include "speconet/trainer.hpp"

using namespace speconet;

namespace {

TrainProblem toy_problem(Family fam, Boundary bc, int n, int samples, int steps, double sigma = 5.0,
                         std::uint64_t seed = 42) {
  TrainProblem p;
  p.space = Discretization::create({2, bc, n, false});
  p.solver.dt = 0.01;
  p.solver.steps = steps;
  p.solver.nu = fam == Family::Initial2D ? 0.01 : 0.1;
  RandomInputSpec spec;
  spec.family = fam;
  spec.count = samples;
  spec.sigma = sigma;
  spec.seed = seed;
  for (const auto& s : generate(spec)) p.inputs.push_back(flow_inputs(s));
  p.kind = input_kind(fam);
  return p;
}

TrainConfig toy_config(int K) {
  TrainConfig c;
  c.arch = {2, 3, 2, 3};
  c.schedule.block_size = K;
  c.schedule.max_iter_u = 200;
  c.schedule.max_iter_phi = 200;
  return c;
}

double rel_err(const Components& a, const Components& b, const std::vector<double>& w, const Discretization& sp) {
  double num = 0, den = 0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const auto va = sp.evaluate(Role::State, a[c], GridId::Quad), vb = sp.evaluate(Role::State, b[c], GridId::Quad);
    for (std::size_t i = 0; i < w.size(); ++i) {
      num += w[i] * (va[i] - vb[i]) * (va[i] - vb[i]);
      den += w[i] * vb[i] * vb[i];
    }
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("lbfgs: SPD quadratic reaches the dense solution") {
  NormalSampler g(3);
  Eigen::MatrixXd B(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) B(i, j) = g.standard();
  const Eigen::MatrixXd A = B * B.transpose() + 10 * Eigen::MatrixXd::Identity(10, 10);
  Eigen::VectorXd b(10);
  for (int i = 0; i < 10; ++i) b(i) = g.standard();
  auto f = [&](std::span<const double> x, std::span<double> gr) {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), 10);
    const Eigen::VectorXd r = A * xv - b;
    Eigen::Map<Eigen::VectorXd>(gr.data(), 10) = 2 * A * r;
    return r.squaredNorm();
  };
  LbfgsOptions o;
  o.gradient_tolerance = 0;
  o.max_iterations = 30;
  const auto res = lbfgs_minimize(f, std::vector<double>(10, 0.0), o);
  const Eigen::VectorXd exact = A.ldlt().solve(b);
  double err = 0;
  for (int i = 0; i < 10; ++i) err = std::max(err, std::abs(res.x[i] - exact(i)));
  CHECK(err <= 1e-8);
  for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i].best_loss <= res.trace[i - 1].best_loss);
}

TEST_CASE("lbfgs: Rosenbrock from (-1.2, 1)") {
  auto f = [](std::span<const double> x, std::span<double> g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2 * a - 400 * x[0] * b;
    g[1] = 200 * b;
    return a * a + 100 * b * b;
  };
  LbfgsOptions o;
  o.gradient_tolerance = 1e-10;
  const auto res = lbfgs_minimize(f, {-1.2, 1.0}, o);
  CHECK(res.loss < 1e-8);
  CHECK(std::abs(res.x[0] - 1) < 1e-4);
  CHECK(std::abs(res.x[1] - 1) < 1e-4);
}

TEST_CASE("lbfgs: zero gradient returns the start immediately") {
  int calls = 0;
  auto f = [&](std::span<const double>, std::span<double> g) {
    ++calls;
    std::fill(g.begin(), g.end(), 0.0);
    return 3.0;
  };
  const auto res = lbfgs_minimize(f, {1.0, 2.0}, {});
  CHECK(calls == 1);
  CHECK(res.x == std::vector<double>{1.0, 2.0});
  CHECK(res.iterations == 0);
  CHECK(res.stop == LbfgsStop::GradientTolerance);
}

TEST_CASE("lbfgs: invalid options are rejected") {
  LbfgsOptions o;
  o.c1 = 0.95;
  CHECK_THROWS_AS(validate(o), ConfigError);
  o = {};
  o.history = 0;
  CHECK_THROWS_AS(validate(o), ConfigError);
}

TEST_CASE("lbfgs: a non-finite region triggers backtracking, not failure") {
  // f = x^2 for x < 2, NaN beyond; the first step from x = 1.9 overshoots.
  auto f = [](std::span<const double> x, std::span<double> g) {
    if (x[0] >= 2.0) return std::numeric_limits<double>::quiet_NaN();
    g[0] = 2 * x[0] - 0.1;
    return x[0] * x[0] - 0.1 * x[0];
  };
  const auto res = lbfgs_minimize(f, {1.9}, {});
  CHECK(std::abs(res.x[0] - 0.05) < 1e-6);
}

TEST_CASE("trainer: zero data trains to zero fields") {
  TrainProblem p;
  p.space = Discretization::create({2, Boundary::Dirichlet, 6, false});
  p.solver.steps = 3;
  p.inputs.push_back(FlowInputs{});
  p.kind = InputKind::Forcing;
  const auto r = train_sequential(p, toy_config(2));
  for (const auto& s : r.summary) CHECK(s.initial_loss == 0.0);
  for (const auto& st : r.trajectories[0].states)
    for (const auto& c : st.u)
      for (double v : c) CHECK(v == 0.0);
  CHECK(r.model.steps == 3);
  CHECK(r.model.blocks() == 2);
  CHECK(r.model.u_blocks[1].heads.size() == 1u);
}

TEST_CASE("trainer: conv parameters are frozen after the first step of a block") {
  auto p = toy_problem(Family::Forcing2D, Boundary::Dirichlet, 6, 2, 3);
  auto cfg = toy_config(3);
  cfg.schedule.max_iter_u = 20;
  cfg.schedule.max_iter_phi = 20;
  cfg.divergence_factor = 1e300;  // short budgets, not a divergence check
  // A one-step run gives the conv state after the first step.
  auto p1 = p;
  p1.solver.steps = 1;
  const auto r1 = train_sequential(p1, cfg);
  const auto r3 = train_sequential(p, cfg);
  CHECK(r1.model.u_blocks[0].kernel == r3.model.u_blocks[0].kernel);
  CHECK(r1.model.u_blocks[0].bias == r3.model.u_blocks[0].bias);
  CHECK(r1.model.u_blocks[0].heads[0] == r3.model.u_blocks[0].heads[0]);
}

TEST_CASE("trainer: runs are deterministic and inference reproduces training") {
  auto p = toy_problem(Family::Forcing2D, Boundary::Dirichlet, 6, 3, 4);
  auto cfg = toy_config(2);
  cfg.schedule.max_iter_u = 30;
  cfg.schedule.max_iter_phi = 30;
  kernels::set_threads(3);
  const auto a = train_sequential(p, cfg);
  kernels::set_threads(1);
  const auto b = train_sequential(p, cfg);
  kernels::set_threads(0);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.log[i].grad_norm == b.log[i].grad_norm);
  }
  const auto inf = infer(a.model, p);
  REQUIRE(inf.size() == a.trajectories.size());
  for (std::size_t s = 0; s < inf.size(); ++s) {
    REQUIRE(inf[s].states.size() == a.trajectories[s].states.size());
    for (std::size_t t = 0; t < inf[s].states.size(); ++t) {
      CHECK(inf[s].states[t].u == a.trajectories[s].states[t].u);
      CHECK(inf[s].states[t].p == a.trajectories[s].states[t].p);
    }
  }
  for (const auto& st : a.log) CHECK(std::isfinite(st.loss));
}

TEST_CASE("trainer: resume continues with identical losses") {
  auto p = toy_problem(Family::Forcing2D, Boundary::Dirichlet, 6, 2, 4);
  auto cfg = toy_config(2);
  cfg.schedule.max_iter_u = 25;
  cfg.schedule.max_iter_phi = 25;
  TrainedModel after_first;
  const auto full = train_sequential(p, cfg, nullptr, [&](const TrainResult& r) {
    if (r.model.blocks() == 1) after_first = r.model;
  });
  const auto resumed = train_sequential(p, cfg, &after_first);
  REQUIRE(resumed.model.blocks() == 2);
  CHECK(resumed.model.u_blocks[1].heads == full.model.u_blocks[1].heads);
  CHECK(resumed.model.phi_nets.back().heads == full.model.phi_nets.back().heads);
  CHECK(resumed.trajectories[1].states.back().u == full.trajectories[1].states.back().u);
}

TEST_CASE("trainer: inference beyond the trained horizon is rejected") {
  auto p = toy_problem(Family::Forcing2D, Boundary::Dirichlet, 6, 1, 2);
  auto cfg = toy_config(2);
  cfg.schedule.max_iter_u = 5;
  cfg.schedule.max_iter_phi = 5;
  const auto r = train_sequential(p, cfg);
  p.solver.steps = 3;
  CHECK_THROWS_AS(infer(r.model, p), ConfigError);
}

TEST_CASE("trainer: periodic toy matches the classical solver") {
  auto p = toy_problem(Family::Initial2D, Boundary::Periodic, 8, 4, 4);
  TrainConfig cfg;
  cfg.arch = {3, 3, 3, 3};
  cfg.schedule.block_size = 4;
  const auto r = train_sequential(p, cfg);
  const auto& sp = *p.space;
  const auto w = sp.grid(GridId::Quad).weights();
  double mean = 0;
  for (std::size_t s = 0; s < p.inputs.size(); ++s) {
    const auto ref = NseSolver(p.space, p.solver, p.inputs[s]).run();
    double acc = 0;
    for (std::size_t t = 1; t < ref.states.size(); ++t)
      acc += rel_err(r.trajectories[s].states[t].u, ref.states[t].u, w, sp);
    mean += acc / static_cast<double>(ref.states.size() - 1);
  }
  mean /= static_cast<double>(p.inputs.size());
  MESSAGE("periodic toy mean relative error " << mean);
  CHECK(mean <= 5e-2);
}
