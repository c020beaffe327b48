#include "speconet/trainer.hpp"

#include <cmath>
#include <string>

#include "speconet/errors.hpp"
#include "speconet/rng.hpp"

namespace speconet {

namespace {

bool record_step(const SolverConfig& cfg, int k) {
  return k + 1 == cfg.steps || (cfg.record_every > 0 && (k + 1) % cfg.record_every == 0);
}

std::vector<SampleContext> make_contexts(const TrainProblem& prob, const SolverOperators& ops) {
  std::vector<SampleContext> ctx;
  ctx.reserve(prob.inputs.size());
  for (const auto& in : prob.inputs) ctx.push_back(make_context(prob.space, prob.solver, ops, in, prob.kind));
  return ctx;
}

// One network-driven step for every context, using trained parameters.
std::vector<FlowState> advance(Exec e, const TrainedModel& m, const SolverOperators& ops, std::vector<SampleContext>& ctx,
                               int k, double dt) {
  const int S = static_cast<int>(ctx.size());
  const int d = ctx[0].solver.dim();
  const double t_next = (k + 1) * dt;
  const ConvNet& un = m.u_blocks.at(static_cast<std::size_t>(k / m.block_size));
  const auto batch = prepare_u_step(e, ctx, t_next);
  const auto y = net_outputs(e, un, k % m.block_size, compute_features(e, un, S, batch.inputs));
  const auto ut = velocity_from_outputs(ops, d, S, y);
  const auto pb = prepare_phi_step(e, ctx, ut, t_next);
  const auto [pn, head] = m.phi_for(k);
  const auto yp = net_outputs(e, *pn, head, compute_features(e, *pn, S, pb.inputs));
  return reconstruct_state(e, ctx, ut, correction_from_outputs(ops, S, yp), t_next);
}

// Minimizes the normalized loss of one (net, head) pair in place. Steps that
// train the convolution first fit the head on the current features, then
// continue jointly; both runs share the iteration budget.
StepSummary train_phase(ConvNet& net, int head, const StepBatch& batch, bool with_conv, const Features* fixed,
                        int max_iter, const TrainConfig& cfg, int block, int step, char phase,
                        std::vector<TrainLogRow>& log) {
  const double n2 = batch.target.norm2();
  const double scale = n2 > 0 ? 1.0 / n2 : 1.0;
  std::vector<double> grad;
  auto run = [&](bool conv, const Features* feats, int iters) {
    LbfgsOptions o = cfg.lbfgs;
    o.max_iterations = iters;
    auto objective = [&](std::span<const double> x, std::span<double> g) {
      unpack_params(x, net, head, conv);
      const double l = net_loss(Exec::Parallel, net, head, batch, conv, &grad, feats);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * grad[i];
      return scale * l;
    };
    auto res = lbfgs_minimize(objective, pack_params(net, head, conv), o);
    unpack_params(res.x, net, head, conv);
    return res;
  };

  std::vector<LbfgsResult> runs;
  if (with_conv) {
    const Features start = compute_features(Exec::Parallel, net, batch.samples, batch.inputs);
    runs.push_back(run(false, &start, max_iter));
    runs.push_back(run(true, nullptr, max_iter - runs[0].iterations));
  } else {
    runs.push_back(run(false, fixed, max_iter));
  }

  StepSummary s;
  s.block = block;
  s.step = step;
  s.phase = phase;
  s.initial_loss = runs.front().trace.front().loss;
  s.final_loss = runs.back().loss;
  s.target_norm2 = n2;
  s.stop = runs.back().stop;
  int offset = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const auto& t : runs[r].trace)
      if (r == 0 || t.iteration > 0)
        log.push_back({block, step, phase, offset + t.iteration, t.loss, t.grad_norm, t.wall_ms});
    offset += runs[r].iterations;
    s.iterations += runs[r].iterations;
    s.evaluations += runs[r].evaluations;
    s.fallbacks += runs[r].fallbacks;
  }
  return s;
}

void check_divergence(const StepSummary& s, double first, const TrainConfig& cfg) {
  if (!std::isfinite(s.final_loss) ||
      (s.final_loss > cfg.divergence_factor * first && s.final_loss > cfg.divergence_floor))
    throw NumericalError("training diverged: block " + std::to_string(s.block) + ", step " + std::to_string(s.step) +
                         ", phase " + std::string(1, s.phase) + ", loss " + std::to_string(s.final_loss) +
                         " vs block start " + std::to_string(first));
}

}  // namespace

void validate(const ArchConfig& a) {
  if (a.u_filters < 1 || a.phi_filters < 1) throw ConfigError("arch: filter counts must be >= 1");
  if (a.u_kernel < 1 || a.phi_kernel < 1) throw ConfigError("arch: kernel sizes must be >= 1");
}

void validate(const TrainSchedule& s) {
  if (s.block_size < 1) throw ConfigError("schedule: block_size must be >= 1");
  if (s.max_iter_u < 0 || s.max_iter_phi < 0) throw ConfigError("schedule: iteration budgets must be >= 0");
}

std::pair<const ConvNet*, int> TrainedModel::phi_for(int k) const {
  if (share_phi_conv) return {&phi_nets.at(static_cast<std::size_t>(k / block_size)), k % block_size};
  return {&phi_nets.at(static_cast<std::size_t>(k)), 0};
}

std::uint64_t net_seed(std::uint64_t seed, int block, int net, int step) {
  return stream_seed(stream_seed(seed, static_cast<std::uint64_t>(block) * 2 + static_cast<std::uint64_t>(net)),
                     static_cast<std::uint64_t>(step));
}

TrainResult train_sequential(const TrainProblem& prob, const TrainConfig& cfg, const TrainedModel* resume,
                             const BlockCallback& on_block) {
  validate(cfg.arch);
  validate(cfg.schedule);
  validate(cfg.lbfgs);
  if (prob.inputs.empty()) throw ConfigError("training needs at least one input sample");
  if (prob.solver.steps < 1) throw ConfigError("training needs at least one time step");
  const auto& space = *prob.space;
  const int d = space.dim();
  const int K = cfg.schedule.block_size;
  const SolverOperators ops = SolverOperators::build(space, prob.solver);
  auto ctx = make_contexts(prob, ops);
  const int S = static_cast<int>(ctx.size());

  TrainResult out;
  out.trajectories.resize(ctx.size());
  for (int s = 0; s < S; ++s) out.trajectories[s].states.push_back(ctx[s].solver.initial_state());
  auto record = [&](int k, std::vector<FlowState>& states) {
    if (!record_step(prob.solver, k)) return;
    for (int s = 0; s < S; ++s) out.trajectories[s].states.push_back(std::move(states[s]));
  };

  TrainedModel& m = out.model;
  m.arch = cfg.arch;
  m.block_size = K;
  m.share_phi_conv = cfg.schedule.share_phi_conv;
  if (resume) {
    if (resume->block_size != K || resume->share_phi_conv != m.share_phi_conv)
      throw ConfigError("resume: checkpoint schedule does not match the configuration");
    if (resume->steps > prob.solver.steps) throw ConfigError("resume: checkpoint covers more steps than configured");
    m = *resume;
    for (int k = 0; k < m.steps; ++k) {
      auto st = advance(Exec::Parallel, m, ops, ctx, k, prob.solver.dt);
      record(k, st);
    }
  }

  const int nblocks = (prob.solver.steps + K - 1) / K;
  const auto u_shape = velocity_conv(space, cfg.arch.u_filters, cfg.arch.u_kernel);
  const auto p_shape = correction_conv(space, cfg.arch.phi_filters, cfg.arch.phi_kernel);
  const int u_out = velocity_out_len(ops, d), p_out = correction_out_len(ops);
  const bool freeze = cfg.schedule.freeze_conv_after_first;

  for (int b = m.blocks(); b < nblocks; ++b) {
    const int k0 = b * K;
    const int kb = std::min(K, prob.solver.steps - k0);
    ConvNet un = init_net(u_shape, u_out, kb, net_seed(cfg.seed, b, 0, k0));
    ConvNet shared_phi;
    if (m.share_phi_conv) shared_phi = init_net(p_shape, p_out, kb, net_seed(cfg.seed, b, 1, k0));
    double first_u = 0, first_p = 0;
    for (int j = 0; j < kb; ++j) {
      const int k = k0 + j;
      const double t_next = (k + 1) * prob.solver.dt;

      const auto batch = prepare_u_step(Exec::Parallel, ctx, t_next);
      const bool u_conv = j == 0 || !freeze;
      if (j == 0) un.in_scale = inverse_rms(batch.inputs);
      un.out_scale[j] = 1.0 / inverse_rms(batch.target.h);
      Features feats;
      if (!u_conv) feats = compute_features(Exec::Parallel, un, S, batch.inputs);
      auto su = train_phase(un, j, batch, u_conv, &feats, cfg.schedule.max_iter_u, cfg, b, k, 'u', out.log);
      if (j == 0) first_u = su.final_loss;
      out.summary.push_back(su);
      check_divergence(su, first_u, cfg);
      if (u_conv) feats = compute_features(Exec::Parallel, un, S, batch.inputs);
      const auto ut = velocity_from_outputs(ops, d, S, net_outputs(Exec::Parallel, un, j, feats));

      const auto pb = prepare_phi_step(Exec::Parallel, ctx, ut, t_next);
      ConvNet local_phi;
      ConvNet* pn = &shared_phi;
      int head = j;
      bool p_conv = j == 0 || !freeze;
      if (!m.share_phi_conv) {
        local_phi = init_net(p_shape, p_out, 1, net_seed(cfg.seed, b, 1, k));
        pn = &local_phi;
        head = 0;
        p_conv = true;
      }
      if (j == 0 || !m.share_phi_conv) pn->in_scale = inverse_rms(pb.inputs);
      pn->out_scale[head] = 1.0 / inverse_rms(pb.target.h);
      Features pf;
      if (!p_conv) pf = compute_features(Exec::Parallel, *pn, S, pb.inputs);
      auto sp = train_phase(*pn, head, pb, p_conv, &pf, cfg.schedule.max_iter_phi, cfg, b, k, 'p', out.log);
      if (j == 0) first_p = sp.final_loss;
      out.summary.push_back(sp);
      check_divergence(sp, first_p, cfg);
      if (p_conv) pf = compute_features(Exec::Parallel, *pn, S, pb.inputs);
      const auto phi = correction_from_outputs(ops, S, net_outputs(Exec::Parallel, *pn, head, pf));

      auto st = reconstruct_state(Exec::Parallel, ctx, ut, phi, t_next);
      record(k, st);
      if (!m.share_phi_conv) m.phi_nets.push_back(std::move(local_phi));
    }
    m.u_blocks.push_back(std::move(un));
    if (m.share_phi_conv) m.phi_nets.push_back(std::move(shared_phi));
    m.steps = k0 + kb;
    if (on_block) on_block(out);
  }
  return out;
}

std::vector<Trajectory> infer(const TrainedModel& model, const TrainProblem& prob, Exec e) {
  if (prob.solver.steps > model.steps)
    throw ConfigError("inference horizon of " + std::to_string(prob.solver.steps) + " steps exceeds the " +
                      std::to_string(model.steps) + " trained steps");
  const SolverOperators ops = SolverOperators::build(*prob.space, prob.solver);
  std::vector<Trajectory> out(prob.inputs.size());
  kernels::for_each_index(e, static_cast<int>(prob.inputs.size()), [&](int s) {
    std::vector<SampleContext> c;
    c.push_back(make_context(prob.space, prob.solver, ops, prob.inputs[s], prob.kind));
    out[s].states.push_back(c[0].solver.initial_state());
    for (int k = 0; k < prob.solver.steps; ++k) {
      auto st = advance(Exec::Serial, model, ops, c, k, prob.solver.dt);
      if (record_step(prob.solver, k)) out[s].states.push_back(std::move(st[0]));
    }
  });
  return out;
}

}  // namespace speconet
