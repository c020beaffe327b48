#include "speconet/operator_net.hpp"

#include <cmath>

#include "speconet/errors.hpp"
#include "speconet/rng.hpp"

namespace speconet {

ConvNet init_net(const kernels::ConvShape& conv, int out_len, int heads, std::uint64_t seed) {
  kernels::validate(conv);
  require(out_len > 0 && heads > 0, "init_net: need positive output length and head count");
  ConvNet n;
  n.conv = conv;
  n.out_len = out_len;
  SplitMix64 rng(seed);
  auto fill = [&](std::vector<double>& v, std::size_t len, double fan_in) {
    const double a = 1.0 / std::sqrt(fan_in);
    v.resize(len);
    for (double& x : v) x = a * (2.0 * rng.uniform() - 1.0);
  };
  fill(n.kernel, conv.kernel_len(), static_cast<double>(conv.kernel_len() / conv.out_channels));
  n.bias.assign(static_cast<std::size_t>(conv.out_channels), 0.0);
  n.out_scale.assign(static_cast<std::size_t>(heads), 1.0);
  n.heads.resize(static_cast<std::size_t>(heads));
  for (auto& h : n.heads) fill(h, n.head_len(), static_cast<double>(n.feature_len()));
  return n;
}

namespace {

std::vector<double> scaled(std::span<const double> x, double s) {
  std::vector<double> y(x.begin(), x.end());
  for (double& v : y) v *= s;
  return y;
}

}  // namespace

double inverse_rms(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s > 0 ? std::sqrt(static_cast<double>(x.size()) / s) : 1.0;
}

Features compute_features(Exec e, const ConvNet& net, int samples, std::span<const double> inputs) {
  Features f;
  f.samples = samples;
  f.pre.resize(static_cast<std::size_t>(samples) * net.feature_len());
  f.act.resize(f.pre.size());
  kernels::conv_forward(e, net.conv, samples, net.kernel, net.bias, scaled(inputs, net.in_scale), f.pre);
  kernels::swish_forward(e, f.pre, f.act);
  return f;
}

std::vector<double> net_outputs(Exec e, const ConvNet& net, int head, const Features& f) {
  require(head >= 0 && head < static_cast<int>(net.heads.size()), "net_outputs: head index out of range");
  std::vector<double> y(static_cast<std::size_t>(f.samples) * net.out_len);
  kernels::head_forward(e, f.samples, static_cast<int>(net.feature_len()), net.out_len, f.act, net.heads[head], y);
  const double s = net.out_scale.at(static_cast<std::size_t>(head));
  for (double& v : y) v *= s;
  return y;
}

double LossTarget::norm2() const {
  double s = 0;
  for (double x : h) s += x * x;
  return s;
}

std::vector<double> pack_params(const ConvNet& net, int head, bool with_conv) {
  std::vector<double> x;
  if (with_conv) {
    x.insert(x.end(), net.kernel.begin(), net.kernel.end());
    x.insert(x.end(), net.bias.begin(), net.bias.end());
  }
  const auto& w = net.heads.at(static_cast<std::size_t>(head));
  x.insert(x.end(), w.begin(), w.end());
  return x;
}

void unpack_params(std::span<const double> x, ConvNet& net, int head, bool with_conv) {
  const std::size_t need = net.head_len() + (with_conv ? net.kernel.size() + net.bias.size() : 0);
  require(x.size() == need, "unpack_params: length mismatch");
  std::size_t o = 0;
  if (with_conv) {
    std::copy(x.begin(), x.begin() + net.kernel.size(), net.kernel.begin());
    o += net.kernel.size();
    std::copy(x.begin() + o, x.begin() + o + net.bias.size(), net.bias.begin());
    o += net.bias.size();
  }
  auto& w = net.heads.at(static_cast<std::size_t>(head));
  std::copy(x.begin() + o, x.end(), w.begin());
}

double net_loss(Exec e, const ConvNet& net, int head, const StepBatch& batch, bool with_conv,
                std::vector<double>* grad, const Features* fixed_features) {
  const HelmholtzOperator& op = *batch.target.op;
  const int S = batch.samples;
  const std::size_t u = op.unknowns();
  const int blocks = batch.target.blocks;
  require(static_cast<std::size_t>(net.out_len) == blocks * u, "net_loss: head output does not match the operator");
  require(batch.target.h.size() == static_cast<std::size_t>(S) * blocks * u, "net_loss: target shape mismatch");
  Features local;
  const Features* f = fixed_features;
  if (!f || with_conv) {
    local = compute_features(e, net, S, batch.inputs);
    f = &local;
  }
  require(f->samples == S, "net_loss: feature batch mismatch");
  const auto y = net_outputs(e, net, head, *f);

  std::vector<double> per_sample(static_cast<std::size_t>(S), 0.0);
  std::vector<double> g(grad ? y.size() : 0);
  kernels::for_each_index(e, S, [&](int s) {
    std::vector<double> r(u);
    double acc = 0;
    for (int b = 0; b < blocks; ++b) {
      const std::size_t off = (static_cast<std::size_t>(s) * blocks + b) * u;
      acc += op.residual(std::span<const double>(y.data() + off, u), std::span<const double>(batch.target.h.data() + off, u), r);
      if (grad) op.residual_gradient(r, std::span<double>(g.data() + off, u));
    }
    per_sample[static_cast<std::size_t>(s)] = acc;
  });
  double loss = 0;
  for (int s = 0; s < S; ++s) {
    if (!std::isfinite(per_sample[s])) throw NumericalError("non-finite loss for sample " + std::to_string(s));
    loss += per_sample[s];
  }
  if (!grad) return loss;

  const int n = static_cast<int>(net.feature_len());
  std::vector<double> dw(net.head_len());
  std::vector<double> df(with_conv ? f->act.size() : 0);
  const double os = net.out_scale[static_cast<std::size_t>(head)];
  for (double& v : g) v *= os;
  kernels::head_backward(e, S, n, net.out_len, f->act, net.heads[head], g, dw, df);
  grad->clear();
  if (with_conv) {
    std::vector<double> dz(df.size()), dk(net.kernel.size()), db(net.bias.size());
    kernels::swish_backward(e, f->pre, df, dz);
    kernels::conv_backward(e, net.conv, S, scaled(batch.inputs, net.in_scale), dz, dk, db);
    grad->insert(grad->end(), dk.begin(), dk.end());
    grad->insert(grad->end(), db.begin(), db.end());
  }
  grad->insert(grad->end(), dw.begin(), dw.end());
  return loss;
}

// ---------------------------------------------------------------------------
// Per-sample plumbing
// ---------------------------------------------------------------------------

SampleContext make_context(std::shared_ptr<const Discretization> space, const SolverConfig& cfg,
                           const SolverOperators& ops, FlowInputs inputs, InputKind kind) {
  SampleContext c{NseSolver(space, cfg, std::move(inputs), ops), kind, {}, {}};
  c.hist = c.solver.start(c.solver.initial_state());
  if (kind == InputKind::Initial) {
    const int d = space->dim();
    const Grid& g = space->grid(GridId::Model);
    c.initial_input.assign(static_cast<std::size_t>(d) * g.size(), 0.0);
    const auto& u0 = c.solver.inputs().initial_velocity;
    if (u0) {
      std::array<double, 3> buf{};
      for (std::size_t f = 0; f < g.size(); ++f) {
        u0(g.coord(f), std::span<double>(buf.data(), d));
        for (int a = 0; a < d; ++a) c.initial_input[a * g.size() + f] = buf[a];
      }
    }
  }
  return c;
}

std::vector<double> network_input(const SampleContext& c, double t_next) {
  const Discretization& sp = c.solver.space();
  const int d = sp.dim();
  const std::size_t n = sp.grid(GridId::Model).size();
  if (c.kind == InputKind::Initial) return c.initial_input;
  std::vector<double> x(static_cast<std::size_t>(d) * n, 0.0);
  if (c.kind == InputKind::Forcing) {
    const auto f = c.solver.forcing(GridId::Model, t_next);
    for (int a = 0; a < d; ++a) std::copy(f[a].begin(), f[a].end(), x.begin() + a * n);
  } else if (c.solver.lifted()) {
    const auto l = c.solver.lifting(GridId::Model, t_next);
    std::copy(l.begin(), l.end(), x.begin());
  }
  return x;
}

kernels::ConvShape velocity_conv(const Discretization& space, int filters, int kernel) {
  kernels::ConvShape s{space.dim(), space.dim(), filters, kernel, space.grid(GridId::Model).points()};
  kernels::validate(s);
  return s;
}

kernels::ConvShape correction_conv(const Discretization& space, int filters, int kernel) {
  kernels::ConvShape s{space.dim(), 1, filters, kernel, space.grid(GridId::Model).points()};
  kernels::validate(s);
  return s;
}

int velocity_out_len(const SolverOperators& ops, int dim) { return dim * static_cast<int>(ops.momentum->unknowns()); }
int correction_out_len(const SolverOperators& ops) { return static_cast<int>(ops.poisson->unknowns()); }

StepBatch prepare_u_step(Exec e, std::vector<SampleContext>& ctx, double t_next) {
  require(!ctx.empty(), "prepare_u_step: empty batch");
  const int S = static_cast<int>(ctx.size());
  const NseSolver& s0 = ctx[0].solver;
  const int d = s0.dim();
  const HelmholtzOperator& op = s0.momentum_operator();
  const std::size_t u = op.unknowns();
  const std::size_t in_len = static_cast<std::size_t>(d) * s0.space().grid(GridId::Model).size();
  StepBatch b;
  b.samples = S;
  b.inputs.resize(S * in_len);
  b.target.op = &op;
  b.target.blocks = d;
  b.target.h.resize(static_cast<std::size_t>(S) * d * u);
  kernels::for_each_index(e, S, [&](int s) {
    auto& c = ctx[static_cast<std::size_t>(s)];
    const auto x = network_input(c, t_next);
    std::copy(x.begin(), x.end(), b.inputs.begin() + s * in_len);
    const auto rhs = c.solver.momentum_rhs(c.hist, t_next);
    for (int a = 0; a < d; ++a) {
      const auto h = op.transform_rhs(rhs[a]);
      std::copy(h.begin(), h.end(), b.target.h.begin() + (static_cast<std::size_t>(s) * d + a) * u);
    }
  });
  return b;
}

std::vector<Components> velocity_from_outputs(const SolverOperators& ops, int dim, int samples,
                                              std::span<const double> y) {
  const std::size_t u = ops.momentum->unknowns();
  require(y.size() == static_cast<std::size_t>(samples) * dim * u, "velocity_from_outputs: shape mismatch");
  std::vector<Components> out(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s)
    for (int a = 0; a < dim; ++a)
      out[s].push_back(ops.momentum->reconstruct(y.subspan((static_cast<std::size_t>(s) * dim + a) * u, u)));
  return out;
}

StepBatch prepare_phi_step(Exec e, const std::vector<SampleContext>& ctx, const std::vector<Components>& u_tilde,
                           double t_next) {
  require(ctx.size() == u_tilde.size() && !ctx.empty(), "prepare_phi_step: batch mismatch");
  const int S = static_cast<int>(ctx.size());
  const NseSolver& s0 = ctx[0].solver;
  const HelmholtzOperator& op = s0.poisson_operator();
  const std::size_t u = op.unknowns();
  const std::size_t in_len = s0.space().grid(GridId::Model).size();
  StepBatch b;
  b.samples = S;
  b.inputs.resize(S * in_len);
  b.target.op = &op;
  b.target.blocks = 1;
  b.target.h.resize(static_cast<std::size_t>(S) * u);
  kernels::for_each_index(e, S, [&](int s) {
    const auto& c = ctx[static_cast<std::size_t>(s)];
    const auto div = c.solver.divergence_tilde(u_tilde[s], t_next, GridId::Model);
    std::copy(div.begin(), div.end(), b.inputs.begin() + s * in_len);
    const auto h = op.transform_rhs(c.solver.poisson_rhs(u_tilde[s], t_next));
    std::copy(h.begin(), h.end(), b.target.h.begin() + s * u);
  });
  return b;
}

std::vector<std::vector<double>> correction_from_outputs(const SolverOperators& ops, int samples,
                                                         std::span<const double> y) {
  const std::size_t u = ops.poisson->unknowns();
  require(y.size() == static_cast<std::size_t>(samples) * u, "correction_from_outputs: shape mismatch");
  std::vector<std::vector<double>> out;
  for (int s = 0; s < samples; ++s) out.push_back(ops.poisson->reconstruct(y.subspan(static_cast<std::size_t>(s) * u, u)));
  return out;
}

std::vector<FlowState> reconstruct_state(Exec e, std::vector<SampleContext>& ctx,
                                         const std::vector<Components>& u_tilde,
                                         const std::vector<std::vector<double>>& phi, double t_next) {
  require(ctx.size() == u_tilde.size() && ctx.size() == phi.size(), "reconstruct_state: batch mismatch");
  std::vector<FlowState> out(ctx.size());
  kernels::for_each_index(e, static_cast<int>(ctx.size()), [&](int s) {
    auto& c = ctx[static_cast<std::size_t>(s)];
    out[s] = c.solver.correct(u_tilde[s], phi[s], t_next, c.hist);
  });
  return out;
}

}  // namespace speconet
