/// @file operator_net.hpp
/// @brief SpecONet: a valid convolution with Swish followed by per-step linear
///        heads, trained on weak-form residuals of the pressure-correction
///        scheme. The velocity network predicts solver unknowns of u~ (w for
///        Legendre, interleaved alpha for Fourier); the correction networks
///        predict Phi the same way.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "speconet/kernels.hpp"
#include "speconet/nse_solver.hpp"
#include "speconet/problems.hpp"

namespace speconet {

using kernels::Exec;

// y = out_scale[j] * swish(bias + kernel (*) (in_scale * x)) heads[j];
// heads[j] is feature_len x out_len, row-major. The scales are fixed
// (not trained) and only affect conditioning.
struct ConvNet {
  kernels::ConvShape conv;
  int out_len = 0;
  std::vector<double> kernel, bias;
  std::vector<std::vector<double>> heads;
  double in_scale = 1.0;
  std::vector<double> out_scale;  // one per head

  std::size_t feature_len() const { return conv.output_len(); }
  std::size_t head_len() const { return feature_len() * static_cast<std::size_t>(out_len); }
};

using NetParamsU = ConvNet;
// One single-head network per time step.
struct NetParamsPhi {
  std::vector<ConvNet> steps;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero bias, unit scales.
ConvNet init_net(const kernels::ConvShape& conv, int out_len, int heads, std::uint64_t seed);

struct Features {
  int samples = 0;
  std::vector<double> pre, act;  // samples x feature_len
};

Features compute_features(Exec e, const ConvNet& net, int samples, std::span<const double> inputs);
std::vector<double> net_outputs(Exec e, const ConvNet& net, int head, const Features& f);

// Residual targets h (already transformed) for every sample and output block.
struct LossTarget {
  const HelmholtzOperator* op = nullptr;
  int blocks = 1;         // d for the velocity network, 1 for Phi
  std::vector<double> h;  // samples x blocks x op->unknowns()
  double norm2() const;
};

struct StepBatch {
  int samples = 0;
  std::vector<double> inputs;  // samples x conv.input_len()
  LossTarget target;
};

// 1/rms(x), or 1 for an all-zero x.
double inverse_rms(std::span<const double> x);

// Trainable parameter layout: [kernel, bias, head] with conv, [head] without.
std::vector<double> pack_params(const ConvNet& net, int head, bool with_conv);
void unpack_params(std::span<const double> x, ConvNet& net, int head, bool with_conv);

// Sum over samples and blocks of ||M P y - h||^2 and, when grad is non-null,
// its exact gradient in pack_params layout. fixed_features, when given, must
// come from the current conv parameters (used for head-only steps).
double net_loss(Exec e, const ConvNet& net, int head, const StepBatch& batch, bool with_conv,
                std::vector<double>* grad, const Features* fixed_features = nullptr);

inline double loss_u(Exec e, const NetParamsU& net, int head, const StepBatch& batch, bool with_conv,
                     std::vector<double>* grad, const Features* fixed = nullptr) {
  return net_loss(e, net, head, batch, with_conv, grad, fixed);
}
inline double loss_phi(Exec e, const ConvNet& net, const StepBatch& batch, bool with_conv, std::vector<double>* grad) {
  return net_loss(e, net, 0, batch, with_conv, grad);
}

// ---------------------------------------------------------------------------
// Per-sample trajectory context shared by training and inference
// ---------------------------------------------------------------------------

struct SampleContext {
  NseSolver solver;
  InputKind kind;
  History hist;
  std::vector<double> initial_input;  // d x model grid, Initial kind only
};

SampleContext make_context(std::shared_ptr<const Discretization> space, const SolverConfig& cfg,
                           const SolverOperators& ops, FlowInputs inputs, InputKind kind);

// Network input of the velocity network for the step ending at t_next.
std::vector<double> network_input(const SampleContext& c, double t_next);

kernels::ConvShape velocity_conv(const Discretization& space, int filters, int kernel);
kernels::ConvShape correction_conv(const Discretization& space, int filters, int kernel);
int velocity_out_len(const SolverOperators& ops, int dim);
int correction_out_len(const SolverOperators& ops);

// Inputs and momentum targets for all samples; fills history caches.
StepBatch prepare_u_step(Exec e, std::vector<SampleContext>& ctx, double t_next);
// u~ coefficients per sample from network outputs (samples x d x unknowns).
std::vector<Components> velocity_from_outputs(const SolverOperators& ops, int dim, int samples,
                                              std::span<const double> y);
StepBatch prepare_phi_step(Exec e, const std::vector<SampleContext>& ctx, const std::vector<Components>& u_tilde,
                           double t_next);
std::vector<std::vector<double>> correction_from_outputs(const SolverOperators& ops, int samples,
                                                         std::span<const double> y);
// Same algebra as the classical correction; advances each history.
std::vector<FlowState> reconstruct_state(Exec e, std::vector<SampleContext>& ctx,
                                         const std::vector<Components>& u_tilde,
                                         const std::vector<std::vector<double>>& phi, double t_next);

}  // namespace speconet
