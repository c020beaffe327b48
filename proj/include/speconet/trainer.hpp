/// @file trainer.hpp
/// @brief Sequential data-free training of SpecONet in K-step blocks, and
///        inference with a trained model.
///
/// Each step k trains the velocity network head for step k (and the shared
/// convolution at the first step of a block), then a correction network, and
/// reconstructs (u^{k+1}, p^{k+1}) for every training sample before moving on.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "speconet/lbfgs.hpp"
#include "speconet/operator_net.hpp"

namespace speconet {

struct ArchConfig {
  int u_filters = 3;
  int u_kernel = 9;
  int phi_filters = 3;
  int phi_kernel = 9;
};

struct TrainSchedule {
  int block_size = 10;  // K
  bool freeze_conv_after_first = true;
  bool share_phi_conv = false;  // one correction conv per block instead of per step
  int max_iter_u = 500;
  int max_iter_phi = 500;
};

struct TrainConfig {
  ArchConfig arch;
  TrainSchedule schedule;
  LbfgsOptions lbfgs;
  std::uint64_t seed = 42;
  // Abort when a step's normalized loss exceeds factor x the block's first
  // step value and the floor.
  double divergence_factor = 10.0;
  double divergence_floor = 1e-4;
};

void validate(const ArchConfig& a);
void validate(const TrainSchedule& s);

// Trained parameters. Block b covers steps [b K, min((b+1) K, steps)).
struct TrainedModel {
  ArchConfig arch;
  int block_size = 10;
  bool share_phi_conv = false;
  int steps = 0;                    // trained steps
  std::vector<ConvNet> u_blocks;    // one per block, one head per step
  std::vector<ConvNet> phi_nets;    // per step, or per block when shared

  int blocks() const { return static_cast<int>(u_blocks.size()); }
  // Network and head index of the correction net for step k.
  std::pair<const ConvNet*, int> phi_for(int k) const;
};

struct TrainLogRow {
  int block = 0;
  int step = 0;  // global step index k (training target at k+1)
  char phase = 'u';  // 'u' or 'p' (phi)
  int iteration = 0;
  double loss = 0;  // normalized objective
  double grad_norm = 0;
  double wall_ms = 0;
};

struct StepSummary {
  int block = 0, step = 0;
  char phase = 'u';
  double initial_loss = 0, final_loss = 0;  // normalized
  double target_norm2 = 0;
  int iterations = 0, evaluations = 0, fallbacks = 0;
  LbfgsStop stop = LbfgsStop::IterationLimit;
};

struct TrainResult {
  TrainedModel model;
  std::vector<TrainLogRow> log;
  std::vector<StepSummary> summary;
  // Training-time reconstructions (initial state, then every recorded step).
  std::vector<Trajectory> trajectories;
};

struct TrainProblem {
  std::shared_ptr<const Discretization> space;
  SolverConfig solver;  // dt, steps (total), nu, record_every
  std::vector<FlowInputs> inputs;
  InputKind kind = InputKind::Forcing;
};

using BlockCallback = std::function<void(const TrainResult& partial)>;

// Runs sequential per-step training. When resume holds trained
// blocks, their history is recomputed by inference and training continues
// with the next block. on_block fires after every completed block.
TrainResult train_sequential(const TrainProblem& prob, const TrainConfig& cfg, const TrainedModel* resume = nullptr,
                             const BlockCallback& on_block = {});

// Predicted trajectories (parallel over samples). Steps beyond the model's
// trained range are rejected.
std::vector<Trajectory> infer(const TrainedModel& model, const TrainProblem& prob, Exec e = Exec::Parallel);

// Seeds for block b network j (0: velocity, 1: correction) at step k.
std::uint64_t net_seed(std::uint64_t seed, int block, int net, int step);

}  // namespace speconet
