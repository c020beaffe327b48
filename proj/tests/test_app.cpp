/// @file test_app.cpp
/// @brief Run configuration, presets and command contracts: config echo,
///        zero data, checkpoint-based inference and resume, ensemble output.
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "speconet/app.hpp"
#include "speconet/errors.hpp"

using namespace speconet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "speconet_test_app" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

RunConfig toy(const std::string& dir) {
  RunConfig c = preset_config("toy");
  c.out = temp_dir(dir);
  c.write_fields = false;
  return c;
}

}  // namespace

TEST_CASE("presets: every named preset validates and unknown names are rejected") {
  for (const auto& n : preset_names()) CHECK_NOTHROW(validate(preset_config(n)));
  CHECK_THROWS_AS(preset_config("4d-magic"), ConfigError);
  const auto c = preset_config("2d-forcing");
  CHECK(c.modes == 22);
  CHECK(c.train.arch.u_filters == 10);
  CHECK(c.train.arch.u_kernel == 9);
  CHECK(c.solver.steps == 100);
  CHECK(c.inputs.count == 600);
  CHECK(preset_config("2d-boundary").train.arch.phi_filters == 3);
}

TEST_CASE("config: echo round-trips through apply_config") {
  RunConfig a = preset_config("3d-beltrami");
  a.solver.dt = 0.02;
  a.ensemble_sizes = {5, 7};
  a.checkpoint = "x/y.spon";
  RunConfig b = preset_config("toy");
  apply_config(b, config_echo(a));
  CHECK(config_echo(a) == config_echo(b));
  CHECK(b.family == Family::Beltrami3D);
  CHECK(b.dim() == 3);
}

TEST_CASE("config: unknown keys, bad values and alias keys") {
  RunConfig c = preset_config("toy");
  try {
    apply_config(c, {{"solver.dt", "0.02"}, {"solver.bogus", "1"}});
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("solver.bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config(c, {{"problem.boundary", "neumann"}}), ConfigError);
  CHECK_THROWS_AS(apply_config(c, {{"problem.family", "forcing9d"}}), ConfigError);
  apply_config(c, {{"train.lbfgs.max_iter", "17"}, {"train.max_iter_phi", "5"}});
  CHECK(c.train.schedule.max_iter_u == 17);
  CHECK(c.train.schedule.max_iter_phi == 5);
  c.solver.dt = -1;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("solve: zero-data preset gives zero fields") {
  RunConfig c = preset_config("zero");
  c.out = temp_dir("zero");
  const auto out = cmd_solve(c);
  REQUIRE(out.trajectories.size() == 1u);
  for (const auto& st : out.trajectories[0].states) {
    for (const auto& comp : st.u)
      for (double v : comp) CHECK(v == 0.0);
    for (double v : st.p) CHECK(v == 0.0);
  }
  CHECK(fs::exists(c.out / "trajectories" / "manifest.json"));
  CHECK(fs::exists(c.out / "trajectories" / "sample_00000" / "manifest.json"));
  CHECK(out.errors.empty());
}

TEST_CASE("solve: Beltrami preset reports exact-solution errors") {
  RunConfig c = preset_config("3d-beltrami");
  c.modes = 8;
  c.solver.steps = 5;
  c.inputs.count = 1;
  c.write_fields = false;
  c.out = temp_dir("beltrami");
  const auto out = cmd_solve(c);
  REQUIRE(out.errors.size() == 1u);
  CHECK(out.errors[0].times.size() == 5u);
  CHECK(out.errors[0].rel_l2_u.back() < 1e-4);
  CHECK(lines(c.out / "errors.csv").front() == "sample,time,rel_l2_u,rel_l2_u1,rel_l2_u2,rel_l2_u3,rel_h1_p");
}

TEST_CASE("train/infer: inference from the checkpoint matches training bitwise") {
  RunConfig c = toy("train");
  c.inputs.count = 3;
  c.solver.steps = 4;
  c.train.schedule.block_size = 2;
  const auto tr = cmd_train(c);
  CHECK(fs::exists(c.out / "checkpoint_block_000.spon"));
  CHECK(fs::exists(c.out / "checkpoint_block_001.spon"));
  const auto head = lines(c.out / "training_log.csv").front();
  CHECK(head == "block,step,phase,iteration,loss,grad_norm,wall_time_ms");
  RunConfig ci = c;
  ci.checkpoint = c.out / "model.spon";
  ci.out = temp_dir("infer");
  const auto inf = cmd_infer(ci);
  REQUIRE(inf.predicted.size() == 3u);
  for (std::size_t s = 0; s < 3; ++s) {
    REQUIRE(inf.predicted[s].states.size() == tr.trajectories[s].states.size());
    for (std::size_t t = 0; t < inf.predicted[s].states.size(); ++t) {
      CHECK(inf.predicted[s].states[t].u == tr.trajectories[s].states[t].u);
      CHECK(inf.predicted[s].states[t].p == tr.trajectories[s].states[t].p);
    }
  }
  REQUIRE(inf.errors.size() == 3u);
  for (const auto& e : inf.errors) CHECK(e.rel_l2_tx_u < 1e-2);

  // A checkpoint for a different problem is refused.
  ci.solver.nu = 0.5;
  CHECK_THROWS_AS(cmd_infer(ci), ConfigError);
}

TEST_CASE("train: resume from a block checkpoint reproduces the next block") {
  RunConfig c = toy("resume_full");
  c.inputs.count = 2;
  c.solver.steps = 4;
  c.train.schedule.block_size = 2;
  c.train.schedule.max_iter_u = c.train.schedule.max_iter_phi = 25;
  const auto full = cmd_train(c);
  RunConfig r = c;
  r.checkpoint = c.out / "checkpoint_block_000.spon";
  r.resume = true;
  r.out = temp_dir("resume_part");
  const auto part = cmd_train(r);
  REQUIRE(part.model.blocks() == 2);
  CHECK(part.model.u_blocks[1].heads == full.model.u_blocks[1].heads);
  // The resumed log only covers block 1 and equals the full run's block-1 rows.
  std::vector<double> a, b;
  for (const auto& row : full.log)
    if (row.block == 1) a.push_back(row.loss);
  for (const auto& row : part.log) b.push_back(row.loss);
  CHECK(a == b);
}

TEST_CASE("train: no inputs and missing checkpoints are config errors") {
  RunConfig c = toy("errors");
  c.inputs.count = 0;
  CHECK_THROWS_AS(cmd_train(c), ConfigError);
  c = toy("errors2");
  c.resume = true;
  c.checkpoint = c.out / "nope.spon";
  CHECK_THROWS_AS(cmd_train(c), ConfigError);
  c.resume = false;
  CHECK_THROWS_AS(cmd_infer(c), ConfigError);
}

TEST_CASE("ensemble: sizes are sorted and the slope column is present") {
  RunConfig c = preset_config("perturbed");
  c.modes = 8;
  c.solver.steps = 5;
  c.ensemble_max = 40;
  c.ensemble_sizes = {20, 5, 10, 15};
  c.histogram_sizes = {40, 10};
  c.timing_sizes = {10, 40};
  c.out = temp_dir("ensemble");
  const auto out = cmd_ensemble(c);
  const auto conv = lines(c.out / "ensemble_convergence.csv");
  REQUIRE(conv.size() == 5u);
  CHECK(conv[0] == "count,error,slope,intercept");
  CHECK(conv[1].rfind("5,", 0) == 0);
  CHECK(conv[4].rfind("20,", 0) == 0);
  CHECK_FALSE(out.report.fit.degenerate);
  const auto lev = lines(c.out / "ensemble_levels.csv");
  CHECK(lev[1].rfind("10,", 0) == 0);
  CHECK(lev[2].rfind("40,", 0) == 0);
  REQUIRE(out.timing.size() == 2u);
  CHECK(out.timing[0].samples == 10);
  CHECK(out.timing[1].samples == 40);
  CHECK(lines(c.out / "ensemble_q.csv").size() == 41u);
}

TEST_CASE("convergence: Beltrami temporal sweep is second order") {
  RunConfig c = preset_config("3d-beltrami");
  c.modes = 8;
  c.inputs.count = 1;
  c.convergence_dts = {0.02, 0.04, 0.01};
  c.convergence_modes = {6, 8};
  c.out = temp_dir("convergence");
  const auto rows = cmd_convergence(c);
  REQUIRE(rows.size() == 5u);
  CHECK(rows[0].dt == 0.04);
  CHECK(rows[2].order == doctest::Approx(2.0).epsilon(0.15));
  CHECK(lines(c.out / "convergence.csv").front() == "kind,dt,modes,error,observed_order");
  c.family = Family::Forcing2D;
  c.inputs.family = Family::Forcing2D;
  CHECK_THROWS_AS(cmd_convergence(c), ConfigError);
}
