/// @file speconet.cpp
/// @brief Command-line front end: solve, train, infer, ensemble, convergence.
///
/// Settings are layered as preset defaults, then the config file, then flags.
/// Exit codes: 0 success, 2 config/input error, 3 integrity error,
/// 4 numerical failure.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "speconet/app.hpp"
#include "speconet/errors.hpp"
#include "speconet/io.hpp"

using namespace speconet;

namespace {

struct Flags {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  std::string checkpoint;
};

RunConfig resolve(const Flags& f) {
  RunConfig cfg = f.preset.empty() ? RunConfig{} : preset_config(f.preset);
  if (!f.config.empty()) apply_config(cfg, parse_config_file(f.config));
  if (f.seed) cfg.train.seed = cfg.inputs.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.checkpoint.empty()) cfg.checkpoint = f.checkpoint;
  validate(cfg);
  kernels::set_threads(cfg.threads);
  return cfg;
}

void summarize(const SolveOutput& o) {
  std::printf("solved %zu samples\n", o.trajectories.size());
  for (std::size_t s = 0; s < o.errors.size(); ++s)
    std::printf("sample %zu: Rel.L2_x(T) = %.3e, Rel.L2_tx = %.3e\n", s, o.errors[s].rel_l2_u.back(),
                o.errors[s].rel_l2_tx_u);
}

void summarize(const TrainResult& r) {
  std::printf("trained %d steps in %d blocks\n", r.model.steps, r.model.blocks());
  if (!r.summary.empty())
    std::printf("last step normalized loss: %.3e\n", r.summary.back().final_loss);
}

void summarize(const InferOutput& o) {
  std::printf("inferred %zu samples in %.3f s\n", o.predicted.size(), o.wall_seconds);
  if (o.errors.empty()) return;
  double m = 0;
  for (const auto& e : o.errors) m += e.rel_l2_tx_u;
  std::printf("mean Rel.L2_tx velocity error: %.3e\n", m / static_cast<double>(o.errors.size()));
}

void summarize(const EnsembleOutput& o) {
  for (const auto& l : o.report.levels)
    std::printf("S=%d mean=%.6e std=%.3e skew=%.3f\n", l.count, l.mean, l.std, l.skewness);
  if (!o.report.fit.degenerate) std::printf("log-log slope: %.3f\n", o.report.fit.slope);
  for (const auto& t : o.timing)
    std::printf("%s S=%d: %.3f s (%.3e s/sample)\n", t.source.c_str(), t.samples, t.wall_seconds,
                t.per_sample_seconds);
}

void summarize(const std::vector<ConvergenceRow>& rows) {
  for (const auto& r : rows)
    std::printf("%-5s dt=%-7g N=%-3d error=%.3e order=%.3f\n", r.kind.c_str(), r.dt, r.modes, r.error, r.order);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speconet: data-free spectral operator learning for incompressible Navier-Stokes"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    std::string names;
    for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    sub->add_option("--preset", flags.preset, "Preset name (" + names + ")");
    sub->add_option("--config", flags.config, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Seed for inputs and network initialization");
    sub->add_option("--threads", flags.threads, "Worker threads (0 = OpenMP default)");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--checkpoint", flags.checkpoint, "Checkpoint path (infer, ensemble, resume)");
  };
  auto* solve = app.add_subcommand("solve", "Classical solver trajectories (and exact errors when available)");
  auto* train = app.add_subcommand("train", "Sequential data-free training");
  auto* infer_cmd = app.add_subcommand("infer", "Predict trajectories with a trained checkpoint");
  auto* ensemble = app.add_subcommand("ensemble", "Ensemble statistics of Q and timing");
  auto* conv = app.add_subcommand("convergence", "Temporal and spatial convergence against the exact solution");
  for (auto* s : {solve, train, infer_cmd, ensemble, conv}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = resolve(flags);
    if (solve->parsed()) summarize(cmd_solve(cfg));
    if (train->parsed()) summarize(cmd_train(cfg));
    if (infer_cmd->parsed()) summarize(cmd_infer(cfg));
    if (ensemble->parsed()) summarize(cmd_ensemble(cfg));
    if (conv->parsed()) summarize(cmd_convergence(cfg));
    std::printf("outputs in %s\n", cfg.out.string().c_str());
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
