#include "speconet/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>

#include "json.hpp"
#include "speconet/errors.hpp"
#include "speconet/rng.hpp"

namespace speconet {

namespace fs = std::filesystem;

namespace {

// Every plain key of RunConfig. Enum and path keys are handled separately.
template <class C, class V>
void visit_keys(C& c, V&& v) {
  v("run.preset", c.preset);
  v("problem.n", c.modes);
  v("problem.dealias", c.dealias);
  v("solver.dt", c.solver.dt);
  v("solver.steps", c.solver.steps);
  v("solver.nu", c.solver.nu);
  v("solver.record_every", c.solver.record_every);
  v("solver.blowup_threshold", c.solver.blowup_threshold);
  v("inputs.sigma", c.inputs.sigma);
  v("inputs.mean", c.inputs.mean);
  v("inputs.seed", c.inputs.seed);
  v("inputs.count", c.inputs.count);
  v("inputs.truncation", c.inputs.truncation);
  v("inputs.zero", c.zero_inputs);
  v("arch.u_filters", c.train.arch.u_filters);
  v("arch.u_kernel", c.train.arch.u_kernel);
  v("arch.phi_filters", c.train.arch.phi_filters);
  v("arch.phi_kernel", c.train.arch.phi_kernel);
  v("train.seed", c.train.seed);
  v("train.block_size", c.train.schedule.block_size);
  v("train.freeze_conv", c.train.schedule.freeze_conv_after_first);
  v("train.share_phi_conv", c.train.schedule.share_phi_conv);
  v("train.max_iter_u", c.train.schedule.max_iter_u);
  v("train.max_iter_phi", c.train.schedule.max_iter_phi);
  v("train.lbfgs.history", c.train.lbfgs.history);
  v("train.lbfgs.gradient_tolerance", c.train.lbfgs.gradient_tolerance);
  v("train.lbfgs.plateau_tolerance", c.train.lbfgs.plateau_tolerance);
  v("train.lbfgs.plateau_window", c.train.lbfgs.plateau_window);
  v("train.lbfgs.c1", c.train.lbfgs.c1);
  v("train.lbfgs.c2", c.train.lbfgs.c2);
  v("train.lbfgs.max_line_search", c.train.lbfgs.max_line_search);
  v("train.lbfgs.max_fallbacks", c.train.lbfgs.max_fallbacks);
  v("train.divergence_factor", c.train.divergence_factor);
  v("train.divergence_floor", c.train.divergence_floor);
  v("run.threads", c.threads);
  v("run.resume", c.resume);
  v("run.write_fields", c.write_fields);
  v("run.reference", c.reference);
  v("ensemble.source", c.ensemble_source);
  v("ensemble.sizes", c.ensemble_sizes);
  v("ensemble.max", c.ensemble_max);
  v("ensemble.histogram_sizes", c.histogram_sizes);
  v("ensemble.bins", c.histogram_bins);
  v("ensemble.component", c.ensemble_component);
  v("ensemble.timing_sizes", c.timing_sizes);
  v("ensemble.timing_oracle", c.timing_oracle);
  v("convergence.dts", c.convergence_dts);
  v("convergence.modes", c.convergence_modes);
  v("convergence.time", c.convergence_time);
}

std::string to_text(int v) { return std::to_string(v); }
std::string to_text(std::uint64_t v) { return std::to_string(v); }
std::string to_text(double v) { return fmt_double(v); }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(const std::string& v) { return v; }
template <class T>
std::string to_text(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + to_text(v[i]);
  return s;
}

std::string boundary_name(Boundary b) { return b == Boundary::Periodic ? "periodic" : "dirichlet"; }

Boundary parse_boundary(const std::string& s) {
  if (s == "periodic") return Boundary::Periodic;
  if (s == "dirichlet") return Boundary::Dirichlet;
  throw ConfigError("problem.boundary must be 'dirichlet' or 'periodic', got '" + s + "'");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<NodalSnapshot> snapshots(const Discretization& space, const Trajectory& t) {
  std::vector<NodalSnapshot> out;
  for (std::size_t i = 1; i < t.states.size(); ++i) out.push_back(nodal_snapshot(space, t.states[i]));
  return out;
}

void write_errors(const fs::path& dir, int dim, const std::vector<ErrorReport>& errors) {
  std::vector<std::string> head{"sample", "time", "rel_l2_u"};
  for (int c = 0; c < dim; ++c) head.push_back("rel_l2_u" + std::to_string(c + 1));
  head.push_back("rel_h1_p");
  CsvWriter w(dir / "errors.csv", head);
  for (std::size_t s = 0; s < errors.size(); ++s) {
    const auto& e = errors[s];
    for (std::size_t t = 0; t < e.times.size(); ++t) {
      std::vector<std::string> row{std::to_string(s), fmt_double(e.times[t]), fmt_double(e.rel_l2_u[t])};
      for (int c = 0; c < dim; ++c) row.push_back(fmt_double(e.rel_l2_comp[c][t]));
      row.push_back(fmt_double(e.rel_h1_p[t]));
      w.row(row);
    }
  }
  CsvWriter sw(dir / "errors_summary.csv", {"sample", "rel_l2_tx_u", "rel_h1_tx_p"});
  for (std::size_t s = 0; s < errors.size(); ++s) sw.values(s, errors[s].rel_l2_tx_u, errors[s].rel_h1_tx_p);
}

nlohmann::json echo_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : config_echo(cfg)) j[k] = v;
  return j;
}

// Checkpoint problem keys that inference must reproduce.
void check_compatible(const RunConfig& cfg, const std::string& metadata) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(metadata).at("config");
  } catch (const nlohmann::json::exception&) {
    throw IntegrityError("checkpoint metadata has no configuration echo");
  }
  const auto echo = config_echo(cfg);
  for (const char* key : {"problem.family", "problem.boundary", "problem.n", "problem.dealias", "solver.dt", "solver.nu"}) {
    if (!meta.contains(key)) throw IntegrityError(std::string("checkpoint metadata lacks '") + key + "'");
    if (meta[key].get<std::string>() != echo.at(key))
      throw ConfigError(std::string("configuration key '") + key + "' = " + echo.at(key) +
                        " does not match the checkpoint (" + meta[key].get<std::string>() + ")");
  }
}

// Zero-data samples carry no fields and map to all-zero problem data.
FlowInputs sample_inputs(const InputSample& s) {
  if (s.fields.empty() && s.family != Family::Beltrami3D) return {};
  return flow_inputs(s);
}

std::vector<Trajectory> model_runs(const TrainedModel& model, const TrainProblem& prob) {
  return infer(model, prob, Exec::Parallel);
}

}  // namespace

int RunConfig::dim() const { return family == Family::Beltrami3D || family == Family::Forcing3D ? 3 : 2; }

// ---------------------------------------------------------------------------
// presets
// ---------------------------------------------------------------------------

std::vector<std::string> preset_names() {
  return {"2d-forcing", "2d-initial", "2d-boundary", "3d-beltrami", "3d-forcing", "perturbed", "toy", "zero"};
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.solver.dt = 0.01;
  c.solver.steps = 100;
  c.inputs.count = 600;
  c.inputs.sigma = 5.0;
  auto arch = [&](int uf, int uk, int pf, int pk) { c.train.arch = {uf, uk, pf, pk}; };
  if (name == "2d-forcing") {
    c.family = Family::Forcing2D;
    c.boundary = Boundary::Dirichlet;
    c.modes = 22;
    c.solver.nu = 0.1;
    arch(10, 9, 10, 9);
  } else if (name == "2d-initial") {
    c.family = Family::Initial2D;
    c.boundary = Boundary::Periodic;
    c.modes = 32;
    c.solver.nu = 0.01;
    arch(3, 9, 3, 9);
  } else if (name == "2d-boundary") {
    c.family = Family::Boundary2D;
    c.boundary = Boundary::Dirichlet;
    c.modes = 62;
    c.solver.nu = 0.5;
    c.inputs.count = 300;
    arch(30, 15, 3, 15);
  } else if (name == "3d-beltrami") {
    c.family = Family::Beltrami3D;
    c.boundary = Boundary::Periodic;
    c.modes = 24;
    c.solver.nu = 0.1;
    c.inputs.mean = 60.0;
    c.inputs.sigma = 10.0;
    arch(2, 19, 2, 19);
  } else if (name == "3d-forcing") {
    c.family = Family::Forcing3D;
    c.boundary = Boundary::Dirichlet;
    c.modes = 18;
    c.solver.nu = 1.0;
    arch(3, 9, 3, 9);
  } else if (name == "perturbed") {
    c.family = Family::PerturbedForcing2D;
    c.boundary = Boundary::Periodic;
    c.modes = 12;
    c.solver.nu = 0.1;
    c.solver.record_every = 0;
    c.inputs.sigma = 1.0;
    c.inputs.count = 1000;
    arch(3, 9, 3, 9);
  } else if (name == "toy") {
    c.family = Family::Initial2D;
    c.boundary = Boundary::Periodic;
    c.modes = 8;
    c.solver.nu = 0.01;
    c.solver.steps = 4;
    c.inputs.count = 4;
    c.train.schedule.block_size = 4;
    arch(3, 3, 3, 3);
  } else if (name == "zero") {
    c.family = Family::Forcing2D;
    c.boundary = Boundary::Dirichlet;
    c.modes = 8;
    c.solver.nu = 0.1;
    c.solver.steps = 10;
    c.zero_inputs = true;
    c.inputs.count = 1;
    arch(2, 3, 2, 3);
  } else {
    std::string names;
    for (const auto& n : preset_names()) names += " " + n;
    throw ConfigError("unknown preset '" + name + "' (known:" + names + ")");
  }
  c.inputs.family = c.family;
  return c;
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
  ConfigReader r(kv);
  std::string s;
  if (r.has("problem.family")) {
    r.get("problem.family", s);
    cfg.family = parse_family(s);
    cfg.inputs.family = cfg.family;
  }
  if (r.has("problem.boundary")) {
    r.get("problem.boundary", s);
    cfg.boundary = parse_boundary(s);
  }
  if (r.has("run.out")) {
    r.get("run.out", s);
    cfg.out = s;
  }
  if (r.has("run.checkpoint")) {
    r.get("run.checkpoint", s);
    cfg.checkpoint = s;
  }
  if (r.has("train.lbfgs.max_iter")) {
    int it = 0;
    r.get("train.lbfgs.max_iter", it);
    cfg.train.schedule.max_iter_u = cfg.train.schedule.max_iter_phi = it;
  }
  visit_keys(cfg, [&](const char* key, auto& field) { r.get(key, field); });
  r.finish();
}

std::map<std::string, std::string> config_echo(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["problem.family"] = family_name(cfg.family);
  kv["problem.boundary"] = boundary_name(cfg.boundary);
  kv["run.out"] = cfg.out.string();
  kv["run.checkpoint"] = cfg.checkpoint.string();
  visit_keys(cfg, [&](const char* key, const auto& field) { kv[key] = to_text(field); });
  return kv;
}

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(c.modes >= 4, "problem.n must be >= 4");
  need(c.family != Family::Boundary2D || c.boundary == Boundary::Dirichlet, "boundary2d needs problem.boundary=dirichlet");
  need(c.boundary != Boundary::Periodic || c.modes % 2 == 0, "periodic problems need an even problem.n");
  need(c.solver.dt > 0 && std::isfinite(c.solver.dt), "solver.dt must be positive");
  need(c.solver.steps >= 1, "solver.steps must be >= 1");
  need(c.solver.nu > 0, "solver.nu must be positive");
  need(c.solver.record_every >= 0, "solver.record_every must be >= 0");
  need(c.solver.blowup_threshold > 0, "solver.blowup_threshold must be positive");
  need(c.zero_inputs || c.inputs.sigma > 0, "inputs.sigma must be positive");
  need(c.inputs.count >= 0, "inputs.count must be >= 0");
  need(c.threads >= 0, "run.threads must be >= 0");
  validate(c.train.arch);
  validate(c.train.schedule);
  validate(c.train.lbfgs);
  need(c.ensemble_source == "oracle" || c.ensemble_source == "model", "ensemble.source must be 'oracle' or 'model'");
  need(c.ensemble_max >= 2, "ensemble.max must be >= 2");
  need(c.histogram_bins >= 1, "ensemble.bins must be >= 1");
  need(c.ensemble_component >= 0 && c.ensemble_component < c.dim(), "ensemble.component out of range");
  for (int s : c.ensemble_sizes) need(s >= 1 && s <= c.ensemble_max, "ensemble.sizes entries must lie in [1, ensemble.max]");
  for (int s : c.histogram_sizes)
    need(s >= 1 && s <= c.ensemble_max, "ensemble.histogram_sizes entries must lie in [1, ensemble.max]");
  for (int s : c.timing_sizes) need(s >= 1, "ensemble.timing_sizes entries must be >= 1");
  for (double dt : c.convergence_dts) need(dt > 0, "convergence.dts entries must be positive");
  for (int n : c.convergence_modes) need(n >= 4, "convergence.modes entries must be >= 4");
  need(c.convergence_time > 0, "convergence.time must be positive");
}

// ---------------------------------------------------------------------------
// building blocks
// ---------------------------------------------------------------------------

std::shared_ptr<const Discretization> make_space(const RunConfig& cfg) {
  return Discretization::create({cfg.dim(), cfg.boundary, cfg.modes, cfg.dealias});
}

std::vector<InputSample> make_samples(const RunConfig& cfg, int count) {
  RandomInputSpec spec = cfg.inputs;
  spec.family = cfg.family;
  spec.count = count;
  spec.nu = cfg.solver.nu;
  if (cfg.zero_inputs) {
    if (cfg.family == Family::Beltrami3D) throw ConfigError("inputs.zero is not available for beltrami3d");
    InputSample s;
    s.family = cfg.family;
    return std::vector<InputSample>(static_cast<std::size_t>(count), s);
  }
  return generate(spec);
}

TrainProblem make_problem(const RunConfig& cfg, const std::vector<InputSample>& samples) {
  TrainProblem p;
  p.space = make_space(cfg);
  p.solver = cfg.solver;
  for (const auto& s : samples) p.inputs.push_back(sample_inputs(s));
  p.kind = input_kind(cfg.family);
  return p;
}

std::vector<Trajectory> oracle_runs(const std::shared_ptr<const Discretization>& space, const SolverConfig& solver,
                                    const std::vector<InputSample>& samples, Exec e) {
  const SolverOperators ops = SolverOperators::build(*space, solver);
  std::vector<Trajectory> out(samples.size());
  kernels::for_each_index(e, static_cast<int>(samples.size()), [&](int s) {
    out[s] = NseSolver(space, solver, sample_inputs(samples[s]), ops).run();
  });
  return out;
}

ErrorReport trajectory_errors(const Discretization& space, const Trajectory& pred, const Trajectory& ref) {
  return rel_errors(space, snapshots(space, pred), snapshots(space, ref));
}

ErrorReport exact_errors(const Discretization& space, const Trajectory& pred, const BeltramiParams& exact) {
  std::vector<NodalSnapshot> ref;
  for (std::size_t i = 1; i < pred.states.size(); ++i) ref.push_back(beltrami_snapshot(space, exact, pred.states[i].time));
  return rel_errors(space, snapshots(space, pred), ref);
}

void write_trajectories(const fs::path& dir, const Discretization& space, const std::vector<Trajectory>& trajectories) {
  fs::create_directories(dir);
  nlohmann::json index;
  index["prng"] = kPrngName;
  index["dim"] = space.dim();
  index["modes"] = space.modes();
  index["samples"] = nlohmann::json::array();
  char name[64];
  for (std::size_t s = 0; s < trajectories.size(); ++s) {
    std::snprintf(name, sizeof name, "sample_%05zu", s);
    const fs::path sdir = dir / name;
    fs::create_directories(sdir);
    nlohmann::json m;
    m["sample"] = s;
    m["states"] = nlohmann::json::array();
    for (const auto& st : trajectories[s].states) {
      char uf[64], pf[64];
      std::snprintf(uf, sizeof uf, "u_%05d.spfd", st.step);
      std::snprintf(pf, sizeof pf, "p_%05d.spfd", st.step);
      write_field(sdir / uf, make_field(space, Role::State, st.u, st.time));
      write_field(sdir / pf, make_field(space, Role::State, Components{st.p}, st.time));
      m["states"].push_back({{"step", st.step}, {"time", st.time}, {"u", uf}, {"p", pf}});
    }
    std::ofstream(sdir / "manifest.json") << m.dump(2) << '\n';
    index["samples"].push_back(std::string(name) + "/manifest.json");
  }
  std::ofstream(dir / "manifest.json") << index.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

SolveOutput cmd_solve(const RunConfig& cfg) {
  validate(cfg);
  fs::create_directories(cfg.out);
  const auto space = make_space(cfg);
  const auto samples = make_samples(cfg, cfg.inputs.count);
  SolveOutput out;
  out.trajectories = oracle_runs(space, cfg.solver, samples);
  if (cfg.write_fields) write_trajectories(cfg.out / "trajectories", *space, out.trajectories);

  CsvWriter diag(cfg.out / "diagnostics.csv", {"sample", "step", "div_tilde", "div_corrected", "max_abs_u"});
  CsvWriter energy(cfg.out / "energy.csv", {"sample", "time", "energy", "enstrophy"});
  for (std::size_t s = 0; s < out.trajectories.size(); ++s) {
    for (const auto& d : out.trajectories[s].diagnostics)
      diag.values(s, d.step, d.div_tilde, d.div_corrected, d.max_abs_u);
    for (const auto& st : out.trajectories[s].states) {
      const auto e = energy_enstrophy(*space, st);
      energy.values(s, e.time, e.energy, e.enstrophy);
    }
  }
  if (cfg.family == Family::Beltrami3D) {
    for (std::size_t s = 0; s < samples.size(); ++s)
      out.errors.push_back(exact_errors(*space, out.trajectories[s], samples[s].beltrami));
    write_errors(cfg.out, space->dim(), out.errors);
  }
  return out;
}

TrainResult cmd_train(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.inputs.count < 1) throw ConfigError("train needs inputs.count >= 1");
  fs::create_directories(cfg.out);
  const auto samples = make_samples(cfg, cfg.inputs.count);
  const TrainProblem prob = make_problem(cfg, samples);

  std::optional<Checkpoint> resume;
  if (cfg.resume) {
    if (cfg.checkpoint.empty()) throw ConfigError("run.resume needs run.checkpoint");
    if (!fs::exists(cfg.checkpoint)) throw ConfigError("checkpoint '" + cfg.checkpoint.string() + "' not found");
    resume = read_checkpoint(cfg.checkpoint);
    check_compatible(cfg, resume->metadata);
  }
  nlohmann::json meta;
  meta["config"] = echo_json(cfg);
  meta["prng"] = kPrngName;
  meta["initial_condition_phase"] = "sin(t) factor dropped for initial data";
  const std::string metadata = meta.dump();

  auto save = [&](const TrainResult& r) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_block_%03d.spon", r.model.blocks() - 1);
    write_checkpoint(cfg.out / name, {r.model, metadata});
    write_checkpoint(cfg.out / "model.spon", {r.model, metadata});
  };
  TrainResult r = train_sequential(prob, cfg.train, resume ? &resume->model : nullptr, save);

  CsvWriter log(cfg.out / "training_log.csv",
                {"block", "step", "phase", "iteration", "loss", "grad_norm", "wall_time_ms"});
  for (const auto& row : r.log)
    log.values(row.block, row.step, row.phase == 'u' ? "u" : "phi", row.iteration, row.loss, row.grad_norm, row.wall_ms);
  CsvWriter sum(cfg.out / "training_summary.csv", {"block", "step", "phase", "initial_loss", "final_loss",
                                                   "target_norm2", "iterations", "evaluations", "fallbacks", "stop"});
  for (const auto& s : r.summary)
    sum.values(s.block, s.step, s.phase == 'u' ? "u" : "phi", s.initial_loss, s.final_loss, s.target_norm2,
               s.iterations, s.evaluations, s.fallbacks, stop_name(s.stop));
  return r;
}

InferOutput cmd_infer(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.checkpoint.empty()) throw ConfigError("infer needs run.checkpoint (or --checkpoint)");
  if (!fs::exists(cfg.checkpoint)) throw ConfigError("checkpoint '" + cfg.checkpoint.string() + "' not found");
  const Checkpoint ck = read_checkpoint(cfg.checkpoint);
  check_compatible(cfg, ck.metadata);
  fs::create_directories(cfg.out);
  const auto samples = make_samples(cfg, cfg.inputs.count);
  const TrainProblem prob = make_problem(cfg, samples);

  InferOutput out;
  const auto t0 = std::chrono::steady_clock::now();
  out.predicted = model_runs(ck.model, prob);
  out.wall_seconds = seconds_since(t0);
  if (cfg.write_fields) write_trajectories(cfg.out / "trajectories", *prob.space, out.predicted);
  if (cfg.reference) {
    std::vector<Trajectory> ref;
    if (cfg.family != Family::Beltrami3D) ref = oracle_runs(prob.space, cfg.solver, samples);
    for (std::size_t s = 0; s < samples.size(); ++s)
      out.errors.push_back(cfg.family == Family::Beltrami3D
                               ? exact_errors(*prob.space, out.predicted[s], samples[s].beltrami)
                               : trajectory_errors(*prob.space, out.predicted[s], ref[s]));
    write_errors(cfg.out, prob.space->dim(), out.errors);
  }
  return out;
}

EnsembleOutput cmd_ensemble(const RunConfig& cfg_in) {
  validate(cfg_in);
  RunConfig cfg = cfg_in;
  cfg.solver.record_every = 0;
  fs::create_directories(cfg.out);
  const bool use_model = cfg.ensemble_source == "model";
  std::optional<Checkpoint> ck;
  if (use_model) {
    if (cfg.checkpoint.empty()) throw ConfigError("ensemble.source=model needs run.checkpoint");
    if (!fs::exists(cfg.checkpoint)) throw ConfigError("checkpoint '" + cfg.checkpoint.string() + "' not found");
    ck = read_checkpoint(cfg.checkpoint);
    check_compatible(cfg, ck->metadata);
  }
  const auto space = make_space(cfg);
  auto run = [&](const std::string& source, int count, double* seconds) {
    const auto samples = make_samples(cfg, count);
    const auto t0 = std::chrono::steady_clock::now();
    auto tr = source == "model" ? model_runs(ck->model, make_problem(cfg, samples)) : oracle_runs(space, cfg.solver, samples);
    if (seconds) *seconds = seconds_since(t0);
    return tr;
  };

  EnsembleOutput out;
  double main_seconds = 0;
  const auto traj = run(cfg.ensemble_source, cfg.ensemble_max, &main_seconds);
  const auto w = space->grid(GridId::Quad).weights();
  std::vector<double> q, weights;
  std::vector<std::vector<double>> fields;
  for (int c = 0; c < space->dim(); ++c) weights.insert(weights.end(), w.begin(), w.end());
  for (const auto& t : traj) {
    const FlowState& last = t.states.back();
    q.push_back(quantity_of_interest(*space, last, cfg.ensemble_component));
    std::vector<double> f;
    for (const auto& c : last.u) {
      const auto v = space->evaluate(Role::State, c, GridId::Quad);
      f.insert(f.end(), v.begin(), v.end());
    }
    fields.push_back(std::move(f));
  }
  out.report = ensemble_stats(q, fields, weights, cfg.histogram_sizes, cfg.ensemble_sizes, cfg.histogram_bins);

  std::vector<std::string> sources{cfg.ensemble_source};
  if (use_model && cfg.timing_oracle) sources.push_back("oracle");
  auto sizes = cfg.timing_sizes;
  std::sort(sizes.begin(), sizes.end());
  for (const auto& src : sources)
    for (int s : sizes) {
      double sec = 0;
      if (src == cfg.ensemble_source && s == cfg.ensemble_max)
        sec = main_seconds;
      else
        run(src, s, &sec);
      out.timing.push_back({src, s, sec, sec / s});
    }

  {
    CsvWriter wq(cfg.out / "ensemble_q.csv", {"sample", "q"});
    for (std::size_t i = 0; i < q.size(); ++i) wq.values(i, q[i]);
    CsvWriter wl(cfg.out / "ensemble_levels.csv", {"count", "mean", "std", "skewness", "excess_kurtosis"});
    CsvWriter wh(cfg.out / "ensemble_histograms.csv", {"count", "bin", "lower", "upper", "frequency"});
    for (const auto& l : out.report.levels) {
      wl.values(l.count, l.mean, l.std, l.skewness, l.excess_kurtosis);
      for (std::size_t b = 0; b < l.histogram.counts.size(); ++b)
        wh.values(l.count, b, l.histogram.edges[b], l.histogram.edges[b + 1], l.histogram.counts[b]);
    }
    CsvWriter wc(cfg.out / "ensemble_convergence.csv", {"count", "error", "slope", "intercept"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& p : out.report.convergence)
      wc.values(p.count, p.error, out.report.fit.degenerate ? nan : out.report.fit.slope,
                out.report.fit.degenerate ? nan : out.report.fit.intercept);
    CsvWriter wt(cfg.out / "ensemble_timing.csv", {"source", "samples", "wall_seconds", "per_sample_seconds", "speedup"});
    for (const auto& t : out.timing) {
      double speedup = nan;
      for (const auto& o : out.timing)
        if (t.source == "model" && o.source == "oracle" && o.samples == t.samples) speedup = o.wall_seconds / t.wall_seconds;
      wt.values(t.source, t.samples, t.wall_seconds, t.per_sample_seconds, speedup);
    }
  }
  return out;
}

std::vector<ConvergenceRow> cmd_convergence(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.family != Family::Beltrami3D) throw ConfigError("convergence needs the beltrami3d family (exact solution)");
  fs::create_directories(cfg.out);
  const auto samples = make_samples(cfg, 1);
  const BeltramiParams& exact = samples.at(0).beltrami;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto final_error = [&](int modes, double dt) {
    const double ratio = cfg.convergence_time / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
      throw ConfigError("convergence.time is not a multiple of dt = " + fmt_double(dt));
    RunConfig c = cfg;
    c.modes = modes;
    c.solver.dt = dt;
    c.solver.steps = static_cast<int>(std::lround(ratio));
    c.solver.record_every = 0;
    const auto space = make_space(c);
    const auto tr = NseSolver(space, c.solver, flow_inputs(samples[0])).run();
    Trajectory last;
    last.states = {tr.states.front(), tr.states.back()};
    return exact_errors(*space, last, exact).rel_l2_u.back();
  };

  std::vector<ConvergenceRow> rows;
  auto dts = cfg.convergence_dts;
  std::sort(dts.begin(), dts.end(), std::greater<>());
  for (std::size_t i = 0; i < dts.size(); ++i) {
    ConvergenceRow r{"time", dts[i], cfg.modes, final_error(cfg.modes, dts[i]), nan};
    if (i > 0) r.order = std::log(rows.back().error / r.error) / std::log(dts[i - 1] / dts[i]);
    rows.push_back(r);
  }
  auto modes = cfg.convergence_modes;
  std::sort(modes.begin(), modes.end());
  const std::size_t first_space = rows.size();
  for (std::size_t i = 0; i < modes.size(); ++i) {
    ConvergenceRow r{"space", cfg.solver.dt, modes[i], final_error(modes[i], cfg.solver.dt), nan};
    if (i > 0)
      r.order = std::log(rows.back().error / r.error) /
                std::log(static_cast<double>(modes[i]) / rows[first_space + i - 1].modes);
    rows.push_back(r);
  }
  CsvWriter w(cfg.out / "convergence.csv", {"kind", "dt", "modes", "error", "observed_order"});
  for (const auto& r : rows) w.values(r.kind, r.dt, r.modes, r.error, r.order);
  return rows;
}

}  // namespace speconet
