/// @file problems.hpp
/// @brief Random input families, the Beltrami exact solution, error metrics,
///        physical diagnostics and ensemble statistics.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "speconet/discretization.hpp"
#include "speconet/nse_solver.hpp"

namespace speconet {

enum class Family { Forcing2D, Initial2D, Boundary2D, Beltrami3D, Forcing3D, PerturbedForcing2D };

// How a family enters the network: as a forcing, as initial data, or as a
// boundary lifting.
enum class InputKind { Forcing, Initial, Boundary };

std::string family_name(Family f);
Family parse_family(const std::string& name);
InputKind input_kind(Family f);

struct RandomInputSpec {
  Family family = Family::Forcing2D;
  double sigma = 5.0;
  double mean = 0.0;
  std::uint64_t seed = 42;
  int count = 1;
  // Beltrami: resample until |C| >= truncation (0 disables).
  double truncation = 60.0;
  double nu = 0.1;  // Beltrami decay rate
};

// Re( amplitude * sum_k c_k exp(i k.x) ) with k in {0..kmax}^dim, c_k = a_k + i b_k.
struct TrigSum {
  int dim = 2;
  int kmax = 2;
  double amplitude = 1.0;
  std::vector<double> a, b;  // lexicographic in (k_x, k_y[, k_z])

  std::size_t terms() const;
  double value(const std::array<double, 3>& x) const;
  double derivative(const std::array<double, 3>& x, int axis) const;
};

struct BeltramiParams {
  int k = 1;
  double c4 = 60, c5 = 60, c6 = 60;  // c6 does not enter the velocity
  double amplitude = 2e-6;
  double nu = 0.1;
  double r = 0.0;
  double p0 = 0.0;

  std::array<double, 6> constants() const;  // a, b, c, d, e, f
  std::array<double, 3> velocity(const std::array<double, 3>& x, double t) const;
  double pressure(const std::array<double, 3>& x, double t) const;
};

struct InputSample {
  Family family = Family::Forcing2D;
  std::vector<TrigSum> fields;  // per component, or the stream function (Initial2D)
  BeltramiParams beltrami;
};

InputSample generate_sample(const RandomInputSpec& spec, int index);
std::vector<InputSample> generate(const RandomInputSpec& spec);

BeltramiParams sample_beltrami(const RandomInputSpec& spec, int index);

// Problem data handed to the classical solver.
FlowInputs flow_inputs(const InputSample& s);
// Top-wall values at x = -1 and x = +1 (boundary family only, at sin(t) = 1).
std::array<double, 2> corner_values(const InputSample& s);

// Clean forcing of the perturbed family at sin(t) = 1.
std::array<double, 2> clean_forcing(const std::array<double, 3>& x);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Nodal velocity (per component) and pressure gradient on the quadrature grid.
struct NodalSnapshot {
  double time = 0;
  Components u;
  Components grad_p;
};

NodalSnapshot nodal_snapshot(const Discretization& space, const FlowState& s);
NodalSnapshot beltrami_snapshot(const Discretization& space, const BeltramiParams& p, double t);

struct ErrorReport {
  std::vector<double> times;
  std::vector<double> rel_l2_u;                // vector velocity, per time
  std::vector<std::vector<double>> rel_l2_comp;  // [component][time]
  std::vector<double> rel_h1_p;                // per time
  double rel_l2_tx_u = 0;
  double rel_h1_tx_p = 0;
};

// Errors of pred against ref over matching time stamps (initial state skipped
// when both sequences start at t = 0 and it is identical by construction).
ErrorReport rel_errors(const Discretization& space, const std::vector<NodalSnapshot>& pred,
                       const std::vector<NodalSnapshot>& ref);

struct SampleStats {
  double mean = 0, std = 0;
};
SampleStats sample_stats(const std::vector<double>& v);

struct EnergyPoint {
  double time = 0, energy = 0, enstrophy = 0;
};
// Domain-averaged kinetic energy and enstrophy with 1/2 factors.
EnergyPoint energy_enstrophy(const Discretization& space, const FlowState& s);

// Q = integral of velocity component c over the domain.
double quantity_of_interest(const Discretization& space, const FlowState& s, int component = 0);

// ---------------------------------------------------------------------------
// Ensemble statistics
// ---------------------------------------------------------------------------

struct Histogram {
  std::vector<double> edges;
  std::vector<int> counts;
};

struct EnsembleLevel {
  int count = 0;
  double mean = 0, std = 0, skewness = 0, excess_kurtosis = 0;
  Histogram histogram;
};

struct ConvergencePoint {
  int count = 0;
  double error = 0;  // ||mean_S - mean_Smax|| in L2_x
};

struct LinearFit {
  double slope = 0, intercept = 0;
  bool degenerate = true;
};

struct EnsembleReport {
  std::vector<double> q;
  std::vector<EnsembleLevel> levels;
  std::vector<ConvergencePoint> convergence;
  LinearFit fit;
};

// Least squares of log(y) against log(x) over entries with x, y > 0; needs
// at least min_points usable entries.
LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, int min_points = 2);

Histogram histogram(const std::vector<double>& v, int bins);
EnsembleLevel describe(const std::vector<double>& v, int bins);

// fields[s] is sample s's field at the final time (any layout), weights the
// matching quadrature weights. histogram_sizes and convergence_sizes are
// prefix lengths; the reference mean uses all samples.
EnsembleReport ensemble_stats(const std::vector<double>& q, const std::vector<std::vector<double>>& fields,
                              const std::vector<double>& weights, std::vector<int> histogram_sizes,
                              std::vector<int> convergence_sizes, int bins = 20);

}  // namespace speconet
