/// @file lbfgs.hpp
/// @brief Limited-memory BFGS with a strong-Wolfe line search and a counted
///        steepest-descent fallback.
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace speconet {

struct LbfgsOptions {
  int history = 10;
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  double plateau_tolerance = 1e-6;  // relative loss change over the window
  int plateau_window = 20;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 25;  // evaluations per line search
  int max_fallbacks = 5;     // consecutive fallback steps before giving up
};

void validate(const LbfgsOptions& o);

struct LbfgsTracePoint {
  int iteration = 0;
  double loss = 0;
  double best_loss = 0;
  double grad_norm = 0;
  double wall_ms = 0;
};

enum class LbfgsStop { GradientTolerance, Plateau, IterationLimit, LineSearchFailure };
const char* stop_name(LbfgsStop s);

struct LbfgsResult {
  std::vector<double> x;  // best point seen
  double loss = 0;
  double grad_norm = 0;
  int iterations = 0;
  int evaluations = 0;
  int fallbacks = 0;
  LbfgsStop stop = LbfgsStop::IterationLimit;
  std::vector<LbfgsTracePoint> trace;  // iteration 0 is the starting point
};

// Returns f(x) and writes its gradient into g (already sized like x).
using Objective = std::function<double(std::span<const double> x, std::span<double> g)>;

LbfgsResult lbfgs_minimize(const Objective& f, std::vector<double> x0, const LbfgsOptions& opts);

}  // namespace speconet
