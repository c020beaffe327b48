#include "speconet/lbfgs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

#include "speconet/errors.hpp"

namespace speconet {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct Pair {
  std::vector<double> s, y;
  double rho;
};

// Point on the search line: step length, value, directional derivative.
struct LinePoint {
  double a, f, d;
};

// Minimizer of the cubic through two line points, or NaN when undefined.
double cubic_min(const LinePoint& p, const LinePoint& q) {
  const double d1 = p.d + q.d - 3.0 * (p.f - q.f) / (p.a - q.a);
  const double disc = d1 * d1 - p.d * q.d;
  if (!(disc >= 0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), q.a - p.a);
  return q.a - (q.a - p.a) * (q.d + d2 - d1) / (q.d - p.d + 2.0 * d2);
}

class LineSearch {
 public:
  LineSearch(const Objective& f, const LbfgsOptions& o, std::span<const double> x, std::span<const double> dir,
             double f0, double d0)
      : f_(f), o_(o), x_(x), dir_(dir), f0_(f0), d0_(d0), xt_(x.size()), gt_(x.size()) {}

  // Strong-Wolfe step; on success xt()/gt()/ft() hold the accepted point.
  bool run(double a_init) {
    LinePoint prev{0.0, f0_, d0_};
    double a = a_init;
    for (int i = 0; i < o_.max_line_search; ++i) {
      const LinePoint cur = eval(a);
      if (cur.f > f0_ + o_.c1 * a * d0_ || (i > 0 && cur.f >= prev.f)) return zoom(prev, cur);
      if (std::abs(cur.d) <= -o_.c2 * d0_) return true;
      if (cur.d >= 0) return zoom(cur, prev);
      prev = cur;
      a *= 2.0;
    }
    return false;
  }

  int evaluations() const { return evals_; }
  const std::vector<double>& xt() const { return xt_; }
  const std::vector<double>& gt() const { return gt_; }
  double ft() const { return ft_; }

 private:
  LinePoint eval(double a) {
    for (std::size_t i = 0; i < x_.size(); ++i) xt_[i] = x_[i] + a * dir_[i];
    ++evals_;
    ft_ = f_(xt_, gt_);
    if (!std::isfinite(ft_)) return {a, std::numeric_limits<double>::infinity(), 0.0};
    return {a, ft_, dot(gt_, dir_)};
  }

  bool zoom(LinePoint lo, LinePoint hi) {
    while (evals_ < o_.max_line_search) {
      const double width = hi.a - lo.a;
      if (std::abs(width) < 1e-16 * std::max(1.0, std::abs(lo.a))) return false;
      double a = std::isfinite(hi.f) ? cubic_min(lo, hi) : std::numeric_limits<double>::quiet_NaN();
      const double left = lo.a + 0.1 * width, right = hi.a - 0.1 * width;
      if (!std::isfinite(a) || (a - left) * (a - right) > 0) a = lo.a + 0.5 * width;
      const LinePoint cur = eval(a);
      if (cur.f > f0_ + o_.c1 * a * d0_ || cur.f >= lo.f) {
        hi = cur;
      } else {
        if (std::abs(cur.d) <= -o_.c2 * d0_) return true;
        if (cur.d * width >= 0) hi = lo;
        lo = cur;
      }
    }
    return false;
  }

  const Objective& f_;
  const LbfgsOptions& o_;
  std::span<const double> x_, dir_;
  double f0_, d0_;
  std::vector<double> xt_, gt_;
  double ft_ = 0;
  int evals_ = 0;
};

}  // namespace

void validate(const LbfgsOptions& o) {
  if (!(o.c1 > 0 && o.c1 < o.c2 && o.c2 < 1)) throw ConfigError("lbfgs: need 0 < c1 < c2 < 1");
  if (o.history < 1) throw ConfigError("lbfgs: history must be >= 1");
  if (o.max_iterations < 0) throw ConfigError("lbfgs: max_iterations must be >= 0");
  if (o.plateau_window < 1) throw ConfigError("lbfgs: plateau window must be >= 1");
  if (o.max_line_search < 2) throw ConfigError("lbfgs: max_line_search must be >= 2");
  if (!(o.gradient_tolerance >= 0) || !(o.plateau_tolerance >= 0)) throw ConfigError("lbfgs: tolerances must be >= 0");
}

const char* stop_name(LbfgsStop s) {
  switch (s) {
    case LbfgsStop::GradientTolerance: return "gradient";
    case LbfgsStop::Plateau: return "plateau";
    case LbfgsStop::IterationLimit: return "iterations";
    case LbfgsStop::LineSearchFailure: return "line_search";
  }
  return "?";
}

LbfgsResult lbfgs_minimize(const Objective& f, std::vector<double> x, const LbfgsOptions& o) {
  validate(o);
  const auto t0 = std::chrono::steady_clock::now();
  auto ms = [&] { return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count(); };
  const std::size_t n = x.size();
  std::vector<double> g(n), dir(n), q(n);
  double fx = f(x, g);
  LbfgsResult r;
  r.evaluations = 1;
  if (!std::isfinite(fx)) throw NumericalError("lbfgs: non-finite objective at the starting point");
  r.x = x;
  r.loss = fx;
  r.grad_norm = norm(g);
  r.trace.push_back({0, fx, fx, r.grad_norm, ms()});
  if (r.grad_norm <= o.gradient_tolerance) {
    r.stop = LbfgsStop::GradientTolerance;
    return r;
  }

  std::deque<Pair> mem;
  std::vector<double> alpha(static_cast<std::size_t>(o.history));
  int consecutive_fallbacks = 0;
  r.stop = LbfgsStop::IterationLimit;
  for (int it = 1; it <= o.max_iterations; ++it) {
    // Two-loop recursion.
    q = g;
    for (int j = static_cast<int>(mem.size()) - 1; j >= 0; --j) {
      alpha[j] = mem[j].rho * dot(mem[j].s, q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[j] * mem[j].y[i];
    }
    const double gamma = mem.empty() ? 1.0 : dot(mem.back().s, mem.back().y) / dot(mem.back().y, mem.back().y);
    for (std::size_t i = 0; i < n; ++i) q[i] *= gamma;
    for (std::size_t j = 0; j < mem.size(); ++j) {
      const double b = mem[j].rho * dot(mem[j].y, q);
      for (std::size_t i = 0; i < n; ++i) q[i] += (alpha[j] - b) * mem[j].s[i];
    }
    for (std::size_t i = 0; i < n; ++i) dir[i] = -q[i];
    double d0 = dot(g, dir);
    const double gn = norm(g);
    if (!(d0 < 0)) {
      mem.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      d0 = -gn * gn;
    }
    const double a_init = mem.empty() ? std::min(1.0, 1.0 / gn) : 1.0;

    LineSearch ls(f, o, x, dir, fx, d0);
    const bool ok = ls.run(a_init);
    r.evaluations += ls.evaluations();
    std::vector<double> xn, gnew(n);
    double fn = 0;
    if (ok) {
      xn = ls.xt();
      gnew = ls.gt();
      fn = ls.ft();
      consecutive_fallbacks = 0;
    } else {
      // Steepest descent with step halving.
      mem.clear();
      ++r.fallbacks;
      bool found = false;
      double a = 1.0 / gn;
      xn.resize(n);
      for (int h = 0; h < 60 && !found; ++h, a *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] - a * g[i];
        fn = f(xn, gnew);
        ++r.evaluations;
        found = std::isfinite(fn) && fn < fx;
      }
      if (!found || ++consecutive_fallbacks > o.max_fallbacks) {
        r.stop = LbfgsStop::LineSearchFailure;
        break;
      }
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = xn[i] - x[i];
      p.y[i] = gnew[i] - g[i];
    }
    const double sy = dot(p.s, p.y);
    if (sy > 1e-12 * norm(p.s) * norm(p.y) && sy > 0) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > o.history) mem.pop_front();
    }
    x = std::move(xn);
    g = std::move(gnew);
    fx = fn;
    r.iterations = it;
    const double gx = norm(g);
    if (fx < r.loss) {
      r.loss = fx;
      r.x = x;
      r.grad_norm = gx;
    }
    r.trace.push_back({it, fx, r.loss, gx, ms()});
    if (gx <= o.gradient_tolerance) {
      r.stop = LbfgsStop::GradientTolerance;
      break;
    }
    if (it >= o.plateau_window) {
      const double old = r.trace[static_cast<std::size_t>(it - o.plateau_window)].best_loss;
      if (old - r.loss <= o.plateau_tolerance * std::abs(old)) {
        r.stop = LbfgsStop::Plateau;
        break;
      }
    }
  }
  return r;
}

}  // namespace speconet
