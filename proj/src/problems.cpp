#include "speconet/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "speconet/errors.hpp"
#include "speconet/rng.hpp"

namespace speconet {

namespace {

struct FamilyInfo {
  Family family;
  const char* name;
  InputKind kind;
};

constexpr FamilyInfo kFamilies[] = {
    {Family::Forcing2D, "forcing2d", InputKind::Forcing},
    {Family::Initial2D, "initial2d", InputKind::Initial},
    {Family::Boundary2D, "boundary2d", InputKind::Boundary},
    {Family::Beltrami3D, "beltrami3d", InputKind::Initial},
    {Family::Forcing3D, "forcing3d", InputKind::Forcing},
    {Family::PerturbedForcing2D, "perturbed2d", InputKind::Forcing},
};

const FamilyInfo& info(Family f) {
  for (const auto& i : kFamilies)
    if (i.family == f) return i;
  throw ContractViolation("unknown family");
}

TrigSum draw_sum(NormalSampler& rng, int dim, int kmax, double amplitude, double mean, double sigma) {
  TrigSum s;
  s.dim = dim;
  s.kmax = kmax;
  s.amplitude = amplitude;
  const std::size_t n = s.terms();
  s.a.resize(n);
  s.b.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.a[i] = rng(mean, sigma);
    s.b[i] = rng(mean, sigma);
  }
  return s;
}

double sin_time(double t) { return std::sin(t); }

double weighted_sq(const std::vector<double>& w, const std::vector<double>& v) {
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * v[i] * v[i];
  return s;
}

double weighted_diff_sq(const std::vector<double>& w, const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += w[i] * d * d;
  }
  return s;
}

double safe_ratio(double num, double den) {
  if (den > 0) return std::sqrt(num / den);
  return num > 0 ? std::numeric_limits<double>::infinity() : 0.0;
}

}  // namespace

std::string family_name(Family f) { return info(f).name; }

Family parse_family(const std::string& name) {
  for (const auto& i : kFamilies)
    if (name == i.name) return i.family;
  throw ConfigError("unknown input family '" + name + "'");
}

InputKind input_kind(Family f) { return info(f).kind; }

// ---------------------------------------------------------------------------
// TrigSum
// ---------------------------------------------------------------------------

std::size_t TrigSum::terms() const {
  std::size_t n = 1;
  for (int d = 0; d < dim; ++d) n *= static_cast<std::size_t>(kmax + 1);
  return n;
}

double TrigSum::value(const std::array<double, 3>& x) const {
  const std::size_t n = terms();
  const std::size_t m = static_cast<std::size_t>(kmax + 1);
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double theta = 0;
    std::size_t rem = i;
    for (int d = dim - 1; d >= 0; --d) {
      theta += static_cast<double>(rem % m) * x[d];
      rem /= m;
    }
    s += a[i] * std::cos(theta) - b[i] * std::sin(theta);
  }
  return amplitude * s;
}

double TrigSum::derivative(const std::array<double, 3>& x, int axis) const {
  const std::size_t n = terms();
  const std::size_t m = static_cast<std::size_t>(kmax + 1);
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double theta = 0, ka = 0;
    std::size_t rem = i;
    for (int d = dim - 1; d >= 0; --d) {
      const double kd = static_cast<double>(rem % m);
      theta += kd * x[d];
      if (d == axis) ka = kd;
      rem /= m;
    }
    s -= ka * (a[i] * std::sin(theta) + b[i] * std::cos(theta));
  }
  return amplitude * s;
}

// ---------------------------------------------------------------------------
// Beltrami
// ---------------------------------------------------------------------------

std::array<double, 6> BeltramiParams::constants() const {
  const double s3 = std::sqrt(3.0);
  const double c1 = (s3 - r) * (s3 * r - 1.0);
  const double c2 = (s3 + r) * (s3 * r + 1.0);
  const double c3 = 3.0 * r * r - 1.0;
  return {c1 * c4, c3 * c4, c2 * c5, c3 * c5, c3, r * c3};
}

std::array<double, 3> BeltramiParams::velocity(const std::array<double, 3>& x, double t) const {
  const auto [a, b, c, d, e, f] = constants();
  const double kk = static_cast<double>(k);
  const double decay = amplitude * std::exp(-3.0 * nu * kk * kk * t);
  // Cyclic in (x, y, z): component i uses (X, Y, Z) = (x_i, x_{i+1}, x_{i+2}).
  std::array<double, 3> u{};
  for (int i = 0; i < 3; ++i) {
    const double X = kk * x[i], Y = kk * x[(i + 1) % 3], Z = kk * x[(i + 2) % 3];
    const double t1 = (a * std::cos(X) + b * std::sin(X)) * (-c * std::sin(Y) + d * std::cos(Y)) *
                      (e * std::cos(Z) + f * std::sin(Z));
    const double t2 = (-a * std::sin(Z) + b * std::cos(Z)) * (c * std::cos(X) + d * std::sin(X)) *
                      (e * std::cos(Y) + f * std::sin(Y));
    u[i] = decay * (t1 - t2);
  }
  return u;
}

double BeltramiParams::pressure(const std::array<double, 3>& x, double t) const {
  const auto u = velocity(x, t);
  return p0 - 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
}

BeltramiParams sample_beltrami(const RandomInputSpec& spec, int index) {
  NormalSampler rng(spec.seed, static_cast<std::uint64_t>(index));
  BeltramiParams p;
  p.nu = spec.nu;
  p.k = 1 + static_cast<int>(rng.engine().next() % 3);
  auto draw = [&] {
    for (int tries = 0; tries < 100000; ++tries) {
      const double v = rng(spec.mean, spec.sigma);
      if (spec.truncation <= 0 || std::abs(v) >= spec.truncation) return v;
    }
    throw ConfigError("beltrami: truncation rule rejects every draw");
  };
  p.c4 = draw();
  p.c5 = draw();
  p.c6 = draw();
  return p;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

InputSample generate_sample(const RandomInputSpec& spec, int index) {
  if (!(spec.sigma > 0)) throw ConfigError("input sigma must be positive");
  InputSample s;
  s.family = spec.family;
  if (spec.family == Family::Beltrami3D) {
    s.beltrami = sample_beltrami(spec, index);
    return s;
  }
  NormalSampler rng(spec.seed, static_cast<std::uint64_t>(index));
  switch (spec.family) {
    case Family::Forcing2D:
      for (int c = 0; c < 2; ++c) s.fields.push_back(draw_sum(rng, 2, 2, 1.0 / 12.0, spec.mean, spec.sigma));
      break;
    case Family::PerturbedForcing2D:
      for (int c = 0; c < 2; ++c) s.fields.push_back(draw_sum(rng, 2, 2, 1.0 / 24.0, spec.mean, spec.sigma));
      break;
    case Family::Initial2D:
      s.fields.push_back(draw_sum(rng, 2, 2, 1.0 / 240.0, spec.mean, spec.sigma));
      break;
    case Family::Boundary2D:
      s.fields.push_back(draw_sum(rng, 1, 9, 0.015, spec.mean, spec.sigma));
      break;
    case Family::Forcing3D:
      for (int c = 0; c < 3; ++c) s.fields.push_back(draw_sum(rng, 3, 2, 0.5, spec.mean, spec.sigma));
      break;
    case Family::Beltrami3D:
      break;
  }
  return s;
}

std::vector<InputSample> generate(const RandomInputSpec& spec) {
  if (spec.count < 0) throw ConfigError("input count must be non-negative");
  std::vector<InputSample> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) out.push_back(generate_sample(spec, i));
  return out;
}

std::array<double, 2> clean_forcing(const std::array<double, 3>& x) {
  return {1.5 * (1.0 + std::cos(x[1]) - std::sin(x[0]) - std::sin(x[0] + x[1])),
          1.5 * (1.0 + std::sin(x[1]) - std::cos(x[0]) - std::cos(x[0] + x[1]))};
}

FlowInputs flow_inputs(const InputSample& s) {
  FlowInputs in;
  switch (s.family) {
    case Family::Forcing2D:
    case Family::Forcing3D: {
      const auto fields = s.fields;
      in.forcing.time = sin_time;
      in.forcing.space = [fields](const std::array<double, 3>& x, std::span<double> out) {
        for (std::size_t c = 0; c < fields.size(); ++c) out[c] = fields[c].value(x);
      };
      break;
    }
    case Family::PerturbedForcing2D: {
      const auto fields = s.fields;
      in.forcing.time = sin_time;
      in.forcing.space = [fields](const std::array<double, 3>& x, std::span<double> out) {
        const auto f = clean_forcing(x);
        for (int c = 0; c < 2; ++c) out[c] = f[c] + fields[c].value(x);
      };
      break;
    }
    case Family::Initial2D: {
      const TrigSum psi = s.fields.at(0);
      in.forcing.space = [](const std::array<double, 3>& x, std::span<double> out) {
        out[0] = out[1] = std::sin(x[0]) * std::sin(x[1]);
      };
      in.initial_velocity = [psi](const std::array<double, 3>& x, std::span<double> out) {
        out[0] = -psi.derivative(x, 1);
        out[1] = psi.derivative(x, 0);
      };
      break;
    }
    case Family::Boundary2D: {
      const TrigSum g = s.fields.at(0);
      in.top_wall = TopWallData{sin_time, [g](double x) { return g.value({x, 0, 0}); }};
      break;
    }
    case Family::Beltrami3D: {
      const BeltramiParams p = s.beltrami;
      in.initial_velocity = [p](const std::array<double, 3>& x, std::span<double> out) {
        const auto u = p.velocity(x, 0.0);
        for (int c = 0; c < 3; ++c) out[c] = u[c];
      };
      in.initial_pressure = [p](const std::array<double, 3>& x) { return p.pressure(x, 0.0); };
      break;
    }
  }
  return in;
}

std::array<double, 2> corner_values(const InputSample& s) {
  require(s.family == Family::Boundary2D, "corner_values: boundary family only");
  return {s.fields.at(0).value({-1.0, 0, 0}), s.fields.at(0).value({1.0, 0, 0})};
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

NodalSnapshot nodal_snapshot(const Discretization& space, const FlowState& s) {
  NodalSnapshot n;
  n.time = s.time;
  for (const auto& c : s.u) n.u.push_back(space.evaluate(Role::State, c, GridId::Quad));
  for (int a = 0; a < space.dim(); ++a) n.grad_p.push_back(space.evaluate(Role::State, s.p, GridId::Quad, Deriv::along(a)));
  return n;
}

NodalSnapshot beltrami_snapshot(const Discretization& space, const BeltramiParams& p, double t) {
  require(space.dim() == 3, "beltrami_snapshot: 3D space required");
  const Grid& g = space.grid(GridId::Quad);
  NodalSnapshot n;
  n.time = t;
  n.u.assign(3, std::vector<double>(g.size()));
  n.grad_p.assign(3, std::vector<double>(g.size()));
  for (std::size_t f = 0; f < g.size(); ++f) {
    const auto u = p.velocity(g.coord(f), t);
    for (int c = 0; c < 3; ++c) n.u[c][f] = u[c];
  }
  // The exact pressure is band-limited on the grid, so its spectral gradient is exact.
  std::vector<double> pn(g.size());
  for (std::size_t f = 0; f < g.size(); ++f) pn[f] = p.pressure(g.coord(f), t);
  const auto pc = space.fit_state(pn);
  for (int a = 0; a < 3; ++a) n.grad_p[a] = space.evaluate(Role::State, pc, GridId::Quad, Deriv::along(a));
  return n;
}

ErrorReport rel_errors(const Discretization& space, const std::vector<NodalSnapshot>& pred,
                       const std::vector<NodalSnapshot>& ref) {
  require(pred.size() == ref.size(), "rel_errors: trajectory lengths differ");
  const auto w = space.grid(GridId::Quad).weights();
  ErrorReport r;
  const std::size_t d = static_cast<std::size_t>(space.dim());
  r.rel_l2_comp.assign(d, {});
  double eu = 0, nu = 0, ep = 0, np = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    require(std::abs(pred[t].time - ref[t].time) <= 1e-9 * std::max(1.0, std::abs(ref[t].time)),
            "rel_errors: time stamps differ");
    require(pred[t].u.size() == d && ref[t].u.size() == d, "rel_errors: component count mismatch");
    double e = 0, n = 0;
    for (std::size_t c = 0; c < d; ++c) {
      require(pred[t].u[c].size() == w.size() && ref[t].u[c].size() == w.size(), "rel_errors: grid mismatch");
      const double ec = weighted_diff_sq(w, pred[t].u[c], ref[t].u[c]);
      const double nc = weighted_sq(w, ref[t].u[c]);
      r.rel_l2_comp[c].push_back(safe_ratio(ec, nc));
      e += ec;
      n += nc;
    }
    double gp = 0, gn = 0;
    for (std::size_t c = 0; c < d && c < pred[t].grad_p.size() && c < ref[t].grad_p.size(); ++c) {
      gp += weighted_diff_sq(w, pred[t].grad_p[c], ref[t].grad_p[c]);
      gn += weighted_sq(w, ref[t].grad_p[c]);
    }
    r.times.push_back(ref[t].time);
    r.rel_l2_u.push_back(safe_ratio(e, n));
    r.rel_h1_p.push_back(safe_ratio(gp, gn));
    eu += e;
    nu += n;
    ep += gp;
    np += gn;
  }
  r.rel_l2_tx_u = safe_ratio(eu, nu);
  r.rel_h1_tx_p = safe_ratio(ep, np);
  return r;
}

SampleStats sample_stats(const std::vector<double>& v) {
  SampleStats s;
  if (v.empty()) return s;
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

EnergyPoint energy_enstrophy(const Discretization& space, const FlowState& s) {
  const auto w = space.grid(GridId::Quad).weights();
  const double vol = std::accumulate(w.begin(), w.end(), 0.0);
  const int d = space.dim();
  EnergyPoint e;
  e.time = s.time;
  std::vector<std::vector<double>> du(d * d);  // du[c*d+a] = d u_c / d x_a
  for (int c = 0; c < d; ++c) {
    e.energy += 0.5 * weighted_sq(w, space.evaluate(Role::State, s.u[c], GridId::Quad));
    for (int a = 0; a < d; ++a) du[c * d + a] = space.evaluate(Role::State, s.u[c], GridId::Quad, Deriv::along(a));
  }
  std::vector<double> om(w.size());
  if (d == 2) {
    for (std::size_t i = 0; i < w.size(); ++i) om[i] = du[1 * 2 + 0][i] - du[0 * 2 + 1][i];
    e.enstrophy = 0.5 * weighted_sq(w, om);
  } else {
    // omega_i = d_a u_b - d_b u_a with (i, a, b) cyclic.
    for (int i = 0; i < 3; ++i) {
      const int a = (i + 1) % 3, b = (i + 2) % 3;
      for (std::size_t f = 0; f < w.size(); ++f) om[f] = du[b * 3 + a][f] - du[a * 3 + b][f];
      e.enstrophy += 0.5 * weighted_sq(w, om);
    }
  }
  e.energy /= vol;
  e.enstrophy /= vol;
  return e;
}

double quantity_of_interest(const Discretization& space, const FlowState& s, int component) {
  const auto w = space.grid(GridId::Quad).weights();
  const auto v = space.evaluate(Role::State, s.u.at(static_cast<std::size_t>(component)), GridId::Quad);
  double q = 0;
  for (std::size_t i = 0; i < w.size(); ++i) q += w[i] * v[i];
  return q;
}

// ---------------------------------------------------------------------------
// Ensemble statistics
// ---------------------------------------------------------------------------

LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, int min_points) {
  require(x.size() == y.size(), "loglog_fit: length mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0 && y[i] > 0 && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  LinearFit f;
  if (static_cast<int>(lx.size()) < std::max(2, min_points)) return f;
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx <= 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.degenerate = false;
  return f;
}

Histogram histogram(const std::vector<double>& v, int bins) {
  require(bins >= 1, "histogram: need at least one bin");
  Histogram h;
  if (v.empty()) return h;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    h.edges = {lo, hi};
    h.counts = {static_cast<int>(v.size())};
    return h;
  }
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double x : v) {
    int b = static_cast<int>((x - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[b];
  }
  return h;
}

EnsembleLevel describe(const std::vector<double>& v, int bins) {
  EnsembleLevel l;
  l.count = static_cast<int>(v.size());
  if (v.empty()) return l;
  const double n = static_cast<double>(v.size());
  double m = 0;
  for (double x : v) m += x;
  m /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  l.mean = m;
  l.std = std::sqrt(m2);
  if (m2 > 0) {
    l.skewness = m3 / std::pow(m2, 1.5);
    l.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  l.histogram = histogram(v, bins);
  return l;
}

EnsembleReport ensemble_stats(const std::vector<double>& q, const std::vector<std::vector<double>>& fields,
                              const std::vector<double>& weights, std::vector<int> histogram_sizes,
                              std::vector<int> convergence_sizes, int bins) {
  const int smax = static_cast<int>(fields.size());
  if (static_cast<int>(q.size()) != smax) throw ConfigError("ensemble: Q count does not match sample count");
  std::sort(histogram_sizes.begin(), histogram_sizes.end());
  std::sort(convergence_sizes.begin(), convergence_sizes.end());
  for (int s : histogram_sizes)
    if (s < 1 || s > smax) throw ConfigError("ensemble: histogram size " + std::to_string(s) + " exceeds sample count");
  for (int s : convergence_sizes)
    if (s < 1 || s > smax) throw ConfigError("ensemble: S_max is not the largest size (got " + std::to_string(s) + ")");
  EnsembleReport r;
  r.q = q;
  for (int s : histogram_sizes) r.levels.push_back(describe(std::vector<double>(q.begin(), q.begin() + s), bins));

  const std::size_t len = weights.size();
  for (const auto& f : fields) require(f.size() == len, "ensemble: field size mismatch");
  // Prefix sums in sample order keep the reduction order fixed.
  std::vector<double> ref(len, 0.0), run(len, 0.0);
  for (const auto& f : fields)
    for (std::size_t i = 0; i < len; ++i) ref[i] += f[i];
  for (double& x : ref) x /= smax;
  std::size_t next = 0;
  std::vector<double> xs, ys;
  for (int s = 1; s <= smax && next < convergence_sizes.size(); ++s) {
    const auto& f = fields[static_cast<std::size_t>(s - 1)];
    for (std::size_t i = 0; i < len; ++i) run[i] += f[i];
    while (next < convergence_sizes.size() && convergence_sizes[next] == s) {
      double e = 0;
      for (std::size_t i = 0; i < len; ++i) {
        const double d = run[i] / s - ref[i];
        e += weights[i] * d * d;
      }
      ConvergencePoint p{s, std::sqrt(e)};
      r.convergence.push_back(p);
      if (s < smax) {
        xs.push_back(s);
        ys.push_back(p.error);
      }
      ++next;
    }
  }
  r.fit = loglog_fit(xs, ys, 4);
  return r;
}

}  // namespace speconet
