#include "speconet/discretization.hpp"

#include <cmath>
#include <numbers>

#include "speconet/errors.hpp"

namespace speconet {

int legendre_quad_points(int n) { return n + 3; }
int legendre_model_points(int n) { return n + 2; }
int legendre_dealias_points(int n) { return std::max(n + 3, (3 * n + 6) / 2); }

std::size_t Grid::size() const {
  std::size_t s = 1;
  for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(points());
  return s;
}

std::array<double, 3> Grid::coord(std::size_t flat) const {
  std::array<double, 3> x{0, 0, 0};
  const std::size_t p = static_cast<std::size_t>(points());
  for (int a = dim - 1; a >= 0; --a) {
    x[a] = axis.nodes[flat % p];
    flat /= p;
  }
  return x;
}

std::vector<double> Grid::weights() const {
  std::vector<double> w(size());
  const std::size_t p = static_cast<std::size_t>(points());
  for (std::size_t f = 0; f < w.size(); ++f) {
    double v = 1.0;
    std::size_t rem = f;
    for (int a = 0; a < dim; ++a) {
      v *= axis.weights[rem % p];
      rem /= p;
    }
    w[f] = v;
  }
  return w;
}

BasisSpec Discretization::basis(Role r) const {
  if (cfg_.bc == Boundary::Periodic) return {BasisKind::Fourier, cfg_.modes};
  switch (r) {
    case Role::Velocity: return {BasisKind::LegendreDirichlet, cfg_.modes};
    case Role::Correction: return {BasisKind::LegendreNeumann, cfg_.modes};
    case Role::State: return {BasisKind::Legendre, cfg_.modes + 2};
  }
  return {};
}

std::vector<double> Discretization::evaluate(Role r, std::span<const double> c, GridId g, Deriv d) const {
  std::vector<double> out(grid(g).size());
  evaluate(r, c, g, out, d);
  return out;
}

std::vector<double> Discretization::project(std::span<const double> nodal, GridId g, Role r) const {
  std::vector<double> out(coeff_count(r));
  project(nodal, g, r, out);
  return out;
}

std::vector<double> Discretization::fit_state(std::span<const double> nodal) const {
  std::vector<double> out(coeff_count(Role::State));
  fit_state(nodal, out);
  return out;
}

std::vector<double> Discretization::to_state(Role r, std::span<const double> c) const {
  if (r == Role::State || cfg_.bc == Boundary::Periodic) return std::vector<double>(c.begin(), c.end());
  return fit_state(evaluate(r, c, GridId::Quad));
}

std::unique_ptr<HelmholtzOperator> Discretization::make_operator(double tau, double nu, Role r) const {
  require(r != Role::State, "make_operator: state role has no boundary basis");
  return build_operator(tau, nu, basis(r), cfg_.dim);
}

std::vector<double> Discretization::sample(GridId g, const std::function<double(const std::array<double, 3>&)>& fn) const {
  const Grid& gr = grid(g);
  std::vector<double> out(gr.size());
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = fn(gr.coord(f));
  return out;
}

namespace {

constexpr int kRoles = 3;
constexpr int kGrids = 3;

// ---------------------------------------------------------------------------
// Legendre
// ---------------------------------------------------------------------------

class LegendreSpace final : public Discretization {
 public:
  explicit LegendreSpace(const DiscretizationConfig& cfg) : Discretization(cfg) {
    const int n = cfg.modes;
    const std::array<int, kGrids> pts{legendre_quad_points(n), legendre_dealias_points(n), legendre_model_points(n)};
    for (int g = 0; g < kGrids; ++g) {
      grids_[g].dim = cfg.dim;
      grids_[g].axis = gll_rule(pts[g]);
      for (int r = 0; r < kRoles; ++r) {
        const BasisSpec spec = basis(static_cast<Role>(r));
        const int p = pts[g];
        Tables& tb = tables_[g][r];
        for (int d = 0; d < 3; ++d) tb.synth[d] = DenseMatrix<double>(p, spec.n_modes);
        tb.proj = DenseMatrix<double>(spec.n_modes, p);
        for (int j = 0; j < p; ++j) {
          const double x = grids_[g].axis.nodes[j];
          for (int m = 0; m < spec.n_modes; ++m) {
            const ModeValue v = legendre_mode(spec.kind, m, x);
            tb.synth[0](j, m) = v.v;
            tb.synth[1](j, m) = v.d1;
            tb.synth[2](j, m) = v.d2;
            tb.proj(m, j) = v.v * grids_[g].axis.weights[j];
          }
        }
      }
    }
    const int ns = n + 2;
    const Grid& q = grids_[0];
    fit_ = DenseMatrix<double>(ns, q.points());
    for (int m = 0; m < ns; ++m)
      for (int j = 0; j < q.points(); ++j)
        fit_(m, j) = (2.0 * m + 1.0) / 2.0 * q.axis.weights[j] * legendre(m, q.axis.nodes[j]);
  }

  std::size_t coeff_count(Role r) const override {
    std::size_t s = 1;
    const int n = basis(r).n_modes;
    for (int a = 0; a < cfg_.dim; ++a) s *= static_cast<std::size_t>(n);
    return s;
  }

  void evaluate(Role r, std::span<const double> c, GridId g, std::span<double> nodal, Deriv d) const override {
    require(c.size() == coeff_count(r), "evaluate: coefficient count mismatch");
    require(nodal.size() == grid(g).size(), "evaluate: nodal size mismatch");
    const Tables& tb = tables_[static_cast<int>(g)][static_cast<int>(r)];
    std::array<const DenseMatrix<double>*, 3> mats{};
    for (int a = 0; a < cfg_.dim; ++a) mats[a] = &tb.synth[d.order[a]];
    auto y = tensor_apply<double, double>(std::span<const DenseMatrix<double>* const>(mats.data(), cfg_.dim), c);
    std::copy(y.begin(), y.end(), nodal.begin());
  }

  void project(std::span<const double> nodal, GridId g, Role r, std::span<double> f) const override {
    require(nodal.size() == grid(g).size(), "project: nodal size mismatch");
    require(f.size() == coeff_count(r), "project: output size mismatch");
    const Tables& tb = tables_[static_cast<int>(g)][static_cast<int>(r)];
    std::array<const DenseMatrix<double>*, 3> mats{&tb.proj, &tb.proj, &tb.proj};
    auto y = tensor_apply<double, double>(std::span<const DenseMatrix<double>* const>(mats.data(), cfg_.dim), nodal);
    std::copy(y.begin(), y.end(), f.begin());
  }

  void fit_state(std::span<const double> nodal, std::span<double> c) const override {
    require(nodal.size() == grid(GridId::Quad).size(), "fit_state: nodal size mismatch");
    require(c.size() == coeff_count(Role::State), "fit_state: output size mismatch");
    std::array<const DenseMatrix<double>*, 3> mats{&fit_, &fit_, &fit_};
    auto y = tensor_apply<double, double>(std::span<const DenseMatrix<double>* const>(mats.data(), cfg_.dim), nodal);
    std::copy(y.begin(), y.end(), c.begin());
  }

 private:
  struct Tables {
    std::array<DenseMatrix<double>, 3> synth;
    DenseMatrix<double> proj;
  };
  std::array<std::array<Tables, kRoles>, kGrids> tables_;
  DenseMatrix<double> fit_;
};

// ---------------------------------------------------------------------------
// Fourier
// ---------------------------------------------------------------------------

class FourierSpace final : public Discretization {
 public:
  explicit FourierSpace(const DiscretizationConfig& cfg) : Discretization(cfg) {
    const int n = cfg.modes;
    require(n % 2 == 0, "Fourier resolution must be even");
    const std::array<int, kGrids> pts{n, 3 * n / 2, n};
    const BasisSpec spec{BasisKind::Fourier, n};
    for (int g = 0; g < kGrids; ++g) {
      grids_[g].dim = cfg.dim;
      grids_[g].axis = fourier_rule(pts[g]);
      const BasisTables t = build_tables(spec, pts[g]);
      const int p = pts[g];
      Tables& tb = tables_[g];
      for (int d = 0; d < 3; ++d) tb.synth[d] = DenseMatrix<cplx>(p, n);
      tb.proj = DenseMatrix<cplx>(n, p);
      const double h = 2.0 * std::numbers::pi / p;
      for (int m = 0; m < n; ++m) {
        const int xi = spec.wavenumber(m);
        // Nyquist columns are zero: those modes never carry data.
        const bool nyq = xi == n / 2;
        for (int j = 0; j < p; ++j) {
          const cplx e = t.fourier_values(m, j);
          tb.synth[0](j, m) = nyq ? cplx{} : e;
          tb.synth[1](j, m) = nyq ? cplx{} : e * cplx(0, xi);
          tb.synth[2](j, m) = nyq ? cplx{} : e * static_cast<double>(-xi * xi);
          tb.proj(m, j) = std::conj(e) * (2.0 * std::numbers::pi) * h;
        }
      }
    }
    nyquist_.assign(coeff_count(Role::State) / 2, 0);
    const std::size_t cnt = nyquist_.size();
    for (std::size_t f = 0; f < cnt; ++f) {
      std::size_t rem = f;
      for (int a = 0; a < cfg.dim; ++a) {
        if (static_cast<int>(rem % n) == n - 1) nyquist_[f] = 1;
        rem /= n;
      }
    }
  }

  std::size_t coeff_count(Role) const override {
    std::size_t s = 2;
    for (int a = 0; a < cfg_.dim; ++a) s *= static_cast<std::size_t>(cfg_.modes);
    return s;
  }

  void evaluate(Role r, std::span<const double> c, GridId g, std::span<double> nodal, Deriv d) const override {
    require(c.size() == coeff_count(r), "evaluate: coefficient count mismatch");
    require(nodal.size() == grid(g).size(), "evaluate: nodal size mismatch");
    const Tables& tb = tables_[static_cast<int>(g)];
    std::array<const DenseMatrix<cplx>*, 3> mats{};
    for (int a = 0; a < cfg_.dim; ++a) mats[a] = &tb.synth[d.order[a]];
    std::span<const cplx> z(reinterpret_cast<const cplx*>(c.data()), c.size() / 2);
    auto y = tensor_apply<cplx, cplx>(std::span<const DenseMatrix<cplx>* const>(mats.data(), cfg_.dim), z);
    for (std::size_t i = 0; i < y.size(); ++i) nodal[i] = y[i].real();
  }

  void project(std::span<const double> nodal, GridId g, Role r, std::span<double> f) const override {
    require(nodal.size() == grid(g).size(), "project: nodal size mismatch");
    require(f.size() == coeff_count(r), "project: output size mismatch");
    const Tables& tb = tables_[static_cast<int>(g)];
    std::array<const DenseMatrix<cplx>*, 3> mats{&tb.proj, &tb.proj, &tb.proj};
    auto y = tensor_apply<cplx, double>(std::span<const DenseMatrix<cplx>* const>(mats.data(), cfg_.dim), nodal);
    for (std::size_t i = 0; i < y.size(); ++i) {
      f[2 * i] = y[i].real();
      f[2 * i + 1] = y[i].imag();
    }
  }

  void fit_state(std::span<const double> nodal, std::span<double> c) const override {
    project(nodal, GridId::Quad, Role::State, c);
    for (std::size_t i = 0; i < nyquist_.size(); ++i)
      if (nyquist_[i]) c[2 * i] = c[2 * i + 1] = 0.0;
  }

 private:
  struct Tables {
    std::array<DenseMatrix<cplx>, 3> synth;
    DenseMatrix<cplx> proj;
  };
  std::array<Tables, kGrids> tables_;
  std::vector<char> nyquist_;
};

}  // namespace

std::shared_ptr<const Discretization> Discretization::create(const DiscretizationConfig& cfg) {
  require(cfg.dim == 2 || cfg.dim == 3, "discretization: dim must be 2 or 3");
  require(cfg.modes >= 2, "discretization: need at least 2 modes");
  if (cfg.bc == Boundary::Periodic) return std::make_shared<FourierSpace>(cfg);
  return std::make_shared<LegendreSpace>(cfg);
}

}  // namespace speconet
