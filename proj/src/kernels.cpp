#include "speconet/kernels.hpp"

#include <omp.h>

#include <cmath>

#include "speconet/errors.hpp"

namespace speconet::kernels {

namespace {

int g_threads = 0;

std::size_t ipow(int b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= static_cast<std::size_t>(b);
  return r;
}

// Per-axis extents with the unused third axis collapsed to 1.
struct Ext {
  int gx, gy, gz;  // input
  int lx, ly, lz;  // output
  int kx, ky, kz;  // kernel
};

Ext extents(const ConvShape& s) {
  const int g = s.grid, l = s.out_grid(), k = s.kernel;
  if (s.dim == 2) return {g, g, 1, l, l, 1, k, k, 1};
  return {g, g, g, l, l, l, k, k, k};
}

void conv_forward_one(const ConvShape& s, const Ext& e, const double* kernel, const double* bias, const double* x,
                      double* z) {
  const std::size_t in_plane = static_cast<std::size_t>(e.gx) * e.gy * e.gz;
  const std::size_t out_plane = static_cast<std::size_t>(e.lx) * e.ly * e.lz;
  const std::size_t kvol = static_cast<std::size_t>(e.kx) * e.ky * e.kz;
  for (int o = 0; o < s.out_channels; ++o) {
    double* zo = z + o * out_plane;
    for (std::size_t p = 0; p < out_plane; ++p) zo[p] = bias[o];
    for (int c = 0; c < s.in_channels; ++c) {
      const double* xc = x + c * in_plane;
      const double* kc = kernel + (static_cast<std::size_t>(o) * s.in_channels + c) * kvol;
      for (int qx = 0; qx < e.kx; ++qx)
        for (int qy = 0; qy < e.ky; ++qy)
          for (int qz = 0; qz < e.kz; ++qz) {
            const double kv = kc[(static_cast<std::size_t>(qx) * e.ky + qy) * e.kz + qz];
            for (int px = 0; px < e.lx; ++px)
              for (int py = 0; py < e.ly; ++py) {
                const double* xr = xc + ((static_cast<std::size_t>(px + qx) * e.gy + (py + qy)) * e.gz + qz);
                double* zr = zo + (static_cast<std::size_t>(px) * e.ly + py) * e.lz;
                for (int pz = 0; pz < e.lz; ++pz) zr[pz] += kv * xr[pz];
              }
          }
    }
  }
}

// Gradient contribution of one sample, written (not accumulated).
void conv_backward_one(const ConvShape& s, const Ext& e, const double* x, const double* dz, double* dk, double* db) {
  const std::size_t in_plane = static_cast<std::size_t>(e.gx) * e.gy * e.gz;
  const std::size_t out_plane = static_cast<std::size_t>(e.lx) * e.ly * e.lz;
  const std::size_t kvol = static_cast<std::size_t>(e.kx) * e.ky * e.kz;
  for (int o = 0; o < s.out_channels; ++o) {
    const double* dzo = dz + o * out_plane;
    double b = 0;
    for (std::size_t p = 0; p < out_plane; ++p) b += dzo[p];
    db[o] = b;
    for (int c = 0; c < s.in_channels; ++c) {
      const double* xc = x + c * in_plane;
      double* kc = dk + (static_cast<std::size_t>(o) * s.in_channels + c) * kvol;
      for (int qx = 0; qx < e.kx; ++qx)
        for (int qy = 0; qy < e.ky; ++qy)
          for (int qz = 0; qz < e.kz; ++qz) {
            double acc = 0;
            for (int px = 0; px < e.lx; ++px)
              for (int py = 0; py < e.ly; ++py) {
                const double* xr = xc + ((static_cast<std::size_t>(px + qx) * e.gy + (py + qy)) * e.gz + qz);
                const double* dr = dzo + (static_cast<std::size_t>(px) * e.ly + py) * e.lz;
                for (int pz = 0; pz < e.lz; ++pz) acc += dr[pz] * xr[pz];
              }
            kc[(static_cast<std::size_t>(qx) * e.ky + qy) * e.kz + qz] = acc;
          }
    }
  }
}

}  // namespace

void set_threads(int n) {
  g_threads = n;
  if (n > 0) omp_set_num_threads(n);
}

int threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

std::size_t ConvShape::input_len() const { return static_cast<std::size_t>(in_channels) * ipow(grid, dim); }
std::size_t ConvShape::output_len() const { return static_cast<std::size_t>(out_channels) * ipow(out_grid(), dim); }
std::size_t ConvShape::kernel_len() const {
  return static_cast<std::size_t>(out_channels) * in_channels * ipow(kernel, dim);
}

void validate(const ConvShape& s) {
  require(s.dim == 2 || s.dim == 3, "conv: dim must be 2 or 3");
  require(s.in_channels >= 1 && s.out_channels >= 1, "conv: channel counts must be positive");
  require(s.kernel >= 1, "conv: kernel extent must be positive");
  require(s.kernel <= s.grid, "conv: kernel larger than the input grid");
}

void conv_forward(Exec ex, const ConvShape& s, int samples, std::span<const double> kernel,
                  std::span<const double> bias, std::span<const double> x, std::span<double> z) {
  validate(s);
  require(kernel.size() == s.kernel_len() && bias.size() == static_cast<std::size_t>(s.out_channels),
          "conv_forward: parameter shape mismatch");
  require(x.size() == samples * s.input_len() && z.size() == samples * s.output_len(), "conv_forward: batch shape mismatch");
  const Ext e = extents(s);
  for_each_index(ex, samples, [&](int i) {
    conv_forward_one(s, e, kernel.data(), bias.data(), x.data() + i * s.input_len(), z.data() + i * s.output_len());
  });
}

void conv_backward(Exec ex, const ConvShape& s, int samples, std::span<const double> x, std::span<const double> dz,
                   std::span<double> dkernel, std::span<double> dbias) {
  validate(s);
  require(dkernel.size() == s.kernel_len() && dbias.size() == static_cast<std::size_t>(s.out_channels),
          "conv_backward: parameter shape mismatch");
  require(x.size() == samples * s.input_len() && dz.size() == samples * s.output_len(), "conv_backward: batch shape mismatch");
  const Ext e = extents(s);
  const std::size_t kl = s.kernel_len(), bl = static_cast<std::size_t>(s.out_channels);
  std::vector<double> pk(samples * kl), pb(samples * bl);
  for_each_index(ex, samples, [&](int i) {
    conv_backward_one(s, e, x.data() + i * s.input_len(), dz.data() + i * s.output_len(), pk.data() + i * kl,
                      pb.data() + i * bl);
  });
  for (std::size_t j = 0; j < kl; ++j) dkernel[j] = 0;
  for (std::size_t j = 0; j < bl; ++j) dbias[j] = 0;
  for (int i = 0; i < samples; ++i) {
    for (std::size_t j = 0; j < kl; ++j) dkernel[j] += pk[i * kl + j];
    for (std::size_t j = 0; j < bl; ++j) dbias[j] += pb[i * bl + j];
  }
}

double swish(double x) { return x / (1.0 + std::exp(-x)); }

double swish_grad(double x) {
  const double sg = 1.0 / (1.0 + std::exp(-x));
  return sg * (1.0 + x * (1.0 - sg));
}

void swish_forward(Exec ex, std::span<const double> z, std::span<double> a) {
  require(z.size() == a.size(), "swish: size mismatch");
  const long n = static_cast<long>(z.size());
  if (ex == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) a[i] = swish(z[i]);
  } else {
    for (long i = 0; i < n; ++i) a[i] = swish(z[i]);
  }
}

void swish_backward(Exec ex, std::span<const double> z, std::span<const double> da, std::span<double> dz) {
  require(z.size() == da.size() && z.size() == dz.size(), "swish: size mismatch");
  const long n = static_cast<long>(z.size());
  if (ex == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) dz[i] = da[i] * swish_grad(z[i]);
  } else {
    for (long i = 0; i < n; ++i) dz[i] = da[i] * swish_grad(z[i]);
  }
}

void head_forward(Exec ex, int samples, int n, int m, std::span<const double> f, std::span<const double> w,
                  std::span<double> y) {
  require(f.size() == static_cast<std::size_t>(samples) * n && w.size() == static_cast<std::size_t>(n) * m &&
              y.size() == static_cast<std::size_t>(samples) * m,
          "head_forward: shape mismatch");
  for_each_index(ex, samples, [&](int s) {
    double* ys = y.data() + static_cast<std::size_t>(s) * m;
    const double* fs = f.data() + static_cast<std::size_t>(s) * n;
    for (int j = 0; j < m; ++j) ys[j] = 0;
    for (int i = 0; i < n; ++i) {
      const double a = fs[i];
      const double* wi = w.data() + static_cast<std::size_t>(i) * m;
      for (int j = 0; j < m; ++j) ys[j] += a * wi[j];
    }
  });
}

void head_backward(Exec ex, int samples, int n, int m, std::span<const double> f, std::span<const double> w,
                   std::span<const double> g, std::span<double> dw, std::span<double> df) {
  require(f.size() == static_cast<std::size_t>(samples) * n && w.size() == static_cast<std::size_t>(n) * m &&
              g.size() == static_cast<std::size_t>(samples) * m && dw.size() == w.size(),
          "head_backward: shape mismatch");
  require(df.empty() || df.size() == f.size(), "head_backward: df shape mismatch");
  // dw rows are independent; each sums samples in ascending order.
  auto row = [&](int i) {
    double* dwi = dw.data() + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) dwi[j] = 0;
    for (int s = 0; s < samples; ++s) {
      const double a = f[static_cast<std::size_t>(s) * n + i];
      const double* gs = g.data() + static_cast<std::size_t>(s) * m;
      for (int j = 0; j < m; ++j) dwi[j] += a * gs[j];
    }
  };
  for_each_index(ex, n, row);
  if (df.empty()) return;
  for_each_index(ex, samples, [&](int s) {
    const double* gs = g.data() + static_cast<std::size_t>(s) * m;
    for (int i = 0; i < n; ++i) {
      const double* wi = w.data() + static_cast<std::size_t>(i) * m;
      double acc = 0;
      for (int j = 0; j < m; ++j) acc += gs[j] * wi[j];
      df[static_cast<std::size_t>(s) * n + i] = acc;
    }
  });
}

}  // namespace speconet::kernels
