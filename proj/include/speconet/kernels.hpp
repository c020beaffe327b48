/// @file kernels.hpp
/// @brief Batched network kernels (valid convolution, Swish, stacked linear
///        heads) with a serial reference and an OpenMP variant.
///
/// Both variants perform the same per-element arithmetic in the same order,
/// so their results are bitwise identical for any thread count. Reductions
/// over samples always run in ascending sample order.
#pragma once

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

namespace speconet::kernels {

enum class Exec { Serial, Parallel };

// Threads used by Exec::Parallel regions (0 keeps the OpenMP default).
void set_threads(int n);
int threads();

struct ConvShape {
  int dim = 2;
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;  // extent per axis
  int grid = 1;    // input points per axis

  int out_grid() const { return grid - kernel + 1; }
  std::size_t input_len() const;
  std::size_t output_len() const;
  std::size_t kernel_len() const;
};

void validate(const ConvShape& s);

// z[s] = bias + kernel (*) x[s]   (cross-correlation, stride 1, no padding)
void conv_forward(Exec e, const ConvShape& s, int samples, std::span<const double> kernel, std::span<const double> bias,
                  std::span<const double> x, std::span<double> z);
// dkernel = sum_s d/dkernel, dbias = sum_s d/dbias for upstream dz.
void conv_backward(Exec e, const ConvShape& s, int samples, std::span<const double> x, std::span<const double> dz,
                   std::span<double> dkernel, std::span<double> dbias);

double swish(double x);
double swish_grad(double x);
void swish_forward(Exec e, std::span<const double> z, std::span<double> a);
// dz = da * swish'(z)
void swish_backward(Exec e, std::span<const double> z, std::span<const double> da, std::span<double> dz);

// y (S x m) = f (S x n) * w (n x m), all row-major.
void head_forward(Exec e, int samples, int n, int m, std::span<const double> f, std::span<const double> w,
                  std::span<double> y);
// dw = f^T g; df = g w^T (skipped when df is empty).
void head_backward(Exec e, int samples, int n, int m, std::span<const double> f, std::span<const double> w,
                   std::span<const double> g, std::span<double> dw, std::span<double> df);

// Runs fn(i) for i in [0, count). The first exception by index is rethrown
// after the loop.
template <class Fn>
void for_each_index(Exec e, int count, Fn&& fn) {
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(count));
  if (e == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errs[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (int i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errs[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (auto& ep : errs)
    if (ep) std::rethrow_exception(ep);
}

}  // namespace speconet::kernels
