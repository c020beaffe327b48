#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "speconet/errors.hpp"

namespace speconet {

using cplx = std::complex<double>;

// Row-major dense matrix used for per-axis tensor contractions.
template <class T>
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, T{}) {}
  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

inline std::size_t extent_product(std::span<const int> e) {
  std::size_t n = 1;
  for (int v : e) n *= static_cast<std::size_t>(v);
  return n;
}

// y = M applied along `axis` of the row-major tensor x with the given extents.
// extents[axis] must equal M.cols; y has extents[axis] replaced by M.rows.
template <class TM, class TX, class TY>
void apply_axis(const DenseMatrix<TM>& m, std::span<const TX> x, std::span<const int> extents, int axis,
                std::span<TY> y) {
  require(extents[axis] == m.cols, "apply_axis: extent does not match matrix columns");
  std::size_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= static_cast<std::size_t>(extents[a]);
  for (std::size_t a = axis + 1; a < extents.size(); ++a) inner *= static_cast<std::size_t>(extents[a]);
  require(x.size() == outer * m.cols * inner, "apply_axis: input size");
  require(y.size() == outer * m.rows * inner, "apply_axis: output size");
  for (std::size_t o = 0; o < outer; ++o) {
    const TX* xo = x.data() + o * m.cols * inner;
    TY* yo = y.data() + o * m.rows * inner;
    for (int r = 0; r < m.rows; ++r) {
      TY* yr = yo + static_cast<std::size_t>(r) * inner;
      for (std::size_t i = 0; i < inner; ++i) yr[i] = TY{};
      for (int c = 0; c < m.cols; ++c) {
        const TM mv = m(r, c);
        if (mv == TM{}) continue;
        const TX* xc = xo + static_cast<std::size_t>(c) * inner;
        for (std::size_t i = 0; i < inner; ++i) yr[i] += mv * xc[i];
      }
    }
  }
}

// Applies mats[a] along every axis a in turn (tensor-product operator).
template <class TM, class TX>
auto tensor_apply(std::span<const DenseMatrix<TM>* const> mats, std::span<const TX> x) {
  using TY = decltype(TM{} * TX{});
  const int d = static_cast<int>(mats.size());
  std::array<int, 3> ext{};
  for (int a = 0; a < d; ++a) ext[a] = mats[a]->cols;
  require(x.size() == extent_product(std::span<const int>(ext.data(), d)), "tensor_apply: input size");
  std::vector<TY> cur(x.begin(), x.end());
  std::vector<TY> next;
  for (int a = 0; a < d; ++a) {
    std::array<int, 3> out = ext;
    out[a] = mats[a]->rows;
    next.assign(extent_product(std::span<const int>(out.data(), d)), TY{});
    apply_axis<TM, TY, TY>(*mats[a], cur, std::span<const int>(ext.data(), d), a, next);
    cur.swap(next);
    ext = out;
  }
  return cur;
}

}  // namespace speconet
