#include <algorithm>
#include <cmath>
#include <limits>

#include "ltood/ndcore/kernels.hpp"

namespace ltood::nd::kernels::serial {

void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < d.m; ++i) {
    double* ci = c.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double aip = a[i * d.k + p];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d) {
  for (std::size_t i = 0; i < d.m; ++i) {
    const double* ai = a.data() + i * d.k;
    for (std::size_t j = 0; j < d.n; ++j) {
      const double* bj = b.data() + j * d.k;
      double acc = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) acc += ai[p] * bj[p];
      c[i * d.n + j] = acc;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < d.m; ++i) {
    double* ci = c.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double api = a[p * d.m + i];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += api * bp[j];
    }
  }
}

void log_softmax_rows(std::span<const double> x, std::span<double> out,
                      std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = out.data() + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, xr[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += std::exp(xr[j] - mx);
    const double lse = std::log(s);
    for (std::size_t j = 0; j < cols; ++j) yr[j] = xr[j] - mx - lse;
  }
}

}  // namespace ltood::nd::kernels::serial
