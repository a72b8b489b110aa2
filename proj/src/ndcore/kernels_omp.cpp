#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "ltood/ndcore/kernels.hpp"

#ifdef LTOOD_HAVE_OPENMP
#include <omp.h>
#endif

namespace ltood::nd::kernels {

namespace omp {

// Rows are distributed over threads; each output element keeps the serial
// summation order.

void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d) {
  const auto m = static_cast<std::int64_t>(d.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * d.n;
    std::fill(ci, ci + d.n, 0.0);
    for (std::size_t p = 0; p < d.k; ++p) {
      const double aip = a[i * d.k + p];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d) {
  const auto m = static_cast<std::int64_t>(d.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
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
  const auto m = static_cast<std::int64_t>(d.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * d.n;
    std::fill(ci, ci + d.n, 0.0);
    for (std::size_t p = 0; p < d.k; ++p) {
      const double api = a[p * d.m + i];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += api * bp[j];
    }
  }
}

void log_softmax_rows(std::span<const double> x, std::span<double> out,
                      std::size_t rows, std::size_t cols) {
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
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

}  // namespace omp

bool openmp_enabled() {
#ifdef LTOOD_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef LTOOD_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {
bool go_parallel(std::size_t work) {
  return openmp_enabled() && max_threads() > 1 && work >= kParallelThreshold;
}
}  // namespace

void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d) {
  if (go_parallel(d.m * d.k * d.n)) {
    omp::gemm_nn(a, b, c, d);
  } else {
    serial::gemm_nn(a, b, c, d);
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d) {
  if (go_parallel(d.m * d.k * d.n)) {
    omp::gemm_nt(a, b, c, d);
  } else {
    serial::gemm_nt(a, b, c, d);
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d) {
  if (go_parallel(d.m * d.k * d.n)) {
    omp::gemm_tn(a, b, c, d);
  } else {
    serial::gemm_tn(a, b, c, d);
  }
}

void log_softmax_rows(std::span<const double> x, std::span<double> out,
                      std::size_t rows, std::size_t cols) {
  if (go_parallel(rows * cols * 8)) {
    omp::log_softmax_rows(x, out, rows, cols);
  } else {
    serial::log_softmax_rows(x, out, rows, cols);
  }
}

}  // namespace ltood::nd::kernels
