#pragma once

#include <cstddef>
#include <span>

// Dense kernels behind the tensor ops. Every kernel has a serial reference in
// `serial` and an OpenMP version in `omp`; both compute each output element
// with the same summation order, so the results are bitwise identical and the
// choice of backend never changes a training trajectory.
namespace ltood::nd::kernels {

struct GemmDims {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t n = 0;
};

namespace serial {
// c[m x n] = a[m x k] * b[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d);
// c[m x n] = a[m x k] * b[n x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d);
// c[m x n] = a[k x m]^T * b[k x n]
void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d);
// Row-wise numerically stable log-softmax of a rows x cols matrix.
void log_softmax_rows(std::span<const double> x, std::span<double> out,
                      std::size_t rows, std::size_t cols);
}  // namespace serial

namespace omp {
void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d);
void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d);
void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d);
void log_softmax_rows(std::span<const double> x, std::span<double> out,
                      std::size_t rows, std::size_t cols);
}  // namespace omp

// True when the omp namespace was built with OpenMP enabled.
bool openmp_enabled();
int max_threads();

// Work (in multiply-adds) above which the dispatchers below use the OpenMP
// kernels.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d);
void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d);
void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> c, GemmDims d);
void log_softmax_rows(std::span<const double> x, std::span<double> out,
                      std::size_t rows, std::size_t cols);

}  // namespace ltood::nd::kernels
