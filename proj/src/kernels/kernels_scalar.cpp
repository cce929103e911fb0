#include "wtalc/kernels.hpp"

namespace wtalc::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_scalar(const double* m, std::size_t rows, std::size_t cols, const double* x,
                   const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot_scalar(m + r * cols, x, cols) + (bias ? bias[r] : 0.0);
  }
}

void matvec_t_acc_scalar(const double* m, std::size_t rows, std::size_t cols, const double* x,
                         double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != 0.0) axpy_scalar(x[r], m + r * cols, y, cols);
  }
}

void rank1_acc_scalar(double* m, std::size_t rows, std::size_t cols, const double* u,
                      const double* v) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (u[r] != 0.0) axpy_scalar(u[r], v, m + r * cols, cols);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar, axpy_scalar, matvec_scalar, matvec_t_acc_scalar,
                                 rank1_acc_scalar};
  return table;
}

}  // namespace wtalc::kernels
