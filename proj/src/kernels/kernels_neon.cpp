#include <arm_neon.h>

#include "wtalc/kernels.hpp"

namespace wtalc::kernels {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_neon(const double* m, std::size_t rows, std::size_t cols, const double* x,
                 const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_neon(m + r * cols, x, cols) + (bias ? bias[r] : 0.0);
}

void matvec_t_acc_neon(const double* m, std::size_t rows, std::size_t cols, const double* x,
                       double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != 0.0) axpy_neon(x[r], m + r * cols, y, cols);
  }
}

void rank1_acc_neon(double* m, std::size_t rows, std::size_t cols, const double* u,
                    const double* v) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (u[r] != 0.0) axpy_neon(u[r], v, m + r * cols, cols);
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{dot_neon, axpy_neon, matvec_neon, matvec_t_acc_neon,
                                 rank1_acc_neon};
  return table;
}

}  // namespace wtalc::kernels
