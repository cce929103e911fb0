#pragma once

// Dense inner loops used by the forward and backward passes. Each kernel has
// a scalar reference implementation plus SIMD variants; the variant is picked
// once at startup from the running CPU and can be overridden for testing or
// for cross-machine bit reproducibility (WTALC_KERNELS=scalar|avx2|neon).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace wtalc::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

struct KernelTable {
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = M x + bias, M row-major rows x cols; bias may be null
  void (*matvec)(const double* m, std::size_t rows, std::size_t cols, const double* x,
                 const double* bias, double* y);
  // y += M^T x
  void (*matvec_t_acc)(const double* m, std::size_t rows, std::size_t cols, const double* x,
                       double* y);
  // M += u v^T
  void (*rank1_acc)(double* m, std::size_t rows, std::size_t cols, const double* u,
                    const double* v);
};

const KernelTable& scalar_table();
#if defined(WTALC_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(WTALC_HAVE_NEON)
const KernelTable& neon_table();
#endif

bool backend_available(Backend backend);
std::vector<Backend> available_backends();
const KernelTable& table_for(Backend backend);

// Currently selected backend and its table.
Backend active_backend();
const KernelTable& active();

// Throws DomainError when the backend is not compiled in or not supported by the CPU.
void set_backend(Backend backend);

std::string_view backend_name(Backend backend);
// Accepts "scalar", "avx2", "neon" or "auto".
Backend parse_backend(std::string_view name);

// Span conveniences over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace wtalc::kernels
