// Compiled for the baseline ISA; only probes the CPU and hands out tables.

#include <atomic>
#include <cstdlib>
#include <string>

#include "wtalc/errors.hpp"
#include "wtalc/kernels.hpp"

namespace wtalc::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(WTALC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

Backend best_backend() {
  if (cpu_has_avx2()) return Backend::kAvx2;
#if defined(WTALC_HAVE_NEON)
  return Backend::kNeon;
#else
  return Backend::kScalar;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("WTALC_KERNELS"); env != nullptr && *env != '\0') {
    Backend requested = parse_backend(env);
    if (backend_available(requested)) return requested;
  }
  return best_backend();
}

std::atomic<Backend>& selected() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

bool backend_available(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
      return cpu_has_avx2();
    case Backend::kNeon:
#if defined(WTALC_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
    if (backend_available(b)) out.push_back(b);
  }
  return out;
}

const KernelTable& table_for(Backend backend) {
  if (!backend_available(backend)) {
    throw DomainError("kernel backend '" + std::string(backend_name(backend)) +
                      "' is not available on this machine");
  }
  switch (backend) {
#if defined(WTALC_HAVE_AVX2)
    case Backend::kAvx2:
      return avx2_table();
#endif
#if defined(WTALC_HAVE_NEON)
    case Backend::kNeon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

Backend active_backend() { return selected().load(std::memory_order_relaxed); }

const KernelTable& active() {
  // set_backend() and initial_backend() only ever store available backends.
  switch (active_backend()) {
#if defined(WTALC_HAVE_AVX2)
    case Backend::kAvx2:
      return avx2_table();
#endif
#if defined(WTALC_HAVE_NEON)
    case Backend::kNeon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

void set_backend(Backend backend) {
  if (!backend_available(backend)) {
    throw DomainError("kernel backend '" + std::string(backend_name(backend)) +
                      "' is not available on this machine");
  }
  selected().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
    case Backend::kNeon:
      return "neon";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  if (name == "neon") return Backend::kNeon;
  if (name == "auto") return best_backend();
  throw DomainError("unknown kernel backend '" + std::string(name) + "'");
}

}  // namespace wtalc::kernels
