#include <atomic>
#include <cstdlib>
#include <string>

#include "aif/error.hpp"
#include "aif/kernels.hpp"

namespace aif::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("popcnt");
#else
  return false;
#endif
}

Backend initial_backend() {
  const bool avx2_ok = backend_available(Backend::avx2);
  if (const char* env = std::getenv("AIF_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && avx2_ok) return Backend::avx2;
  }
  return avx2_ok ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

bool backend_available(Backend b) {
  if (b == Backend::scalar) return true;
  return avx2::compiled() && cpu_has_avx2();
}

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b))
    throw DomainError("SIMD backend " + std::string(backend_name(b)) + " unavailable");
  backend_slot().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) { return b == Backend::scalar ? "scalar" : "avx2"; }

void axpy(float* dst, const float* src, std::size_t n, float w) {
  if (active_backend() == Backend::avx2) return avx2::axpy(dst, src, n, w);
  scalar::axpy(dst, src, n, w);
}

void span_axpy(float* dst, const double* prefix, std::size_t n, std::ptrdiff_t lo,
               std::ptrdiff_t hi, float w) {
  if (active_backend() == Backend::avx2) return avx2::span_axpy(dst, prefix, n, lo, hi, w);
  scalar::span_axpy(dst, prefix, n, lo, hi, w);
}

BitCounts masked_xor_popcount(const std::uint64_t* a, const std::uint64_t* b,
                              const std::uint64_t* mask_a, const std::uint64_t* mask_b,
                              std::size_t n_words) {
  if (active_backend() == Backend::avx2)
    return avx2::masked_xor_popcount(a, b, mask_a, mask_b, n_words);
  return scalar::masked_xor_popcount(a, b, mask_a, mask_b, n_words);
}

}  // namespace aif::kernels
