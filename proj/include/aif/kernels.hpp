#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant selected at runtime. Every variant performs the same IEEE
// operations per output element in the same order, so results are
// bit-identical across backends (the project builds with -ffp-contract=off).

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace aif::kernels {

enum class Backend { scalar, avx2 };

/// Backend in use. Defaults to the best available; the environment variable
/// AIF_SIMD=scalar|avx2 overrides the default at first use.
Backend active_backend();
/// Throws DomainError when `b` is not available on this machine.
void set_backend(Backend b);
bool backend_available(Backend b);
std::string_view backend_name(Backend b);

/// dst[i] += w * src[i] for i in [0, n).
void axpy(float* dst, const float* src, std::size_t n, float w);

/// dst[i] += w * float(prefix[i + hi] - prefix[i + lo]) for i in [0, n).
/// `prefix` holds running sums, so the bracket is a box sum.
void span_axpy(float* dst, const double* prefix, std::size_t n, std::ptrdiff_t lo,
               std::ptrdiff_t hi, float w);

struct BitCounts {
  std::uint64_t differing = 0;  ///< popcount((a ^ b) & ma & mb)
  std::uint64_t compared = 0;   ///< popcount(ma & mb)
};

BitCounts masked_xor_popcount(const std::uint64_t* a, const std::uint64_t* b,
                              const std::uint64_t* mask_a, const std::uint64_t* mask_b,
                              std::size_t n_words);

// Direct entry points, used by the equivalence tests.
namespace scalar {
void axpy(float* dst, const float* src, std::size_t n, float w);
void span_axpy(float* dst, const double* prefix, std::size_t n, std::ptrdiff_t lo,
               std::ptrdiff_t hi, float w);
BitCounts masked_xor_popcount(const std::uint64_t* a, const std::uint64_t* b,
                              const std::uint64_t* mask_a, const std::uint64_t* mask_b,
                              std::size_t n_words);
}  // namespace scalar

namespace avx2 {
bool compiled();
void axpy(float* dst, const float* src, std::size_t n, float w);
void span_axpy(float* dst, const double* prefix, std::size_t n, std::ptrdiff_t lo,
               std::ptrdiff_t hi, float w);
BitCounts masked_xor_popcount(const std::uint64_t* a, const std::uint64_t* b,
                              const std::uint64_t* mask_a, const std::uint64_t* mask_b,
                              std::size_t n_words);
}  // namespace avx2

}  // namespace aif::kernels
