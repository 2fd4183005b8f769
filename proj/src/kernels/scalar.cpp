#include <bit>

#include "aif/kernels.hpp"

namespace aif::kernels::scalar {

void axpy(float* dst, const float* src, std::size_t n, float w) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += w * src[i];
}

void span_axpy(float* dst, const double* prefix, std::size_t n, std::ptrdiff_t lo,
               std::ptrdiff_t hi, float w) {
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    const float box = static_cast<float>(prefix[k + hi] - prefix[k + lo]);
    dst[i] += w * box;
  }
}

BitCounts masked_xor_popcount(const std::uint64_t* a, const std::uint64_t* b,
                              const std::uint64_t* mask_a, const std::uint64_t* mask_b,
                              std::size_t n_words) {
  BitCounts c;
  for (std::size_t i = 0; i < n_words; ++i) {
    const std::uint64_t m = mask_a[i] & mask_b[i];
    c.differing += static_cast<std::uint64_t>(std::popcount((a[i] ^ b[i]) & m));
    c.compared += static_cast<std::uint64_t>(std::popcount(m));
  }
  return c;
}

}  // namespace aif::kernels::scalar
