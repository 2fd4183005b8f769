// Built with -mavx2 -mpopcnt and without FMA, so each lane performs exactly
// the scalar sequence of roundings.

#include "aif/kernels.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

#include <bit>

namespace aif::kernels::avx2 {

bool compiled() { return true; }

void axpy(float* dst, const float* src, std::size_t n, float w) {
  const __m256 vw = _mm256_set1_ps(w);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 s = _mm256_loadu_ps(src + i);
    const __m256 d = _mm256_loadu_ps(dst + i);
    _mm256_storeu_ps(dst + i, _mm256_add_ps(d, _mm256_mul_ps(vw, s)));
  }
  for (; i < n; ++i) dst[i] += w * src[i];
}

void span_axpy(float* dst, const double* prefix, std::size_t n, std::ptrdiff_t lo,
               std::ptrdiff_t hi, float w) {
  const __m256 vw = _mm256_set1_ps(w);
  const double* ph = prefix + hi;
  const double* pl = prefix + lo;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d a0 = _mm256_sub_pd(_mm256_loadu_pd(ph + i), _mm256_loadu_pd(pl + i));
    const __m256d a1 = _mm256_sub_pd(_mm256_loadu_pd(ph + i + 4), _mm256_loadu_pd(pl + i + 4));
    const __m256 box = _mm256_set_m128(_mm256_cvtpd_ps(a1), _mm256_cvtpd_ps(a0));
    const __m256 d = _mm256_loadu_ps(dst + i);
    _mm256_storeu_ps(dst + i, _mm256_add_ps(d, _mm256_mul_ps(vw, box)));
  }
  for (; i < n; ++i) {
    const float box = static_cast<float>(ph[i] - pl[i]);
    dst[i] += w * box;
  }
}

namespace {

// Per-byte popcount via nibble lookup, summed into four 64-bit lanes.
inline __m256i popcount_epi64(__m256i v) {
  const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4, 0, 1, 1, 2,
                                       1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
  const __m256i low = _mm256_set1_epi8(0x0F);
  const __m256i lo = _mm256_and_si256(v, low);
  const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low);
  const __m256i cnt = _mm256_add_epi8(_mm256_shuffle_epi8(lut, lo), _mm256_shuffle_epi8(lut, hi));
  return _mm256_sad_epu8(cnt, _mm256_setzero_si256());
}

inline std::uint64_t hsum_epi64(__m256i v) {
  alignas(32) std::uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), v);
  return lanes[0] + lanes[1] + lanes[2] + lanes[3];
}

}  // namespace

BitCounts masked_xor_popcount(const std::uint64_t* a, const std::uint64_t* b,
                              const std::uint64_t* mask_a, const std::uint64_t* mask_b,
                              std::size_t n_words) {
  __m256i diff = _mm256_setzero_si256();
  __m256i comp = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= n_words; i += 4) {
    const auto* pa = reinterpret_cast<const __m256i*>(a + i);
    const auto* pb = reinterpret_cast<const __m256i*>(b + i);
    const auto* pma = reinterpret_cast<const __m256i*>(mask_a + i);
    const auto* pmb = reinterpret_cast<const __m256i*>(mask_b + i);
    const __m256i m = _mm256_and_si256(_mm256_loadu_si256(pma), _mm256_loadu_si256(pmb));
    const __m256i x = _mm256_xor_si256(_mm256_loadu_si256(pa), _mm256_loadu_si256(pb));
    diff = _mm256_add_epi64(diff, popcount_epi64(_mm256_and_si256(x, m)));
    comp = _mm256_add_epi64(comp, popcount_epi64(m));
  }
  BitCounts c{hsum_epi64(diff), hsum_epi64(comp)};
  for (; i < n_words; ++i) {
    const std::uint64_t m = mask_a[i] & mask_b[i];
    c.differing += static_cast<std::uint64_t>(std::popcount((a[i] ^ b[i]) & m));
    c.compared += static_cast<std::uint64_t>(std::popcount(m));
  }
  return c;
}

}  // namespace aif::kernels::avx2

#else

#include "aif/error.hpp"

namespace aif::kernels::avx2 {

bool compiled() { return false; }

void axpy(float*, const float*, std::size_t, float) { throw DomainError("AVX2 backend not compiled"); }

void span_axpy(float*, const double*, std::size_t, std::ptrdiff_t, std::ptrdiff_t, float) {
  throw DomainError("AVX2 backend not compiled");
}

BitCounts masked_xor_popcount(const std::uint64_t*, const std::uint64_t*, const std::uint64_t*,
                              const std::uint64_t*, std::size_t) {
  throw DomainError("AVX2 backend not compiled");
}

}  // namespace aif::kernels::avx2

#endif
