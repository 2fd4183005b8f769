#include <cstring>
#include <vector>

#include "aif/image.hpp"
#include "aif/kernels.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace aif;
namespace k = aif::kernels;

namespace {

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

ImageF random_image(int w, int h, std::uint64_t salt) {
  auto r = testgen::rng(salt);
  ImageF img(w, h);
  for (auto& p : img.pixels) p = static_cast<float>(r.uniform(0.0, 255.0));
  return img;
}

}  // namespace

TEST_CASE("scalar backend always available") {
  CHECK(k::backend_available(k::Backend::scalar));
  CHECK(k::backend_name(k::Backend::avx2) == "avx2");
}

TEST_CASE("axpy matches the reference bit for bit") {
  if (!k::backend_available(k::Backend::avx2)) return;
  auto r = testgen::rng(10);
  for (std::size_t n = 0; n < 70; ++n) {
    for (std::size_t off = 0; off < 3; ++off) {
      std::vector<float> src(n + off), a(n + off), b;
      for (auto& v : src) v = static_cast<float>(r.uniform(-300.0, 300.0));
      for (auto& v : a) v = static_cast<float>(r.uniform(-300.0, 300.0));
      b = a;
      const auto w = static_cast<float>(r.uniform(-1.0, 1.0));
      k::scalar::axpy(a.data() + off, src.data() + off, n, w);
      k::avx2::axpy(b.data() + off, src.data() + off, n, w);
      CHECK(same_bits(a, b));
    }
  }
}

TEST_CASE("span_axpy matches the reference bit for bit") {
  if (!k::backend_available(k::Backend::avx2)) return;
  auto r = testgen::rng(11);
  for (std::size_t n = 1; n < 60; ++n) {
    std::vector<double> prefix(n + 40, 0.0);
    for (std::size_t i = 1; i < prefix.size(); ++i) prefix[i] = prefix[i - 1] + r.uniform(0.0, 255.0);
    std::vector<float> a(n), b;
    for (auto& v : a) v = static_cast<float>(r.uniform(0.0, 10.0));
    b = a;
    const std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(r.next_u64() % 10);
    const std::ptrdiff_t hi = lo + 1 + static_cast<std::ptrdiff_t>(r.next_u64() % 25);
    k::scalar::span_axpy(a.data(), prefix.data(), n, lo, hi, 0.013f);
    k::avx2::span_axpy(b.data(), prefix.data(), n, lo, hi, 0.013f);
    CHECK(same_bits(a, b));
  }
}

TEST_CASE("masked xor popcount matches the reference") {
  auto r = testgen::rng(12);
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint64_t> a(n), b(n), ma(n), mb(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = r.next_u64();
      b[i] = r.next_u64();
      ma[i] = r.next_u64() | r.next_u64();
      mb[i] = r.next_u64() | r.next_u64();
    }
    const auto s = k::scalar::masked_xor_popcount(a.data(), b.data(), ma.data(), mb.data(), n);
    // Bit-by-bit oracle.
    std::uint64_t diff = 0, comp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int bit = 0; bit < 64; ++bit) {
        const bool m = ((ma[i] >> bit) & 1u) && ((mb[i] >> bit) & 1u);
        comp += m;
        diff += m && (((a[i] ^ b[i]) >> bit) & 1u);
      }
    }
    CHECK(s.differing == diff);
    CHECK(s.compared == comp);
    if (k::backend_available(k::Backend::avx2)) {
      const auto v = k::avx2::masked_xor_popcount(a.data(), b.data(), ma.data(), mb.data(), n);
      CHECK(v.differing == diff);
      CHECK(v.compared == comp);
    }
  }
}

TEST_CASE("convolutions are identical under both backends") {
  if (!k::backend_available(k::Backend::avx2)) return;
  BackendGuard guard;
  const ImageF img = random_image(97, 83, 13);
  const auto disk = disk_kernel(13.7);
  const auto line = line_kernel(9.3, -4.1);
  const auto g = gaussian_taps(2.2);
  k::set_backend(k::Backend::scalar);
  const ImageF a1 = convolve_valid(img, disk);
  const ImageF a2 = convolve_valid(img, line);
  const ImageF a3 = convolve_separable_valid(img, g, gaussian_taps(0.6));
  k::set_backend(k::Backend::avx2);
  const ImageF b1 = convolve_valid(img, disk);
  const ImageF b2 = convolve_valid(img, line);
  const ImageF b3 = convolve_separable_valid(img, g, gaussian_taps(0.6));
  CHECK(same_bits(a1.pixels, b1.pixels));
  CHECK(same_bits(a2.pixels, b2.pixels));
  CHECK(same_bits(a3.pixels, b3.pixels));
}
