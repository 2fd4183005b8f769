#include <cmath>
#include <filesystem>
#include <vector>

#include "aif/error.hpp"
#include "aif/image.hpp"
#include "aif/math.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace aif;

namespace {

// Dense double-precision reference for a span kernel.
std::vector<double> dense(const SpanKernel& k) {
  const int side = 2 * k.radius + 1;
  std::vector<double> d(static_cast<std::size_t>(side) * side, 0.0);
  for (const auto& s : k.spans)
    for (int x = s.x0; x <= s.x1; ++x) d[static_cast<std::size_t>(s.dy + k.radius) * side + x + k.radius] += s.w;
  for (const auto& t : k.taps) d[static_cast<std::size_t>(t.dy + k.radius) * side + t.dx + k.radius] += t.w;
  return d;
}

ImageF brute_convolve(const ImageF& src, const SpanKernel& k) {
  const auto d = dense(k);
  const int r = k.radius;
  const int side = 2 * r + 1;
  ImageF out(src.width - 2 * r, src.height - 2 * r);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double s = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          s += d[static_cast<std::size_t>(dy + r) * side + dx + r] * src.at(x + r + dx, y + r + dy);
      out.at(x, y) = static_cast<float>(s);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("pgm round trip is bit-exact") {
  auto r = testgen::rng(20);
  Image8 img(37, 23);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(r.next_u64() & 0xFF);
  const auto bytes = encode_pgm(img);
  CHECK(std::string(bytes.begin(), bytes.begin() + 3) == "P5\n");
  CHECK(decode_pgm(bytes) == img);
  const auto path = std::filesystem::temp_directory_path() / "aif_test_roundtrip.pgm";
  write_pgm(path, img);
  CHECK(read_pgm(path) == img);
  std::filesystem::remove(path);
  auto bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_pgm(bad), DomainError);
}

TEST_CASE("disk kernel shape") {
  CHECK(disk_kernel(0.0).taps.size() == 1);
  CHECK(disk_kernel(0.9).radius == 0);
  for (const double d : {1.0, 2.5, 4.0, 9.2, 17.3, 40.0, 120.0}) {
    const auto k = disk_kernel(d);
    CHECK(k.weight_sum() == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(k.radius <= static_cast<int>(std::ceil(d / 2.0 + 0.5)));
    // Radial symmetry: the dense kernel equals its transpose and mirror.
    const auto m = dense(k);
    const int side = 2 * k.radius + 1;
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        CHECK(m[static_cast<std::size_t>(y) * side + x] == doctest::Approx(m[static_cast<std::size_t>(x) * side + y]));
        CHECK(m[static_cast<std::size_t>(y) * side + x] ==
              doctest::Approx(m[static_cast<std::size_t>(y) * side + (side - 1 - x)]));
      }
  }
  // Area of the support follows pi r^2.
  const auto big = disk_kernel(60.0);
  const double inv_area = big.spans.front().w;
  CHECK(1.0 / inv_area == doctest::Approx(kPi * 900.0).epsilon(0.01));
}

TEST_CASE("line and gaussian kernels are normalized") {
  for (const auto& [lx, ly] : std::vector<std::pair<double, double>>{{0, 0}, {3, 0}, {0, -7.5}, {12.2, 5.1}}) {
    const auto k = line_kernel(lx, ly);
    CHECK(k.weight_sum() == doctest::Approx(1.0).epsilon(1e-5));
  }
  CHECK(line_kernel(0.0, 0.0).taps.size() == 1);
  for (const double s : {0.0, 0.3, 1.0, 4.5}) {
    double sum = 0.0;
    for (const float w : gaussian_taps(s)) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(gaussian_taps(2.0).size() == 13);
}

TEST_CASE("valid convolution matches a brute-force oracle") {
  auto r = testgen::rng(21);
  ImageF img(61, 47);
  for (auto& p : img.pixels) p = static_cast<float>(r.uniform(0.0, 255.0));
  for (const auto& k : {disk_kernel(7.3), disk_kernel(15.0), line_kernel(6.0, 2.0), SpanKernel::identity()}) {
    const ImageF a = convolve_valid(img, k);
    const ImageF b = brute_convolve(img, k);
    REQUIRE(a.width == b.width);
    REQUIRE(a.height == b.height);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) worst = std::max(worst, std::abs(double(a.pixels[i]) - b.pixels[i]));
    CHECK(worst < 1e-2);
  }
}

TEST_CASE("blur preserves the mean of a padded image") {
  auto r = testgen::rng(22);
  ImageF img(80, 80, 0.0f);
  for (int y = 20; y < 60; ++y)
    for (int x = 20; x < 60; ++x) img.at(x, y) = static_cast<float>(r.uniform(50.0, 200.0));
  double before = 0.0;
  for (const float v : img.pixels) before += v;
  const auto k = disk_kernel(21.0);
  const ImageF out = convolve_valid(pad_clamped(img, k.radius), k);
  double after = 0.0;
  for (const float v : out.pixels) after += v;
  CHECK(after == doctest::Approx(before).epsilon(1e-4));
}

TEST_CASE("separable convolution, pad and crop") {
  ImageF img(30, 20, 0.0f);
  img.at(15, 10) = 1.0f;
  const auto tx = gaussian_taps(1.5);
  const auto ty = gaussian_taps(0.5);
  const ImageF out = convolve_separable_valid(img, tx, ty);
  CHECK(out.width == 30 - static_cast<int>(tx.size() - 1));
  CHECK(out.height == 20 - static_cast<int>(ty.size() - 1));
  double s = 0.0;
  for (const float v : out.pixels) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
  const ImageF p = pad_clamped(img, 3);
  CHECK(p.width == 36);
  CHECK(crop(p, 3) == img);
  CHECK_THROWS_AS(convolve_separable_valid(img, {0.5f, 0.5f}, {1.0f}), DomainError);
}

TEST_CASE("to_u8 rounds and clamps") {
  ImageF f(4, 1);
  f.pixels = {-3.0f, 0.49f, 127.5f, 300.0f};
  const Image8 u = to_u8(f);
  CHECK(u.pixels[0] == 0);
  CHECK(u.pixels[1] == 0);
  CHECK(u.pixels[2] == 128);
  CHECK(u.pixels[3] == 255);
}
