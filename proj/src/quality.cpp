#include "aif/quality.hpp"

#include <algorithm>
#include <cmath>

#include "aif/error.hpp"
#include "aif/math.hpp"

namespace aif::quality {

void QualityGate::validate() const {
  auto fail = [](const std::string& w) { throw DomainError("quality gate: " + w); };
  if (!(px_min > 0.0)) fail("px_min must be positive");
  if (!(sharpness_min >= 0.0)) fail("sharpness_min must be non-negative");
  if (!(brightness_lo >= 0.0 && brightness_lo < brightness_hi)) fail("empty brightness window");
  if (!(brightness_tol >= 0.0)) fail("brightness_tol must be non-negative");
  if (!(dog_sigma_fine > 0.0 && dog_sigma_coarse > dog_sigma_fine)) fail("DoG sigmas must satisfy 0 < fine < coarse");
  if (!(rho_lo >= 0.0 && rho_lo < rho_hi && rho_hi <= 1.0)) fail("annulus bounds must satisfy 0 <= lo < hi <= 1");
  if (!(lid_margin_deg >= 0.0)) fail("lid_margin_deg must be non-negative");
}

namespace {

ImageF blur_same(const ImageF& img, double sigma) {
  const auto taps = gaussian_taps(sigma);
  const int r = static_cast<int>(taps.size() / 2);
  return convolve_separable_valid(pad_clamped(img, r), taps, taps);
}

}  // namespace

double sharpness(const Image8& image, const render::Circle& pupil, const render::Circle& iris,
                 const render::GroundTruth& truth, const QualityGate& gate) {
  if (!(iris.r > pupil.r) || !(pupil.r > 0.0)) throw DomainError("sharpness: degenerate circles");
  const ImageF f = to_float(image);
  const ImageF fine = blur_same(f, gate.dog_sigma_fine);
  const ImageF coarse = blur_same(f, gate.dog_sigma_coarse);
  render::GroundTruth lid = truth;
  lid.occlusion_half_width_deg = truth.occlusion_half_width_deg > 0.0
                                     ? truth.occlusion_half_width_deg + gate.lid_margin_deg
                                     : 0.0;
  const render::SectorTest lid_test = lid.sector();
  double sum_sq = 0.0, band = 0.0;
  long n = 0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      // Normalized radius along the ray from the pupil center.
      const double rp = std::sqrt((px - pupil.cx) * (px - pupil.cx) + (py - pupil.cy) * (py - pupil.cy));
      const double ri = std::sqrt((px - iris.cx) * (px - iris.cx) + (py - iris.cy) * (py - iris.cy));
      const double rho = (rp - pupil.r) / ((iris.r - pupil.r) + (ri - rp));
      if (rho < gate.rho_lo || rho > gate.rho_hi) continue;
      if (lid_test(px - iris.cx, iris.cy - py)) continue;
      const double v = f.at(x, y);
      const double d = static_cast<double>(fine.at(x, y)) - coarse.at(x, y);
      sum_sq += v * v;
      band += d * d;
      ++n;
    }
  }
  if (n < 16 || !(sum_sq > 0.0)) return 0.0;
  return band / sum_sq;
}

QualityReport assess(const render::IrisImage& image, const render::Circle& pupil,
                     const render::Circle& iris, const QualityGate& gate) {
  QualityReport r;
  r.px_across_iris = image.truth.px_across_iris;
  r.sharpness = sharpness(image.pixels, pupil, iris, image.truth, gate);
  r.brightness_mean = image.truth.brightness_mean;
  r.brightness_ratio = image.truth.brightness_nominal > 0.0
                           ? image.truth.brightness_mean / image.truth.brightness_nominal
                           : 0.0;
  if (r.px_across_iris < gate.px_min) r.fail_reasons.emplace_back("resolution");
  if (r.sharpness < gate.sharpness_min) r.fail_reasons.emplace_back("sharpness");
  if (r.brightness_ratio < gate.brightness_lo - gate.brightness_tol ||
      r.brightness_ratio > gate.brightness_hi + gate.brightness_tol)
    r.fail_reasons.emplace_back("brightness");
  r.pass = r.fail_reasons.empty();
  return r;
}

QualityReport assess(const render::IrisImage& image, const QualityGate& gate) {
  return assess(image, image.truth.pupil, image.truth.iris, gate);
}

}  // namespace aif::quality
