#pragma once

// Frame qualification: resolution from ground truth, band-pass sharpness in
// the iris annulus, and mean brightness relative to the nominal scene.

#include <string>
#include <vector>

#include "aif/renderer.hpp"

namespace aif::quality {

struct QualityGate {
  double px_min = 200.0;
  double sharpness_min = 1.987959038e-4;  ///< calibrated at blur = coc; see the calibrate subcommand
  double brightness_lo = 0.4;  ///< x nominal
  double brightness_hi = 1.0;
  double brightness_tol = 0.01;  ///< slack for sensor noise and rounding at the window edges
  double dog_sigma_fine = 1.0;   ///< px
  double dog_sigma_coarse = 3.0; ///< px
  double rho_lo = 0.25;          ///< annulus used for sharpness, normalized radius; clear of blurred boundary steps
  double rho_hi = 0.75;
  double lid_margin_deg = 10.0;  ///< excluded beyond the occluded sector edges

  void validate() const;
};

struct QualityReport {
  double px_across_iris = 0.0;
  double sharpness = 0.0;
  double brightness_mean = 0.0;
  double brightness_ratio = 0.0;
  bool pass = false;
  std::vector<std::string> fail_reasons;  ///< subset of {resolution, sharpness, brightness}
};

/// Band-pass (difference of Gaussians) energy over total energy inside the
/// annulus between `pupil` and `iris`, outside the widened lid sector.
double sharpness(const Image8& image, const render::Circle& pupil, const render::Circle& iris,
                 const render::GroundTruth& truth, const QualityGate& gate);

QualityReport assess(const render::IrisImage& image, const QualityGate& gate);

/// As assess, with circles from a segmentation instead of ground truth.
QualityReport assess(const render::IrisImage& image, const render::Circle& pupil,
                     const render::Circle& iris, const QualityGate& gate);

}  // namespace aif::quality
