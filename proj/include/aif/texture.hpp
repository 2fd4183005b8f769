#pragma once

// Seeded procedural iris texture on a polar grid. Row index is the
// normalized radius rho in [0, 1] (pupil boundary to limbus), column index
// is the angle, counterclockwise from 3 o'clock.

#include <cstdint>
#include <vector>

namespace aif {

struct IrisTexture {
  int radial_res = 0;
  int angular_res = 0;
  std::uint64_t identity_seed = 0;
  std::vector<float> values;  ///< row-major, radial_res x angular_res, in [0, 1]

  /// Bilinear lookup; rho is clamped to [0, 1], theta (radians) wraps.
  float sample(double rho, double theta) const;
  double mean() const;
};

/// Multi-octave value noise periodic in angle, plus radial furrows and crypts,
/// normalized to [0, 1]. Throws DomainError below 64 x 256.
IrisTexture generate_iris_texture(std::uint64_t identity_seed, int radial_res = 64,
                                  int angular_res = 512);

}  // namespace aif
