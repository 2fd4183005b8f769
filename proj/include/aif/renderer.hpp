#pragma once

// Synthesizes the sensor crop around a target eye: procedural iris at the
// optically predicted scale, defocus disk, motion line, astigmatic Gaussian,
// transmission loss and read noise.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <variant>

#include "aif/devices.hpp"
#include "aif/image.hpp"
#include "aif/optics.hpp"
#include "aif/scene.hpp"
#include "aif/texture.hpp"

namespace aif::render {

struct Intensities {
  double pupil = 20.0;
  double iris_lo = 50.0;
  double iris_hi = 190.0;
  double sclera = 200.0;
  double eyelid = 150.0;
};

struct RenderSettings {
  int roi_w = 0;  ///< 0 selects a square crop sized from the iris
  int roi_h = 0;
  bool full_frame = false;  ///< render the whole sensor (slow; demos only)
  double roi_scale = 1.3;   ///< auto crop side relative to the iris diameter
  int roi_margin = 16;
  int roi_min = 96;
  bool tunable_lens_present = true;
  double transmission = 0.8;
  double illumination = 1.0;
  double exposure_ref = 3.0;  ///< ms at which illumination 1 gives nominal grey levels
  double read_noise = 2.0;    ///< grey levels
  double k_ast = 0.137298584;   ///< px of astigmatic sigma per dpt^2 of positive power; calibrated
  double pupil_ratio = 0.4;
  double occlusion_fraction = 0.15;  ///< share of the annulus hidden by the upper lid
  double max_blur_px = 200.0;
  int texture_radial = 64;
  int texture_angular = 512;
  Intensities levels;

  void validate() const;
  /// Brightness relative to nominal: transmission (when the liquid lens is
  /// present) x illumination x exposure / exposure_ref.
  double brightness_factor(double exposure) const;
};

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

/// Angular sector membership for directions (x, y_up) without trigonometry.
struct SectorTest {
  double ux = 0.0;
  double uy = 1.0;
  double cos_half_width = 1.0;
  bool active = false;

  bool operator()(double x, double y_up) const {
    if (!active) return false;
    const double r = std::sqrt(x * x + y_up * y_up);
    return r > 0.0 && x * ux + y_up * uy >= r * cos_half_width;
  }
};

struct GroundTruth {
  int subject_id = 0;
  double distance_mm = 0.0;
  double power_dpt = 0.0;
  double px_across_iris = 0.0;
  double blur_px = 0.0;
  double motion_blur_px = 0.0;
  double astig_sigma_px = 0.0;
  double brightness_mean = 0.0;
  double brightness_nominal = 0.0;
  Circle pupil;
  Circle iris;
  /// Occluded angular sector, degrees counterclockwise from 3 o'clock.
  double occlusion_center_deg = 90.0;
  double occlusion_half_width_deg = 0.0;

  bool occluded(double theta_rad) const;
  bool occluded_dir(double x, double y_up) const { return sector()(x, y_up); }
  SectorTest sector() const;
};

struct IrisImage {
  Image8 pixels;
  GroundTruth truth;
  double timestamp = 0.0;  ///< exposure start, ms
};

struct TargetMissed {
  int subject_id = 0;
  double aim_error_deg = 0.0;
  double half_fov_deg = 0.0;
  double timestamp = 0.0;
};

using RenderResult = std::variant<IrisImage, TargetMissed>;

/// Device state for one exposure. The eye is sampled at mid-exposure.
struct FrameInputs {
  double t = 0.0;         ///< exposure start, ms
  double exposure = 3.0;  ///< ms
  double power_dpt = 0.0; ///< tunable-lens power during the exposure
  devices::MirrorPose mirror;
  std::uint64_t noise_key = 0;
};

/// Anisotropic Gaussian with sigma_x = k_ast max(0, p)^2 and sigma_y a
/// quarter of that; same-size output with clamped borders.
ImageF apply_astigmatism(const ImageF& image, double power_dpt, double k_ast);

/// Angle between the mirror-directed viewing axis and the eye direction.
double aim_error_deg(const scene::RigGeometry& rig, const devices::MirrorPose& pose, const Vec3& eye);

class Renderer {
 public:
  Renderer(optics::OpticalTrain train, scene::RigGeometry rig, RenderSettings settings);

  RenderResult render(const scene::Subject& subject, const FrameInputs& in) const;

  /// Cached per identity seed; safe to call concurrently.
  std::shared_ptr<const IrisTexture> texture(std::uint64_t identity_seed) const;

  const optics::OpticalTrain& train() const { return train_; }
  const scene::RigGeometry& rig() const { return rig_; }
  const RenderSettings& settings() const { return settings_; }

 private:
  optics::OpticalTrain train_;
  scene::RigGeometry rig_;
  RenderSettings settings_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::uint64_t, std::shared_ptr<const IrisTexture>> cache_;
};

}  // namespace aif::render
