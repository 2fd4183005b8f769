#pragma once

// Paraxial optics of the zoom lens + focus-tunable lens train.
//
// Conventions: lengths in millimeters, optical power in diopters at the API
// boundary (1 dpt = 1/m), object distances measured from the zoom lens
// principal plane. The aperture stop sits at the zoom lens, so its diameter
// is f_o / n_stop.

#include <limits>

namespace aif::optics {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Static parameters of the imaging train.
struct OpticalTrain {
  double f_o = 350.0;           ///< zoom-lens focal length, [70, 350] mm
  double n_stop = 4.8;          ///< f-number
  double d_ot = 335.0;          ///< zoom to tunable lens principal-plane separation, mm
  int sensor_px_w = 4080;
  int sensor_px_h = 3072;
  double sensor_w = 22.173822;  ///< mm; 2 * 70 * tan(9 deg)
  double coc = 0.04993986;      ///< circle of confusion, mm
  double iris_diameter = 10.0;  ///< mm
  double pixel_scale_cal = 1.748310795;  ///< calibrated: 200 px across the iris at 7.7 m
  double d_ref = 5000.0;        ///< distance in focus at zero tunable power, mm

  double aperture() const { return f_o / n_stop; }
  double pixel_pitch() const { return sensor_w / sensor_px_w; }

  /// Throws DomainError naming the first violated invariant.
  void validate() const;
};

/// Image distance v with 1/f = 1/d + 1/v. `d` may be +infinity.
double thin_lens_image_distance(double f, double d);

struct DepthOfField {
  double near_limit = 0.0;
  double far_limit = 0.0;  ///< +infinity beyond the hyperfocal distance
  double total = 0.0;      ///< closed-form DoF expression; +infinity beyond hyperfocal
  bool beyond_hyperfocal = false;
};

/// Depth of field of a single thin lens focused at `d`. The pupil diameter is
/// f / n_stop. `total` is 2Cd / (fP/(d-f) - C^2(d-f)/(fP)); the limits are the
/// distances at which blur_circle_diameter equals `coc`.
DepthOfField depth_of_field(double f, double d, double n_stop, double coc);

/// Geometric blur-spot diameter on the sensor for a thin lens focused at
/// `d_focus` imaging a point at `d_subject`.
double blur_circle_diameter(double d_focus, double d_subject, double f, double n_stop);

/// 1/f = 1/f_o + 1/f_t - d_ot/(f_o f_t). `f_t` may be +/-infinity (zero power).
/// Throws AfocalError when the net power is exactly zero.
double combined_focal_length(double f_o, double f_t, double d_ot);

/// 1000 / power; zero power maps to +infinity.
double diopter_to_focal(double power_dpt);
/// 1000 / f; infinite focal length maps to zero power.
double focal_to_diopter(double f_mm);

/// Solves depth_of_field(...).total == target_total_mm for the circle of confusion.
double coc_for_total_dof(double f, double d, double n_stop, double target_total_mm);

// --- compound two-lens model --------------------------------------------------

inline constexpr double kTunableMaxPower = 10.0;  ///< dpt, symmetric range

/// Sensor distance behind the tunable lens fixed so that zero power focuses
/// train.d_ref. Throws DomainError when the zoom image forms before the
/// tunable lens.
double sensor_distance(const OpticalTrain& train);

/// Blur-spot diameter on the sensor (mm) for an object at `d_subject` with the
/// tunable lens at `power_dpt`.
double compound_blur_diameter(const OpticalTrain& train, double d_subject, double power_dpt);

/// Lateral magnification |image height / object height| on the sensor plane.
double compound_magnification(const OpticalTrain& train, double d_subject, double power_dpt);

/// Object distance brought into focus by `power_dpt`; +infinity when the
/// power focuses at or beyond infinity.
double focus_distance_for_power(const OpticalTrain& train, double power_dpt);

struct FocusSolution {
  double power_dpt = 0.0;        ///< unclamped solution
  double clamped_power_dpt = 0.0;
  bool reachable = true;         ///< |power| <= kTunableMaxPower
};

/// Tunable power that images `d_target` sharply on the fixed sensor.
FocusSolution solve_focus(const OpticalTrain& train, double d_target);

/// As solve_focus, but throws OutOfFocusRange (carrying the nearest
/// achievable distance) when the power is outside the lens range.
double tunable_power_for_focus(const OpticalTrain& train, double d_target);

/// iris_diameter * magnification * pixel_scale_cal / pixel_pitch.
double pixels_across_iris(double d_subject, const OpticalTrain& train, double power_dpt);

/// 2 atan(sensor_w / (2 f_eff)), degrees.
double field_of_view_angle(double f_eff, double sensor_w);

/// Bare-lens DoF.total times the square transverse field at `d`, cubic meters.
double capture_volume(const OpticalTrain& train, double d);

}  // namespace aif::optics
