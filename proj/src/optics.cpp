#include "aif/optics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aif/error.hpp"
#include "aif/math.hpp"

namespace aif::optics {

namespace {

// Vergences are carried in 1/mm internally.
double dpt_to_per_mm(double p) { return p / 1000.0; }

// Vergence leaving the zoom lens for an object at d.
double zoom_vergence(const OpticalTrain& t, double d) { return 1.0 / t.f_o - 1.0 / d; }

// Marginal-ray height ratio at the tunable lens.
double height_ratio(const OpticalTrain& t, double v1) { return 1.0 - t.d_ot * v1; }

double vergence_into_tunable(const OpticalTrain& t, double d) {
  const double v1 = zoom_vergence(t, d);
  return v1 / height_ratio(t, v1);
}

void require_object(const OpticalTrain& t, double d) {
  if (!(d > t.f_o)) throw DomainError("object inside focal length");
}

}  // namespace

void OpticalTrain::validate() const {
  auto fail = [](const std::string& what) { throw DomainError("optical train: " + what); };
  if (!(f_o >= 70.0 && f_o <= 350.0)) fail("f_o must lie in [70, 350] mm");
  if (!(n_stop > 0.0)) fail("n_stop must be positive");
  if (!(d_ot > 0.0)) fail("d_ot must be positive");
  if (sensor_px_w <= 0 || sensor_px_h <= 0) fail("pixel counts must be positive");
  if (!(sensor_w > 0.0)) fail("sensor_w must be positive");
  if (!(coc > 0.0)) fail("coc must be positive");
  if (!(iris_diameter > 0.0)) fail("iris_diameter must be positive");
  if (!(pixel_scale_cal > 0.0)) fail("pixel_scale_cal must be positive");
  if (aperture() > 73.0 + 1e-9) fail("aperture f_o/n_stop exceeds the 73 mm entrance pupil");
  if (!(d_ref > f_o)) fail("d_ref must exceed f_o");
  const double v1 = zoom_vergence(*this, d_ref);
  if (!(height_ratio(*this, v1) > 0.0))
    fail("zoom image at d_ref forms before the tunable lens (d_ot too large)");
}

double thin_lens_image_distance(double f, double d) {
  if (!(f > 0.0) || !(d > f)) throw DomainError("object inside focal length");
  if (std::isinf(d)) return f;
  return 1.0 / (1.0 / f - 1.0 / d);
}

DepthOfField depth_of_field(double f, double d, double n_stop, double coc) {
  if (!(f > 0.0) || !(d > f)) throw DomainError("object inside focal length");
  if (!(n_stop > 0.0)) throw DomainError("n_stop must be positive");
  if (coc < 0.0) throw DomainError("coc must be non-negative");

  const double pupil = f / n_stop;
  const double fp = f * pupil;
  const double dmf = d - f;

  DepthOfField out;
  out.near_limit = d * fp / (fp + coc * dmf);
  const double far_den = fp - coc * dmf;
  if (far_den > 0.0) {
    out.far_limit = d * fp / far_den;
  } else {
    out.far_limit = kInfinity;
  }

  const double den = fp / dmf - coc * coc * dmf / fp;
  if (den > 0.0) {
    out.total = 2.0 * coc * d / den;
  } else {
    out.total = kInfinity;
    out.beyond_hyperfocal = true;
  }
  if (std::isinf(out.far_limit)) out.beyond_hyperfocal = true;
  return out;
}

double blur_circle_diameter(double d_focus, double d_subject, double f, double n_stop) {
  if (!(f > 0.0) || !(d_focus > f) || !(d_subject > f))
    throw DomainError("object inside focal length");
  if (!(n_stop > 0.0)) throw DomainError("n_stop must be positive");
  const double aperture = f / n_stop;
  if (std::isinf(d_subject)) return aperture * f / (d_focus - f);
  return aperture * f * std::abs(d_focus - d_subject) / ((d_focus - f) * d_subject);
}

double combined_focal_length(double f_o, double f_t, double d_ot) {
  if (f_o == 0.0 || f_t == 0.0) throw DomainError("focal lengths must be non-zero");
  const double po = 1.0 / f_o;
  const double pt = std::isinf(f_t) ? 0.0 : 1.0 / f_t;
  const double p = po + pt - d_ot * po * pt;
  if (p == 0.0) throw AfocalError("afocal system: combined power is zero");
  return 1.0 / p;
}

double diopter_to_focal(double power_dpt) {
  if (power_dpt == 0.0) return kInfinity;
  return 1000.0 / power_dpt;
}

double focal_to_diopter(double f_mm) {
  if (f_mm == 0.0) throw DomainError("focal length must be non-zero");
  if (std::isinf(f_mm)) return 0.0;
  return 1000.0 / f_mm;
}

double coc_for_total_dof(double f, double d, double n_stop, double target_total_mm) {
  if (!(target_total_mm > 0.0)) throw DomainError("target DoF must be positive");
  const double fp = f * f / n_stop;
  const double c_hyper = fp / (d - f);
  return bisect([&](double c) { return depth_of_field(f, d, n_stop, c).total - target_total_mm; },
                0.0, c_hyper * (1.0 - 1e-9), 1e-13);
}

double sensor_distance(const OpticalTrain& train) {
  require_object(train, train.d_ref);
  const double v1 = zoom_vergence(train, train.d_ref);
  if (!(height_ratio(train, v1) > 0.0))
    throw DomainError("zoom image forms before the tunable lens");
  return 1.0 / vergence_into_tunable(train, train.d_ref);
}

double compound_blur_diameter(const OpticalTrain& train, double d_subject, double power_dpt) {
  require_object(train, d_subject);
  const double s2 = sensor_distance(train);
  const double v1 = zoom_vergence(train, d_subject);
  const double a = height_ratio(train, v1);
  const double v2 = v1 / a + dpt_to_per_mm(power_dpt);
  return train.aperture() * std::abs(a) * std::abs(1.0 - s2 * v2);
}

double compound_magnification(const OpticalTrain& train, double d_subject, double power_dpt) {
  require_object(train, d_subject);
  if (std::isinf(d_subject)) return 0.0;
  const double s2 = sensor_distance(train);
  const double p = dpt_to_per_mm(power_dpt);
  return std::abs(train.d_ot + s2 - p * train.d_ot * s2) / d_subject;
}

double focus_distance_for_power(const OpticalTrain& train, double power_dpt) {
  const double s2 = sensor_distance(train);
  const double v_in = 1.0 / s2 - dpt_to_per_mm(power_dpt);
  const double v1 = v_in / (1.0 + train.d_ot * v_in);
  const double inv_d = 1.0 / train.f_o - v1;
  if (!(inv_d > 0.0)) return kInfinity;
  return 1.0 / inv_d;
}

FocusSolution solve_focus(const OpticalTrain& train, double d_target) {
  require_object(train, d_target);
  const double s2 = sensor_distance(train);
  const double v1 = zoom_vergence(train, d_target);
  if (!(height_ratio(train, v1) > 0.0))
    throw DomainError("object images before the tunable lens");
  FocusSolution out;
  out.power_dpt = 1000.0 * (1.0 / s2 - v1 / height_ratio(train, v1));
  out.reachable = std::abs(out.power_dpt) <= kTunableMaxPower;
  out.clamped_power_dpt = std::clamp(out.power_dpt, -kTunableMaxPower, kTunableMaxPower);
  return out;
}

double tunable_power_for_focus(const OpticalTrain& train, double d_target) {
  const FocusSolution s = solve_focus(train, d_target);
  if (!s.reachable) {
    throw OutOfFocusRange("out of focus range: " + std::to_string(d_target) + " mm",
                          focus_distance_for_power(train, s.clamped_power_dpt));
  }
  return s.power_dpt;
}

double pixels_across_iris(double d_subject, const OpticalTrain& train, double power_dpt) {
  return train.iris_diameter * compound_magnification(train, d_subject, power_dpt) *
         train.pixel_scale_cal / train.pixel_pitch();
}

double field_of_view_angle(double f_eff, double sensor_w) {
  if (!(f_eff > 0.0)) throw DomainError("effective focal length must be positive");
  return rad_to_deg(2.0 * std::atan(sensor_w / (2.0 * f_eff)));
}

double capture_volume(const OpticalTrain& train, double d) {
  const DepthOfField dof = depth_of_field(train.f_o, d, train.n_stop, train.coc);
  const double half = deg_to_rad(field_of_view_angle(train.f_o, train.sensor_w)) / 2.0;
  const double width = 2.0 * d * std::tan(half);
  return dof.total * width * width * 1e-9;
}

}  // namespace aif::optics
