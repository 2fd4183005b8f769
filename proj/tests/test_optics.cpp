#include <cmath>
#include <vector>

#include "aif/error.hpp"
#include "aif/optics.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace aif;
using namespace aif::optics;

namespace {

// Positive root of T (d-f)^2 C^2 + 2 d fP (d-f) C - T (fP)^2 = 0, i.e. the
// circle of confusion giving total depth of field T.
double coc_closed_form(double f, double d, double n, double t) {
  const double fp = f * f / n;
  const double a = t * (d - f) * (d - f);
  const double b = 2.0 * d * fp * (d - f);
  const double c = -t * fp * fp;
  return (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
}

// Paraxial ray trace through zoom lens, gap, tunable lens and onto the
// sensor: returns the height of a marginal ray at aperture radius h.
double trace_marginal(const OpticalTrain& t, double d, double power_dpt, double s2, double h) {
  double u = h / d;            // slope leaving the object toward the lens
  u = u - h / t.f_o;            // after zoom lens
  const double h2 = h + u * t.d_ot;
  u = u - h2 * power_dpt / 1000.0;
  return h2 + u * s2;
}

}  // namespace

TEST_CASE("thin lens image distance") {
  CHECK(thin_lens_image_distance(350.0, 5000.0) == doctest::Approx(376.344).epsilon(1e-6));
  CHECK(thin_lens_image_distance(100.0, 200.0) == doctest::Approx(200.0));
  CHECK(thin_lens_image_distance(100.0, kInfinity) == 100.0);
  CHECK(thin_lens_image_distance(100.0, 1e12) == doctest::Approx(100.0));
  CHECK_THROWS_AS(thin_lens_image_distance(100.0, 100.0), DomainError);
  CHECK_THROWS_AS(thin_lens_image_distance(100.0, 50.0), DomainError);
}

TEST_CASE("depth of field anchor and closed form") {
  const auto dof = depth_of_field(350.0, 5000.0, 4.8, 0.0499);
  CHECK(dof.total == doctest::Approx(91.0).epsilon(1.0 / 91.0));
  CHECK(std::abs(dof.total - (dof.far_limit - dof.near_limit)) / dof.total <= 0.10);
  CHECK_FALSE(dof.beyond_hyperfocal);
  CHECK(depth_of_field(350.0, 5000.0, 4.8, 0.0).total == 0.0);

  // Default coc reproduces 91 mm; confirm against the closed-form root.
  const double c = coc_closed_form(350.0, 5000.0, 4.8, 91.0);
  CHECK(coc_for_total_dof(350.0, 5000.0, 4.8, 91.0) == doctest::Approx(c).epsilon(1e-10));
  CHECK(OpticalTrain{}.coc == doctest::Approx(c).epsilon(1e-6));
  CHECK(depth_of_field(350.0, 5000.0, 4.8, OpticalTrain{}.coc).total == doctest::Approx(91.0).epsilon(1e-6));
}

TEST_CASE("depth of field beyond hyperfocal") {
  const double f = 50.0, n = 2.0, c = 0.03;
  const double hyper = f * f / (n * c) + f;
  const auto dof = depth_of_field(f, hyper * 1.5, n, c);
  CHECK(dof.beyond_hyperfocal);
  CHECK(std::isinf(dof.far_limit));
  CHECK(std::isinf(dof.total));
  CHECK(dof.near_limit > 0.0);
}

TEST_CASE("depth of field monotonicity on a grid") {
  const double f = 350.0, d = 5000.0, n = 4.8, c = 0.0499;
  double prev = -1.0;
  for (int i = 1; i <= 100; ++i) {
    const double total = depth_of_field(f, d, n, c * i / 50.0).total;
    CHECK(total > prev);
    prev = total;
  }
  prev = -1.0;
  for (int i = 0; i < 100; ++i) {
    const double total = depth_of_field(f, 1000.0 + 80.0 * i, n, c).total;
    CHECK(total > prev);
    prev = total;
  }
  prev = 1e300;
  for (int i = 0; i < 100; ++i) {
    const double total = depth_of_field(150.0 + 2.0 * i, d, n, c).total;
    CHECK(total < prev);
    prev = total;
  }
}

TEST_CASE("blur circle at the exact limits equals coc (property)") {
  auto r = testgen::rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto lc = testgen::lens_case(r);
    const auto dof = depth_of_field(lc.f, lc.d, lc.n, lc.coc);
    CHECK(blur_circle_diameter(lc.d, dof.near_limit, lc.f, lc.n) == doctest::Approx(lc.coc).epsilon(1e-6));
    CHECK(blur_circle_diameter(lc.d, dof.far_limit, lc.f, lc.n) == doctest::Approx(lc.coc).epsilon(1e-6));
  }
}

TEST_CASE("blur circle basic properties") {
  CHECK(blur_circle_diameter(5000.0, 5000.0, 350.0, 4.8) == 0.0);
  double prev = 0.0;
  for (int i = 1; i < 50; ++i) {
    const double b = blur_circle_diameter(5000.0, 5000.0 + 50.0 * i, 350.0, 4.8);
    CHECK(b > prev);
    prev = b;
  }
  prev = 0.0;
  for (int i = 1; i < 50; ++i) {
    const double b = blur_circle_diameter(5000.0, 5000.0 - 50.0 * i, 350.0, 4.8);
    CHECK(b > prev);
    prev = b;
  }
}

TEST_CASE("combined focal length") {
  CHECK(combined_focal_length(350.0, kInfinity, 300.0) == 350.0);
  CHECK(combined_focal_length(100.0, 100.0, 0.0) == 50.0);
  CHECK(combined_focal_length(350.0, 100.0, 50.0) == doctest::Approx(87.5).epsilon(1e-12));
  const double near_zero = combined_focal_length(350.0, diopter_to_focal(1e-9), 300.0);
  CHECK(std::abs(near_zero - 350.0) / 350.0 < 1e-6);
  CHECK_THROWS_AS(combined_focal_length(100.0, -100.0, 0.0), AfocalError);
  CHECK(combined_focal_length(350.0, -100.0, 50.0) ==
        doctest::Approx(1.0 / (1.0 / 350.0 - 1.0 / 100.0 + 50.0 / 35000.0)));
}

TEST_CASE("diopter conversions round-trip") {
  CHECK(diopter_to_focal(10.0) == 100.0);
  CHECK(diopter_to_focal(-10.0) == -100.0);
  CHECK(diopter_to_focal(1.0) == 1000.0);
  CHECK(std::isinf(diopter_to_focal(0.0)));
  CHECK(focal_to_diopter(kInfinity) == 0.0);
  for (const double p : {10.0, -10.0, 5.0, -5.0, 1.0, -1.0, 0.1, -0.1})
    CHECK(focal_to_diopter(diopter_to_focal(p)) == p);
}

TEST_CASE("compound model agrees with a paraxial ray trace") {
  const OpticalTrain t;
  const double s2 = sensor_distance(t);
  const double h = t.aperture() / 2.0;
  for (const double d : {1500.0, 3800.0, 5000.0, 7700.0, 9000.0}) {
    for (const double p : {-8.0, -3.0, 0.0, 2.5, 6.0}) {
      const double y = trace_marginal(t, d, p, s2, h);
      CHECK(compound_blur_diameter(t, d, p) == doctest::Approx(2.0 * std::abs(y)).epsilon(1e-9));
    }
  }
  CHECK(trace_marginal(t, t.d_ref, 0.0, s2, h) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("compound model reduces to the bare lens at zero power") {
  const OpticalTrain t;
  for (const double d : {2000.0, 4000.0, 6000.0, 9000.0}) {
    CHECK(compound_blur_diameter(t, d, 0.0) ==
          doctest::Approx(blur_circle_diameter(t.d_ref, d, t.f_o, t.n_stop)).epsilon(1e-9));
    CHECK(compound_magnification(t, d, 0.0) == doctest::Approx(thin_lens_image_distance(t.f_o, t.d_ref) / d).epsilon(1e-9));
  }
}

TEST_CASE("tunable power for focus") {
  const OpticalTrain t;
  CHECK(std::abs(tunable_power_for_focus(t, t.d_ref)) < 1e-12);
  CHECK(tunable_power_for_focus(t, 4000.0) > 0.0);
  CHECK(tunable_power_for_focus(t, 6000.0) < 0.0);
  double prev = 1e300;
  for (int i = 0; i <= 500; ++i) {
    const double d = 3000.0 + 12.0 * i;
    const auto s = solve_focus(t, d);
    CHECK(s.power_dpt < prev);
    prev = s.power_dpt;
    CHECK(compound_blur_diameter(t, d, s.power_dpt) < 1e-6);
    if (s.reachable) CHECK(focus_distance_for_power(t, s.power_dpt) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("tunable power outside the lens range") {
  const OpticalTrain t;
  const auto far = solve_focus(t, 20000.0);
  CHECK_FALSE(far.reachable);
  CHECK(far.clamped_power_dpt == -kTunableMaxPower);
  try {
    tunable_power_for_focus(t, 20000.0);
    FAIL("expected OutOfFocusRange");
  } catch (const OutOfFocusRange& e) {
    CHECK(e.nearest_achievable_mm == doctest::Approx(focus_distance_for_power(t, -10.0)));
    CHECK(e.nearest_achievable_mm < 20000.0);
  }
  CHECK_THROWS_AS(tunable_power_for_focus(t, 1200.0), OutOfFocusRange);
}

TEST_CASE("pixels across the iris") {
  const OpticalTrain t;
  double prev = 1e300;
  for (int i = 0; i <= 90; ++i) {
    const double px = pixels_across_iris(1000.0 + 100.0 * i, t, 0.0);
    CHECK(px > 0.0);
    CHECK(px < prev);
    prev = px;
  }
  for (const double p : {-5.0, 0.0, 5.0})
    CHECK(pixels_across_iris(16000.0, t, p) / pixels_across_iris(8000.0, t, p) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("field of view and capture volume") {
  const OpticalTrain t;
  CHECK(field_of_view_angle(70.0, t.sensor_w) == doctest::Approx(18.0).epsilon(1e-6));
  CHECK(field_of_view_angle(350.0, 22.2) == doctest::Approx(3.63).epsilon(0.005));
  CHECK(field_of_view_angle(350.0, 1e-9) < 1e-6);

  OpticalTrain z = t;
  z.coc = 0.0;
  CHECK(capture_volume(z, 5000.0) == 0.0);
  OpticalTrain c = t;
  c.coc = 0.0499;
  const double v = capture_volume(c, 5000.0);
  const double width = 2.0 * 5000.0 * t.sensor_w / (2.0 * 350.0) * 1e-3;
  CHECK(v == doctest::Approx(depth_of_field(350.0, 5000.0, 4.8, 0.0499).total * 1e-3 * width * width).epsilon(1e-9));
  CHECK(v == doctest::Approx(0.0096).epsilon(0.1));
  double prev = 0.0;
  for (int i = 1; i <= 20; ++i) {
    c.coc = 0.005 * i;
    const double vi = capture_volume(c, 5000.0);
    CHECK(vi > prev);
    prev = vi;
  }
}

TEST_CASE("optical train validation") {
  OpticalTrain t;
  CHECK_NOTHROW(t.validate());
  t.f_o = 400.0;
  CHECK_THROWS_AS(t.validate(), DomainError);
  t = {};
  t.n_stop = 4.0;  // 350/4 = 87.5 mm aperture exceeds the entrance pupil
  CHECK_THROWS_AS(t.validate(), DomainError);
  t = {};
  t.coc = 0.0;
  CHECK_THROWS_AS(t.validate(), DomainError);
  t = {};
  t.d_ot = 400.0;
  CHECK_THROWS_AS(t.validate(), DomainError);
}
