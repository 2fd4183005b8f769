#include <algorithm>
#include <variant>
#include <vector>

#include "aif/error.hpp"
#include "aif/quality.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace aif;
using namespace aif::quality;

namespace {

struct Bench {
  optics::OpticalTrain train;
  scene::RigGeometry rig;

  render::IrisImage shot(double los_mm, double focus_mm, std::uint64_t noise, render::RenderSettings st = {}) const {
    const render::Renderer ren(train, rig, st);
    const auto s = scene::make_static_subject(1, 42, los_mm - rig.lens_height, 0.0,
                                              rig.mirror_height + scene::kEyeBelowCrown, rig);
    const auto a = scene::aim_angles(scene::eye_position(s, 0.0), rig);
    const double p = optics::solve_focus(train, focus_mm).power_dpt;
    const auto res = ren.render(s, {0.0, 3.0, p, devices::MirrorModel{}.quantize(a.pan_deg, a.tilt_deg), noise});
    REQUIRE(std::holds_alternative<render::IrisImage>(res));
    return std::get<render::IrisImage>(res);
  }
};

bool has(const QualityReport& r, const std::string& reason) {
  return std::find(r.fail_reasons.begin(), r.fail_reasons.end(), reason) != r.fail_reasons.end();
}

}  // namespace

TEST_CASE("gate validation") {
  QualityGate g;
  CHECK_NOTHROW(g.validate());
  g.brightness_lo = 1.2;
  CHECK_THROWS_AS(g.validate(), DomainError);
  g = {};
  g.dog_sigma_coarse = 0.5;
  CHECK_THROWS_AS(g.validate(), DomainError);
}

TEST_CASE("sharpness strictly decreases over 20 defocus levels") {
  const Bench b;
  const double coc_px = b.train.coc / b.train.pixel_pitch();
  const QualityGate g;
  double prev = 1e9;
  double last_blur = -1.0;
  for (int i = 0; i < 20; ++i) {
    // Defocus grid from 0 to about 3 x the circle of confusion.
    const auto img = b.shot(b.train.d_ref, b.train.d_ref + 7.5 * i, 1);
    CHECK(img.truth.blur_px > last_blur);
    last_blur = img.truth.blur_px;
    const double s = assess(img, g).sharpness;
    CHECK(s < prev);
    prev = s;
  }
  CHECK(last_blur > 2.5 * coc_px);
}

TEST_CASE("resolution threshold semantics") {
  const Bench b;
  auto img = b.shot(b.train.d_ref, b.train.d_ref, 2);
  QualityGate g;
  img.truth.px_across_iris = 199.0;
  auto r = assess(img, g);
  CHECK_FALSE(r.pass);
  CHECK(has(r, "resolution"));
  img.truth.px_across_iris = 200.0;
  r = assess(img, g);
  CHECK_FALSE(has(r, "resolution"));
  g.px_min = 120.0;
  img.truth.px_across_iris = 121.0;
  CHECK_FALSE(has(assess(img, g), "resolution"));
}

TEST_CASE("gate threshold set at the circle-of-confusion blur") {
  const Bench b;
  const double coc_px = b.train.coc / b.train.pixel_pitch();
  // Focus offset giving blur = coc: the far analytic DoF limit, viewed from the subject side.
  const auto dof = optics::depth_of_field(b.train.f_o, b.train.d_ref, b.train.n_stop, b.train.coc);
  QualityGate g;
  g.px_min = 1.0;
  const auto edge = b.shot(dof.far_limit, b.train.d_ref, 3);
  CHECK(edge.truth.blur_px == doctest::Approx(coc_px).epsilon(0.02));
  g.sharpness_min = assess(edge, g).sharpness;

  const auto sharp = b.shot(b.train.d_ref, b.train.d_ref, 4);
  const auto r_sharp = assess(sharp, g);
  CHECK(r_sharp.pass);
  CHECK(r_sharp.fail_reasons.empty());

  // Three times the calibrated edge blur.
  const auto& t = edge.truth;
  double lo = b.train.d_ref, hi = b.train.d_ref + 2000.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (b.shot(b.train.d_ref, mid, 5).truth.blur_px < 3.0 * t.blur_px ? lo : hi) = mid;
  }
  const auto r_blur = assess(b.shot(b.train.d_ref, hi, 5), g);
  CHECK_FALSE(r_blur.pass);
  CHECK(has(r_blur, "sharpness"));
  CHECK(r_blur.pass == r_blur.fail_reasons.empty());
}

TEST_CASE("gate is monotone in blur") {
  const Bench b;
  QualityGate g;
  g.px_min = 1.0;
  std::vector<double> s;
  for (int i = 0; i < 12; ++i) s.push_back(assess(b.shot(b.train.d_ref, b.train.d_ref + 10.0 * i, 6), g).sharpness);
  auto r = testgen::rng(201);
  for (int trial = 0; trial < 40; ++trial) {
    g.sharpness_min = r.uniform(s.back(), s.front());
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
      if (s[i + 1] >= g.sharpness_min) CHECK(s[i] >= g.sharpness_min);
  }
}

TEST_CASE("brightness window follows transmission and illumination") {
  const Bench b;
  QualityGate g;
  g.px_min = 1.0;
  render::RenderSettings st;
  auto r = assess(b.shot(b.train.d_ref, b.train.d_ref, 7, st), g);
  CHECK(r.brightness_ratio == doctest::Approx(0.8).epsilon(0.02));
  CHECK_FALSE(has(r, "brightness"));

  st.illumination = 0.4;  // 0.32 x nominal through the liquid lens
  r = assess(b.shot(b.train.d_ref, b.train.d_ref, 7, st), g);
  CHECK(has(r, "brightness"));
  CHECK(r.brightness_ratio == doctest::Approx(0.32).epsilon(0.03));

  st = {};
  st.tunable_lens_present = false;
  r = assess(b.shot(b.train.d_ref, b.train.d_ref, 7, st), g);
  CHECK(r.brightness_ratio == doctest::Approx(1.0).epsilon(0.01));
  CHECK_FALSE(has(r, "brightness"));
}

TEST_CASE("sharpness is brightness invariant up to noise and rounding") {
  const Bench b;
  const QualityGate g;
  render::RenderSettings st;
  st.read_noise = 0.0;
  const double s1 = assess(b.shot(b.train.d_ref, b.train.d_ref, 8, st), g).sharpness;
  st.illumination = 0.7;
  const double s2 = assess(b.shot(b.train.d_ref, b.train.d_ref, 8, st), g).sharpness;
  CHECK(s2 == doctest::Approx(s1).epsilon(0.03));
}
