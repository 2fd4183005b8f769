#include <cmath>
#include <variant>

#include "aif/error.hpp"
#include "aif/renderer.hpp"
#include "doctest.h"

using namespace aif;
using namespace aif::render;

namespace {

struct Rig {
  optics::OpticalTrain train;
  scene::RigGeometry rig;
  devices::MirrorModel mirror;
};

FrameInputs aimed(const Rig& r, const scene::Subject& s, double power, std::uint64_t key = 1) {
  const auto a = scene::aim_angles(scene::eye_position(s, 0.0), r.rig);
  return FrameInputs{0.0, 3.0, power, r.mirror.quantize(a.pan_deg, a.tilt_deg), key};
}

scene::Subject at_distance(const Rig& r, double los_mm, std::uint64_t seed = 42) {
  // Place the eye level with the mirror so the slant range is horizontal.
  const double range = los_mm - r.rig.lens_height;
  return scene::make_static_subject(1, seed, range, 0.0, r.rig.mirror_height + scene::kEyeBelowCrown, r.rig);
}

IrisImage expect_image(const RenderResult& res) {
  REQUIRE(std::holds_alternative<IrisImage>(res));
  return std::get<IrisImage>(res);
}

}  // namespace

TEST_CASE("iris texture determinism and range") {
  const auto a = generate_iris_texture(42, 64, 256);
  const auto b = generate_iris_texture(42, 64, 256);
  CHECK(a.values == b.values);
  CHECK(a.mean() > 0.3);
  CHECK(a.mean() < 0.7);
  for (const float v : a.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK_FALSE(generate_iris_texture(43, 64, 256).values == a.values);
  CHECK_THROWS_AS(generate_iris_texture(1, 32, 256), DomainError);
  // Angular wrap is seamless for lookups.
  CHECK(a.sample(0.5, 0.0) == doctest::Approx(a.sample(0.5, 2.0 * kPi)).epsilon(1e-5));
}

TEST_CASE("in-focus render without liquid lens has nominal brightness") {
  Rig r;
  RenderSettings st;
  st.tunable_lens_present = false;
  st.read_noise = 0.0;
  const Renderer ren(r.train, r.rig, st);
  const auto s = at_distance(r, r.train.d_ref);
  const auto img = expect_image(ren.render(s, aimed(r, s, 0.0)));
  CHECK(img.truth.blur_px < 1e-9);
  CHECK(img.truth.brightness_mean == doctest::Approx(img.truth.brightness_nominal).epsilon(0.01));
  CHECK(img.truth.px_across_iris == optics::pixels_across_iris(r.train.d_ref, r.train, 0.0));
  CHECK(img.truth.iris.r * 2.0 == doctest::Approx(img.truth.px_across_iris));
}

TEST_CASE("liquid lens darkens by the transmission factor") {
  Rig r;
  RenderSettings st;
  st.read_noise = 0.0;
  const Renderer ren(r.train, r.rig, st);
  const auto s = at_distance(r, r.train.d_ref);
  const auto img = expect_image(ren.render(s, aimed(r, s, 0.0)));
  CHECK(img.truth.brightness_mean / img.truth.brightness_nominal == doctest::Approx(st.transmission).epsilon(0.01));
}

TEST_CASE("blur at the far limit equals the circle of confusion in pixels") {
  Rig r;
  const Renderer ren(r.train, r.rig, RenderSettings{});
  const auto dof = optics::depth_of_field(r.train.f_o, r.train.d_ref, r.train.n_stop, r.train.coc);
  const auto s = at_distance(r, dof.far_limit);
  const auto img = expect_image(ren.render(s, aimed(r, s, 0.0)));
  CHECK(img.truth.blur_px == doctest::Approx(r.train.coc / r.train.pixel_pitch()).epsilon(1e-6));
}

TEST_CASE("target missed iff the aiming error exceeds half the field of view") {
  Rig r;
  const Renderer ren(r.train, r.rig, RenderSettings{});
  const auto s = at_distance(r, 5000.0);
  auto in = aimed(r, s, 0.0);
  CHECK(std::holds_alternative<IrisImage>(ren.render(s, in)));
  const double half = optics::field_of_view_angle(r.train.f_o, r.train.sensor_w) / 2.0;
  for (int dp = 0; dp <= 600; dp += 10) {
    auto off = in;
    off.mirror.pan_cdeg += dp;
    const double err = aim_error_deg(r.rig, off.mirror, scene::eye_position(s, 1.5));
    const auto res = ren.render(s, off);
    CHECK(std::holds_alternative<TargetMissed>(res) == (err > half));
  }
}

TEST_CASE("render replay is bit-exact and noise follows the key") {
  Rig r;
  const Renderer ren(r.train, r.rig, RenderSettings{});
  const auto s = at_distance(r, 5600.0);
  const auto a = expect_image(ren.render(s, aimed(r, s, -1.0, 5)));
  const auto b = expect_image(ren.render(s, aimed(r, s, -1.0, 5)));
  const auto c = expect_image(ren.render(s, aimed(r, s, -1.0, 6)));
  CHECK(a.pixels == b.pixels);
  CHECK_FALSE(a.pixels == c.pixels);
}

TEST_CASE("image mean is invariant under defocus") {
  Rig r;
  RenderSettings st;
  st.read_noise = 0.0;
  st.roi_w = st.roi_h = 800;
  const Renderer ren(r.train, r.rig, st);
  const auto s = at_distance(r, 5000.0);
  auto mean = [](const Image8& im) {
    double m = 0.0;
    for (const auto p : im.pixels) m += p;
    return m / static_cast<double>(im.pixels.size());
  };
  const double sharp = mean(expect_image(ren.render(s, aimed(r, s, 0.0))).pixels);
  for (const double p : {-0.5, -1.0, -2.0}) {
    const auto img = expect_image(ren.render(s, aimed(r, s, p)));
    CHECK(img.truth.blur_px > 5.0);
    CHECK(mean(img.pixels) == doctest::Approx(sharp).epsilon(0.01));
  }
}

TEST_CASE("motion blur scales with transverse speed") {
  Rig r;
  const Renderer ren(r.train, r.rig, RenderSettings{});
  const double range = 5000.0 - r.rig.lens_height;
  auto walker = scene::make_walking_subject(1, 42, range, 0.0, r.rig.mirror_height + scene::kEyeBelowCrown,
                                            {0.0, 1000.0, 0.0}, -100.0, 100.0, r.rig);
  const auto a = scene::aim_angles(scene::eye_position(walker, 1.5), r.rig);
  FrameInputs in{0.0, 3.0, 0.0, r.mirror.quantize(a.pan_deg, a.tilt_deg), 1};
  const auto img = expect_image(ren.render(walker, in));
  const double m = optics::compound_magnification(r.train, img.truth.distance_mm, 0.0);
  const double expect = 1000.0 * 3e-3 * m * r.train.pixel_scale_cal / r.train.pixel_pitch();
  CHECK(img.truth.motion_blur_px == doctest::Approx(expect).epsilon(1e-3));
  // Radial motion does not smear the image.
  auto radial = scene::make_walking_subject(1, 42, range, 0.0, r.rig.mirror_height + scene::kEyeBelowCrown,
                                            {-1000.0, 0.0, 0.0}, -100.0, 100.0, r.rig);
  const auto b = scene::aim_angles(scene::eye_position(radial, 1.5), r.rig);
  in.mirror = r.mirror.quantize(b.pan_deg, b.tilt_deg);
  CHECK(expect_image(ren.render(radial, in)).truth.motion_blur_px < 1e-9);
}

TEST_CASE("astigmatism is one-sided") {
  ImageF img(40, 40, 0.0f);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) img.at(x, y) = static_cast<float>((x / 3 + y / 5) % 2 * 100);
  CHECK(apply_astigmatism(img, -5.0, 0.1) == img);
  CHECK(apply_astigmatism(img, 0.0, 0.1) == img);
  const ImageF blurred = apply_astigmatism(img, 4.0, 0.1);
  CHECK(blurred.width == img.width);
  CHECK_FALSE(blurred == img);
  CHECK_THROWS_AS(apply_astigmatism(img, 1.0, -1.0), DomainError);
}
