#include "aif/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aif/error.hpp"
#include "aif/math.hpp"
#include "aif/rng.hpp"

namespace aif::render {

void RenderSettings::validate() const {
  auto fail = [](const std::string& w) { throw DomainError("render settings: " + w); };
  if (roi_w < 0 || roi_h < 0 || (roi_w == 0) != (roi_h == 0)) fail("roi_w and roi_h must both be set or both be 0");
  if (!(roi_scale >= 1.0)) fail("roi_scale must be >= 1");
  if (roi_margin < 0 || roi_min < 16) fail("roi_margin must be >= 0 and roi_min >= 16");
  if (!(transmission > 0.0 && transmission <= 1.0)) fail("transmission must lie in (0, 1]");
  if (!(illumination > 0.0)) fail("illumination must be positive");
  if (!(exposure_ref > 0.0)) fail("exposure_ref must be positive");
  if (!(read_noise >= 0.0)) fail("read_noise must be non-negative");
  if (!(k_ast >= 0.0)) fail("k_ast must be non-negative");
  if (!(pupil_ratio > 0.05 && pupil_ratio < 0.9)) fail("pupil_ratio must lie in (0.05, 0.9)");
  if (!(occlusion_fraction >= 0.0 && occlusion_fraction < 0.5)) fail("occlusion_fraction must lie in [0, 0.5)");
  if (!(max_blur_px > 0.0)) fail("max_blur_px must be positive");
  if (texture_radial < 64 || texture_angular < 256) fail("texture resolution must be at least 64 x 256");
}

double RenderSettings::brightness_factor(double exposure) const {
  const double tau = tunable_lens_present ? transmission : 1.0;
  return tau * illumination * exposure / exposure_ref;
}

bool GroundTruth::occluded(double theta_rad) const { return occluded_dir(std::cos(theta_rad), std::sin(theta_rad)); }

SectorTest GroundTruth::sector() const {
  SectorTest t;
  t.active = occlusion_half_width_deg > 0.0;
  t.ux = std::cos(deg_to_rad(occlusion_center_deg));
  t.uy = std::sin(deg_to_rad(occlusion_center_deg));
  t.cos_half_width = std::cos(deg_to_rad(occlusion_half_width_deg));
  return t;
}

ImageF apply_astigmatism(const ImageF& image, double power_dpt, double k_ast) {
  if (!(k_ast >= 0.0)) throw DomainError("k_ast must be non-negative");
  const double pos = std::max(0.0, power_dpt);
  const double sigma = k_ast * pos * pos;
  if (!(sigma > 0.0)) return image;
  const auto tx = gaussian_taps(sigma);
  const auto ty = gaussian_taps(sigma / 4.0);
  const int rx = static_cast<int>(tx.size() / 2);
  const int ry = static_cast<int>(ty.size() / 2);
  const int pad = std::max(rx, ry);
  const ImageF padded = pad_clamped(image, pad);
  ImageF out = convolve_separable_valid(padded, tx, ty);
  // Trim the unequal leftover margins.
  ImageF trimmed(image.width, image.height);
  const int ox = pad - rx;
  const int oy = pad - ry;
  for (int y = 0; y < image.height; ++y) std::copy_n(out.row(y + oy) + ox, image.width, trimmed.row(y));
  return trimmed;
}

double aim_error_deg(const scene::RigGeometry& rig, const devices::MirrorPose& pose, const Vec3& eye) {
  const Vec3 view = scene::viewing_direction(scene::mirror_normal(pose.pan_deg(), pose.tilt_deg()), rig);
  const Vec3 dir = eye.normalized();
  return rad_to_deg(std::atan2(view.cross(dir).norm(), view.dot(dir)));
}

Renderer::Renderer(optics::OpticalTrain train, scene::RigGeometry rig, RenderSettings settings)
    : train_(train), rig_(rig), settings_(settings) {
  train_.validate();
  rig_.validate();
  settings_.validate();
}

std::shared_ptr<const IrisTexture> Renderer::texture(std::uint64_t identity_seed) const {
  {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(identity_seed);
    if (it != cache_.end()) return it->second;
  }
  auto tex = std::make_shared<const IrisTexture>(
      generate_iris_texture(identity_seed, settings_.texture_radial, settings_.texture_angular));
  std::lock_guard lock(cache_mutex_);
  return cache_.emplace(identity_seed, std::move(tex)).first->second;
}

namespace {

int round_up8(int v) { return (v + 7) / 8 * 8; }

}  // namespace

RenderResult Renderer::render(const scene::Subject& subject, const FrameInputs& in) const {
  if (!(in.exposure > 0.0)) throw DomainError("render: exposure must be positive");
  const double tm = in.t + in.exposure / 2.0;
  const Vec3 eye = scene::eye_position(subject, tm);
  const Vec3 vel = scene::eye_velocity(subject, tm);
  const double power = settings_.tunable_lens_present ? in.power_dpt : 0.0;

  const double f_eff = optics::combined_focal_length(train_.f_o, optics::diopter_to_focal(power), train_.d_ot);
  const double half_fov = optics::field_of_view_angle(f_eff, train_.sensor_w) / 2.0;
  const double err = aim_error_deg(rig_, in.mirror, eye);
  if (err > half_fov) return TargetMissed{subject.id, err, half_fov, in.t};

  const double dist = scene::line_of_sight_distance(eye, rig_);
  const double pitch = train_.pixel_pitch();
  GroundTruth gt;
  gt.subject_id = subject.id;
  gt.distance_mm = dist;
  gt.power_dpt = power;
  gt.px_across_iris = optics::pixels_across_iris(dist, train_, power);
  gt.blur_px = std::min(optics::compound_blur_diameter(train_, dist, power) / pitch, settings_.max_blur_px);
  const double pos_power = std::max(0.0, power);
  gt.astig_sigma_px = settings_.k_ast * pos_power * pos_power;
  gt.occlusion_half_width_deg = settings_.occlusion_fraction * 180.0;

  // Motion: transverse eye velocity projected onto the image axes.
  const Vec3 los = eye.normalized();
  Vec3 e_h = Vec3{0.0, 0.0, 1.0}.cross(los);
  if (e_h.norm() < 1e-9) e_h = {1.0, 0.0, 0.0};
  e_h = e_h.normalized();
  const Vec3 e_v = los.cross(e_h);
  const double px_per_mm = optics::compound_magnification(train_, dist, power) * train_.pixel_scale_cal / pitch;
  const double travel = in.exposure / 1000.0 * px_per_mm;
  const double lx = vel.dot(e_h) * travel;
  const double ly = -vel.dot(e_v) * travel;
  gt.motion_blur_px = std::hypot(lx, ly);

  const SpanKernel disk = disk_kernel(gt.blur_px);
  const SpanKernel line = line_kernel(lx, ly);
  const auto gx = gaussian_taps(gt.astig_sigma_px);
  const auto gy = gaussian_taps(gt.astig_sigma_px / 4.0);

  int w = settings_.roi_w;
  int h = settings_.roi_h;
  if (settings_.full_frame) {
    w = train_.sensor_px_w;
    h = train_.sensor_px_h;
  } else if (w == 0) {
    w = h = std::max(settings_.roi_min,
                     round_up8(static_cast<int>(std::ceil(settings_.roi_scale * gt.px_across_iris)) +
                               2 * settings_.roi_margin));
  }
  const int pad_x = disk.radius + line.radius + static_cast<int>(gx.size() / 2);
  const int pad_y = disk.radius + line.radius + static_cast<int>(gy.size() / 2);

  const double ri = gt.px_across_iris / 2.0;
  const double rp = settings_.pupil_ratio * ri;
  const double cx = w / 2.0;
  const double cy = h / 2.0;
  gt.iris = {cx, cy, ri};
  gt.pupil = {cx, cy, rp};

  const auto tex = texture(subject.identity_seed);
  const Intensities& lv = settings_.levels;
  const double gain = settings_.brightness_factor(in.exposure);
  const SectorTest lid_test = gt.sector();
  ImageF canvas(w + 2 * pad_x, h + 2 * pad_y);
  double nominal_sum = 0.0;
  long nominal_n = 0;
  for (int y = 0; y < canvas.height; ++y) {
    const double Y = y + 0.5 - pad_y - cy;
    float* row = canvas.row(y);
    for (int x = 0; x < canvas.width; ++x) {
      const double X = x + 0.5 - pad_x - cx;
      const double r = std::sqrt(X * X + Y * Y);
      const bool in_lid = lid_test(X, -Y);
      const bool lid = in_lid && r > rp;
      const double a_p = std::clamp(rp - r + 0.5, 0.0, 1.0);
      const double a_i = std::clamp(ri - r + 0.5, 0.0, 1.0);
      double iris_v = 0.0;
      double outer_v;
      if (lid) {
        iris_v = outer_v = lv.eyelid;
      } else {
        if (a_i > a_p) {
          const double rho = (r - rp) / (ri - rp);
          iris_v = lv.iris_lo + (lv.iris_hi - lv.iris_lo) * tex->sample(rho, std::atan2(-Y, X));
        }
        outer_v = lv.sclera;
      }
      const double v = a_p * lv.pupil + (a_i - a_p) * iris_v + (1.0 - a_i) * outer_v;
      row[x] = static_cast<float>(v * gain);
      const bool in_roi = x >= pad_x && x < pad_x + w && y >= pad_y && y < pad_y + h;
      if (in_roi && r >= rp && r <= ri && !in_lid) {
        nominal_sum += v;
        ++nominal_n;
      }
    }
  }
  gt.brightness_nominal = nominal_n > 0 ? nominal_sum / nominal_n : 0.0;

  ImageF img = convolve_valid(canvas, disk);
  img = convolve_valid(img, line);
  img = convolve_separable_valid(img, gx, gy);

  Rng noise(in.noise_key);
  if (settings_.read_noise > 0.0) {
    const auto sigma = static_cast<float>(settings_.read_noise);
    for (auto& p : img.pixels) p += sigma * static_cast<float>(noise.normal());
  }
  IrisImage out;
  out.pixels = to_u8(img);
  out.timestamp = in.t;

  double sum = 0.0;
  long n = 0;
  for (int y = 0; y < h; ++y) {
    const double Y = y + 0.5 - cy;
    for (int x = 0; x < w; ++x) {
      const double X = x + 0.5 - cx;
      const double r = std::sqrt(X * X + Y * Y);
      if (r < rp || r > ri || lid_test(X, -Y)) continue;
      sum += out.pixels.at(x, y);
      ++n;
    }
  }
  gt.brightness_mean = n > 0 ? sum / n : 0.0;
  out.truth = gt;
  return out;
}

}  // namespace aif::render
