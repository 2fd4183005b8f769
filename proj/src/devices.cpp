#include "aif/devices.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aif/error.hpp"
#include "aif/math.hpp"
#include "aif/optics.hpp"

namespace aif::devices {

double TunableLensModel::quantize(double target_dpt) const {
  const double q = power_quantum();
  if (target_dpt < power_min - q / 2 || target_dpt > power_max + q / 2)
    throw RangeError("tunable lens: target " + std::to_string(target_dpt) + " dpt out of range");
  double snapped = std::round(target_dpt / q) * q;
  // Snap inward when rounding steps past a range end.
  if (snapped > power_max) snapped = std::floor(power_max / q) * q;
  if (snapped < power_min) snapped = std::ceil(power_min / q) * q;
  return snapped;
}

void TunableLensModel::validate() const {
  auto fail = [](const std::string& w) { throw DomainError("tunable lens model: " + w); };
  if (!(power_min < power_max)) fail("empty power range");
  if (!(current_gain > 0.0) || !(current_step_min > 0.0)) fail("gain and step must be positive");
  if (!(response_time >= 0.0)) fail("response_time must be non-negative");
  if (!(settling_time > response_time) || !(settling_time_filtered > response_time))
    fail("settling times must exceed the response time");
  if (!(repeatability >= 0.0)) fail("repeatability must be non-negative");
  if (!(oscillation_hz > 0.0)) fail("oscillation_hz must be positive");
}

double current_gain_for(const optics::OpticalTrain& train, double at_mm, double step_mm) {
  optics::OpticalTrain anchored = train;
  anchored.d_ref = at_mm;
  const double p0 = optics::solve_focus(anchored, at_mm).power_dpt;
  const double p1 = optics::solve_focus(anchored, at_mm + step_mm).power_dpt;
  return std::abs(p1 - p0);
}

TunableLens::TunableLens(TunableLensModel model, std::uint64_t stream, double initial_dpt)
    : model_(model), rng_(stream) {
  model_.validate();
  const double p = model_.quantize(initial_dpt);
  constexpr double kNever = -std::numeric_limits<double>::infinity();
  current_ = CommandHandle{0, kNever, kNever, p, StepMode::raw};
  from_dpt_ = p;
}

CommandHandle TunableLens::command(double target_dpt, double t_cmd, StepMode mode) {
  if (t_cmd < current_.t_cmd) throw DomainError("tunable lens: commands must be time-ordered");
  const double target = model_.quantize(target_dpt);
  if (target == current_.commanded_dpt) {
    // Zero step: the membrane does not move and the settling offset is kept.
    return CommandHandle{next_id_++, t_cmd, std::max(t_cmd, current_.settled_at), target, mode};
  }
  from_dpt_ = sample(t_cmd);
  offset_dpt_ = rng_.uniform(-model_.repeatability, model_.repeatability);
  current_ = CommandHandle{next_id_++, t_cmd, t_cmd + model_.settling(mode), target, mode};
  return current_;
}

double TunableLens::sample(double t) const {
  if (t < current_.t_cmd) throw DomainError("tunable lens: sample precedes the latest command");
  const double final_dpt = current_.commanded_dpt + offset_dpt_;
  if (t >= current_.settled_at) return final_dpt;
  const double t_resp = current_.t_cmd + model_.response_time;
  if (t < t_resp) return from_dpt_;
  // Damped ringing, decayed to 1e-3 of the step by the settling time.
  const double span = current_.settled_at - t_resp;
  const double tau = span / std::log(1000.0);
  const double dt = t - t_resp;
  const double ring = std::exp(-dt / tau) * std::cos(2.0 * kPi * model_.oscillation_hz * dt / 1000.0);
  return final_dpt + (from_dpt_ - final_dpt) * ring;
}

MirrorPose MirrorModel::quantize(double pan_deg, double tilt_deg) const {
  const MirrorPose pose{static_cast<std::int32_t>(std::lround(pan_deg * 100.0)),
                        static_cast<std::int32_t>(std::lround(tilt_deg * 100.0))};
  check(pose);
  return pose;
}

void MirrorModel::check(const MirrorPose& pose) const {
  if (std::abs(pose.pan_deg()) > pan_range + 1e-9)
    throw RangeError("mirror: pan " + std::to_string(pose.pan_deg()) + " deg out of range");
  if (std::abs(pose.tilt_deg()) > tilt_range + 1e-9)
    throw RangeError("mirror: tilt " + std::to_string(pose.tilt_deg()) + " deg out of range");
}

void MirrorModel::validate() const {
  if (!(pan_range > 0.0) || !(tilt_range > 0.0)) throw DomainError("mirror: ranges must be positive");
  if (!(max_speed > 0.0)) throw DomainError("mirror: max_speed must be positive");
  if (angular_resolution != 0.01) throw DomainError("mirror: angular resolution is fixed at 0.01 deg");
}

double mirror_slew_time(const MirrorModel& model, const MirrorPose& from, const MirrorPose& to) {
  model.check(from);
  model.check(to);
  const double dpan = std::abs(to.pan_cdeg - from.pan_cdeg) / 100.0;
  const double dtilt = std::abs(to.tilt_cdeg - from.tilt_cdeg) / 100.0;
  return std::max(dpan, dtilt) / model.max_speed * 1000.0;
}

Mirror::Mirror(MirrorModel model, MirrorPose initial)
    : model_(model), from_(initial), target_(initial) {
  model_.validate();
  model_.check(initial);
}

double Mirror::command(const MirrorPose& target, double t_cmd) {
  if (t_cmd < t_cmd_) throw DomainError("mirror: commands must be time-ordered");
  from_ = pose(t_cmd);
  target_ = target;
  t_cmd_ = t_cmd;
  settled_at_ = t_cmd + mirror_slew_time(model_, from_, target_);
  return settled_at_;
}

MirrorPose Mirror::pose(double t) const {
  if (t >= settled_at_) return target_;
  if (t <= t_cmd_) return from_;
  const double frac = (t - t_cmd_) / (settled_at_ - t_cmd_);
  auto lerp = [frac](std::int32_t a, std::int32_t b) {
    return static_cast<std::int32_t>(std::lround(a + frac * (b - a)));
  };
  return {lerp(from_.pan_cdeg, target_.pan_cdeg), lerp(from_.tilt_cdeg, target_.tilt_cdeg)};
}

void SensorModel::validate() const {
  if (!(frame_rate > 0.0)) throw DomainError("sensor: frame_rate must be positive");
  if (!(exposure > 0.0) || !(exposure < frame_period()))
    throw DomainError("sensor: exposure must lie in (0, frame period)");
  if (px_w <= 0 || px_h <= 0) throw DomainError("sensor: pixel counts must be positive");
}

std::vector<FrameWindow> sensor_frame_schedule(const SensorModel& model, double t_start, int n) {
  if (n < 1) throw DomainError("sensor: frame count must be >= 1");
  std::vector<FrameWindow> frames;
  frames.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double start = t_start + k * model.frame_period();
    frames.push_back({start, start + model.exposure});
  }
  return frames;
}

double next_frame_boundary(const SensorModel& model, double t0, double t) {
  const double period = model.frame_period();
  if (t <= t0) return t0;
  // Tolerate round-off when t lands on a boundary.
  const double k = std::ceil((t - t0) / period - 1e-9);
  return t0 + k * period;
}

}  // namespace aif::devices
