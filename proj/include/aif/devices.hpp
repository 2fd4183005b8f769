#pragma once

// Time-domain models of the focus-tunable lens, the two-axis steering mirror
// and the frame-clocked sensor. Times are in milliseconds.

#include <cstdint>
#include <limits>
#include <vector>

#include "aif/rng.hpp"

namespace aif::optics {
struct OpticalTrain;
}

namespace aif::devices {

enum class StepMode { raw, filtered };

struct TunableLensModel {
  double power_min = -10.0;              ///< dpt
  double power_max = 10.0;               ///< dpt
  double current_gain = 0.0331;          ///< dpt per mA; see current_gain_for
  double current_step_min = 0.07;        ///< mA
  double response_time = 5.0;            ///< ms
  double settling_time = 25.0;           ///< ms, raw step
  double settling_time_filtered = 12.5;  ///< ms, low-pass filtered step
  double repeatability = 0.1;            ///< dpt, half-width of the settling offset
  double sweep_full_range_time = 80.0;   ///< ms, reference full-range sweep
  double oscillation_hz = 200.0;         ///< ringing frequency while settling

  double power_quantum() const { return current_step_min * current_gain; }
  double settling(StepMode mode) const {
    return mode == StepMode::raw ? settling_time : settling_time_filtered;
  }
  /// Clamps to the power range and snaps to the current-step grid. Throws
  /// RangeError when the target lies outside the range by more than half a
  /// quantum.
  double quantize(double target_dpt) const;
  void validate() const;
};

/// Gain (dpt/mA) such that one mA moves the focal plane by `step_mm` around
/// `at_mm` for the given train.
double current_gain_for(const optics::OpticalTrain& train, double at_mm = 5000.0,
                        double step_mm = 10.0);

struct CommandHandle {
  std::uint64_t id = 0;
  double t_cmd = 0.0;
  double settled_at = 0.0;
  double commanded_dpt = 0.0;  ///< after quantization
  StepMode mode = StepMode::raw;
};

/// Single-writer state machine for the liquid lens. Commands must be issued
/// in non-decreasing time order; the latest command supersedes earlier ones.
class TunableLens {
 public:
  TunableLens(TunableLensModel model, std::uint64_t stream, double initial_dpt = 0.0);

  CommandHandle command(double target_dpt, double t_cmd, StepMode mode);

  /// Actual optical power at time t (t must not precede the latest command).
  double sample(double t) const;

  bool settled(double t) const { return t >= current_.settled_at; }
  const CommandHandle& current() const { return current_; }
  const TunableLensModel& model() const { return model_; }

 private:
  TunableLensModel model_;
  Rng rng_;
  CommandHandle current_;
  double from_dpt_ = 0.0;  ///< power at the moment of the latest command
  double offset_dpt_ = 0.0;  ///< repeatability offset drawn for the latest command
  std::uint64_t next_id_ = 1;
};

/// Pose in integer hundredths of a degree, so every pose is on the 0.01 deg grid.
struct MirrorPose {
  std::int32_t pan_cdeg = 0;
  std::int32_t tilt_cdeg = 0;

  double pan_deg() const { return pan_cdeg / 100.0; }
  double tilt_deg() const { return tilt_cdeg / 100.0; }
  bool operator==(const MirrorPose&) const = default;
};

struct MirrorModel {
  double pan_range = 180.0;         ///< +/- deg
  double tilt_range = 60.0;         ///< +/- deg
  double angular_resolution = 0.01; ///< deg; fixed by the MirrorPose representation
  double max_speed = 21000.0;       ///< deg/s (3500 rpm)

  /// Snaps to the 0.01 deg grid; throws RangeError outside the range.
  MirrorPose quantize(double pan_deg, double tilt_deg) const;
  void check(const MirrorPose& pose) const;
  void validate() const;
};

/// Both axes slew concurrently at max_speed.
double mirror_slew_time(const MirrorModel& model, const MirrorPose& from, const MirrorPose& to);

class Mirror {
 public:
  explicit Mirror(MirrorModel model, MirrorPose initial = {});

  /// Returns the time at which the mirror reaches `target`.
  double command(const MirrorPose& target, double t_cmd);
  MirrorPose pose(double t) const;
  bool settled(double t) const { return t >= settled_at_; }
  double settled_at() const { return settled_at_; }
  const MirrorPose& target() const { return target_; }
  const MirrorModel& model() const { return model_; }

 private:
  MirrorModel model_;
  MirrorPose from_;
  MirrorPose target_;
  double t_cmd_ = -std::numeric_limits<double>::infinity();  ///< at rest until the first command
  double settled_at_ = -std::numeric_limits<double>::infinity();
};

struct FrameWindow {
  double start = 0.0;
  double end = 0.0;  ///< start + exposure
};

struct SensorModel {
  double frame_rate = 30.5;  ///< fps
  double exposure = 3.0;     ///< ms
  int px_w = 4080;
  int px_h = 3072;
  double relative_response_850nm = 0.35;

  double frame_period() const { return 1000.0 / frame_rate; }
  void validate() const;
};

std::vector<FrameWindow> sensor_frame_schedule(const SensorModel& model, double t_start, int n);

/// First frame start of the clock anchored at `t0` that is >= t.
double next_frame_boundary(const SensorModel& model, double t0, double t);

}  // namespace aif::devices
