#pragma once

// Spatiotemporal multiplexing: per-target device setpoints, a frame-clocked
// capture loop with retries, focal sweeps and tracking of a moving subject.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aif/devices.hpp"
#include "aif/iriscode.hpp"
#include "aif/quality.hpp"
#include "aif/renderer.hpp"

namespace aif::sched {

struct DeviceModels {
  devices::TunableLensModel lens;
  devices::MirrorModel mirror;
  devices::SensorModel sensor;

  void validate() const;
};

/// Initial state of the physical devices at the start of a run.
struct DeviceState {
  double power_dpt = 0.0;
  devices::MirrorPose pose;
};

enum class PositionSource { static_pose, tracked };

struct CaptureTarget {
  int subject_id = 0;
  PositionSource source = PositionSource::static_pose;
  int order = 0;  ///< used by the given_order policy
};

struct ScheduleEntry {
  int target_id = 0;  ///< subject id
  devices::MirrorPose mirror;
  double power_dpt = 0.0;  ///< quantized lens setpoint
  double distance_mm = 0.0;
  double earliest_start = 0.0;  ///< first exposure start assuming earlier targets qualify on their first frame
  int dwell_budget = 5;         ///< frames
  bool filtered = false;
};

struct CaptureSchedule {
  double t0 = 0.0;
  DeviceState initial;
  std::vector<ScheduleEntry> entries;

  /// Throws PlanningError on setpoints outside device ranges or a zero budget.
  void validate(const DeviceModels& dev) const;
};

enum class Policy { given_order, nearest_transition };

struct PlanOptions {
  Policy policy = Policy::given_order;
  int dwell_budget = 5;
  bool filtered = false;
  double t0 = 0.0;
  DeviceState initial;
};

/// max(mirror slew, lens settling when the power changes).
double transition_time(const DeviceModels& dev, const DeviceState& from, const devices::MirrorPose& to_pose,
                       double to_power, bool filtered);

/// Throws PlanningError naming the target and violated constraint when a
/// target cannot be aimed or focused.
CaptureSchedule plan(const std::vector<CaptureTarget>& targets, const std::vector<scene::Subject>& subjects,
                     const scene::RigGeometry& rig, const optics::OpticalTrain& train, const DeviceModels& dev,
                     const PlanOptions& opt);

// --- event log ----------------------------------------------------------------

enum class EventType {
  command_issued,
  device_settled,
  frame_exposed,
  target_missed,
  quality_result,
  match_result,
  target_advanced,
  target_failed,
};

const char* event_name(EventType t);

struct Event {
  double t_ms = 0.0;
  EventType type = EventType::command_issued;
  int target_id = 0;
  double pan_deg = 0.0;
  double tilt_deg = 0.0;
  double power_dpt = 0.0;
  std::optional<double> blur_px;
  std::optional<double> px_across_iris;
  std::optional<bool> quality_pass;
  std::optional<double> hd;
  std::optional<bool> matched;

  bool operator==(const Event&) const = default;
};

class EventLog {
 public:
  /// Throws DomainError when `e` precedes the last recorded event.
  void push(const Event& e);
  const std::vector<Event>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  std::string to_csv() const;

  bool operator==(const EventLog&) const = default;

 private:
  std::vector<Event> events_;
};

struct CapturedFrame {
  int target_id = 0;
  int frame_index = 0;  ///< within the target's dwell, or within the tracking run
  render::IrisImage image;
  quality::QualityReport report;
  std::optional<double> hd;
  std::optional<bool> matched;
};

struct RunResult {
  EventLog log;
  std::vector<CapturedFrame> qualified;
};

struct ExecuteOptions {
  std::uint64_t seed = 0;
  /// Subject id -> enrolled template; targets without one skip matching.
  std::map<int, iris::IrisCode> enrolled;
  iris::IrisCodeConfig code;
  double match_threshold = iris::kMatchThreshold;
};

/// Frame-clocked capture loop. Deterministic in (schedule, subjects, seed).
RunResult execute(const CaptureSchedule& schedule, const std::vector<scene::Subject>& subjects,
                  const render::Renderer& renderer, const DeviceModels& dev, const quality::QualityGate& gate,
                  const ExecuteOptions& opt);

// --- focal sweep ------------------------------------------------------------------

struct SweepStep {
  double distance_mm = 0.0;
  double power_dpt = 0.0;
  double t_offset = 0.0;  ///< command time relative to the sweep start, ms
};

struct SweepPlan {
  std::vector<SweepStep> steps;
  double duration = 0.0;  ///< ms until the last step has settled
};

/// n_steps focus distances evenly spaced over [center - front, center + rear],
/// each commanded once the previous one has settled. Throws OutOfFocusRange
/// when an endpoint cannot be focused.
SweepPlan focal_sweep(const optics::OpticalTrain& train, const devices::TunableLensModel& lens,
                      double center_mm, double front_mm, double rear_mm, int n_steps, devices::StepMode mode);

// --- tracking ------------------------------------------------------------------------

struct TrackOptions {
  int n_frames = 15;
  int lag_frames = 1;                 ///< observation delay of the range sensor
  std::vector<double> sweep_offsets;  ///< mm added to the predicted distance, cycled per frame
  bool filtered = false;
  std::uint64_t seed = 0;
  std::optional<iris::IrisCode> enrolled;
  iris::IrisCodeConfig code;
  double match_threshold = iris::kMatchThreshold;
};

struct TrackedFrame {
  int index = 0;
  double t = 0.0;  ///< exposure start
  double range_mm = 0.0;  ///< true line-of-sight distance at mid-exposure
  double predicted_mm = 0.0;
  double blur_px = 0.0;
  double motion_blur_px = 0.0;
  double px_across_iris = 0.0;
  double sharpness = 0.0;
  bool missed = false;
  bool qualified = false;
  std::optional<double> hd;
};

struct TrackResult {
  RunResult run;
  std::vector<TrackedFrame> frames;
};

/// Constant-velocity prediction from noiseless eye observations delayed by
/// lag_frames; the first frame starts at t0.
TrackResult track_and_capture(const scene::Subject& subject, const render::Renderer& renderer,
                              const DeviceModels& dev, const quality::QualityGate& gate, double t0,
                              const TrackOptions& opt);

// --- metrics ---------------------------------------------------------------------------

struct TargetMetrics {
  int target_id = 0;
  std::optional<double> time_to_first_qualified;  ///< ms from t0
  int retries = 0;                                 ///< failed quality results
  int qualified = 0;
};

struct ThroughputMetrics {
  double qualified_per_s = 0.0;
  double span_ms = 0.0;
  std::vector<TargetMetrics> targets;  ///< in order of first appearance
};

/// Throws DomainError on an empty log.
ThroughputMetrics throughput_metrics(const EventLog& log, double t0);

}  // namespace aif::sched
