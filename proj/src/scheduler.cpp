#include "aif/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "aif/csv.hpp"
#include "aif/error.hpp"
#include "aif/rng.hpp"

namespace aif::sched {

namespace {

constexpr std::uint64_t kLensStream = 0x1E45;
constexpr std::uint64_t kNoiseStream = 0x4015E;

devices::StepMode mode_of(bool filtered) { return filtered ? devices::StepMode::filtered : devices::StepMode::raw; }

const scene::Subject& find_subject(const std::vector<scene::Subject>& subjects, int id) {
  for (const auto& s : subjects)
    if (s.id == id) return s;
  throw PlanningError(fmt::format("target {}: no such subject in the scene", id));
}

// First frame boundary at or after t.
double frame_at_or_after(const devices::SensorModel& sensor, double t0, double t) {
  double s = devices::next_frame_boundary(sensor, t0, t);
  if (s < t) s += sensor.frame_period();
  return s;
}

}  // namespace

void DeviceModels::validate() const {
  lens.validate();
  mirror.validate();
  sensor.validate();
}

void CaptureSchedule::validate(const DeviceModels& dev) const {
  double prev = t0;
  for (const auto& e : entries) {
    try {
      dev.mirror.check(e.mirror);
      if (dev.lens.quantize(e.power_dpt) != e.power_dpt)
        throw RangeError(fmt::format("lens setpoint {} dpt is off the current-step grid", e.power_dpt));
    } catch (const RangeError& err) {
      throw PlanningError(fmt::format("target {}: {}", e.target_id, err.what()));
    }
    if (e.dwell_budget < 1) throw PlanningError(fmt::format("target {}: dwell budget must be >= 1", e.target_id));
    if (e.earliest_start < prev)
      throw PlanningError(fmt::format("target {}: earliest start precedes its predecessor", e.target_id));
    prev = e.earliest_start;
  }
}

double transition_time(const DeviceModels& dev, const DeviceState& from, const devices::MirrorPose& to_pose,
                       double to_power, bool filtered) {
  const double slew = devices::mirror_slew_time(dev.mirror, from.pose, to_pose);
  const double settle = dev.lens.quantize(to_power) != dev.lens.quantize(from.power_dpt)
                            ? dev.lens.settling(mode_of(filtered))
                            : 0.0;
  return std::max(slew, settle);
}

CaptureSchedule plan(const std::vector<CaptureTarget>& targets, const std::vector<scene::Subject>& subjects,
                     const scene::RigGeometry& rig, const optics::OpticalTrain& train, const DeviceModels& dev,
                     const PlanOptions& opt) {
  dev.validate();
  if (opt.dwell_budget < 1) throw PlanningError("dwell budget must be >= 1");
  struct Item {
    ScheduleEntry entry;
    int order;
  };
  std::vector<Item> items;
  for (const auto& t : targets) {
    const scene::Subject& s = find_subject(subjects, t.subject_id);
    ScheduleEntry e;
    e.target_id = t.subject_id;
    e.dwell_budget = opt.dwell_budget;
    e.filtered = opt.filtered;
    const Vec3 eye = scene::eye_position(s, opt.t0);
    try {
      const auto a = scene::aim_angles(eye, rig, dev.mirror.tilt_range);
      e.mirror = dev.mirror.quantize(a.pan_deg, a.tilt_deg);
    } catch (const UnreachablePose& err) {
      throw PlanningError(fmt::format("target {}: mirror cannot reach the eye ({})", t.subject_id, err.what()));
    } catch (const RangeError& err) {
      throw PlanningError(fmt::format("target {}: mirror cannot reach the eye ({})", t.subject_id, err.what()));
    }
    e.distance_mm = scene::line_of_sight_distance(eye, rig);
    try {
      e.power_dpt = dev.lens.quantize(optics::tunable_power_for_focus(train, e.distance_mm));
    } catch (const OutOfFocusRange& err) {
      throw PlanningError(fmt::format("target {}: focus distance {:.1f} mm outside the lens range (nearest {:.1f} mm)",
                                      t.subject_id, e.distance_mm, err.nearest_achievable_mm));
    } catch (const RangeError& err) {
      throw PlanningError(fmt::format("target {}: {}", t.subject_id, err.what()));
    }
    items.push_back({e, t.order});
  }

  CaptureSchedule out;
  out.t0 = opt.t0;
  out.initial = {dev.lens.quantize(opt.initial.power_dpt), opt.initial.pose};
  if (opt.policy == Policy::given_order) {
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.order < b.order; });
    for (const auto& it : items) out.entries.push_back(it.entry);
  } else {
    DeviceState state = out.initial;
    std::vector<bool> used(items.size(), false);
    for (std::size_t n = 0; n < items.size(); ++n) {
      std::size_t best = items.size();
      double best_t = 0.0;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (used[i]) continue;
        const double tt = transition_time(dev, state, items[i].entry.mirror, items[i].entry.power_dpt, opt.filtered);
        if (best == items.size() || tt < best_t) {
          best = i;
          best_t = tt;
        }
      }
      used[best] = true;
      out.entries.push_back(items[best].entry);
      state = {items[best].entry.power_dpt, items[best].entry.mirror};
    }
  }

  DeviceState state = out.initial;
  double t = opt.t0;
  for (auto& e : out.entries) {
    const double ready = t + transition_time(dev, state, e.mirror, e.power_dpt, e.filtered);
    e.earliest_start = frame_at_or_after(dev.sensor, opt.t0, ready);
    t = e.earliest_start + dev.sensor.exposure;
    state = {e.power_dpt, e.mirror};
  }
  out.validate(dev);
  return out;
}

// --- event log ------------------------------------------------------------------

const char* event_name(EventType t) {
  switch (t) {
    case EventType::command_issued: return "command_issued";
    case EventType::device_settled: return "device_settled";
    case EventType::frame_exposed: return "frame_exposed";
    case EventType::target_missed: return "target_missed";
    case EventType::quality_result: return "quality_result";
    case EventType::match_result: return "match_result";
    case EventType::target_advanced: return "target_advanced";
    case EventType::target_failed: return "target_failed";
  }
  return "unknown";
}

void EventLog::push(const Event& e) {
  if (!events_.empty() && e.t_ms < events_.back().t_ms)
    throw DomainError(fmt::format("event log: {} at {} ms precedes the previous event at {} ms", event_name(e.type),
                                  e.t_ms, events_.back().t_ms));
  events_.push_back(e);
}

std::string EventLog::to_csv() const {
  csv::Table t({"t_ms", "event_type", "target_id", "pan_deg", "tilt_deg", "power_dpt", "blur_px", "px_across_iris",
                "quality_pass", "hd", "matched"});
  for (const auto& e : events_)
    t.add({csv::num(e.t_ms), event_name(e.type), csv::integer(e.target_id), csv::num(e.pan_deg), csv::num(e.tilt_deg),
           csv::num(e.power_dpt), csv::num(e.blur_px), csv::num(e.px_across_iris), csv::flag(e.quality_pass),
           csv::num(e.hd), csv::flag(e.matched)});
  return t.str();
}

// --- execution ---------------------------------------------------------------------

namespace {

struct MatchOutcome {
  std::optional<double> hd;
  std::optional<bool> matched;
};

MatchOutcome match_against(const std::optional<iris::IrisCode>& tmpl, const render::IrisImage& img,
                           const iris::IrisCodeConfig& cfg, double threshold) {
  if (!tmpl) return {};
  try {
    const double hd = iris::hamming_distance(*tmpl, iris::encode_image(img, cfg)).hd;
    return {hd, hd < threshold};
  } catch (const ComparisonError&) {
    return {std::nullopt, false};
  }
}

Event device_event(EventType type, double t, int id, const devices::MirrorPose& pose, double power) {
  Event e;
  e.t_ms = t;
  e.type = type;
  e.target_id = id;
  e.pan_deg = pose.pan_deg();
  e.tilt_deg = pose.tilt_deg();
  e.power_dpt = power;
  return e;
}

}  // namespace

RunResult execute(const CaptureSchedule& schedule, const std::vector<scene::Subject>& subjects,
                  const render::Renderer& renderer, const DeviceModels& dev, const quality::QualityGate& gate,
                  const ExecuteOptions& opt) {
  dev.validate();
  gate.validate();
  schedule.validate(dev);
  for (const auto& e : schedule.entries) find_subject(subjects, e.target_id);

  RunResult out;
  devices::TunableLens lens(dev.lens, stream_key(opt.seed, {kLensStream}), schedule.initial.power_dpt);
  devices::Mirror mirror(dev.mirror, schedule.initial.pose);
  const double period = dev.sensor.frame_period();
  const double exposure = dev.sensor.exposure;
  double t = schedule.t0;

  for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
    const ScheduleEntry& e = schedule.entries[i];
    const scene::Subject& subject = find_subject(subjects, e.target_id);
    const auto handle = lens.command(e.power_dpt, t, mode_of(e.filtered));
    const double mirror_ready = mirror.command(e.mirror, t);
    out.log.push(device_event(EventType::command_issued, t, e.target_id, e.mirror, e.power_dpt));
    const double ready = std::max(handle.settled_at, mirror_ready);
    out.log.push(device_event(EventType::device_settled, ready, e.target_id, e.mirror, e.power_dpt));

    const double first = frame_at_or_after(dev.sensor, schedule.t0, ready);
    std::optional<iris::IrisCode> tmpl;
    if (auto it = opt.enrolled.find(e.target_id); it != opt.enrolled.end()) tmpl = it->second;
    bool done = false;
    double s = first;
    for (int k = 0; k < e.dwell_budget && !done; ++k) {
      s = first + k * period;
      const double power = lens.sample(s);
      const devices::MirrorPose pose = mirror.pose(s);
      const bool settled = lens.settled(s) && mirror.settled(s);
      const render::FrameInputs in{s, exposure, power, pose, stream_key(opt.seed, {kNoiseStream, i, static_cast<std::uint64_t>(k)})};
      const auto res = renderer.render(subject, in);
      if (std::holds_alternative<render::TargetMissed>(res)) {
        out.log.push(device_event(EventType::target_missed, s, e.target_id, pose, power));
        Event q = device_event(EventType::quality_result, s + exposure, e.target_id, pose, power);
        q.quality_pass = false;
        out.log.push(q);
        continue;
      }
      const auto& img = std::get<render::IrisImage>(res);
      Event fe = device_event(EventType::frame_exposed, s, e.target_id, pose, power);
      fe.blur_px = img.truth.blur_px;
      fe.px_across_iris = img.truth.px_across_iris;
      out.log.push(fe);
      const auto report = quality::assess(img, gate);
      const bool pass = report.pass && settled;
      Event q = fe;
      q.type = EventType::quality_result;
      q.t_ms = s + exposure;
      q.quality_pass = pass;
      out.log.push(q);
      if (!pass) continue;
      const auto m = match_against(tmpl, img, opt.code, opt.match_threshold);
      if (tmpl) {
        Event me = q;
        me.type = EventType::match_result;
        me.hd = m.hd;
        me.matched = m.matched;
        out.log.push(me);
      }
      out.qualified.push_back({e.target_id, k, img, report, m.hd, m.matched});
      out.log.push(device_event(EventType::target_advanced, s + exposure, e.target_id, pose, power));
      done = true;
    }
    if (!done) out.log.push(device_event(EventType::target_failed, s + exposure, e.target_id, e.mirror, e.power_dpt));
    t = s + exposure;
  }
  return out;
}

// --- focal sweep ---------------------------------------------------------------------

SweepPlan focal_sweep(const optics::OpticalTrain& train, const devices::TunableLensModel& lens, double center_mm,
                      double front_mm, double rear_mm, int n_steps, devices::StepMode mode) {
  lens.validate();
  if (n_steps < 1) throw DomainError("focal sweep: n_steps must be >= 1");
  if (!(front_mm >= 0.0) || !(rear_mm >= 0.0)) throw DomainError("focal sweep: spans must be non-negative");
  SweepPlan plan;
  const double near = center_mm - front_mm;
  const double far = center_mm + rear_mm;
  const double settle = lens.settling(mode);
  for (int i = 0; i < n_steps; ++i) {
    const double d = n_steps == 1 ? center_mm : near + (far - near) * i / (n_steps - 1);
    const double p = lens.quantize(optics::tunable_power_for_focus(train, d));
    plan.steps.push_back({d, p, i * settle});
  }
  plan.duration = n_steps * settle;
  return plan;
}

// --- tracking -------------------------------------------------------------------------

TrackResult track_and_capture(const scene::Subject& subject, const render::Renderer& renderer,
                              const DeviceModels& dev, const quality::QualityGate& gate, double t0,
                              const TrackOptions& opt) {
  dev.validate();
  gate.validate();
  if (opt.n_frames < 1) throw DomainError("tracking: n_frames must be >= 1");
  if (opt.lag_frames < 1) throw DomainError("tracking: lag_frames must be >= 1");
  subject.validate();

  const auto& rig = renderer.rig();
  const auto& train = renderer.train();
  const double period = dev.sensor.frame_period();
  const double exposure = dev.sensor.exposure;
  const std::vector<double> offsets = opt.sweep_offsets.empty() ? std::vector<double>{0.0} : opt.sweep_offsets;

  // Noiseless observation of the eye at frame j's mid-exposure, clamped to the trajectory span.
  auto observe = [&](int j) {
    const double tm = std::clamp(t0 + j * period + exposure / 2.0, subject.t_begin(), subject.t_end());
    return scene::eye_position(subject, tm);
  };
  auto predict = [&](int k) {
    const Vec3 o1 = observe(k - opt.lag_frames);
    const Vec3 o0 = observe(k - opt.lag_frames - 1);
    return o1 + (o1 - o0) * static_cast<double>(opt.lag_frames);
  };
  auto setpoints = [&](const Vec3& eye, double offset, devices::MirrorPose fallback) {
    devices::MirrorPose pose = fallback;
    try {
      const auto a = scene::aim_angles(eye, rig, dev.mirror.tilt_range);
      pose = dev.mirror.quantize(a.pan_deg, a.tilt_deg);
    } catch (const UnreachablePose&) {
    } catch (const RangeError&) {
    }
    const double d = scene::line_of_sight_distance(eye, rig) + offset;
    const double p = dev.lens.quantize(optics::solve_focus(train, d).clamped_power_dpt);
    return std::pair{pose, p};
  };

  TrackResult out;
  // Devices start on the first prediction, commanded one frame before t0.
  const Vec3 first_eye = predict(0);
  const auto [pose0, power0] = setpoints(first_eye, offsets[0], devices::MirrorPose{});
  devices::TunableLens lens(dev.lens, stream_key(opt.seed, {kLensStream}), power0);
  devices::Mirror mirror(dev.mirror, pose0);
  double t_cmd = t0 - period + exposure;
  devices::MirrorPose last_pose = pose0;

  for (int k = 0; k < opt.n_frames; ++k) {
    const double s = t0 + k * period;
    const Vec3 pred = predict(k);
    const double offset = offsets[static_cast<std::size_t>(k) % offsets.size()];
    const auto [pose, power] = setpoints(pred, offset, last_pose);
    last_pose = pose;
    const double cmd_at = std::max(t_cmd, t0 - period + exposure);
    lens.command(power, cmd_at, mode_of(opt.filtered));
    mirror.command(pose, cmd_at);
    if (cmd_at >= t0) out.run.log.push(device_event(EventType::command_issued, cmd_at, subject.id, pose, power));

    TrackedFrame f;
    f.index = k;
    f.t = s;
    f.predicted_mm = scene::line_of_sight_distance(pred, rig);
    f.range_mm = scene::line_of_sight_distance(scene::eye_position(subject, s + exposure / 2.0), rig);
    const double actual = lens.sample(s);
    const devices::MirrorPose actual_pose = mirror.pose(s);
    const bool settled = lens.settled(s) && mirror.settled(s);
    const render::FrameInputs in{s, exposure, actual, actual_pose,
                                 stream_key(opt.seed, {kNoiseStream, static_cast<std::uint64_t>(k)})};
    const auto res = renderer.render(subject, in);
    if (std::holds_alternative<render::TargetMissed>(res)) {
      f.missed = true;
      out.run.log.push(device_event(EventType::target_missed, s, subject.id, actual_pose, actual));
      Event q = device_event(EventType::quality_result, s + exposure, subject.id, actual_pose, actual);
      q.quality_pass = false;
      out.run.log.push(q);
    } else {
      const auto& img = std::get<render::IrisImage>(res);
      f.blur_px = img.truth.blur_px;
      f.motion_blur_px = img.truth.motion_blur_px;
      f.px_across_iris = img.truth.px_across_iris;
      Event fe = device_event(EventType::frame_exposed, s, subject.id, actual_pose, actual);
      fe.blur_px = img.truth.blur_px;
      fe.px_across_iris = img.truth.px_across_iris;
      out.run.log.push(fe);
      const auto report = quality::assess(img, gate);
      f.sharpness = report.sharpness;
      f.qualified = report.pass && settled;
      Event q = fe;
      q.type = EventType::quality_result;
      q.t_ms = s + exposure;
      q.quality_pass = f.qualified;
      out.run.log.push(q);
      if (f.qualified) {
        const auto m = match_against(opt.enrolled, img, opt.code, opt.match_threshold);
        f.hd = m.hd;
        if (opt.enrolled) {
          Event me = q;
          me.type = EventType::match_result;
          me.hd = m.hd;
          me.matched = m.matched;
          out.run.log.push(me);
        }
        out.run.qualified.push_back({subject.id, k, img, report, m.hd, m.matched});
      }
    }
    out.frames.push_back(f);
    t_cmd = s + exposure;
  }
  return out;
}

// --- metrics ---------------------------------------------------------------------------

ThroughputMetrics throughput_metrics(const EventLog& log, double t0) {
  if (log.empty()) throw DomainError("throughput metrics: empty event log");
  ThroughputMetrics m;
  auto slot = [&m](int id) -> TargetMetrics& {
    for (auto& t : m.targets)
      if (t.target_id == id) return t;
    m.targets.push_back({id, std::nullopt, 0, 0});
    return m.targets.back();
  };
  int total = 0;
  for (const auto& e : log.events()) {
    TargetMetrics& tm = slot(e.target_id);
    if (e.type != EventType::quality_result || !e.quality_pass) continue;
    if (*e.quality_pass) {
      ++tm.qualified;
      ++total;
      if (!tm.time_to_first_qualified) tm.time_to_first_qualified = e.t_ms - t0;
    } else {
      ++tm.retries;
    }
  }
  m.span_ms = log.events().back().t_ms - t0;
  m.qualified_per_s = m.span_ms > 0.0 ? 1000.0 * total / m.span_ms : 0.0;
  return m;
}

}  // namespace aif::sched
