#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "aif/error.hpp"
#include "aif/scheduler.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace aif;
using namespace aif::sched;

namespace {

struct World {
  optics::OpticalTrain train;
  scene::RigGeometry rig;
  DeviceModels dev;
  std::vector<scene::Subject> subjects;

  void add(double range, double az, double height = 1700.0) {
    const int id = static_cast<int>(subjects.size()) + 1;
    subjects.push_back(scene::make_static_subject(id, 100 + id, range, az, height, rig));
  }

  std::vector<CaptureTarget> targets() const {
    std::vector<CaptureTarget> t;
    for (std::size_t i = 0; i < subjects.size(); ++i)
      t.push_back({subjects[i].id, PositionSource::static_pose, static_cast<int>(i)});
    return t;
  }
};

bool on_frame_boundary(double t, double t0, double period) {
  const double k = (t - t0) / period;
  return std::abs(k - std::round(k)) < 1e-9;
}

}  // namespace

TEST_CASE("single target setpoints equal the closed form") {
  World w;
  w.add(4800.0, 12.0);
  const auto sch = plan(w.targets(), w.subjects, w.rig, w.train, w.dev, {});
  REQUIRE(sch.entries.size() == 1);
  const auto& e = sch.entries[0];
  const Vec3 eye = scene::eye_position(w.subjects[0], 0.0);
  const auto a = scene::aim_angles(eye, w.rig);
  CHECK(e.mirror == w.dev.mirror.quantize(a.pan_deg, a.tilt_deg));
  CHECK(e.distance_mm == doctest::Approx(scene::line_of_sight_distance(eye, w.rig)));
  CHECK(e.power_dpt == w.dev.lens.quantize(optics::tunable_power_for_focus(w.train, e.distance_mm)));
  CHECK(e.dwell_budget == 5);
}

TEST_CASE("given order yields strictly increasing frame-aligned starts") {
  World w;
  auto r = testgen::rng(301);
  for (int i = 0; i < 4; ++i) w.add(r.uniform(1000.0, 3000.0) + 3000.0, r.uniform(-30.0, 30.0));
  const auto sch = plan(w.targets(), w.subjects, w.rig, w.train, w.dev, {});
  REQUIRE(sch.entries.size() == 4);
  for (std::size_t i = 0; i < sch.entries.size(); ++i) {
    CHECK(sch.entries[i].target_id == static_cast<int>(i) + 1);
    CHECK(on_frame_boundary(sch.entries[i].earliest_start, sch.t0, w.dev.sensor.frame_period()));
    if (i > 0) CHECK(sch.entries[i].earliest_start > sch.entries[i - 1].earliest_start);
  }
}

TEST_CASE("nearest transition is greedy and never worse than the worst order") {
  auto r = testgen::rng(302);
  for (int trial = 0; trial < 10; ++trial) {
    World w;
    for (int i = 0; i < 4; ++i) w.add(r.uniform(3800.0, 7000.0), r.uniform(-60.0, 60.0), r.uniform(1500.0, 1900.0));
    PlanOptions opt;
    opt.policy = Policy::nearest_transition;
    opt.initial = {r.uniform(-10.0, 10.0), w.dev.mirror.quantize(r.uniform(-30.0, 30.0), 0.0)};
    const auto greedy = plan(w.targets(), w.subjects, w.rig, w.train, w.dev, opt);
    opt.policy = Policy::given_order;
    const auto base = plan(w.targets(), w.subjects, w.rig, w.train, w.dev, opt);

    // Each greedy step takes the cheapest remaining transition.
    DeviceState state = greedy.initial;
    std::vector<ScheduleEntry> remaining = base.entries;
    for (const auto& e : greedy.entries) {
      const double chosen = transition_time(w.dev, state, e.mirror, e.power_dpt, false);
      for (const auto& o : remaining) CHECK(chosen <= transition_time(w.dev, state, o.mirror, o.power_dpt, false));
      remaining.erase(std::find_if(remaining.begin(), remaining.end(),
                                   [&](const ScheduleEntry& x) { return x.target_id == e.target_id; }));
      state = {e.power_dpt, e.mirror};
    }

    // Brute force over every order of the same entries.
    auto total = [&](const std::vector<ScheduleEntry>& order) {
      DeviceState s = greedy.initial;
      double sum = 0.0;
      for (const auto& e : order) {
        sum += transition_time(w.dev, s, e.mirror, e.power_dpt, false);
        s = {e.power_dpt, e.mirror};
      }
      return sum;
    };
    std::vector<int> idx(base.entries.size());
    std::iota(idx.begin(), idx.end(), 0);
    double worst = 0.0;
    do {
      std::vector<ScheduleEntry> order;
      for (const int i : idx) order.push_back(base.entries[static_cast<std::size_t>(i)]);
      worst = std::max(worst, total(order));
    } while (std::next_permutation(idx.begin(), idx.end()));
    CHECK(total(greedy.entries) <= worst + 1e-12);
  }
}

TEST_CASE("a full lens step dominates a 60 degree slew") {
  const DeviceModels dev;
  const DeviceState from{-10.0, {0, 0}};
  const devices::MirrorPose to{6000, 0};
  CHECK(transition_time(dev, from, to, 10.0, false) == doctest::Approx(25.0));
  CHECK(transition_time(dev, from, to, 10.0, true) == doctest::Approx(12.5));
  CHECK(transition_time(dev, from, to, -10.0, false) == doctest::Approx(60.0 / 21.0));

  World w;
  w.add(5000.0, 60.0);
  PlanOptions opt;
  opt.initial = {-10.0, {0, 0}};
  const auto sch = plan(w.targets(), w.subjects, w.rig, w.train, w.dev, opt);
  const double start = sch.entries[0].earliest_start;
  CHECK(start >= 25.0);
  CHECK(on_frame_boundary(start, 0.0, w.dev.sensor.frame_period()));
  CHECK(start == doctest::Approx(w.dev.sensor.frame_period()));
}

TEST_CASE("planning errors name the target and constraint") {
  World w;
  w.add(700.0, 0.0);  // far too close for the tunable range at the 5 m train
  try {
    plan(w.targets(), w.subjects, w.rig, w.train, w.dev, {});
    FAIL("expected PlanningError");
  } catch (const PlanningError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("target 1") != std::string::npos);
    CHECK(msg.find("lens range") != std::string::npos);
  }
  World ok;
  ok.add(5000.0, 0.0);
  PlanOptions opt;
  opt.dwell_budget = 0;
  CHECK_THROWS_AS(plan(ok.targets(), ok.subjects, ok.rig, ok.train, ok.dev, opt), PlanningError);
  std::vector<CaptureTarget> ghost{{9, PositionSource::static_pose, 0}};
  CHECK_THROWS_AS(plan(ghost, ok.subjects, ok.rig, ok.train, ok.dev, {}), PlanningError);
}

TEST_CASE("focal sweep timing") {
  const optics::OpticalTrain train;
  const devices::TunableLensModel lens;
  const auto one = focal_sweep(train, lens, 5000.0, 1200.0, 2700.0, 1, devices::StepMode::raw);
  CHECK(one.duration == doctest::Approx(lens.settling_time));
  CHECK(one.steps.at(0).distance_mm == 5000.0);
  const auto raw = focal_sweep(train, lens, 5000.0, 1200.0, 2700.0, 3, devices::StepMode::raw);
  const auto filt = focal_sweep(train, lens, 5000.0, 1200.0, 2700.0, 3, devices::StepMode::filtered);
  CHECK(raw.duration == doctest::Approx(75.0));
  CHECK(filt.duration == doctest::Approx(37.5));
  CHECK(raw.steps.front().distance_mm == doctest::Approx(3800.0));
  CHECK(raw.steps.back().distance_mm == doctest::Approx(7700.0));
  for (std::size_t i = 1; i < raw.steps.size(); ++i) {
    CHECK(raw.steps[i].power_dpt < raw.steps[i - 1].power_dpt);
    CHECK(raw.steps[i].t_offset == doctest::Approx(25.0 * static_cast<double>(i)));
  }
  CHECK_THROWS_AS(focal_sweep(train, lens, 5000.0, 4000.0, 0.0, 3, devices::StepMode::raw), OutOfFocusRange);
  CHECK_THROWS_AS(focal_sweep(train, lens, 5000.0, 100.0, 100.0, 0, devices::StepMode::raw), DomainError);
}

TEST_CASE("throughput metrics from a hand-built log") {
  EventLog log;
  Event e;
  e.type = EventType::quality_result;
  e.target_id = 1;
  e.t_ms = 40.0;
  e.quality_pass = false;
  log.push(e);
  e.t_ms = 100.0;
  e.quality_pass = true;
  log.push(e);
  e.target_id = 2;
  e.t_ms = 150.0;
  e.quality_pass = false;
  log.push(e);
  e.type = EventType::target_failed;
  e.quality_pass.reset();
  e.t_ms = 200.0;
  log.push(e);
  e.t_ms = 199.0;
  CHECK_THROWS_AS(log.push(e), DomainError);

  const auto m = throughput_metrics(log, 0.0);
  REQUIRE(m.targets.size() == 2);
  CHECK(m.targets[0].time_to_first_qualified.value() == doctest::Approx(100.0));
  CHECK(m.targets[0].retries == 1);
  CHECK(m.targets[0].qualified == 1);
  CHECK_FALSE(m.targets[1].time_to_first_qualified.has_value());
  CHECK(m.targets[1].retries == 1);
  CHECK(m.span_ms == doctest::Approx(200.0));
  CHECK(m.qualified_per_s == doctest::Approx(5.0));
  CHECK_THROWS_AS(throughput_metrics(EventLog{}, 0.0), DomainError);
}

TEST_CASE("event log csv columns") {
  EventLog log;
  Event e;
  e.t_ms = 1.5;
  e.type = EventType::frame_exposed;
  e.blur_px = 0.25;
  log.push(e);
  const std::string csv = log.to_csv();
  CHECK(csv.rfind("t_ms,event_type,target_id,pan_deg,tilt_deg,power_dpt,blur_px,px_across_iris,quality_pass,hd,matched\n", 0) == 0);
  CHECK(csv.find("1.5,frame_exposed,0,0,0,0,0.25,,,,") != std::string::npos);
}

TEST_CASE("execute: ordered log, settled qualified frames, retries on budget exhaustion") {
  World w;
  w.add(4380.0, -10.0, 1540.0);
  w.add(6340.0, 15.0, 1800.0);
  const render::Renderer ren(w.train, w.rig, {});
  const auto sch = plan(w.targets(), w.subjects, w.rig, w.train, w.dev, {});
  const quality::QualityGate gate;
  ExecuteOptions eo;
  eo.seed = 7;
  const auto run = execute(sch, w.subjects, ren, w.dev, gate, eo);
  const auto& ev = run.log.events();
  REQUIRE_FALSE(ev.empty());
  for (std::size_t i = 1; i < ev.size(); ++i) CHECK(ev[i].t_ms >= ev[i - 1].t_ms);

  double settled_at = 0.0;
  int advanced = 0;
  for (const auto& e : ev) {
    if (e.type == EventType::device_settled) settled_at = e.t_ms;
    if (e.type == EventType::frame_exposed) {
      CHECK(e.t_ms >= settled_at);
      CHECK(on_frame_boundary(e.t_ms, sch.t0, w.dev.sensor.frame_period()));
    }
    if (e.type == EventType::target_advanced) ++advanced;
  }
  CHECK(advanced == 2);
  CHECK(run.qualified.size() == 2);
  for (const auto& f : run.qualified) CHECK(f.report.pass);
  CHECK(execute(sch, w.subjects, ren, w.dev, gate, eo).log == run.log);

  quality::QualityGate strict;
  strict.px_min = 1e6;
  const auto fail = execute(sch, w.subjects, ren, w.dev, strict, eo);
  CHECK(fail.qualified.empty());
  const auto m = throughput_metrics(fail.log, sch.t0);
  for (const auto& t : m.targets) CHECK(t.retries == 5);
  CHECK(std::count_if(fail.log.events().begin(), fail.log.events().end(),
                      [](const Event& e) { return e.type == EventType::target_failed; }) == 2);
}

TEST_CASE("tracking replays deterministically under head jitter") {
  optics::OpticalTrain train;
  train.f_o = 210.0;
  train.d_ot = 201.0;
  train.d_ref = 3000.0;
  const scene::RigGeometry rig;
  const DeviceModels dev;
  auto s = scene::make_walking_subject(1, 21, 3370.0, 0.0, 1700.0, {-1000.0, 0.0, 0.0}, -1000.0, 2000.0, rig);
  s.head_jitter = {20.0, 2.0, 5};
  const render::Renderer ren(train, rig, {});
  TrackOptions opt;
  opt.n_frames = 6;
  opt.seed = 3;
  const auto a = track_and_capture(s, ren, dev, {}, 0.0, opt);
  const auto b = track_and_capture(s, ren, dev, {}, 0.0, opt);
  CHECK(a.run.log == b.run.log);
  REQUIRE(a.frames.size() == 6);
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].t == doctest::Approx(dev.sensor.frame_period() * static_cast<double>(i)));
    CHECK(a.frames[i].range_mm == b.frames[i].range_mm);
    if (i > 0) CHECK(a.frames[i].range_mm < a.frames[i - 1].range_mm);
    // Constant-velocity prediction stays within a few cm of the truth.
    CHECK(std::abs(a.frames[i].predicted_mm - a.frames[i].range_mm) < 30.0);
  }
  opt.n_frames = 0;
  CHECK_THROWS_AS(track_and_capture(s, ren, dev, {}, 0.0, opt), DomainError);
}
