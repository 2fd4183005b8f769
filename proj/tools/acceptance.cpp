// Acceptance gate: runs the ten acceptance criteria against the shipped
// configs and prints one PASS/FAIL line per criterion. Exit code 0 only when
// every criterion passes.
//
// usage: acceptance <configs-dir>

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "aif/config.hpp"
#include "aif/optics.hpp"
#include "aif/rng.hpp"
#include "aif/scheduler.hpp"

namespace {

using namespace aif;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict from_checks(const exp::Output& out) {
  Verdict v{out.all_pass(), ""};
  for (const auto& c : out.checks) {
    if (!v.detail.empty()) v.detail += "; ";
    v.detail += fmt::format("{} {} ({})", c.name, c.pass ? "ok" : "FAILED", c.detail);
  }
  return v;
}

bool same_tables(const exp::Output& a, const exp::Output& b) {
  if (a.tables.size() != b.tables.size()) return false;
  for (std::size_t i = 0; i < a.tables.size(); ++i)
    if (a.tables[i].first != b.tables[i].first || a.tables[i].second.str() != b.tables[i].second.str()) return false;
  return true;
}

struct Run {
  exp::Output serial;
  exp::Output parallel;
  double serial_s = 0.0;
};

/// Serial and parallel runs of one shipped config.
Run run_both(const std::string& dir, const char* name) {
  auto cfg = config::load(fmt::format("{}/{}.json", dir, name));
  Run r;
  cfg.setup.threads = 1;
  const auto t0 = std::chrono::steady_clock::now();
  r.serial = config::run(cfg);
  r.serial_s = seconds_since(t0);
  cfg.setup.threads = 4;
  r.parallel = config::run(cfg);
  return r;
}

Verdict with_runtime(Verdict v, double s, double limit) {
  const bool fast = s < limit;
  v.pass = v.pass && fast;
  v.detail += fmt::format("; runtime {:.1f} s vs < {:.0f} s", s, limit);
  return v;
}

Verdict criterion1() {
  const double total = optics::depth_of_field(350.0, 5000.0, 4.8, 0.0499).total;
  return {std::abs(total - 91.0) <= 1.0, fmt::format("DoF {:.6g} mm vs 91 +/- 1", total)};
}

Verdict criterion2() {
  double worst = 0.0;
  for (const double f_o : {70.0, 200.0, 350.0}) {
    for (const double d_ot : {0.0, 100.0, 335.0}) {
      const double f = optics::combined_focal_length(f_o, optics::diopter_to_focal(1e-9), d_ot);
      worst = std::max(worst, std::abs(f - f_o) / f_o);
    }
  }
  const double stacked = optics::combined_focal_length(120.0, 120.0, 0.0);
  const bool ok = worst <= 1e-6 && stacked == 60.0;
  return {ok, fmt::format("zero-power limit rel err {:.3g}; stacked 120 mm pair -> {:.17g} mm", worst, stacked)};
}

Verdict criterion3() {
  Rng rng(stream_key(2024, {3}));
  double worst = 0.0;
  int n = 0;
  while (n < 50) {
    const double f = rng.uniform(70.0, 350.0);
    const double nst = rng.uniform(2.0, 8.0);
    const double c = rng.uniform(0.01, 0.1);
    const double d = rng.uniform(1000.0, 10000.0);
    const auto dof = optics::depth_of_field(f, d, nst, c);
    if (dof.beyond_hyperfocal) continue;
    ++n;
    for (const double lim : {dof.near_limit, dof.far_limit})
      worst = std::max(worst, std::abs(optics::blur_circle_diameter(d, lim, f, nst) - c) / c);
  }
  return {worst <= 1e-6, fmt::format("worst relative deviation {:.3g} over {} configurations", worst, n)};
}

Verdict criterion6(const std::string& dir) {
  const auto cfg = config::load(dir + "/dof_extension.json");
  const auto& dev = cfg.setup.devices;
  const auto& tr = cfg.setup.train;
  const double period = dev.sensor.frame_period();
  // Full extended range at the reference: 3.8 m to 7.7 m around 5 m focus.
  const auto raw = sched::focal_sweep(tr, dev.lens, tr.d_ref, 1200.0, 2700.0, 3, devices::StepMode::raw);
  const auto filt = sched::focal_sweep(tr, dev.lens, tr.d_ref, 1200.0, 2700.0, 3, devices::StepMode::filtered);
  const double slew = devices::mirror_slew_time(dev.mirror, {0, 0}, {6000, 0});
  const double slew_ref = 60.0 / (3500.0 * 6.0) * 1000.0;
  const auto frames = devices::sensor_frame_schedule(dev.sensor, 0.0, 3);
  const double spacing = frames[1].start - frames[0].start;
  const bool ok = std::abs(raw.duration - 80.0) <= period && std::abs(filt.duration - 40.0) <= period / 2.0 &&
                  std::abs(slew - slew_ref) <= 1e-6 && std::abs(spacing - 32.79) <= 0.005 &&
                  std::abs(frames[2].start - frames[1].start - spacing) < 1e-9;
  return {ok, fmt::format("sweep raw {:.6g} ms (80 +/- {:.4g}), filtered {:.6g} ms (40 +/- {:.4g}); 60 deg slew {:.7g} ms; "
                          "frame spacing {:.6g} ms",
                          raw.duration, period, filt.duration, period / 2.0, slew, spacing)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    fmt::print(stderr, "usage: acceptance <configs-dir>\n");
    return 2;
  }
  const std::string dir = argv[1];
  int failed = 0;
  auto report = [&](int n, const char* name, const std::function<Verdict()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, fmt::format("exception: {}", e.what())};
    }
    if (!v.pass) ++failed;
    fmt::print("criterion {:2} {:<22} {} [{:.1f} s] {}\n", n, name, v.pass ? "PASS" : "FAIL", seconds_since(t0), v.detail);
    std::fflush(stdout);
  };

  std::vector<std::pair<const char*, Run>> runs;
  auto get = [&](const char* name) -> const Run& {
    for (const auto& [n, r] : runs)
      if (std::string(n) == name) return r;
    runs.emplace_back(name, run_both(dir, name));
    return runs.back().second;
  };

  report(1, "dof_anchor", criterion1);
  report(2, "combined_focal_limits", criterion2);
  report(3, "blur_dof_consistency", criterion3);
  report(4, "dof_extension", [&] {
    const auto& r = get("dof_extension");
    return with_runtime(from_checks(r.serial), r.serial_s, 120.0);
  });
  report(5, "hd_analysis", [&] {
    const auto& r = get("hd_curve");
    return with_runtime(from_checks(r.serial), r.serial_s, 180.0);
  });
  report(6, "timing", [&] { return criterion6(dir); });
  report(7, "multiperson", [&] {
    const auto& r = get("multiperson");
    auto v = from_checks(r.serial);
    const bool reproducible = same_tables(r.serial, r.parallel);
    v.pass = v.pass && reproducible;
    v.detail += reproducible ? "; reproducible" : "; NOT reproducible";
    return with_runtime(v, r.serial_s, 30.0);
  });
  report(8, "iris_on_the_move", [&] {
    const auto& r = get("iom");
    return with_runtime(from_checks(r.serial), r.serial_s, 30.0);
  });
  report(9, "determinism", [&] {
    Verdict v{true, ""};
    for (const char* name : {"dof_table", "dof_extension", "hd_curve", "multiperson", "iom", "oracle"}) {
      const auto& r = get(name);
      const bool same = same_tables(r.serial, r.parallel);
      v.pass = v.pass && same;
      v.detail += fmt::format("{}{} {}", v.detail.empty() ? "" : ", ", name, same ? "identical" : "DIFFERS");
    }
    return v;
  });
  report(10, "dense_grid_oracle", [&] { return from_checks(get("oracle").serial); });

  fmt::print("{} of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
