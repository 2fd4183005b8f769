#include "aif/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <variant>

#include "aif/error.hpp"
#include "aif/parallel.hpp"

namespace aif::exp {

namespace {

// Stream ids; one per experiment so runs never share noise.
constexpr std::uint64_t kDofExtension = 0xD0E7;
constexpr std::uint64_t kHdCurve = 0x4DC;
constexpr std::uint64_t kMultiperson = 0x3A7;
constexpr std::uint64_t kIom = 0x10A;
constexpr std::uint64_t kCalibrate = 0xCA1;
constexpr std::uint64_t kOracle = 0x0AC;

constexpr const char* kFocusRange = "focus_range";
constexpr const char* kScanLimit = "scan_limit";

std::string join_reasons(const std::vector<std::string>& r) {
  std::string out;
  for (const auto& s : r) {
    if (!out.empty()) out += '|';
    out += s;
  }
  return out;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Check check(std::string name, bool pass, std::string detail) {
  return {std::move(name), pass, std::move(detail)};
}

std::uint64_t grid_id(long i) { return static_cast<std::uint64_t>(i + (1L << 20)); }

render::IrisImage render_or_throw(const render::Renderer& ren, const scene::Subject& s, const render::FrameInputs& in) {
  auto res = ren.render(s, in);
  if (!std::holds_alternative<render::IrisImage>(res))
    throw PlanningError(fmt::format("subject {} outside the field of view", s.id));
  return std::get<render::IrisImage>(std::move(res));
}

devices::MirrorPose aim(const Setup& setup, const scene::Subject& s, double t) {
  const auto a = scene::aim_angles(scene::eye_position(s, t), setup.rig, setup.devices.mirror.tilt_range);
  return setup.devices.mirror.quantize(a.pan_deg, a.tilt_deg);
}

/// In-focus static capture used for enrollment and impostor probes.
iris::IrisCode static_code(const Setup& setup, const render::Renderer& ren, const scene::Subject& s,
                           double los_mm, std::uint64_t noise_key) {
  const double p = setup.devices.lens.quantize(optics::solve_focus(ren.train(), los_mm).clamped_power_dpt);
  const auto img = render_or_throw(ren, s, {0.0, setup.devices.sensor.exposure, p, aim(setup, s, 0.0), noise_key});
  return iris::encode_image(img, setup.code);
}

/// Contiguous run of `ok` around index `center`; returns the first and last index.
std::pair<std::size_t, std::size_t> contiguous(const std::vector<bool>& ok, std::size_t center) {
  std::size_t lo = center, hi = center;
  while (lo > 0 && ok[lo - 1]) --lo;
  while (hi + 1 < ok.size() && ok[hi + 1]) ++hi;
  return {lo, hi};
}

}  // namespace

void Setup::validate() const {
  train.validate();
  rig.validate();
  render.validate();
  gate.validate();
  code.validate();
  devices.validate();
  if (threads < 1) throw DomainError("threads must be >= 1");
}

scene::Subject SubjectSpec::make(const scene::RigGeometry& rig) const {
  const double az = deg_to_rad(azimuth_deg);
  const Vec3 velocity{-speed_mm_s * std::cos(az), -speed_mm_s * std::sin(az), 0.0};
  // range_mm refers to t = 0; the trajectory starts at t_start.
  const double range0 = range_mm - speed_mm_s * t_start / 1000.0;
  auto s = scene::make_walking_subject(id, identity_seed, range0, azimuth_deg, height_mm, velocity, t_start, t_end, rig);
  s.name = name;
  s.head_jitter = jitter;
  s.validate();
  return s;
}

scene::Subject subject_at(const scene::RigGeometry& rig, int id, std::uint64_t identity_seed, double los_mm) {
  return scene::make_static_subject(id, identity_seed, los_mm - rig.lens_height, 0.0,
                                    rig.mirror_height + scene::kEyeBelowCrown, rig);
}

optics::OpticalTrain scaled_train(const optics::OpticalTrain& train, double focus_mm, double reference_mm) {
  if (!(focus_mm > 0.0) || !(reference_mm > 0.0)) throw DomainError("scaled_train: distances must be positive");
  optics::OpticalTrain t = train;
  const double k = focus_mm / reference_mm;
  t.f_o = train.f_o * k;
  t.d_ot = train.d_ot * k;
  t.d_ref = focus_mm;
  t.validate();
  return t;
}

const csv::Table* Output::table(const std::string& name) const {
  for (const auto& [n, t] : tables)
    if (n == name) return &t;
  return nullptr;
}

bool Output::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string Output::summary_text() const {
  std::string out;
  for (const auto& line : summary) out += line + "\n";
  for (const auto& c : checks) out += fmt::format("check {} {}: {}\n", c.name, c.pass ? "PASS" : "FAIL", c.detail);
  return out;
}

// --- single position -------------------------------------------------------------

PositionResult evaluate_position(const Setup& setup, const render::Renderer& renderer, double los_mm,
                                 double power_dpt, bool focusable, std::uint64_t identity_seed,
                                 std::uint64_t noise_key) {
  PositionResult r;
  r.distance_mm = los_mm;
  r.focusable = focusable;
  r.power_dpt = power_dpt;
  if (!focusable) {
    r.reasons = kFocusRange;
    return r;
  }
  const auto s = subject_at(setup.rig, 0, identity_seed, los_mm);
  const auto res = renderer.render(s, {0.0, setup.devices.sensor.exposure, power_dpt, aim(setup, s, 0.0), noise_key});
  if (!std::holds_alternative<render::IrisImage>(res)) {
    r.reasons = "missed";
    return r;
  }
  const auto& img = std::get<render::IrisImage>(res);
  const auto q = quality::assess(img, setup.gate);
  r.blur_px = img.truth.blur_px;
  r.astig_px = img.truth.astig_sigma_px;
  r.px_across_iris = q.px_across_iris;
  r.sharpness = q.sharpness;
  r.pass = q.pass;
  r.reasons = join_reasons(q.fail_reasons);
  return r;
}

double ScanResult::front() const {
  if (!center_pass || profile.empty()) return 0.0;
  return profile.front().distance_mm - near_mm;
}

double ScanResult::rear() const {
  if (!center_pass || profile.empty()) return 0.0;
  return far_mm - profile.front().distance_mm;
}

ScanResult scan_interval(const Setup& setup, const optics::OpticalTrain& train, double focus_mm,
                         const ScanOptions& opt, std::uint64_t stream) {
  if (!(opt.grid_mm > 0.0)) throw DomainError("scan: grid_mm must be positive");
  const render::Renderer ren(train, setup.rig, setup.render);
  // Each measurement follows a move from the previous one, starting from the range end.
  devices::TunableLens lens(setup.devices.lens, stream_key(stream, {1}), setup.devices.lens.power_min);
  double t = 0.0;
  const double d_min = setup.rig.lens_height + 100.0;

  auto eval = [&](long i) {
    const double d = focus_mm + static_cast<double>(i) * opt.grid_mm;
    double power = 0.0;
    bool focusable = true;
    if (opt.mode == FocusMode::refocus) {
      const auto sol = optics::solve_focus(train, d);
      focusable = sol.reachable;
      if (focusable && opt.repeatability) {
        const auto h = lens.command(sol.power_dpt, t, devices::StepMode::raw);
        power = lens.sample(h.settled_at);
        t = h.settled_at + 1.0;
      } else if (focusable) {
        power = setup.devices.lens.quantize(sol.power_dpt);
      }
    }
    return evaluate_position(setup, ren, d, power, focusable, opt.identity_seed, stream_key(stream, {2, grid_id(i)}));
  };

  ScanResult out;
  out.near_mm = out.far_mm = focus_mm;
  out.profile.push_back(eval(0));
  out.center_pass = out.profile.back().pass;
  if (!out.center_pass) {
    out.front_stop = out.rear_stop = out.profile.back().reasons;
    return out;
  }
  const long n_front = static_cast<long>(std::floor(opt.max_front_mm / opt.grid_mm + 1e-9));
  const long n_rear = static_cast<long>(std::floor(opt.max_rear_mm / opt.grid_mm + 1e-9));
  out.front_stop = kScanLimit;
  for (long i = 1; i <= n_front; ++i) {
    if (focus_mm - static_cast<double>(i) * opt.grid_mm < d_min) break;
    out.profile.push_back(eval(-i));
    if (!out.profile.back().pass) {
      out.front_stop = out.profile.back().reasons;
      break;
    }
    out.near_mm = out.profile.back().distance_mm;
  }
  out.rear_stop = kScanLimit;
  for (long i = 1; i <= n_rear; ++i) {
    out.profile.push_back(eval(i));
    if (!out.profile.back().pass) {
      out.rear_stop = out.profile.back().reasons;
      break;
    }
    out.far_mm = out.profile.back().distance_mm;
  }
  return out;
}

// --- dof_table -----------------------------------------------------------------------

Output run_dof_table(const Setup& setup, const DofTableParams& p) {
  setup.validate();
  if (!(p.step_mm > 0.0) || !(p.focus_max_mm >= p.focus_min_mm) || !(p.focus_min_mm > setup.train.f_o))
    throw DomainError("dof_table: invalid distance grid");
  const auto& tr = setup.train;
  Output out;
  csv::Table t({"focus_mm", "dof_mm", "near_mm", "far_mm", "fov_deg", "field_width_mm", "capture_volume_m3"});
  const double fov = optics::field_of_view_angle(tr.f_o, tr.sensor_w);
  std::vector<double> dofs;
  std::optional<double> at_ref;
  const long n = static_cast<long>(std::floor((p.focus_max_mm - p.focus_min_mm) / p.step_mm + 1e-9));
  for (long i = 0; i <= n; ++i) {
    const double d = p.focus_min_mm + static_cast<double>(i) * p.step_mm;
    const auto dof = optics::depth_of_field(tr.f_o, d, tr.n_stop, tr.coc);
    const double width = 2.0 * d * std::tan(deg_to_rad(fov) / 2.0);
    t.add({csv::num(d), csv::num(dof.total), csv::num(dof.near_limit), csv::num(dof.far_limit), csv::num(fov),
           csv::num(width), csv::num(optics::capture_volume(tr, d))});
    dofs.push_back(dof.total);
    if (std::abs(d - 5000.0) < 1e-6) at_ref = dof.total;
  }
  out.tables.emplace_back("dof_table", std::move(t));
  out.summary.push_back(fmt::format("bare lens f = {:.6g} mm, N = {:.6g}, C = {:.6g} mm", tr.f_o, tr.n_stop, tr.coc));
  if (at_ref) {
    out.summary.push_back(fmt::format("DoF at 5 m: {:.6g} mm", *at_ref));
    out.checks.push_back(check("dof_5m_anchor", std::abs(*at_ref - 91.0) <= 1.0, fmt::format("{:.6g} mm vs 91 +/- 1", *at_ref)));
  }
  const double max_dof = *std::max_element(dofs.begin(), dofs.end());
  out.checks.push_back(check("dof_below_110", max_dof < 110.0, fmt::format("max {:.6g} mm", max_dof)));
  bool increasing = true;
  for (std::size_t i = 1; i < dofs.size(); ++i) increasing = increasing && dofs[i] > dofs[i - 1];
  out.checks.push_back(check("dof_increasing", increasing, increasing ? "strict" : "not strictly increasing"));
  return out;
}

// --- dof_extension --------------------------------------------------------------------

Output run_dof_extension(const Setup& setup, const DofExtensionParams& p) {
  setup.validate();
  if (p.focus_mm.empty() || p.repeats < 1) throw DomainError("dof_extension: need focus distances and repeats >= 1");
  std::vector<optics::OpticalTrain> trains;
  for (const double d : p.focus_mm) {
    if (p.zoom_scaled) {
      trains.push_back(scaled_train(setup.train, d, p.reference_mm));
    } else {
      trains.push_back(setup.train);
    }
  }
  const std::size_t n_cells = p.focus_mm.size() * static_cast<std::size_t>(p.repeats);
  std::vector<ScanResult> cells(n_cells);
  parallel_for(n_cells, setup.threads, [&](std::size_t c) {
    const std::size_t fi = c / static_cast<std::size_t>(p.repeats);
    const std::size_t r = c % static_cast<std::size_t>(p.repeats);
    cells[c] = scan_interval(setup, trains[fi], p.focus_mm[fi], p.scan, stream_key(setup.seed, {kDofExtension, fi, r}));
  });

  Output out;
  csv::Table summary({"focus_mm", "f_o_mm", "front_mm", "rear_mm", "total_mm", "bare_dof_mm", "ratio_vs_baseline"});
  csv::Table per({"focus_mm", "repeat", "near_mm", "far_mm", "front_mm", "rear_mm", "total_mm", "front_stop", "rear_stop"});
  csv::Table profile({"focus_mm", "repeat", "distance_mm", "power_dpt", "blur_px", "astig_px", "px_across_iris",
                      "sharpness", "pass", "reasons"});
  std::vector<std::pair<double, double>> totals;
  for (std::size_t fi = 0; fi < p.focus_mm.size(); ++fi) {
    const double d = p.focus_mm[fi];
    std::vector<double> fr, re, to;
    for (int r = 0; r < p.repeats; ++r) {
      const auto& s = cells[fi * static_cast<std::size_t>(p.repeats) + static_cast<std::size_t>(r)];
      fr.push_back(s.front());
      re.push_back(s.rear());
      to.push_back(s.total());
      per.add({csv::num(d), csv::integer(r), csv::num(s.near_mm), csv::num(s.far_mm), csv::num(s.front()),
               csv::num(s.rear()), csv::num(s.total()), s.front_stop, s.rear_stop});
      auto sorted = s.profile;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const PositionResult& a, const PositionResult& b) { return a.distance_mm < b.distance_mm; });
      for (const auto& q : sorted)
        profile.add({csv::num(d), csv::integer(r), csv::num(q.distance_mm), csv::num(q.power_dpt), csv::num(q.blur_px),
                     csv::num(q.astig_px), csv::num(q.px_across_iris), csv::num(q.sharpness), csv::flag(q.pass),
                     q.reasons});
    }
    const auto& tr = trains[fi];
    const double bare = optics::depth_of_field(tr.f_o, d, tr.n_stop, tr.coc).total;
    const double total = mean(to);
    summary.add({csv::num(d), csv::num(tr.f_o), csv::num(mean(fr)), csv::num(mean(re)), csv::num(total), csv::num(bare),
                 csv::num(total / p.baseline_mm)});
    out.summary.push_back(fmt::format("focus {:.6g} mm (f_o {:.6g}): front {:.6g} rear {:.6g} total {:.6g} mm over {} repeats",
                                      d, tr.f_o, mean(fr), mean(re), total, p.repeats));
    totals.emplace_back(d, total);
    if (std::abs(d - p.reference_mm) < 1e-6) {
      const double ratio = total / p.baseline_mm;
      out.checks.push_back(check("total_at_reference", std::abs(total - p.expect_total_mm) <= p.tol_total_mm,
                                 fmt::format("{:.6g} mm vs {:.6g} +/- {:.6g}", total, p.expect_total_mm, p.tol_total_mm)));
      out.checks.push_back(check("front_at_reference", std::abs(mean(fr) - p.expect_front_mm) <= p.tol_front_mm,
                                 fmt::format("{:.6g} mm vs {:.6g} +/- {:.6g}", mean(fr), p.expect_front_mm, p.tol_front_mm)));
      out.checks.push_back(check("rear_at_reference", std::abs(mean(re) - p.expect_rear_mm) <= p.tol_rear_mm,
                                 fmt::format("{:.6g} mm vs {:.6g} +/- {:.6g}", mean(re), p.expect_rear_mm, p.tol_rear_mm)));
      out.checks.push_back(check("extension_ratio", ratio >= p.ratio_lo && ratio <= p.ratio_hi,
                                 fmt::format("{:.6g}x vs [{:.6g}, {:.6g}]", ratio, p.ratio_lo, p.ratio_hi)));
    }
  }
  if (totals.size() > 1) {
    std::sort(totals.begin(), totals.end());
    bool ordered = true;
    std::string detail;
    for (std::size_t i = 0; i < totals.size(); ++i) {
      if (i > 0) ordered = ordered && totals[i].second > totals[i - 1].second;
      detail += fmt::format("{}{:.6g}m:{:.6g}", i ? " < " : "", totals[i].first / 1000.0, totals[i].second);
    }
    out.checks.push_back(check("ordering", ordered, detail));
  }
  out.tables.emplace_back("dof_extension_summary", std::move(summary));
  out.tables.emplace_back("dof_extension", std::move(per));
  out.tables.emplace_back("dof_extension_profile", std::move(profile));
  return out;
}

// --- hd_curve ---------------------------------------------------------------------------

Output run_hd_curve(const Setup& setup, const HdCurveParams& p) {
  setup.validate();
  if (!(p.step_mm > 0.0) || p.repeats < 1 || p.impostor_pairs < 0) throw DomainError("hd_curve: invalid parameters");
  const render::Renderer ren(setup.train, setup.rig, setup.render);
  const long n_front = static_cast<long>(std::floor(p.front_span_mm / p.step_mm + 1e-9));
  const long n_rear = static_cast<long>(std::floor(p.rear_span_mm / p.step_mm + 1e-9));
  std::vector<double> offsets;
  for (long i = -n_front; i <= n_rear; ++i) offsets.push_back(static_cast<double>(i) * p.step_mm);
  const auto center = static_cast<std::size_t>(n_front);

  const auto enrolled_subject = subject_at(setup.rig, 1, p.identity_seed, p.focus_mm);
  const auto tmpl = static_code(setup, ren, enrolled_subject, p.focus_mm, stream_key(setup.seed, {kHdCurve, 0}));

  struct Cell {
    double hd = 1.0;
    double power = 0.0;
    double sharpness = 0.0;
    double px = 0.0;
    bool pass = false;
  };
  const std::size_t reps = static_cast<std::size_t>(p.repeats);
  std::vector<Cell> cells(offsets.size() * reps);
  parallel_for(cells.size(), setup.threads, [&](std::size_t c) {
    const std::size_t pi = c / reps, r = c % reps;
    const double d = p.focus_mm + offsets[pi];
    devices::TunableLens lens(setup.devices.lens, stream_key(setup.seed, {kHdCurve, 1, pi, r}), setup.devices.lens.power_min);
    const auto sol = optics::solve_focus(ren.train(), d);
    const auto h = lens.command(sol.clamped_power_dpt, 0.0, devices::StepMode::raw);
    Cell& cell = cells[c];
    cell.power = lens.sample(h.settled_at);
    const auto s = subject_at(setup.rig, 1, p.identity_seed, d);
    const auto img = render_or_throw(ren, s, {0.0, setup.devices.sensor.exposure, cell.power, aim(setup, s, 0.0),
                                              stream_key(setup.seed, {kHdCurve, 2, pi, r})});
    const auto q = quality::assess(img, setup.gate);
    cell.pass = q.pass && sol.reachable;
    cell.sharpness = q.sharpness;
    cell.px = q.px_across_iris;
    try {
      cell.hd = iris::hamming_distance(tmpl, iris::encode_image(img, setup.code)).hd;
    } catch (const ComparisonError&) {
      cell.hd = 1.0;
    }
  });

  Output out;
  csv::Table curve({"offset_mm", "distance_mm", "mean_hd", "min_hd", "max_hd", "pass_fraction", "mean_sharpness",
                    "px_across_iris"});
  csv::Table reps_t({"offset_mm", "repeat", "power_dpt", "hd", "sharpness", "pass"});
  std::vector<double> mean_hd(offsets.size());
  std::vector<bool> hd_ok(offsets.size()), gate_ok(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    std::vector<double> hds, sh;
    int passes = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& c = cells[i * reps + r];
      hds.push_back(c.hd);
      sh.push_back(c.sharpness);
      passes += c.pass ? 1 : 0;
      reps_t.add({csv::num(offsets[i]), csv::integer(static_cast<long long>(r)), csv::num(c.power), csv::num(c.hd),
                  csv::num(c.sharpness), csv::flag(c.pass)});
    }
    mean_hd[i] = mean(hds);
    const double frac = static_cast<double>(passes) / static_cast<double>(reps);
    hd_ok[i] = mean_hd[i] < iris::kMatchThreshold;
    gate_ok[i] = 2 * passes > p.repeats;
    curve.add({csv::num(offsets[i]), csv::num(p.focus_mm + offsets[i]), csv::num(mean_hd[i]),
               csv::num(*std::min_element(hds.begin(), hds.end())), csv::num(*std::max_element(hds.begin(), hds.end())),
               csv::num(frac), csv::num(mean(sh)), csv::num(cells[i * reps].px)});
  }

  auto extent = [&](const std::vector<bool>& ok) -> std::pair<double, double> {
    if (!ok[center]) return {0.0, 0.0};
    const auto [lo, hi] = contiguous(ok, center);
    return {-offsets[lo], offsets[hi]};
  };
  const auto [hd_front, hd_rear] = extent(hd_ok);
  const auto [g_front, g_rear] = extent(gate_ok);

  // Impostors: distinct identities, both in focus.
  std::vector<double> imp(static_cast<std::size_t>(p.impostor_pairs));
  parallel_for(imp.size(), setup.threads, [&](std::size_t i) {
    const std::uint64_t a = 1000 + 2 * i, b = 1001 + 2 * i;
    const auto sa = subject_at(setup.rig, 1, a, p.focus_mm);
    const auto sb = subject_at(setup.rig, 2, b, p.focus_mm);
    const auto ca = static_code(setup, ren, sa, p.focus_mm, stream_key(setup.seed, {kHdCurve, 3, i, 0}));
    const auto cb = static_code(setup, ren, sb, p.focus_mm, stream_key(setup.seed, {kHdCurve, 3, i, 1}));
    imp[i] = iris::hamming_distance(ca, cb).hd;
  });
  csv::Table imp_t({"pair", "identity_a", "identity_b", "hd"});
  for (std::size_t i = 0; i < imp.size(); ++i)
    imp_t.add({csv::integer(static_cast<long long>(i)), csv::integer(static_cast<long long>(1000 + 2 * i)),
               csv::integer(static_cast<long long>(1001 + 2 * i)), csv::num(imp[i])});

  out.summary.push_back(fmt::format("HD-based interval: front {:.6g} rear {:.6g} total {:.6g} mm", hd_front, hd_rear,
                                    hd_front + hd_rear));
  out.summary.push_back(fmt::format("gate-based interval: front {:.6g} rear {:.6g} total {:.6g} mm", g_front, g_rear,
                                    g_front + g_rear));
  out.checks.push_back(check("self_match", mean_hd[center] < p.self_match_max,
                             fmt::format("mean HD {:.6g} at zero defocus vs < {:.6g}", mean_hd[center], p.self_match_max)));
  double worst = 0.0;
  for (std::size_t i = center; i + 1 < offsets.size(); ++i) worst = std::max(worst, mean_hd[i] - mean_hd[i + 1]);
  for (std::size_t i = center; i > 0; --i) worst = std::max(worst, mean_hd[i] - mean_hd[i - 1]);
  out.checks.push_back(check("hd_monotone", worst <= p.monotone_slack,
                             fmt::format("largest outward drop {:.6g} vs slack {:.6g}", worst, p.monotone_slack)));
  out.checks.push_back(check("hd_dof_covers_gate_dof", hd_front + hd_rear >= g_front + g_rear,
                             fmt::format("{:.6g} mm vs {:.6g} mm", hd_front + hd_rear, g_front + g_rear)));
  if (!imp.empty()) {
    const double m = mean(imp);
    out.checks.push_back(check("impostor_mean", m >= p.impostor_lo && m <= p.impostor_hi,
                               fmt::format("{:.6g} over {} pairs vs [{:.6g}, {:.6g}]", m, imp.size(), p.impostor_lo, p.impostor_hi)));
  }
  out.tables.emplace_back("hd_curve", std::move(curve));
  out.tables.emplace_back("hd_curve_repeats", std::move(reps_t));
  out.tables.emplace_back("hd_impostors", std::move(imp_t));
  return out;
}

namespace {

csv::Table event_table(const sched::EventLog& log) {
  csv::Table t({"t_ms", "event_type", "target_id", "pan_deg", "tilt_deg", "power_dpt", "blur_px", "px_across_iris",
                "quality_pass", "hd", "matched"});
  for (const auto& e : log.events())
    t.add({csv::num(e.t_ms), sched::event_name(e.type), csv::integer(e.target_id), csv::num(e.pan_deg),
           csv::num(e.tilt_deg), csv::num(e.power_dpt), csv::num(e.blur_px), csv::num(e.px_across_iris),
           csv::flag(e.quality_pass), csv::num(e.hd), csv::flag(e.matched)});
  return t;
}

csv::Table frame_table(const std::vector<sched::TrackedFrame>& frames) {
  csv::Table t({"frame", "t_ms", "range_mm", "predicted_mm", "blur_px", "motion_blur_px", "px_across_iris",
                "sharpness", "missed", "qualified", "hd"});
  for (const auto& f : frames)
    t.add({csv::integer(f.index), csv::num(f.t), csv::num(f.range_mm), csv::num(f.predicted_mm), csv::num(f.blur_px),
           csv::num(f.motion_blur_px), csv::num(f.px_across_iris), csv::num(f.sharpness), csv::flag(f.missed),
           csv::flag(f.qualified), csv::num(f.hd)});
  return t;
}

}  // namespace

// --- multiperson --------------------------------------------------------------------------

Output run_multiperson(const Setup& setup, const std::vector<SubjectSpec>& specs, const MultipersonParams& p) {
  setup.validate();
  if (specs.size() < 2) throw DomainError("multiperson: need at least two subjects");
  std::vector<scene::Subject> subjects;
  std::vector<sched::CaptureTarget> targets;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    subjects.push_back(specs[i].make(setup.rig));
    targets.push_back({specs[i].id, sched::PositionSource::static_pose, static_cast<int>(i)});
  }
  sched::PlanOptions po;
  po.policy = p.policy;
  po.dwell_budget = p.dwell_budget;
  po.filtered = p.filtered;
  const auto schedule = sched::plan(targets, subjects, setup.rig, setup.train, setup.devices, po);
  const render::Renderer ren(setup.train, setup.rig, setup.render);

  sched::ExecuteOptions eo;
  eo.seed = stream_key(setup.seed, {kMultiperson, 0});
  eo.code = setup.code;
  std::vector<std::pair<int, iris::IrisCode>> templates(specs.size());
  parallel_for(specs.size(), setup.threads, [&](std::size_t i) {
    const auto& e = *std::find_if(schedule.entries.begin(), schedule.entries.end(),
                                  [&](const sched::ScheduleEntry& x) { return x.target_id == specs[i].id; });
    templates[i] = {specs[i].id, static_code(setup, ren, subjects[i], e.distance_mm,
                                             stream_key(setup.seed, {kMultiperson, 1, static_cast<std::uint64_t>(specs[i].id)}))};
  });
  for (const auto& [id, c] : templates) eo.enrolled.emplace(id, c);
  const auto run = sched::execute(schedule, subjects, ren, setup.devices, setup.gate, eo);
  const auto metrics = sched::throughput_metrics(run.log, schedule.t0);

  Output out;
  csv::Table subj({"subject_id", "name", "distance_mm", "pan_deg", "tilt_deg", "power_dpt", "earliest_start_ms",
                   "time_to_first_qualified_ms", "retries", "self_hd", "matched"});
  std::map<int, const sched::CapturedFrame*> first;
  for (const auto& f : run.qualified)
    if (!first.count(f.target_id)) first[f.target_id] = &f;
  bool all_matched = true;
  for (const auto& e : schedule.entries) {
    const auto it = std::find_if(specs.begin(), specs.end(), [&](const SubjectSpec& s) { return s.id == e.target_id; });
    const auto m = std::find_if(metrics.targets.begin(), metrics.targets.end(),
                                [&](const sched::TargetMetrics& t) { return t.target_id == e.target_id; });
    const auto* f = first.count(e.target_id) ? first[e.target_id] : nullptr;
    const bool matched = f && f->matched.value_or(false);
    all_matched = all_matched && matched;
    subj.add({csv::integer(e.target_id), it->name, csv::num(e.distance_mm), csv::num(e.mirror.pan_deg()),
              csv::num(e.mirror.tilt_deg()), csv::num(e.power_dpt), csv::num(e.earliest_start),
              csv::num(m != metrics.targets.end() ? m->time_to_first_qualified : std::nullopt),
              csv::integer(m != metrics.targets.end() ? m->retries : 0), csv::num(f ? f->hd : std::nullopt),
              csv::flag(f ? f->matched : std::nullopt)});
    out.summary.push_back(fmt::format("subject {} at {:.6g} mm: {}", e.target_id, e.distance_mm,
                                      f ? fmt::format("qualified, HD {:.6g}", f->hd.value_or(1.0)) : "no qualified frame"));
  }

  csv::Table cross({"template_id", "probe_id", "hd"});
  double min_cross = 1.0;
  for (const auto& [tid, tc] : templates) {
    for (const auto& [pid, f] : first) {
      if (pid == tid) continue;
      const double hd = iris::hamming_distance(tc, iris::encode_image(f->image, setup.code)).hd;
      min_cross = std::min(min_cross, hd);
      cross.add({csv::integer(tid), csv::integer(pid), csv::num(hd)});
    }
  }
  const double cycle = run.log.empty() ? 0.0 : run.log.events().back().t_ms - schedule.t0;
  out.summary.push_back(fmt::format("cycle time {:.6g} ms, {:.6g} qualified frames/s", cycle, metrics.qualified_per_s));
  out.checks.push_back(check("all_subjects_matched", all_matched && first.size() == specs.size(),
                             fmt::format("{} of {} subjects qualified and matched", first.size(), specs.size())));
  out.checks.push_back(check("cross_hd", cross.rows() > 0 && min_cross > iris::kMatchThreshold,
                             fmt::format("min cross HD {:.6g}", min_cross)));
  out.checks.push_back(check("cycle_time", cycle < p.cycle_max_ms, fmt::format("{:.6g} ms vs < {:.6g}", cycle, p.cycle_max_ms)));

  for (const auto& f : run.qualified)
    out.frames.emplace_back(fmt::format("multiperson_s{}_f{}", f.target_id, f.frame_index), f.image.pixels);
  out.tables.emplace_back("multiperson", event_table(run.log));
  out.tables.emplace_back("multiperson_subjects", std::move(subj));
  out.tables.emplace_back("multiperson_cross", std::move(cross));
  return out;
}

// --- iom ---------------------------------------------------------------------------------------

Output run_iom(const Setup& setup, const SubjectSpec& spec, const IomParams& p) {
  setup.validate();
  const render::Renderer ren(setup.train, setup.rig, setup.render);
  const auto tmpl_subject = subject_at(setup.rig, spec.id, spec.identity_seed, setup.train.d_ref);
  sched::TrackOptions to;
  to.n_frames = p.n_frames;
  to.lag_frames = p.lag_frames;
  to.sweep_offsets = p.sweep_offsets_mm;
  to.filtered = p.filtered;
  to.code = setup.code;
  to.enrolled = static_code(setup, ren, tmpl_subject, setup.train.d_ref, stream_key(setup.seed, {kIom, 0}));

  SubjectSpec still = spec;
  still.jitter.sigma_mm = 0.0;
  const std::vector<SubjectSpec> variants{spec, still};
  std::vector<sched::TrackResult> results(2);
  parallel_for(variants.size(), setup.threads, [&](std::size_t v) {
    auto o = to;
    o.seed = stream_key(setup.seed, {kIom, 1});
    results[v] = sched::track_and_capture(variants[v].make(setup.rig), ren, setup.devices, setup.gate, 0.0, o);
  });

  auto in_window = [&](const sched::TrackedFrame& f) {
    return f.qualified && f.range_mm >= p.range_lo_mm && f.range_mm <= p.range_hi_mm;
  };
  const auto& main = results[0].frames;
  const auto& ablation = results[1].frames;
  const auto n_q = std::count_if(main.begin(), main.end(), in_window);
  const auto n_q0 = std::count_if(ablation.begin(), ablation.end(), [](const auto& f) { return f.qualified; });
  double spacing_err = 0.0;
  for (std::size_t i = 1; i < main.size(); ++i)
    spacing_err = std::max(spacing_err, std::abs(main[i].t - main[i - 1].t - setup.devices.sensor.frame_period()));

  Output out;
  std::string idx;
  for (const auto& f : main)
    if (f.qualified) idx += fmt::format("{}t{} ({:.4g} m)", idx.empty() ? "" : ", ", f.index, f.range_mm / 1000.0);
  out.summary.push_back(fmt::format("qualified frames: {}", idx.empty() ? "none" : idx));
  out.summary.push_back(fmt::format("frame spacing {:.6g} ms", setup.devices.sensor.frame_period()));
  out.checks.push_back(check("qualified_in_window", n_q >= p.min_qualified,
                             fmt::format("{} qualified in [{:.6g}, {:.6g}] mm vs >= {}", n_q, p.range_lo_mm, p.range_hi_mm,
                                         p.min_qualified)));
  out.checks.push_back(check("zero_jitter_ablation", n_q0 >= p.min_qualified_no_jitter,
                             fmt::format("{} qualified vs >= {}", n_q0, p.min_qualified_no_jitter)));
  out.checks.push_back(check("frame_spacing", spacing_err < 1e-9,
                             fmt::format("{:.6g} ms, max deviation {:.3g}", setup.devices.sensor.frame_period(), spacing_err)));
  for (const auto& f : results[0].run.qualified)
    out.frames.emplace_back(fmt::format("iom_f{:02}", f.frame_index), f.image.pixels);
  out.tables.emplace_back("iom", frame_table(main));
  out.tables.emplace_back("iom_events", event_table(results[0].run.log));
  out.tables.emplace_back("iom_no_jitter", frame_table(ablation));
  return out;
}

// --- calibration -------------------------------------------------------------------------------

Calibration calibrate(const Setup& setup, const CalibrateParams& p) {
  setup.validate();
  Calibration c;
  optics::OpticalTrain tr = setup.train;
  c.coc = optics::coc_for_total_dof(tr.f_o, p.anchor_focus_mm, tr.n_stop, p.anchor_dof_mm);
  tr.coc = c.coc;

  optics::OpticalTrain raw = tr;
  raw.pixel_scale_cal = 1.0;
  const double px_raw = optics::pixels_across_iris(p.rear_limit_mm, raw, optics::solve_focus(raw, p.rear_limit_mm).power_dpt);
  c.pixel_scale_cal = setup.gate.px_min / px_raw;
  tr.pixel_scale_cal = c.pixel_scale_cal;

  const int reps = std::max(1, p.noise_repeats);
  // Sharpness at the bare-lens DoF limits, where the blur spot equals the coc.
  {
    render::RenderSettings st = setup.render;
    st.k_ast = 0.0;
    const render::Renderer ren(tr, setup.rig, st);
    const auto dof = optics::depth_of_field(tr.f_o, tr.d_ref, tr.n_stop, tr.coc);
    std::vector<double> s(2 * static_cast<std::size_t>(reps));
    parallel_for(s.size(), setup.threads, [&](std::size_t i) {
      const double d = (i % 2 == 0) ? dof.near_limit : dof.far_limit;
      const auto subj = subject_at(setup.rig, 1, p.identity_seed, d);
      const auto img = render_or_throw(ren, subj, {0.0, setup.devices.sensor.exposure, 0.0, aim(setup, subj, 0.0),
                                                   stream_key(setup.seed, {kCalibrate, 1, i})});
      s[i] = quality::assess(img, setup.gate).sharpness;
    });
    c.sharpness_min = mean(s);
  }

  // Astigmatism strength whose mean front limit, measured with the DoF scan
  // including lens settling offsets, reaches the target. Streams differ from
  // the experiment's.
  {
    Setup cs = setup;
    cs.train = tr;
    cs.gate.sharpness_min = c.sharpness_min;
    ScanOptions so;
    so.max_front_mm = tr.d_ref - p.front_limit_mm + 500.0;
    so.max_rear_mm = 0.0;
    so.identity_seed = p.identity_seed;
    const double target = tr.d_ref - p.front_limit_mm;
    auto mean_front = [&](double k) {
      cs.render.k_ast = k;
      std::vector<double> f(static_cast<std::size_t>(reps));
      parallel_for(f.size(), setup.threads, [&](std::size_t r) {
        f[r] = scan_interval(cs, tr, tr.d_ref, so, stream_key(setup.seed, {kCalibrate, 2, r})).front();
      });
      return mean(f);
    };
    double lo = 0.0, hi = 0.5;
    while (mean_front(hi) >= target && hi < 64.0) hi *= 2.0;
    for (int it = 0; it < 14; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mean_front(mid) >= target ? lo : hi) = mid;
    }
    c.k_ast = lo;
  }
  return c;
}

Output run_calibrate(const Setup& setup, const CalibrateParams& p) {
  const Calibration c = calibrate(setup, p);
  Output out;
  csv::Table t({"constant", "calibrated", "configured", "rel_diff"});
  auto row = [&](const char* name, double calibrated, double configured) {
    const double rel = std::abs(calibrated - configured) / std::max(std::abs(calibrated), 1e-300);
    t.add({name, fmt::format("{:.10g}", calibrated), fmt::format("{:.10g}", configured), csv::num(rel)});
    out.checks.push_back(check(name, rel <= p.rel_tol, fmt::format("calibrated {:.10g}, configured {:.10g}", calibrated, configured)));
  };
  row("coc_mm", c.coc, setup.train.coc);
  row("pixel_scale_cal", c.pixel_scale_cal, setup.train.pixel_scale_cal);
  row("sharpness_min", c.sharpness_min, setup.gate.sharpness_min);
  row("k_ast", c.k_ast, setup.render.k_ast);
  out.summary.push_back(fmt::format("anchors: {:.6g} mm DoF at {:.6g} mm, {:.6g} px at {:.6g} mm, front limit {:.6g} mm",
                                    p.anchor_dof_mm, p.anchor_focus_mm, setup.gate.px_min, p.rear_limit_mm, p.front_limit_mm));
  out.tables.emplace_back("calibration", std::move(t));
  return out;
}

// --- oracle ------------------------------------------------------------------------------------------

Output run_oracle(const Setup& setup, const ScanOptions& scan) {
  setup.validate();
  const auto& tr = setup.train;
  ScanOptions fixed = scan;
  fixed.mode = FocusMode::fixed;
  fixed.repeatability = false;
  fixed.max_front_mm = fixed.max_rear_mm = 500.0;
  ScanOptions ext = scan;
  ext.mode = FocusMode::refocus;
  ext.repeatability = false;

  std::vector<ScanResult> res(2);
  parallel_for(2, setup.threads, [&](std::size_t i) {
    res[i] = scan_interval(setup, tr, tr.d_ref, i == 0 ? fixed : ext, stream_key(setup.seed, {kOracle, i}));
  });

  const auto dof = optics::depth_of_field(tr.f_o, tr.d_ref, tr.n_stop, tr.coc);
  // Resolution-limited rear end, or the focus-range end when that comes first.
  double lo = tr.d_ref, hi = tr.d_ref + scan.max_rear_mm;
  auto resolvable = [&](double d) {
    const auto sol = optics::solve_focus(tr, d);
    return sol.reachable &&
           optics::pixels_across_iris(d, tr, setup.devices.lens.quantize(sol.power_dpt)) >= setup.gate.px_min;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (resolvable(mid) ? lo : hi) = mid;
  }
  const double rear_analytic = lo;

  Output out;
  csv::Table t({"endpoint", "analytic_mm", "grid_mm", "diff_mm", "tolerance_mm"});
  auto row = [&](const char* name, double analytic, double grid) {
    const double diff = grid - analytic;
    t.add({name, csv::num(analytic), csv::num(grid), csv::num(diff), csv::num(scan.grid_mm)});
    out.checks.push_back(check(name, std::abs(diff) <= scan.grid_mm + 1e-9,
                               fmt::format("grid {:.6g} mm vs analytic {:.6g} mm", grid, analytic)));
  };
  row("bare_near", dof.near_limit, res[0].near_mm);
  row("bare_far", dof.far_limit, res[0].far_mm);
  row("extended_rear", rear_analytic, res[1].far_mm);
  out.summary.push_back(fmt::format("extended interval on the dense grid: {:.6g} to {:.6g} mm (front stop: {}, rear stop: {})",
                                    res[1].near_mm, res[1].far_mm, res[1].front_stop, res[1].rear_stop));
  out.tables.emplace_back("oracle", std::move(t));
  return out;
}

}  // namespace aif::exp
