#pragma once

// Experiment drivers shared by the sim CLI and the acceptance gate. Every
// driver is deterministic in (setup, params); `Setup::threads` only changes
// how independent cells are scheduled, never the output.

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "aif/csv.hpp"
#include "aif/iriscode.hpp"
#include "aif/quality.hpp"
#include "aif/scheduler.hpp"

namespace aif::exp {

struct Setup {
  optics::OpticalTrain train;
  scene::RigGeometry rig;
  render::RenderSettings render;
  quality::QualityGate gate;
  iris::IrisCodeConfig code;
  sched::DeviceModels devices;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

struct SubjectSpec {
  int id = 1;
  std::string name;
  std::uint64_t identity_seed = 1;
  double height_mm = 1700.0;  ///< crown above the floor
  double range_mm = 5000.0;   ///< horizontal distance from the mirror center at t = 0
  double azimuth_deg = 0.0;
  double speed_mm_s = 0.0;    ///< walking speed toward the rig, horizontal
  double t_start = 0.0;
  double t_end = std::numeric_limits<double>::infinity();
  scene::HeadJitter jitter;

  scene::Subject make(const scene::RigGeometry& rig) const;
};

/// Eye level with the mirror, straight ahead, at line-of-sight distance `los_mm`.
scene::Subject subject_at(const scene::RigGeometry& rig, int id, std::uint64_t identity_seed, double los_mm);

/// Geometrically similar train focused at `focus_mm`: f_o and d_ot scale by
/// focus_mm / reference_mm, so the iris keeps its pixel size at focus.
optics::OpticalTrain scaled_train(const optics::OpticalTrain& train, double focus_mm, double reference_mm);

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Output {
  std::vector<std::pair<std::string, csv::Table>> tables;  ///< file stem -> table, in write order
  std::vector<std::string> summary;
  std::vector<Check> checks;
  std::vector<std::pair<std::string, Image8>> frames;  ///< file stem -> frame

  const csv::Table* table(const std::string& name) const;
  bool all_pass() const;
  std::string summary_text() const;
};

// --- single-position evaluation ------------------------------------------------

struct PositionResult {
  double distance_mm = 0.0;
  bool focusable = true;  ///< false when the target power is outside the lens range
  double power_dpt = 0.0;  ///< actual power during the exposure
  double blur_px = 0.0;
  double astig_px = 0.0;
  double px_across_iris = 0.0;
  double sharpness = 0.0;
  bool pass = false;
  std::string reasons;  ///< '|'-joined fail reasons, or focus_range
};

/// Focus handling of a DoF scan: refocus per position through the lens model
/// (extended system) or hold zero tunable power (bare lens baseline).
enum class FocusMode { refocus, fixed };

struct ScanOptions {
  FocusMode mode = FocusMode::refocus;
  bool repeatability = true;  ///< draw the lens settling offset on every step
  double grid_mm = 10.0;
  double max_front_mm = 3000.0;
  double max_rear_mm = 6000.0;
  std::uint64_t identity_seed = 1;
};

struct ScanResult {
  double near_mm = 0.0;  ///< nearest passing grid distance of the contiguous interval
  double far_mm = 0.0;
  bool center_pass = false;
  std::string front_stop;  ///< fail reasons at the first failing front point, or scan_limit
  std::string rear_stop;
  std::vector<PositionResult> profile;  ///< visiting order: focus, then front, then rear

  double front() const;
  double rear() const;
  double total() const { return front() + rear(); }
};

/// Walks the 0.01 m grid out from `focus_mm` on both sides until the gate
/// fails. `stream` keys the lens offsets and the per-position sensor noise.
ScanResult scan_interval(const Setup& setup, const optics::OpticalTrain& train, double focus_mm,
                         const ScanOptions& opt, std::uint64_t stream);

/// Renders and gates one static position using the given train.
PositionResult evaluate_position(const Setup& setup, const render::Renderer& renderer, double los_mm,
                                 double power_dpt, bool focusable, std::uint64_t identity_seed,
                                 std::uint64_t noise_key);

// --- experiments -------------------------------------------------------------------------

struct DofTableParams {
  double focus_min_mm = 1000.0;
  double focus_max_mm = 5000.0;
  double step_mm = 500.0;
};

struct DofExtensionParams {
  std::vector<double> focus_mm{1000.0, 3000.0, 5000.0};
  double reference_mm = 5000.0;  ///< focus distance of the configured train
  bool zoom_scaled = true;
  int repeats = 5;
  double baseline_mm = 104.0;  ///< measured bare-lens DoF the extension ratio refers to
  ScanOptions scan;
  // acceptance windows at the reference distance
  double expect_total_mm = 3900.0;
  double tol_total_mm = 200.0;
  double expect_front_mm = 1200.0;
  double tol_front_mm = 150.0;
  double expect_rear_mm = 2700.0;
  double tol_rear_mm = 150.0;
  double ratio_lo = 33.0;
  double ratio_hi = 42.0;
};

struct HdCurveParams {
  double focus_mm = 5000.0;
  double step_mm = 100.0;
  double front_span_mm = 2600.0;
  double rear_span_mm = 4300.0;
  int repeats = 5;
  std::uint64_t identity_seed = 1;
  int impostor_pairs = 50;
  double self_match_max = 0.05;
  double monotone_slack = 0.02;
  double impostor_lo = 0.42;
  double impostor_hi = 0.50;
};

struct MultipersonParams {
  sched::Policy policy = sched::Policy::nearest_transition;
  int dwell_budget = 5;
  bool filtered = false;
  double cycle_max_ms = 1000.0;
};

struct IomParams {
  int n_frames = 15;
  int lag_frames = 1;
  std::vector<double> sweep_offsets_mm{0.0};
  bool filtered = false;
  double range_lo_mm = 2400.0;
  double range_hi_mm = 3400.0;
  int min_qualified = 3;
  int min_qualified_no_jitter = 10;
};

struct CalibrateParams {
  double anchor_focus_mm = 5000.0;
  double anchor_dof_mm = 91.0;
  double rear_limit_mm = 7700.0;
  double front_limit_mm = 3800.0;
  std::uint64_t identity_seed = 1;
  int noise_repeats = 5;
  double rel_tol = 0.02;  ///< allowed relative gap between calibrated and configured constants
};

struct Calibration {
  double coc = 0.0;
  double pixel_scale_cal = 0.0;
  double sharpness_min = 0.0;
  double k_ast = 0.0;
};

/// Fits the four calibrated constants in order; each step uses the results
/// of the previous ones.
Calibration calibrate(const Setup& setup, const CalibrateParams& p);

Output run_dof_table(const Setup& setup, const DofTableParams& p);
Output run_dof_extension(const Setup& setup, const DofExtensionParams& p);
Output run_hd_curve(const Setup& setup, const HdCurveParams& p);
Output run_multiperson(const Setup& setup, const std::vector<SubjectSpec>& subjects, const MultipersonParams& p);
Output run_iom(const Setup& setup, const SubjectSpec& subject, const IomParams& p);
Output run_calibrate(const Setup& setup, const CalibrateParams& p);

/// Dense-grid pass/fail scans against the closed-form interval endpoints:
/// bare-lens near/far limits (blur = coc) and the resolution-limited rear
/// end of the extended interval.
Output run_oracle(const Setup& setup, const ScanOptions& scan);

}  // namespace aif::exp
