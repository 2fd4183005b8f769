#include "aif/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

#include "aif/error.hpp"
#include "json.hpp"

namespace aif::config {

namespace {

using nlohmann::json;

/// Reads keys of one JSON object and reports whatever was left unread.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", path_));
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(fmt::format("{}.{}: wrong type", path_, key));
    }
  }

  void get_seed(const char* key, std::uint64_t& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw ConfigError(fmt::format("{}.{}: expected a non-negative integer", path_, key));
    out = v.get<std::uint64_t>();
  }

  bool has(const char* key) const { return j_.contains(key); }

  Reader object(const char* key) {
    seen_.insert(key);
    return Reader(j_.at(key), path_ + "." + key);
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", path_, k));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_optics(Reader r, optics::OpticalTrain& t) {
  r.get("f_o_mm", t.f_o);
  r.get("n_stop", t.n_stop);
  r.get("d_ot_mm", t.d_ot);
  r.get("sensor_px_w", t.sensor_px_w);
  r.get("sensor_px_h", t.sensor_px_h);
  r.get("sensor_w_mm", t.sensor_w);
  r.get("coc_mm", t.coc);
  r.get("iris_diameter_mm", t.iris_diameter);
  r.get("pixel_scale_cal", t.pixel_scale_cal);
  r.get("d_ref_mm", t.d_ref);
  r.finish();
}

void read_rig(Reader r, scene::RigGeometry& g) {
  r.get("lens_height_mm", g.lens_height);
  r.get("mirror_height_mm", g.mirror_height);
  r.finish();
}

void read_lens(Reader r, devices::TunableLensModel& m) {
  r.get("power_min_dpt", m.power_min);
  r.get("power_max_dpt", m.power_max);
  r.get("current_gain_dpt_per_ma", m.current_gain);
  r.get("current_step_min_ma", m.current_step_min);
  r.get("response_time_ms", m.response_time);
  r.get("settling_time_ms", m.settling_time);
  r.get("settling_time_filtered_ms", m.settling_time_filtered);
  r.get("repeatability_dpt", m.repeatability);
  r.get("sweep_full_range_time_ms", m.sweep_full_range_time);
  r.get("oscillation_hz", m.oscillation_hz);
  r.finish();
}

void read_mirror(Reader r, devices::MirrorModel& m) {
  r.get("pan_range_deg", m.pan_range);
  r.get("tilt_range_deg", m.tilt_range);
  r.get("max_speed_deg_s", m.max_speed);
  r.finish();
}

void read_sensor(Reader r, devices::SensorModel& m) {
  r.get("frame_rate_fps", m.frame_rate);
  r.get("exposure_ms", m.exposure);
  r.get("relative_response_850nm", m.relative_response_850nm);
  r.finish();
}

void read_render(Reader r, render::RenderSettings& s) {
  r.get("transmission", s.transmission);
  r.get("illumination", s.illumination);
  r.get("read_noise", s.read_noise);
  r.get("k_ast", s.k_ast);
  r.get("pupil_ratio", s.pupil_ratio);
  r.get("occlusion_fraction", s.occlusion_fraction);
  r.get("tunable_lens_present", s.tunable_lens_present);
  r.get("roi_scale", s.roi_scale);
  r.finish();
}

void read_quality(Reader r, quality::QualityGate& g) {
  r.get("px_min", g.px_min);
  r.get("sharpness_min", g.sharpness_min);
  r.get("brightness_lo", g.brightness_lo);
  r.get("brightness_hi", g.brightness_hi);
  r.get("dog_sigma_fine", g.dog_sigma_fine);
  r.get("dog_sigma_coarse", g.dog_sigma_coarse);
  r.get("rho_lo", g.rho_lo);
  r.get("rho_hi", g.rho_hi);
  r.get("lid_margin_deg", g.lid_margin_deg);
  r.finish();
}

void read_code(Reader r, iris::IrisCodeConfig& c) {
  r.get("sheet_radial", c.sheet_radial);
  r.get("sheet_angular", c.sheet_angular);
  r.get("code_rows", c.code_rows);
  r.get("code_cols", c.code_cols);
  r.get("shift_budget", c.shift_budget);
  r.get("wavelength", c.wavelength);
  r.get("sigma_on_f", c.sigma_on_f);
  r.get("magnitude_frac", c.magnitude_frac);
  r.get("occlusion_widen", c.occlusion_widen);
  r.get("max_masked_fraction", c.max_masked_fraction);
  r.finish();
}

exp::SubjectSpec read_subject(Reader r) {
  exp::SubjectSpec s;
  r.get("id", s.id);
  r.get("name", s.name);
  r.get_seed("identity_seed", s.identity_seed);
  r.get("height_mm", s.height_mm);
  r.get("range_mm", s.range_mm);
  r.get("azimuth_deg", s.azimuth_deg);
  r.get("speed_mm_s", s.speed_mm_s);
  r.get("t_start_ms", s.t_start);
  if (r.has("t_end_ms")) r.get("t_end_ms", s.t_end);
  if (r.has("jitter")) {
    Reader j = r.object("jitter");
    j.get("sigma_mm", s.jitter.sigma_mm);
    j.get("bandwidth_hz", s.jitter.bandwidth_hz);
    j.get_seed("seed", s.jitter.seed);
    j.finish();
  }
  r.finish();
  return s;
}

void read_scan(Reader& r, exp::ScanOptions& s) {
  r.get("grid_mm", s.grid_mm);
  r.get("max_front_mm", s.max_front_mm);
  r.get("max_rear_mm", s.max_rear_mm);
  r.get("repeatability", s.repeatability);
  r.get_seed("identity_seed", s.identity_seed);
}

void read_experiment(Reader r, ScenarioConfig& c) {
  std::string type;
  r.get("type", type);
  if (type == "dof_table") {
    c.experiment = ExperimentType::dof_table;
    r.get("focus_min_mm", c.dof_table.focus_min_mm);
    r.get("focus_max_mm", c.dof_table.focus_max_mm);
    r.get("step_mm", c.dof_table.step_mm);
  } else if (type == "dof_extension") {
    c.experiment = ExperimentType::dof_extension;
    auto& p = c.dof_extension;
    r.get("focus_mm", p.focus_mm);
    r.get("reference_mm", p.reference_mm);
    r.get("zoom_scaled", p.zoom_scaled);
    r.get("repeats", p.repeats);
    r.get("baseline_mm", p.baseline_mm);
    read_scan(r, p.scan);
  } else if (type == "hd_curve") {
    c.experiment = ExperimentType::hd_curve;
    auto& p = c.hd_curve;
    r.get("focus_mm", p.focus_mm);
    r.get("step_mm", p.step_mm);
    r.get("front_span_mm", p.front_span_mm);
    r.get("rear_span_mm", p.rear_span_mm);
    r.get("repeats", p.repeats);
    r.get_seed("identity_seed", p.identity_seed);
    r.get("impostor_pairs", p.impostor_pairs);
  } else if (type == "multiperson") {
    c.experiment = ExperimentType::multiperson;
    auto& p = c.multiperson;
    std::string policy = "nearest_transition";
    r.get("policy", policy);
    if (policy == "nearest_transition") {
      p.policy = sched::Policy::nearest_transition;
    } else if (policy == "given_order") {
      p.policy = sched::Policy::given_order;
    } else {
      throw ConfigError(fmt::format("{}.policy: unknown policy '{}'", r.path(), policy));
    }
    r.get("dwell_budget", p.dwell_budget);
    r.get("filtered", p.filtered);
  } else if (type == "iom") {
    c.experiment = ExperimentType::iom;
    auto& p = c.iom;
    r.get("n_frames", p.n_frames);
    r.get("lag_frames", p.lag_frames);
    r.get("sweep_offsets_mm", p.sweep_offsets_mm);
    r.get("filtered", p.filtered);
  } else if (type == "calibrate") {
    c.experiment = ExperimentType::calibrate;
    auto& p = c.calibrate;
    r.get("anchor_focus_mm", p.anchor_focus_mm);
    r.get("anchor_dof_mm", p.anchor_dof_mm);
    r.get("rear_limit_mm", p.rear_limit_mm);
    r.get("front_limit_mm", p.front_limit_mm);
    r.get_seed("identity_seed", p.identity_seed);
    r.get("noise_repeats", p.noise_repeats);
    r.get("rel_tol", p.rel_tol);
  } else if (type == "oracle") {
    c.experiment = ExperimentType::oracle;
    read_scan(r, c.oracle);
  } else {
    throw ConfigError(fmt::format("{}.type: unknown experiment '{}'", r.path(), type));
  }
  r.finish();
}

void validate_experiment(const ScenarioConfig& c) {
  switch (c.experiment) {
    case ExperimentType::multiperson:
      if (c.subjects.size() < 2) throw ConfigError("multiperson: needs at least two subjects");
      if (c.multiperson.dwell_budget < 1) throw ConfigError("experiment.dwell_budget: must be >= 1");
      break;
    case ExperimentType::iom:
      if (c.subjects.size() != 1) throw ConfigError("iom: needs exactly one subject");
      if (c.iom.n_frames < 1 || c.iom.lag_frames < 1) throw ConfigError("iom: n_frames and lag_frames must be >= 1");
      break;
    case ExperimentType::dof_extension:
      if (c.dof_extension.repeats < 1 || c.dof_extension.focus_mm.empty())
        throw ConfigError("dof_extension: needs focus distances and repeats >= 1");
      if (!(c.dof_extension.scan.grid_mm > 0.0)) throw ConfigError("dof_extension.grid_mm: must be positive");
      break;
    case ExperimentType::hd_curve:
      if (c.hd_curve.repeats < 1 || !(c.hd_curve.step_mm > 0.0) || c.hd_curve.impostor_pairs < 0)
        throw ConfigError("hd_curve: invalid repeats, step or impostor count");
      break;
    case ExperimentType::dof_table:
      if (!(c.dof_table.step_mm > 0.0) || c.dof_table.focus_max_mm < c.dof_table.focus_min_mm)
        throw ConfigError("dof_table: invalid distance grid");
      break;
    case ExperimentType::oracle:
      if (!(c.oracle.grid_mm > 0.0)) throw ConfigError("oracle.grid_mm: must be positive");
      break;
    case ExperimentType::calibrate:
      break;
  }
  std::set<int> ids;
  for (const auto& s : c.subjects) {
    if (!ids.insert(s.id).second) throw ConfigError(fmt::format("subjects: duplicate id {}", s.id));
  }
}

}  // namespace

const char* experiment_name(ExperimentType t) {
  switch (t) {
    case ExperimentType::dof_table: return "dof_table";
    case ExperimentType::dof_extension: return "dof_extension";
    case ExperimentType::hd_curve: return "hd_curve";
    case ExperimentType::multiperson: return "multiperson";
    case ExperimentType::iom: return "iom";
    case ExperimentType::calibrate: return "calibrate";
    case ExperimentType::oracle: return "oracle";
  }
  return "unknown";
}

ScenarioConfig parse(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("invalid JSON: {}", e.what()));
  }
  ScenarioConfig c;
  Reader root(doc, "config");
  if (!root.has("schema_version")) throw ConfigError("config: missing schema_version");
  root.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion)
    throw ConfigError(fmt::format("config.schema_version: unsupported version {}", c.schema_version));
  root.get_seed("seed", c.setup.seed);
  if (root.has("optics")) read_optics(root.object("optics"), c.setup.train);
  if (root.has("rig")) read_rig(root.object("rig"), c.setup.rig);
  if (root.has("lens")) read_lens(root.object("lens"), c.setup.devices.lens);
  if (root.has("mirror")) read_mirror(root.object("mirror"), c.setup.devices.mirror);
  if (root.has("sensor")) read_sensor(root.object("sensor"), c.setup.devices.sensor);
  if (root.has("render")) read_render(root.object("render"), c.setup.render);
  if (root.has("quality")) read_quality(root.object("quality"), c.setup.gate);
  if (root.has("iriscode")) read_code(root.object("iriscode"), c.setup.code);
  if (root.has("subjects")) {
    const json& arr = root.raw("subjects");
    if (!arr.is_array()) throw ConfigError("config.subjects: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      c.subjects.push_back(read_subject(Reader(arr[i], fmt::format("config.subjects[{}]", i))));
  }
  if (!root.has("experiment")) throw ConfigError("config: missing experiment");
  read_experiment(root.object("experiment"), c);
  root.finish();

  c.setup.devices.sensor.px_w = c.setup.train.sensor_px_w;
  c.setup.devices.sensor.px_h = c.setup.train.sensor_px_h;
  try {
    c.setup.validate();
    for (const auto& s : c.subjects) s.make(c.setup.rig);
  } catch (const DomainError& e) {
    throw ConfigError(fmt::format("invalid parameter: {}", e.what()));
  } catch (const RangeError& e) {
    throw ConfigError(fmt::format("parameter out of range: {}", e.what()));
  }
  validate_experiment(c);
  return c;
}

ScenarioConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

exp::Output run(const ScenarioConfig& cfg) {
  switch (cfg.experiment) {
    case ExperimentType::dof_table: return exp::run_dof_table(cfg.setup, cfg.dof_table);
    case ExperimentType::dof_extension: return exp::run_dof_extension(cfg.setup, cfg.dof_extension);
    case ExperimentType::hd_curve: return exp::run_hd_curve(cfg.setup, cfg.hd_curve);
    case ExperimentType::multiperson: return exp::run_multiperson(cfg.setup, cfg.subjects, cfg.multiperson);
    case ExperimentType::iom: return exp::run_iom(cfg.setup, cfg.subjects.front(), cfg.iom);
    case ExperimentType::calibrate: return exp::run_calibrate(cfg.setup, cfg.calibrate);
    case ExperimentType::oracle: return exp::run_oracle(cfg.setup, cfg.oracle);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace aif::config
