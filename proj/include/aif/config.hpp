#pragma once

// Scenario configuration: one JSON document (comments allowed) fully
// determines a run. Every object rejects keys it does not know.

#include <string>
#include <vector>

#include "aif/experiments.hpp"

namespace aif::config {

inline constexpr int kSchemaVersion = 1;

enum class ExperimentType { dof_table, dof_extension, hd_curve, multiperson, iom, calibrate, oracle };

const char* experiment_name(ExperimentType t);

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  exp::Setup setup;
  std::vector<exp::SubjectSpec> subjects;
  ExperimentType experiment = ExperimentType::dof_table;
  exp::DofTableParams dof_table;
  exp::DofExtensionParams dof_extension;
  exp::HdCurveParams hd_curve;
  exp::MultipersonParams multiperson;
  exp::IomParams iom;
  exp::CalibrateParams calibrate;
  exp::ScanOptions oracle;
};

/// Throws ConfigError naming the offending key path; device and model
/// ranges are validated before returning.
ScenarioConfig parse(const std::string& text);
ScenarioConfig load(const std::string& path);

/// Runs the configured experiment.
exp::Output run(const ScenarioConfig& cfg);

}  // namespace aif::config
