#pragma once

// World model: subjects with eye trajectories, and the aiming geometry of the
// fixed vertical lens looking down onto the steering mirror.
//
// Frame: mirror center at the origin, z up. The lens sits above the mirror
// with its optical axis pointing straight down (-z).

#include <cstdint>
#include <string>
#include <vector>

#include "aif/math.hpp"

namespace aif::scene {

inline constexpr double kEyeBelowCrown = 120.0;  ///< mm

/// Constant-velocity piece of a trajectory, valid on [t_start, t_end].
struct Segment {
  double t_start = 0.0;  ///< ms
  double t_end = 0.0;    ///< ms, may be +infinity
  Vec3 start;            ///< eye position at t_start, mm
  Vec3 velocity;         ///< mm/s
};

/// Band-limited head motion: a seeded sum of sinusoids per axis with
/// frequencies in [0.5, 1.5] x bandwidth and per-axis RMS equal to sigma.
struct HeadJitter {
  double sigma_mm = 0.0;
  double bandwidth_hz = 2.0;
  std::uint64_t seed = 0;
};

struct Subject {
  int id = 0;
  std::string name;
  std::uint64_t identity_seed = 0;
  double height = 1700.0;  ///< mm, crown above floor
  std::vector<Segment> trajectory;
  HeadJitter head_jitter;

  double t_begin() const;
  double t_end() const;
  /// Throws DomainError when segments are not contiguous in time and position.
  void validate() const;
};

struct RigGeometry {
  Vec3 lens_axis{0.0, 0.0, -1.0};
  double lens_height = 200.0;    ///< front principal plane above the mirror center, mm
  double mirror_height = 1200.0; ///< mirror center above the floor, mm

  Vec3 to_lens() const { return -lens_axis.normalized(); }
  void validate() const;
};

/// Builds a subject standing at horizontal `range` and `azimuth_deg` with its
/// eye kEyeBelowCrown under the crown, static from t = 0 onward.
Subject make_static_subject(int id, std::uint64_t identity_seed, double range, double azimuth_deg,
                            double height, const RigGeometry& rig);

/// Single constant-velocity segment starting at `t0`.
Subject make_walking_subject(int id, std::uint64_t identity_seed, double range, double azimuth_deg,
                             double height, const Vec3& velocity_mm_s, double t0, double t1,
                             const RigGeometry& rig);

/// Eye position at t (ms) including head jitter. Throws DomainError outside
/// the trajectory span.
Vec3 eye_position(const Subject& subject, double t);

/// Time derivative of eye_position, mm/s.
Vec3 eye_velocity(const Subject& subject, double t);

struct AimAngles {
  double pan_deg = 0.0;
  double tilt_deg = 0.0;
};

/// Mirror angles whose normal bisects the directions mirror->eye and
/// mirror->lens. Throws UnreachablePose when tilt exceeds `tilt_limit_deg`.
AimAngles aim_angles(const Vec3& eye, const RigGeometry& rig, double tilt_limit_deg = 60.0);

/// Unit mirror normal for the given angles (pan = azimuth, tilt = elevation).
Vec3 mirror_normal(double pan_deg, double tilt_deg);

/// Direction the lens sees after reflecting off a mirror with `normal`.
Vec3 viewing_direction(const Vec3& normal, const RigGeometry& rig);

/// |eye - mirror center| + lens height.
double line_of_sight_distance(const Vec3& eye, const RigGeometry& rig);

}  // namespace aif::scene
