#include "aif/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "aif/error.hpp"
#include "aif/rng.hpp"

namespace aif::scene {

namespace {

constexpr int kJitterTerms = 6;

struct JitterTerm {
  double amplitude;  // mm
  double omega;      // rad/ms
  double phase;
};

std::array<std::array<JitterTerm, kJitterTerms>, 3> jitter_terms(const HeadJitter& j) {
  std::array<std::array<JitterTerm, kJitterTerms>, 3> terms{};
  const double amp = j.sigma_mm * std::sqrt(2.0 / kJitterTerms);
  for (std::uint64_t axis = 0; axis < 3; ++axis) {
    Rng rng(stream_key(j.seed, {0x4A17u, axis}));
    for (auto& term : terms[axis]) {
      const double hz = j.bandwidth_hz * rng.uniform(0.5, 1.5);
      term = {amp, 2.0 * kPi * hz / 1000.0, rng.uniform(0.0, 2.0 * kPi)};
    }
  }
  return terms;
}

const Segment& segment_at(const Subject& s, double t) {
  if (s.trajectory.empty()) throw DomainError("subject has no trajectory");
  for (const auto& seg : s.trajectory) {
    if (t >= seg.t_start && t <= seg.t_end) return seg;
  }
  throw DomainError("time " + std::to_string(t) + " ms outside the trajectory of subject " +
                    std::to_string(s.id));
}

}  // namespace

double Subject::t_begin() const {
  return trajectory.empty() ? 0.0 : trajectory.front().t_start;
}

double Subject::t_end() const { return trajectory.empty() ? 0.0 : trajectory.back().t_end; }

void Subject::validate() const {
  if (trajectory.empty()) throw DomainError("subject " + std::to_string(id) + ": empty trajectory");
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto& seg = trajectory[i];
    if (!(seg.t_end >= seg.t_start)) throw DomainError("subject: segment ends before it starts");
    if (i == 0) continue;
    const auto& prev = trajectory[i - 1];
    if (prev.t_end != seg.t_start) throw DomainError("subject: trajectory segments not contiguous");
    const Vec3 end = prev.start + prev.velocity * ((prev.t_end - prev.t_start) / 1000.0);
    if ((end - seg.start).norm() > 1e-6) throw DomainError("subject: trajectory jumps in position");
  }
  if (head_jitter.sigma_mm < 0.0 || !(head_jitter.bandwidth_hz > 0.0))
    throw DomainError("subject: invalid head jitter");
}

void RigGeometry::validate() const {
  if (std::abs(lens_axis.norm() - 1.0) > 1e-12) throw DomainError("rig: lens axis must be a unit vector");
  if (!(lens_height > 0.0)) throw DomainError("rig: lens height must be positive");
}

Subject make_static_subject(int id, std::uint64_t identity_seed, double range, double azimuth_deg,
                            double height, const RigGeometry& rig) {
  return make_walking_subject(id, identity_seed, range, azimuth_deg, height, {}, 0.0,
                              std::numeric_limits<double>::infinity(), rig);
}

Subject make_walking_subject(int id, std::uint64_t identity_seed, double range, double azimuth_deg,
                             double height, const Vec3& velocity_mm_s, double t0, double t1,
                             const RigGeometry& rig) {
  Subject s;
  s.id = id;
  s.identity_seed = identity_seed;
  s.height = height;
  const double az = deg_to_rad(azimuth_deg);
  const Vec3 eye{range * std::cos(az), range * std::sin(az), height - kEyeBelowCrown - rig.mirror_height};
  s.trajectory.push_back({t0, t1, eye, velocity_mm_s});
  return s;
}

Vec3 eye_position(const Subject& subject, double t) {
  const Segment& seg = segment_at(subject, t);
  Vec3 p = seg.start + seg.velocity * ((t - seg.t_start) / 1000.0);
  if (subject.head_jitter.sigma_mm > 0.0) {
    const auto terms = jitter_terms(subject.head_jitter);
    double off[3] = {0.0, 0.0, 0.0};
    for (int a = 0; a < 3; ++a) {
      for (const auto& term : terms[a]) off[a] += term.amplitude * std::sin(term.omega * t + term.phase);
    }
    p = p + Vec3{off[0], off[1], off[2]};
  }
  return p;
}

Vec3 eye_velocity(const Subject& subject, double t) {
  const Segment& seg = segment_at(subject, t);
  Vec3 v = seg.velocity;
  if (subject.head_jitter.sigma_mm > 0.0) {
    const auto terms = jitter_terms(subject.head_jitter);
    double dv[3] = {0.0, 0.0, 0.0};
    for (int a = 0; a < 3; ++a) {
      for (const auto& term : terms[a])
        dv[a] += term.amplitude * term.omega * 1000.0 * std::cos(term.omega * t + term.phase);
    }
    v = v + Vec3{dv[0], dv[1], dv[2]};
  }
  return v;
}

AimAngles aim_angles(const Vec3& eye, const RigGeometry& rig, double tilt_limit_deg) {
  const double dist = eye.norm();
  if (!(dist > 0.0)) throw UnreachablePose("eye at the mirror center");
  const Vec3 to_eye = eye * (1.0 / dist);
  const Vec3 bisector = to_eye + rig.to_lens();
  const double len = bisector.norm();
  if (len < 1e-12) throw UnreachablePose("eye on the reversed lens axis");
  const Vec3 n = bisector * (1.0 / len);
  AimAngles out;
  out.tilt_deg = rad_to_deg(std::asin(std::clamp(n.z, -1.0, 1.0)));
  out.pan_deg = rad_to_deg(std::atan2(n.y, n.x));
  if (std::abs(out.tilt_deg) > tilt_limit_deg)
    throw UnreachablePose("required tilt " + std::to_string(out.tilt_deg) + " deg exceeds the tilt range");
  return out;
}

Vec3 mirror_normal(double pan_deg, double tilt_deg) {
  const double p = deg_to_rad(pan_deg);
  const double t = deg_to_rad(tilt_deg);
  return {std::cos(t) * std::cos(p), std::cos(t) * std::sin(p), std::sin(t)};
}

Vec3 viewing_direction(const Vec3& normal, const RigGeometry& rig) {
  const Vec3 d = rig.lens_axis;
  return d - normal * (2.0 * d.dot(normal));
}

double line_of_sight_distance(const Vec3& eye, const RigGeometry& rig) {
  return eye.norm() + rig.lens_height;
}

}  // namespace aif::scene
