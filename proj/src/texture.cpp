#include "aif/texture.hpp"

#include <algorithm>
#include <cmath>

#include "aif/error.hpp"
#include "aif/math.hpp"
#include "aif/rng.hpp"

namespace aif {

namespace {

constexpr int kOctaves = 5;
constexpr int kFurrows = 72;
constexpr int kCrypts = 28;

double smooth(double u) { return u * u * (3.0 - 2.0 * u); }

// Wrapped angular difference in (-pi, pi].
double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2.0 * kPi);
  if (d > kPi) d -= 2.0 * kPi;
  if (d <= -kPi) d += 2.0 * kPi;
  return d;
}

struct Lattice {
  int na = 0;  // angular cells (periodic)
  int nr = 0;  // radial cells (nr + 1 knots)
  std::vector<double> knots;

  double eval(double rho, double theta_frac) const {
    const double u = theta_frac * na;
    const double v = rho * nr;
    const int i0 = static_cast<int>(std::floor(u));
    const int j0 = std::min(static_cast<int>(std::floor(v)), nr - 1);
    const double fu = smooth(u - i0);
    const double fv = smooth(v - j0);
    const int ia = ((i0 % na) + na) % na;
    const int ib = (ia + 1) % na;
    auto k = [&](int j, int i) { return knots[static_cast<std::size_t>(j) * na + i]; };
    const double a = k(j0, ia) + (k(j0, ib) - k(j0, ia)) * fu;
    const double b = k(j0 + 1, ia) + (k(j0 + 1, ib) - k(j0 + 1, ia)) * fu;
    return a + (b - a) * fv;
  }
};

}  // namespace

float IrisTexture::sample(double rho, double theta) const {
  const double r = std::clamp(rho, 0.0, 1.0) * (radial_res - 1);
  const double turns = theta / (2.0 * kPi);
  const double frac = turns - std::floor(turns);
  const double a = frac * angular_res;
  const int r0 = std::min(static_cast<int>(r), radial_res - 2);
  const int a0 = static_cast<int>(a) % angular_res;
  const int a1 = (a0 + 1) % angular_res;
  const double fr = r - r0;
  const double fa = a - std::floor(a);
  auto v = [&](int i, int j) { return static_cast<double>(values[static_cast<std::size_t>(i) * angular_res + j]); };
  const double top = v(r0, a0) + (v(r0, a1) - v(r0, a0)) * fa;
  const double bot = v(r0 + 1, a0) + (v(r0 + 1, a1) - v(r0 + 1, a0)) * fa;
  return static_cast<float>(top + (bot - top) * fr);
}

double IrisTexture::mean() const {
  double s = 0.0;
  for (const float v : values) s += v;
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

IrisTexture generate_iris_texture(std::uint64_t identity_seed, int radial_res, int angular_res) {
  if (radial_res < 64 || angular_res < 256)
    throw DomainError("iris texture resolution must be at least 64 x 256");
  Rng rng(stream_key(identity_seed, {0x7E47u}));

  std::vector<Lattice> octaves(kOctaves);
  for (int o = 0; o < kOctaves; ++o) {
    Lattice& l = octaves[static_cast<std::size_t>(o)];
    l.na = 8 << o;
    l.nr = 2 << o;
    l.knots.resize(static_cast<std::size_t>(l.nr + 1) * l.na);
    for (auto& k : l.knots) k = rng.uniform(-1.0, 1.0);
  }

  struct Furrow {
    double theta, curl, width, r0, r1, amp;
  };
  std::vector<Furrow> furrows(kFurrows);
  for (auto& f : furrows) {
    f.theta = rng.uniform(0.0, 2.0 * kPi);
    f.curl = rng.uniform(-0.25, 0.25);
    f.width = rng.uniform(0.008, 0.025);
    f.r0 = rng.uniform(0.0, 0.4);
    f.r1 = rng.uniform(0.55, 1.0);
    f.amp = rng.uniform(-0.7, 0.7);
  }

  struct Crypt {
    double rho, theta, s_rho, s_theta, amp;
  };
  std::vector<Crypt> crypts(kCrypts);
  for (auto& c : crypts) {
    c.rho = rng.uniform(0.15, 0.85);
    c.theta = rng.uniform(0.0, 2.0 * kPi);
    c.s_rho = rng.uniform(0.03, 0.08);
    c.s_theta = rng.uniform(0.03, 0.10);
    c.amp = -rng.uniform(0.5, 1.0);
  }
  const double collarette = rng.uniform(0.25, 0.35);

  IrisTexture tex;
  tex.radial_res = radial_res;
  tex.angular_res = angular_res;
  tex.identity_seed = identity_seed;
  std::vector<double> field(static_cast<std::size_t>(radial_res) * angular_res);
  for (int i = 0; i < radial_res; ++i) {
    const double rho = static_cast<double>(i) / (radial_res - 1);
    for (int j = 0; j < angular_res; ++j) {
      const double frac = static_cast<double>(j) / angular_res;
      const double theta = 2.0 * kPi * frac;
      double v = 0.0;
      double amp = 1.0;
      for (const auto& l : octaves) {
        v += amp * l.eval(rho, frac);
        amp *= 0.6;
      }
      for (const auto& f : furrows) {
        if (rho < f.r0 || rho > f.r1) continue;
        const double d = angle_diff(theta, f.theta + f.curl * (rho - 0.5));
        if (std::abs(d) > 4.0 * f.width) continue;
        const double span = f.r1 - f.r0;
        const double envelope = std::sin(kPi * (rho - f.r0) / span);
        v += f.amp * envelope * std::exp(-0.5 * d * d / (f.width * f.width));
      }
      for (const auto& c : crypts) {
        const double dr = (rho - c.rho) / c.s_rho;
        const double da = angle_diff(theta, c.theta) / c.s_theta;
        const double q = dr * dr + da * da;
        if (q < 16.0) v += c.amp * std::exp(-0.5 * q);
      }
      const double dc = (rho - collarette) / 0.03;
      v += 0.4 * std::exp(-0.5 * dc * dc) * (1.0 + 0.5 * std::sin(7.0 * theta));
      field[static_cast<std::size_t>(i) * angular_res + j] = v;
    }
  }
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  const double vmin = *lo;
  const double range = *hi - *lo;
  tex.values.resize(field.size());
  for (std::size_t k = 0; k < field.size(); ++k)
    tex.values[k] = static_cast<float>(range > 0.0 ? (field[k] - vmin) / range : 0.5);
  return tex;
}

}  // namespace aif
