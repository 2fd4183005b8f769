#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace aif {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a global seed and a path of ids,
/// e.g. stream_key(seed, {experiment, position, repeat}).
constexpr std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t k = splitmix64(seed);
  for (const auto p : path) k = splitmix64(k ^ splitmix64(p + 0x632BE59BD9B4E019ull));
  return k;
}

/// Seeded stream with portable uniform/normal draws. The standard
/// distributions are implementation-defined, so they are avoided to keep
/// outputs byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : engine_(key) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace aif
