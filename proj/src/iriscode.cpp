#include "aif/iriscode.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <string>

#include "aif/error.hpp"
#include "aif/kernels.hpp"
#include "aif/math.hpp"

namespace aif::iris {

void IrisCodeConfig::validate() const {
  auto fail = [](const std::string& w) { throw DomainError("iris code config: " + w); };
  if (sheet_radial < 8 || sheet_radial > 64) fail("sheet_radial must lie in [8, 64]");
  if (sheet_angular < 128 || sheet_angular > 512) fail("sheet_angular must lie in [128, 512]");
  if (code_rows < 1 || sheet_radial % code_rows != 0) fail("code_rows must divide sheet_radial");
  if (code_cols < 1 || sheet_angular % code_cols != 0) fail("code_cols must divide sheet_angular");
  if (shift_budget < 0 || 2 * shift_budget >= code_cols) fail("shift_budget out of range");
  if (!(wavelength >= 2.0 && wavelength <= sheet_angular / 2.0)) fail("wavelength out of range");
  if (!(sigma_on_f > 0.0 && sigma_on_f < 1.0)) fail("sigma_on_f must lie in (0, 1)");
  if (!(magnitude_frac >= 0.0)) fail("magnitude_frac must be non-negative");
  if (occlusion_widen < 0) fail("occlusion_widen must be non-negative");
  if (!(max_masked_fraction > 0.0 && max_masked_fraction <= 1.0)) fail("max_masked_fraction must lie in (0, 1]");
}

// --- IrisCode ---------------------------------------------------------------

IrisCode::IrisCode(int rows, int cols, int shift_budget)
    : rows_(rows), cols_(cols), shift_budget_(shift_budget) {
  if (rows < 1 || cols < 1 || rows > 0xFFFF || cols > 0xFFFF) throw DomainError("iris code: bad shape");
  if (shift_budget < 0 || shift_budget > 0xFFFF) throw DomainError("iris code: bad shift budget");
  words_per_row_ = (2 * static_cast<std::size_t>(cols) + 63) / 64;
  code_.assign(words_per_row_ * rows, 0);
  mask_.assign(words_per_row_ * rows, 0);
}

bool IrisCode::get(const std::vector<std::uint64_t>& w, int r, int k) const {
  return (w[words_per_row_ * r + static_cast<std::size_t>(k) / 64] >> (k % 64)) & 1u;
}

void IrisCode::put(std::vector<std::uint64_t>& w, int r, int k, bool v) {
  std::uint64_t& word = w[words_per_row_ * r + static_cast<std::size_t>(k) / 64];
  const std::uint64_t bit = std::uint64_t{1} << (k % 64);
  word = v ? (word | bit) : (word & ~bit);
}

void IrisCode::set_mask(int r, int c, bool valid) {
  put(mask_, r, 2 * c, valid);
  put(mask_, r, 2 * c + 1, valid);
}

double IrisCode::masked_fraction() const {
  long masked = 0;
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) masked += !mask_bit(r, c, 0);
  return static_cast<double>(masked) / (static_cast<double>(rows_) * cols_);
}

IrisCode IrisCode::rotated(int k) const {
  IrisCode out(rows_, cols_, shift_budget_);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const int src = ((c - k) % cols_ + cols_) % cols_;
      for (int b = 0; b < 2; ++b) {
        out.put(out.code_, r, 2 * c + b, bit(r, src, b));
        out.put(out.mask_, r, 2 * c + b, mask_bit(r, src, b));
      }
    }
  }
  return out;
}

IrisCode IrisCode::complemented() const {
  IrisCode out = *this;
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c)
      for (int b = 0; b < 2; ++b) out.set_bit(r, c, b, !bit(r, c, b));
  return out;
}

namespace {

constexpr std::uint8_t kFormatVersion = 1;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> IrisCode::serialize() const {
  const std::size_t nbits = 2 * static_cast<std::size_t>(rows_) * cols_;
  const std::size_t plane = (nbits + 7) / 8;
  std::vector<std::uint8_t> out;
  out.reserve(16 + 2 * plane);
  for (const char ch : {'A', 'I', 'F', 'C'}) out.push_back(static_cast<std::uint8_t>(ch));
  put_le(out, static_cast<std::uint64_t>(rows_), 2);
  put_le(out, static_cast<std::uint64_t>(cols_), 2);
  out.push_back(2);
  out.push_back(kFormatVersion);
  put_le(out, static_cast<std::uint64_t>(shift_budget_), 2);
  put_le(out, 2 * plane, 4);
  for (const auto* words : {&code_, &mask_}) {
    std::vector<std::uint8_t> bytes(plane, 0);
    for (int r = 0; r < rows_; ++r)
      for (int k = 0; k < 2 * cols_; ++k) {
        const std::size_t idx = static_cast<std::size_t>(r) * 2 * cols_ + k;
        if (get(*words, r, k)) bytes[idx / 8] |= static_cast<std::uint8_t>(1u << (idx % 8));
      }
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

IrisCode IrisCode::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "AIFC", 4) != 0)
    throw DomainError("iris code: bad magic");
  const int rows = static_cast<int>(get_le(bytes, 4, 2));
  const int cols = static_cast<int>(get_le(bytes, 6, 2));
  if (bytes[8] != 2) throw DomainError("iris code: unsupported bits per cell");
  if (bytes[9] != kFormatVersion) throw DomainError("iris code: unsupported version");
  const int shift = static_cast<int>(get_le(bytes, 10, 2));
  const std::size_t payload = get_le(bytes, 12, 4);
  IrisCode code(rows, cols, shift);
  const std::size_t nbits = 2 * static_cast<std::size_t>(rows) * cols;
  const std::size_t plane = (nbits + 7) / 8;
  if (payload != 2 * plane || bytes.size() != 16 + payload) throw DomainError("iris code: payload size mismatch");
  for (int p = 0; p < 2; ++p) {
    auto& words = p == 0 ? code.code_ : code.mask_;
    const std::size_t base = 16 + p * plane;
    for (int r = 0; r < rows; ++r)
      for (int k = 0; k < 2 * cols; ++k) {
        const std::size_t idx = static_cast<std::size_t>(r) * 2 * cols + k;
        code.put(words, r, k, (bytes[base + idx / 8] >> (idx % 8)) & 1u);
      }
  }
  return code;
}

// --- segmentation --------------------------------------------------------------

namespace {

double sample_bilinear(const Image8& img, double x, double y) {
  const double fx = std::clamp(x - 0.5, 0.0, img.width - 1.0);
  const double fy = std::clamp(y - 0.5, 0.0, img.height - 1.0);
  const int x0 = std::min(static_cast<int>(fx), img.width - 2 < 0 ? 0 : img.width - 2);
  const int y0 = std::min(static_cast<int>(fy), img.height - 2 < 0 ? 0 : img.height - 2);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double ux = fx - x0;
  const double uy = fy - y0;
  const double top = img.at(x0, y0) + (img.at(x1, y0) - img.at(x0, y0)) * ux;
  const double bot = img.at(x0, y1) + (img.at(x1, y1) - img.at(x0, y1)) * ux;
  return top + (bot - top) * uy;
}

constexpr int kArcSamples = 128;

// Arc angles avoiding the upper lid: lateral and lower quadrants only.
std::vector<double> arc_angles() {
  std::vector<double> a;
  a.reserve(kArcSamples);
  for (int i = 0; i < kArcSamples; ++i) {
    const double t = deg_to_rad(135.0 + 270.0 * (i + 0.5) / kArcSamples);
    a.push_back(t);
  }
  return a;
}

struct CircleFit {
  render::Circle c;
  double score = 0.0;
};

// Peak of the smoothed radial derivative of the arc mean, for one center.
CircleFit best_radius(const Image8& img, double cx, double cy, double r_lo, double r_hi,
                      const std::vector<double>& angles) {
  const int n = static_cast<int>(std::floor(r_hi - r_lo)) + 1;
  if (n < 5) return {};
  std::vector<double> mean(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double r = r_lo + k;
    double s = 0.0;
    for (const double t : angles) s += sample_bilinear(img, cx + r * std::cos(t), cy - r * std::sin(t));
    mean[static_cast<std::size_t>(k)] = s / static_cast<double>(angles.size());
  }
  CircleFit best;
  for (int k = 2; k + 2 < n; ++k) {
    // Smoothed central difference: [1 2 0 -2 -1] / 8 in radius.
    const auto m = [&](int i) { return mean[static_cast<std::size_t>(i)]; };
    const double d = (2.0 * (m(k + 1) - m(k - 1)) + (m(k + 2) - m(k - 2))) / 8.0;
    if (d > best.score) best = {{cx, cy, r_lo + k}, d};
  }
  return best;
}

CircleFit search(const Image8& img, double cx0, double cy0, double spread, double step, double r_lo,
                 double r_hi, const std::vector<double>& angles) {
  CircleFit best;
  const int n = static_cast<int>(std::round(spread / step));
  for (int j = -n; j <= n; ++j)
    for (int i = -n; i <= n; ++i) {
      const CircleFit f = best_radius(img, cx0 + i * step, cy0 + j * step, r_lo, r_hi, angles);
      if (f.score > best.score) best = f;
    }
  return best;
}

constexpr double kMinEdgeStrength = 2.0;  // grey levels per px
constexpr double kMinRadiusRatio = 0.2;
constexpr double kMaxRadiusRatio = 0.7;
constexpr double kMaxCenterOffset = 0.1;  // x iris radius

}  // namespace

Segmentation segment(const render::IrisImage& image, SegmentMode mode) {
  if (mode == SegmentMode::ground_truth) return {image.truth.pupil, image.truth.iris};
  const Image8& img = image.pixels;
  if (img.width < 32 || img.height < 32) throw SegmentationError("segment: image too small");
  const auto arcs = arc_angles();
  std::vector<double> full(kArcSamples);
  for (int i = 0; i < kArcSamples; ++i) full[static_cast<std::size_t>(i)] = 2.0 * kPi * (i + 0.5) / kArcSamples;
  const double half = std::min(img.width, img.height) / 2.0;
  const double r_min = 0.08 * half;
  const double r_max = 0.98 * half;

  // Strongest dark-to-light circular edge near the crop center, coarse then fine.
  CircleFit first = search(img, img.width / 2.0, img.height / 2.0, 12.0, 3.0, r_min, r_max, arcs);
  if (first.score < kMinEdgeStrength)
    throw SegmentationError("segment: no circular edge (peak gradient " + std::to_string(first.score) + ")");
  first = search(img, first.c.cx, first.c.cy, 3.0, 0.5, r_min, r_max, arcs);

  // Its partner lies clearly inside (pupil) or clearly outside (limbus).
  CircleFit inner = search(img, first.c.cx, first.c.cy, 4.0, 1.0, r_min, 0.8 * first.c.r, full);
  CircleFit outer = search(img, first.c.cx, first.c.cy, 4.0, 1.0, 1.25 * first.c.r, r_max, arcs);
  const bool use_outer = outer.score >= inner.score;
  CircleFit other = use_outer ? outer : inner;
  if (other.score < kMinEdgeStrength)
    throw SegmentationError("segment: single boundary only (partner gradient " + std::to_string(other.score) + ")");
  other = use_outer ? search(img, other.c.cx, other.c.cy, 1.0, 0.5, 1.25 * first.c.r, r_max, arcs)
                    : search(img, other.c.cx, other.c.cy, 1.0, 0.5, r_min, 0.8 * first.c.r, full);
  CircleFit pupil = use_outer ? first : other;
  CircleFit iris = use_outer ? other : first;
  // Integer radial steps: report the boundary at the half-way crossing.
  iris.c.r += 0.5;
  pupil.c.r += 0.5;
  const double ratio = pupil.c.r / iris.c.r;
  const double offset = std::hypot(pupil.c.cx - iris.c.cx, pupil.c.cy - iris.c.cy);
  if (ratio < kMinRadiusRatio || ratio > kMaxRadiusRatio || offset > kMaxCenterOffset * iris.c.r)
    throw SegmentationError("segment: implausible boundaries (pupil/iris radius ratio " + std::to_string(ratio) +
                            ", center offset " + std::to_string(offset) + " px)");
  return {pupil.c, iris.c};
}

// --- normalization and encoding ------------------------------------------------

Sheet normalize(const Image8& image, const Segmentation& seg, const render::GroundTruth& occlusion,
                const IrisCodeConfig& cfg) {
  cfg.validate();
  const auto& p = seg.pupil;
  const auto& q = seg.iris;
  if (!(p.r > 0.0) || !(q.r > p.r)) throw DomainError("normalize: degenerate circles");
  Sheet s;
  s.rows = cfg.sheet_radial;
  s.cols = cfg.sheet_angular;
  s.values.resize(static_cast<std::size_t>(s.rows) * s.cols);
  s.occluded.resize(s.values.size());
  for (int c = 0; c < s.cols; ++c) {
    const double theta = 2.0 * kPi * c / s.cols;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double px = p.cx + p.r * ct, py = p.cy - p.r * st;
    const double ix = q.cx + q.r * ct, iy = q.cy - q.r * st;
    for (int r = 0; r < s.rows; ++r) {
      const double rho = (r + 0.5) / s.rows;
      const double x = (1.0 - rho) * px + rho * ix;
      const double y = (1.0 - rho) * py + rho * iy;
      const std::size_t idx = static_cast<std::size_t>(r) * s.cols + c;
      s.values[idx] = static_cast<float>(sample_bilinear(image, x, y));
      s.occluded[idx] = occlusion.occluded_dir(x - q.cx, q.cy - y) ? 1 : 0;
    }
  }
  return s;
}

Sheet normalize(const render::IrisImage& image, const Segmentation& seg, const IrisCodeConfig& cfg) {
  return normalize(image.pixels, seg, image.truth, cfg);
}

namespace {

struct Filter {
  int half = 0;
  std::vector<float> re;  // taps for n = -half..half
  std::vector<float> im;
};

// Spatial taps of the analytic 1-D log-Gabor on a ring of n samples,
// truncated where the envelope falls below 1e-4 of its peak.
Filter log_gabor(int n, double wavelength, double sigma_on_f) {
  const double f0 = 1.0 / wavelength;
  const double ls = std::log(sigma_on_f);
  std::vector<std::complex<double>> g(static_cast<std::size_t>(n));
  for (int k = 1; k < n / 2; ++k) {
    const double f = static_cast<double>(k) / n;
    const double l = std::log(f / f0);
    const double gain = std::exp(-(l * l) / (2.0 * ls * ls));
    for (int m = 0; m < n; ++m)
      g[static_cast<std::size_t>(m)] += gain * std::polar(1.0, 2.0 * kPi * k * m / n);
  }
  double peak = 0.0;
  for (auto& v : g) {
    v /= n;
    peak = std::max(peak, std::abs(v));
  }
  int half = 0;
  for (int m = 1; m < n / 2; ++m) {
    if (std::abs(g[static_cast<std::size_t>(m)]) >= 1e-4 * peak ||
        std::abs(g[static_cast<std::size_t>(n - m)]) >= 1e-4 * peak)
      half = m;
  }
  Filter fl;
  fl.half = half;
  for (int m = -half; m <= half; ++m) {
    const auto v = g[static_cast<std::size_t>((m + n) % n)];
    fl.re.push_back(static_cast<float>(v.real()));
    fl.im.push_back(static_cast<float>(v.imag()));
  }
  return fl;
}

}  // namespace

IrisCode encode(const Sheet& sheet, const IrisCodeConfig& cfg) {
  cfg.validate();
  if (sheet.rows != cfg.sheet_radial || sheet.cols != cfg.sheet_angular)
    throw DomainError("encode: sheet shape does not match the config");
  for (const float v : sheet.values)
    if (!std::isfinite(v)) throw DomainError("encode: non-finite sheet value");

  const int n = sheet.cols;
  const Filter fl = log_gabor(n, cfg.wavelength, cfg.sigma_on_f);
  const int h = fl.half;
  const int band = sheet.rows / cfg.code_rows;
  const int step = n / cfg.code_cols;

  // Band-summed complex response at every sheet column.
  std::vector<float> zr(static_cast<std::size_t>(cfg.code_rows) * n, 0.0f);
  std::vector<float> zi(zr.size(), 0.0f);
  std::vector<float> ext(static_cast<std::size_t>(n + 2 * h));
  for (int r = 0; r < sheet.rows; ++r) {
    // Remove the row mean so the response ignores the DC level.
    double mean = 0.0;
    for (int c = 0; c < n; ++c) mean += sheet.at(r, c);
    mean /= n;
    for (int m = 0; m < n + 2 * h; ++m)
      ext[static_cast<std::size_t>(m)] = static_cast<float>(sheet.at(r, ((m - h) % n + n) % n) - mean);
    float* orr = &zr[static_cast<std::size_t>(r / band) * n];
    float* oii = &zi[static_cast<std::size_t>(r / band) * n];
    // z[j] = sum_m g[m] x[j - m]; x[j - m] = ext[j - m + h].
    for (int m = -h; m <= h; ++m) {
      const float* src = ext.data() + (h - m);
      kernels::axpy(orr, src, static_cast<std::size_t>(n), fl.re[static_cast<std::size_t>(m + h)]);
      kernels::axpy(oii, src, static_cast<std::size_t>(n), fl.im[static_cast<std::size_t>(m + h)]);
    }
  }

  IrisCode code(cfg.code_rows, cfg.code_cols, cfg.shift_budget);
  std::vector<std::uint8_t> occl(static_cast<std::size_t>(cfg.code_rows) * cfg.code_cols, 0);
  for (int br = 0; br < cfg.code_rows; ++br)
    for (int c = 0; c < cfg.code_cols; ++c) {
      const int j = c * step;
      bool hit = false;
      for (int r = br * band; r < (br + 1) * band && !hit; ++r)
        for (int dj = -cfg.occlusion_widen; dj <= cfg.occlusion_widen && !hit; ++dj)
          hit = sheet.occluded[static_cast<std::size_t>(r) * n + ((j + dj) % n + n) % n] != 0;
      occl[static_cast<std::size_t>(br) * cfg.code_cols + c] = hit;
    }

  double sum_sq = 0.0;
  long counted = 0;
  for (int br = 0; br < cfg.code_rows; ++br)
    for (int c = 0; c < cfg.code_cols; ++c) {
      if (occl[static_cast<std::size_t>(br) * cfg.code_cols + c]) continue;
      const std::size_t k = static_cast<std::size_t>(br) * n + c * step;
      sum_sq += static_cast<double>(zr[k]) * zr[k] + static_cast<double>(zi[k]) * zi[k];
      ++counted;
    }
  const double rms = counted > 0 ? std::sqrt(sum_sq / counted) : 0.0;
  const double floor = cfg.magnitude_frac * rms;
  for (int br = 0; br < cfg.code_rows; ++br)
    for (int c = 0; c < cfg.code_cols; ++c) {
      const std::size_t k = static_cast<std::size_t>(br) * n + c * step;
      code.set_bit(br, c, 0, zr[k] > 0.0f);
      code.set_bit(br, c, 1, zi[k] > 0.0f);
      const double mag = std::hypot(static_cast<double>(zr[k]), static_cast<double>(zi[k]));
      const bool valid = !occl[static_cast<std::size_t>(br) * cfg.code_cols + c] && mag > floor && mag > 0.0;
      code.set_mask(br, c, valid);
    }
  return code;
}

HammingResult hamming_distance(const IrisCode& a, const IrisCode& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ComparisonError("hamming: code shapes differ");
  const int budget = std::min(a.shift_budget(), b.shift_budget());
  HammingResult best;
  bool any = false;
  const std::size_t words = a.code_words().size();
  // Shift order 0, -1, +1, -2, ... so ties resolve to the smallest rotation.
  for (int i = 0; i <= 2 * budget; ++i) {
    const int s = (i % 2 == 0) ? i / 2 : -(i + 1) / 2;
    const IrisCode rb = s == 0 ? b : b.rotated(s);
    const auto counts = kernels::masked_xor_popcount(a.code_words().data(), rb.code_words().data(),
                                                     a.mask_words().data(), rb.mask_words().data(), words);
    if (counts.compared == 0) continue;
    const double hd = static_cast<double>(counts.differing) / static_cast<double>(counts.compared);
    if (!any || hd < best.hd) best = {hd, s, counts.compared};
    any = true;
  }
  if (!any) throw ComparisonError("hamming: no jointly unmasked bits");
  return best;
}

bool match(const IrisCode& a, const IrisCode& b, double threshold) {
  return hamming_distance(a, b).hd < threshold;
}

IrisCode encode_image(const render::IrisImage& image, const IrisCodeConfig& cfg, SegmentMode mode) {
  const Segmentation seg = segment(image, mode);
  return encode(normalize(image, seg, cfg), cfg);
}

}  // namespace aif::iris
