#pragma once

// Recognition pipeline: circle segmentation, rubber-sheet normalization,
// 1-D log-Gabor phase encoding with masks, and shift-compensated normalized
// Hamming distance.

#include <cstdint>
#include <vector>

#include "aif/renderer.hpp"

namespace aif::iris {

struct IrisCodeConfig {
  int sheet_radial = 32;
  int sheet_angular = 256;
  int code_rows = 8;
  int code_cols = 128;
  int shift_budget = 8;         ///< code columns, each direction
  double wavelength = 16.0;     ///< sheet columns per filter period
  double sigma_on_f = 0.745;    ///< log-Gabor bandwidth ratio; 0.745 is one octave
  double magnitude_frac = 0.2;  ///< cells weaker than this x RMS magnitude are masked
  int occlusion_widen = 8;      ///< sheet columns of extra masking beside occlusions
  double max_masked_fraction = 0.75;

  void validate() const;
};

/// Polar sheet: rows run pupil -> limbus, columns counterclockwise from 3 o'clock.
struct Sheet {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> occluded;

  float at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

class IrisCode {
 public:
  IrisCode() = default;
  IrisCode(int rows, int cols, int shift_budget);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int shift_budget() const { return shift_budget_; }
  std::size_t words_per_row() const { return words_per_row_; }

  bool bit(int r, int c, int b) const { return get(code_, r, 2 * c + b); }
  bool mask_bit(int r, int c, int b) const { return get(mask_, r, 2 * c + b); }
  void set_bit(int r, int c, int b, bool v) { put(code_, r, 2 * c + b, v); }
  void set_mask(int r, int c, bool valid);

  const std::vector<std::uint64_t>& code_words() const { return code_; }
  const std::vector<std::uint64_t>& mask_words() const { return mask_; }

  /// Fraction of cells whose mask bits are cleared.
  double masked_fraction() const;
  /// Cyclic rotation by k code columns (positive = counterclockwise).
  IrisCode rotated(int k) const;
  IrisCode complemented() const;

  /// 16-byte header ("AIFC", u16 rows, u16 cols, u8 bits per cell, u8
  /// version, u16 shift budget, u32 payload bytes; little-endian) followed
  /// by code bits then mask bits, cell-major, two bits per cell, LSB first.
  std::vector<std::uint8_t> serialize() const;
  static IrisCode deserialize(const std::vector<std::uint8_t>& bytes);

  bool operator==(const IrisCode&) const = default;

 private:
  bool get(const std::vector<std::uint64_t>& w, int r, int k) const;
  void put(std::vector<std::uint64_t>& w, int r, int k, bool v);

  int rows_ = 0;
  int cols_ = 0;
  int shift_budget_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> code_;
  std::vector<std::uint64_t> mask_;
};

enum class SegmentMode { ground_truth, detect };

struct Segmentation {
  render::Circle pupil;
  render::Circle iris;
};

/// ground_truth copies the render metadata. detect runs an integro-
/// differential circle search on the lateral and lower arcs; throws
/// SegmentationError when no boundary stands out.
Segmentation segment(const render::IrisImage& image, SegmentMode mode);

/// Rubber-sheet remap. Occlusion flags come from the image ground-truth lid sector.
Sheet normalize(const render::IrisImage& image, const Segmentation& seg, const IrisCodeConfig& cfg);
/// Generic form over an arbitrary intensity image and occlusion predicate.
Sheet normalize(const Image8& image, const Segmentation& seg, const render::GroundTruth& occlusion,
                const IrisCodeConfig& cfg);

IrisCode encode(const Sheet& sheet, const IrisCodeConfig& cfg);

struct HammingResult {
  double hd = 1.0;
  int best_shift = 0;
  std::uint64_t compared_bits = 0;
};

/// Minimum over shifts in [-budget, +budget] of the masked normalized Hamming
/// distance. Throws ComparisonError on shape mismatch or when no shift has a
/// jointly unmasked bit.
HammingResult hamming_distance(const IrisCode& a, const IrisCode& b);

inline constexpr double kMatchThreshold = 0.32;

/// hd < threshold (strict).
bool match(const IrisCode& a, const IrisCode& b, double threshold = kMatchThreshold);

/// Full pipeline: segment, normalize, encode.
IrisCode encode_image(const render::IrisImage& image, const IrisCodeConfig& cfg,
                      SegmentMode mode = SegmentMode::ground_truth);

}  // namespace aif::iris
