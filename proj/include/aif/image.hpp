#pragma once

// Row-major images and the convolution filters used by the renderer and the
// quality gate. Filters are "valid": the output shrinks by the kernel radius
// on every side, so callers pad explicitly and no boundary rule is implied.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace aif {

template <class T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, T fill = T{})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  T& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  T* row(int y) { return pixels.data() + static_cast<std::size_t>(y) * width; }
  const T* row(int y) const { return pixels.data() + static_cast<std::size_t>(y) * width; }
  bool empty() const { return pixels.empty(); }
  bool operator==(const Image&) const = default;
};

using ImageF = Image<float>;
using Image8 = Image<std::uint8_t>;

/// Binary PGM (P5, maxval 255).
std::vector<std::uint8_t> encode_pgm(const Image8& img);
Image8 decode_pgm(const std::vector<std::uint8_t>& bytes);
void write_pgm(const std::filesystem::path& path, const Image8& img);
Image8 read_pgm(const std::filesystem::path& path);

/// Rounds to nearest and clamps to [0, 255].
Image8 to_u8(const ImageF& img);
ImageF to_float(const Image8& img);

/// Replicates edge pixels outward by `pad` on every side.
ImageF pad_clamped(const ImageF& img, int pad);
/// Crops `margin` pixels from every side.
ImageF crop(const ImageF& img, int margin);

struct Tap {
  int dx = 0;
  int dy = 0;
  float w = 0.0f;
};

/// Horizontal run of constant weight: offsets x0..x1 (inclusive) on row dy.
struct Span {
  int dy = 0;
  int x0 = 0;
  int x1 = 0;
  float w = 0.0f;
};

/// 2-D kernel as constant-weight spans plus individual taps. Weights sum to 1.
struct SpanKernel {
  int radius = 0;
  std::vector<Span> spans;
  std::vector<Tap> taps;

  static SpanKernel identity() { return {0, {}, {{0, 0, 1.0f}}}; }
  double weight_sum() const;
};

/// Pillbox of the given diameter (px) with area-coverage edge weights. Below
/// one pixel the kernel degenerates to the identity.
SpanKernel disk_kernel(double diameter_px);

/// Uniform line of length |(lx, ly)| px centered on the origin.
SpanKernel line_kernel(double lx, double ly);

/// Normalized 1-D Gaussian of radius ceil(3 sigma); sigma <= 0 gives [1].
std::vector<float> gaussian_taps(double sigma);

/// Valid 2-D convolution. Output shrinks by kernel.radius on every side.
ImageF convolve_valid(const ImageF& src, const SpanKernel& kernel);

/// Valid separable convolution with odd-length taps (centered).
ImageF convolve_separable_valid(const ImageF& src, const std::vector<float>& taps_x,
                                const std::vector<float>& taps_y);

}  // namespace aif
