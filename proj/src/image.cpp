#include "aif/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "aif/error.hpp"
#include "aif/kernels.hpp"

namespace aif {

std::vector<std::uint8_t> encode_pgm(const Image8& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

Image8 decode_pgm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    long v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') v = v * 10 + (bytes[pos++] - '0');
    if (pos == start || v > 1 << 20) throw DomainError("pgm: malformed header");
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw DomainError("pgm: not a P5 file");
  pos = 2;
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (maxval != 255) throw DomainError("pgm: only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw DomainError("pgm: malformed header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos != n) throw DomainError("pgm: payload size mismatch");
  Image8 img(w, h);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.pixels.begin());
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image8& img) {
  const auto bytes = encode_pgm(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
}

Image8 read_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

Image8 to_u8(const ImageF& img) {
  Image8 out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float v = std::nearbyint(img.pixels[i]);
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
  }
  return out;
}

ImageF to_float(const Image8& img) {
  ImageF out(img.width, img.height);
  std::copy(img.pixels.begin(), img.pixels.end(), out.pixels.begin());
  return out;
}

ImageF pad_clamped(const ImageF& img, int pad) {
  if (img.empty()) throw DomainError("pad_clamped: empty image");
  ImageF out(img.width + 2 * pad, img.height + 2 * pad);
  for (int y = 0; y < out.height; ++y) {
    const int sy = std::clamp(y - pad, 0, img.height - 1);
    for (int x = 0; x < out.width; ++x) out.at(x, y) = img.at(std::clamp(x - pad, 0, img.width - 1), sy);
  }
  return out;
}

ImageF crop(const ImageF& img, int margin) {
  if (2 * margin >= img.width || 2 * margin >= img.height) throw DomainError("crop: margin too large");
  ImageF out(img.width - 2 * margin, img.height - 2 * margin);
  for (int y = 0; y < out.height; ++y)
    std::copy_n(img.row(y + margin) + margin, out.width, out.row(y));
  return out;
}

double SpanKernel::weight_sum() const {
  double s = 0.0;
  for (const auto& sp : spans) s += static_cast<double>(sp.w) * (sp.x1 - sp.x0 + 1);
  for (const auto& t : taps) s += t.w;
  return s;
}

SpanKernel disk_kernel(double diameter_px) {
  if (!(diameter_px >= 0.0) || !std::isfinite(diameter_px)) throw DomainError("disk_kernel: bad diameter");
  if (diameter_px < 1.0) return SpanKernel::identity();
  const double R = diameter_px / 2.0;
  const int r = std::max(0, static_cast<int>(std::ceil(R + 0.5)) - 1);
  constexpr int kSub = 16;
  const int side = 2 * r + 1;
  std::vector<double> cov(static_cast<std::size_t>(side) * side, 0.0);
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double ax = std::abs(dx);
      const double ay = std::abs(dy);
      const double near = std::hypot(std::max(0.0, ax - 0.5), std::max(0.0, ay - 0.5));
      const double far = std::hypot(ax + 0.5, ay + 0.5);
      double c;
      if (far <= R) {
        c = 1.0;
      } else if (near >= R) {
        c = 0.0;
      } else {
        int inside = 0;
        for (int sy = 0; sy < kSub; ++sy) {
          const double py = dy - 0.5 + (sy + 0.5) / kSub;
          for (int sx = 0; sx < kSub; ++sx) {
            const double px = dx - 0.5 + (sx + 0.5) / kSub;
            if (px * px + py * py <= R * R) ++inside;
          }
        }
        c = static_cast<double>(inside) / (kSub * kSub);
      }
      cov[static_cast<std::size_t>(dy + r) * side + (dx + r)] = c;
      total += c;
    }
  }
  SpanKernel k;
  k.radius = r;
  const float w_full = static_cast<float>(1.0 / total);
  for (int dy = -r; dy <= r; ++dy) {
    const double* row = &cov[static_cast<std::size_t>(dy + r) * side];
    // Fully covered pixels form one centered run per row (the disk is convex).
    int x0 = 1, x1 = 0;
    for (int dx = -r; dx <= r; ++dx) {
      if (row[dx + r] == 1.0) {
        if (x0 > x1) x0 = dx;
        x1 = dx;
      }
    }
    if (x0 <= x1) k.spans.push_back({dy, x0, x1, w_full});
    for (int dx = -r; dx <= r; ++dx) {
      const double c = row[dx + r];
      if (c > 0.0 && c < 1.0) k.taps.push_back({dx, dy, static_cast<float>(c / total)});
    }
  }
  return k;
}

SpanKernel line_kernel(double lx, double ly) {
  if (!std::isfinite(lx) || !std::isfinite(ly)) throw DomainError("line_kernel: bad extent");
  const double len = std::hypot(lx, ly);
  const int n = static_cast<int>(std::ceil(4.0 * len)) + 1;
  const int r = static_cast<int>(std::ceil(std::max(std::abs(lx), std::abs(ly)) / 2.0)) + 1;
  const int side = 2 * r + 1;
  std::vector<double> acc(static_cast<std::size_t>(side) * side, 0.0);
  for (int i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1) - 0.5;
    const double px = t * lx;
    const double py = t * ly;
    const double fx = std::floor(px);
    const double fy = std::floor(py);
    const double ux = px - fx;
    const double uy = py - fy;
    const int ix = static_cast<int>(fx);
    const int iy = static_cast<int>(fy);
    const double w[4] = {(1 - ux) * (1 - uy), ux * (1 - uy), (1 - ux) * uy, ux * uy};
    const int ox[4] = {0, 1, 0, 1};
    const int oy[4] = {0, 0, 1, 1};
    for (int c = 0; c < 4; ++c) {
      const int gx = ix + ox[c] + r;
      const int gy = iy + oy[c] + r;
      acc[static_cast<std::size_t>(gy) * side + gx] += w[c] / n;
    }
  }
  SpanKernel k;
  k.radius = r;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double v = acc[static_cast<std::size_t>(dy + r) * side + (dx + r)];
      if (v > 1e-12) k.taps.push_back({dx, dy, static_cast<float>(v)});
    }
  }
  return k;
}

std::vector<float> gaussian_taps(double sigma) {
  if (!(sigma > 0.0)) return {1.0f};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * r + 1));
  double s = 0.0;
  for (int i = -r; i <= r; ++i) {
    w[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    s += w[static_cast<std::size_t>(i + r)];
  }
  std::vector<float> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = static_cast<float>(w[i] / s);
  return out;
}

ImageF convolve_valid(const ImageF& src, const SpanKernel& kernel) {
  const int r = kernel.radius;
  const int ow = src.width - 2 * r;
  const int oh = src.height - 2 * r;
  if (ow <= 0 || oh <= 0) throw DomainError("convolve_valid: image smaller than kernel");
  std::vector<double> prefix;
  const std::size_t stride = static_cast<std::size_t>(src.width) + 1;
  if (!kernel.spans.empty()) {
    prefix.assign(stride * static_cast<std::size_t>(src.height), 0.0);
    for (int y = 0; y < src.height; ++y) {
      double* p = &prefix[stride * static_cast<std::size_t>(y)];
      const float* s = src.row(y);
      for (int x = 0; x < src.width; ++x) p[x + 1] = p[x] + s[x];
    }
  }
  ImageF out(ow, oh);
  const auto n = static_cast<std::size_t>(ow);
  for (int y = 0; y < oh; ++y) {
    float* o = out.row(y);
    for (const auto& sp : kernel.spans) {
      const double* p = &prefix[stride * static_cast<std::size_t>(y + r + sp.dy)];
      kernels::span_axpy(o, p, n, r + sp.x0, r + sp.x1 + 1, sp.w);
    }
    for (const auto& t : kernel.taps) kernels::axpy(o, src.row(y + r + t.dy) + r + t.dx, n, t.w);
  }
  return out;
}

ImageF convolve_separable_valid(const ImageF& src, const std::vector<float>& taps_x,
                                const std::vector<float>& taps_y) {
  if (taps_x.size() % 2 == 0 || taps_y.size() % 2 == 0)
    throw DomainError("convolve_separable_valid: taps must have odd length");
  const int rx = static_cast<int>(taps_x.size() / 2);
  const int ry = static_cast<int>(taps_y.size() / 2);
  const int ow = src.width - 2 * rx;
  const int oh = src.height - 2 * ry;
  if (ow <= 0 || oh <= 0) throw DomainError("convolve_separable_valid: image smaller than kernel");
  ImageF tmp(ow, src.height);
  const auto n = static_cast<std::size_t>(ow);
  for (int y = 0; y < src.height; ++y) {
    for (std::size_t k = 0; k < taps_x.size(); ++k)
      kernels::axpy(tmp.row(y), src.row(y) + k, n, taps_x[k]);
  }
  ImageF out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (std::size_t k = 0; k < taps_y.size(); ++k)
      kernels::axpy(out.row(y), tmp.row(y + static_cast<int>(k)), n, taps_y[k]);
  }
  return out;
}

}  // namespace aif
