#pragma once

// Raster container, binary PGM I/O and the classical edge / line / corner
// primitives used by the screen finder and the tracker. Borders are
// clamp-to-edge everywhere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shoulderscope/error.hpp"
#include "shoulderscope/geom.hpp"

namespace shoulderscope::imgproc {

using geom::Point2;

template <class T>
class Raster {
 public:
  Raster() : Raster(1, 1) {}

  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorCode::kInvalidArgument, "raster dimensions must be >= 1");
    }
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  Raster(int width, int height, std::vector<T> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1 ||
        pixels_.size() != static_cast<std::size_t>(width) * height) {
      throw Error(ErrorCode::kInvalidArgument, "raster size mismatch");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }

  T& operator()(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }

  const T& clamped(int x, int y) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return (*this)(x, y);
  }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width_ - 1.0 && y <= height_ - 1.0;
  }

  std::span<T> pixels() { return pixels_; }
  std::span<const T> pixels() const { return pixels_; }
  const std::vector<T>& data() const { return pixels_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int width_;
  int height_;
  std::vector<T> pixels_;
};

using GrayImage = Raster<std::uint8_t>;
using RealPlane = Raster<double>;

template <class T>
RealPlane to_real(const Raster<T>& img) {
  RealPlane out(img.width(), img.height());
  std::transform(img.pixels().begin(), img.pixels().end(), out.pixels().begin(),
                 [](T v) { return static_cast<double>(v); });
  return out;
}

inline std::uint8_t saturate_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

inline GrayImage to_gray(const RealPlane& plane) {
  GrayImage out(plane.width(), plane.height());
  std::transform(plane.pixels().begin(), plane.pixels().end(), out.pixels().begin(),
                 saturate_u8);
  return out;
}

/// Bilinear sample at (x, y) in pixel-center coordinates, clamp-to-edge.
template <class T>
double sample_bilinear(const Raster<T>& img, double x, double y) {
  x = std::clamp(x, 0.0, img.width() - 1.0);
  y = std::clamp(y, 0.0, img.height() - 1.0);
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1.0 - ax) * img(x0, y0) + ax * img(x1, y0);
  const double bottom = (1.0 - ax) * img(x0, y1) + ax * img(x1, y1);
  return (1.0 - ay) * top + ay * bottom;
}

template <class T>
Raster<T> crop(const Raster<T>& img, int x0, int y0, int w, int h) {
  if (w < 1 || h < 1 || x0 < 0 || y0 < 0 || x0 + w > img.width() || y0 + h > img.height()) {
    throw Error(ErrorCode::kOutOfBounds, "crop rectangle outside image");
  }
  Raster<T> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out(x, y) = img(x0 + x, y0 + y);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PGM (binary P5, maxval 255)

inline std::vector<std::uint8_t> save_pgm(const GrayImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), img.pixels().begin(), img.pixels().end());
  return bytes;
}

namespace detail {

inline bool is_pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Reads one decimal header token, skipping whitespace and '#' comments.
inline long read_header_int(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (is_pnm_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  long value = 0;
  std::size_t digits = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1'000'000) throw Error(ErrorCode::kMalformedHeader, "header value too large");
    ++pos;
    ++digits;
  }
  if (digits == 0) throw Error(ErrorCode::kMalformedHeader, "expected integer in header");
  return value;
}

}  // namespace detail

inline GrayImage load_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(ErrorCode::kMalformedHeader, "not a binary P5 file");
  }
  std::size_t pos = 2;
  const long width = detail::read_header_int(bytes, pos);
  const long height = detail::read_header_int(bytes, pos);
  const long maxval = detail::read_header_int(bytes, pos);
  if (width < 1 || height < 1) throw Error(ErrorCode::kMalformedHeader, "bad dimensions");
  if (maxval != 255) throw Error(ErrorCode::kMalformedHeader, "only maxval 255 is supported");
  if (pos >= bytes.size() || !detail::is_pnm_space(bytes[pos])) {
    throw Error(ErrorCode::kMalformedHeader, "missing separator after maxval");
  }
  ++pos;
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() - pos < count) throw Error(ErrorCode::kTruncatedData, "pixel data truncated");
  std::vector<std::uint8_t> px(bytes.begin() + pos, bytes.begin() + pos + count);
  return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(px));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

inline GrayImage read_pgm_file(const std::filesystem::path& path) {
  return load_pgm(read_file_bytes(path));
}

inline void write_pgm_file(const std::filesystem::path& path, const GrayImage& img) {
  write_file_bytes(path, save_pgm(img));
}

inline std::string frame_file_name(std::size_t index_one_based) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.pgm", index_one_based);
  return buf;
}

/// Frames of a video: every *.pgm in `dir`, ordered lexicographically.
inline std::vector<GrayImage> load_frame_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::kIoError, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    return a.filename().string() < b.filename().string();
  });
  std::vector<GrayImage> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(read_pgm_file(f));
  return frames;
}

inline void save_frame_directory(std::span<const GrayImage> frames,
                                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    write_pgm_file(dir / frame_file_name(i + 1), frames[i]);
  }
}

// ---------------------------------------------------------------------------
// Filtering

inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kBadSigma, "sigma must be > 0");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian, radius ceil(3 sigma), normalized kernel.
template <class T>
RealPlane gaussian_blur(const Raster<T>& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width();
  const int h = img.height();
  RealPlane tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      if (x >= r && x < w - r) {
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img(x + i, y);
      } else {
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img.clamped(x + i, y);
      }
      tmp(x, y) = acc;
    }
  }
  RealPlane out(w, h);
  for (int y = 0; y < h; ++y) {
    const bool inner = y >= r && y < h - r;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      if (inner) {
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(x, y + i);
      } else {
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.clamped(x, y + i);
      }
      out(x, y) = acc;
    }
  }
  return out;
}

struct Gradients {
  RealPlane gx;
  RealPlane gy;
};

/// 3x3 Sobel; gx = [-1 0 1; -2 0 2; -1 0 1], gy its transpose.
template <class T>
Gradients sobel_gradients(const Raster<T>& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) throw Error(ErrorCode::kTooSmall, "sobel needs at least 3x3");
  Gradients g{RealPlane(w, h), RealPlane(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = img.clamped(x - 1, y - 1), b = img.clamped(x, y - 1),
                   c = img.clamped(x + 1, y - 1);
      const double d = img.clamped(x - 1, y), f = img.clamped(x + 1, y);
      const double p = img.clamped(x - 1, y + 1), q = img.clamped(x, y + 1),
                   s = img.clamped(x + 1, y + 1);
      g.gx(x, y) = (c + 2.0 * f + s) - (a + 2.0 * d + p);
      g.gy(x, y) = (p + 2.0 * q + s) - (a + 2.0 * b + c);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Canny

struct EdgeMap {
  int width = 1;
  int height = 1;
  GrayImage mask;       // 1 = edge
  RealPlane magnitude;  // of the smoothed image
  RealPlane direction;  // atan2(gy, gx), radians

  bool is_edge(int x, int y) const { return mask(x, y) != 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(mask.pixels().begin(), mask.pixels().end(), 1));
  }
};

struct CannyThresholds {
  double low;
  double high;
};

/// `lo_frac` / `hi_frac` of the given percentile of nonzero gradient magnitude.
inline CannyThresholds percentile_thresholds(const RealPlane& magnitude, double percentile = 0.9,
                                             double lo_frac = 0.4, double hi_frac = 0.8) {
  // flat pixels are excluded so sparse edges on clean images still count
  std::vector<double> v;
  for (const double m : magnitude.pixels()) {
    if (m > 0.0) v.push_back(m);
  }
  if (v.empty()) return {0.0, 0.0};
  const auto idx = static_cast<std::size_t>(
      std::clamp(percentile, 0.0, 1.0) * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return {lo_frac * v[idx], hi_frac * v[idx]};
}

namespace detail {

template <class T>
std::pair<RealPlane, RealPlane> magnitude_direction(const Raster<T>& img, double sigma) {
  const Gradients g = sobel_gradients(gaussian_blur(img, sigma));
  const int w = img.width(), h = img.height();
  RealPlane mag(w, h), dir(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      mag(x, y) = std::hypot(g.gx(x, y), g.gy(x, y));
      dir(x, y) = std::atan2(g.gy(x, y), g.gx(x, y));
    }
  }
  return {std::move(mag), std::move(dir)};
}

inline EdgeMap nms_hysteresis(RealPlane magnitude, RealPlane direction, double low, double high) {
  const int w = magnitude.width();
  const int h = magnitude.height();
  EdgeMap e{w, h, GrayImage(w, h), std::move(magnitude), std::move(direction)};
  const RealPlane& mag = e.magnitude;
  // 0 = weak candidate, 1 = strong seed, 255 = suppressed
  GrayImage state(w, h, 255);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = mag(x, y);
      if (!(m >= low) || !(m > 0.0)) continue;
      double a = e.direction(x, y);
      if (a < 0.0) a += std::numbers::pi;
      const double deg = a * 180.0 / std::numbers::pi;
      int dx, dy;
      if (deg < 22.5 || deg >= 157.5) {
        dx = 1, dy = 0;
      } else if (deg < 67.5) {
        dx = 1, dy = 1;
      } else if (deg < 112.5) {
        dx = 0, dy = 1;
      } else {
        dx = -1, dy = 1;
      }
      const double ahead = mag.clamped(x + dx, y + dy);
      const double behind = mag.clamped(x - dx, y - dy);
      if (!(m > behind && m >= ahead)) continue;
      if (m >= high) {
        state(x, y) = 1;
        e.mask(x, y) = 1;
        queue.emplace_back(x, y);
      } else {
        state(x, y) = 0;
      }
    }
  }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if ((dx == 0 && dy == 0) || !state.contains(nx, ny)) continue;
        if (state(nx, ny) == 0) {
          state(nx, ny) = 1;
          e.mask(nx, ny) = 1;
          queue.emplace_back(nx, ny);
        }
      }
    }
  }
  return e;
}

}  // namespace detail

/// Gaussian smoothing, Sobel, 4-bin non-maximum suppression and 8-connected
/// double-threshold hysteresis. Thresholds are on Sobel magnitude of the
/// smoothed image.
template <class T>
EdgeMap canny(const Raster<T>& img, double sigma, double low, double high) {
  if (!(low > 0.0) || !(low < high)) {
    throw Error(ErrorCode::kBadThresholds, "need 0 < low < high");
  }
  auto [mag, dir] = detail::magnitude_direction(img, sigma);
  return detail::nms_hysteresis(std::move(mag), std::move(dir), low, high);
}

/// Canny with thresholds at 0.4 / 0.8 of the 90th-percentile nonzero magnitude.
template <class T>
EdgeMap canny(const Raster<T>& img, double sigma = 1.4) {
  auto [mag, dir] = detail::magnitude_direction(img, sigma);
  const auto t = percentile_thresholds(mag);
  if (!(t.low > 0.0)) {
    const int w = img.width(), h = img.height();
    return EdgeMap{w, h, GrayImage(w, h), std::move(mag), std::move(dir)};
  }
  return detail::nms_hysteresis(std::move(mag), std::move(dir), t.low, t.high);
}

// ---------------------------------------------------------------------------
// Hough lines

/// x cos(theta) + y sin(theta) = rho, theta in [0, pi).
struct PolarLine {
  double rho = 0.0;
  double theta = 0.0;
  int votes = 0;
};

/// Accumulator peaks at or above `threshold` votes, strongest first. A peak
/// within both `min_rho_sep` and `min_theta_sep` of a stronger kept line is
/// dropped (angles compared modulo pi, with rho negated across the wrap).
inline std::vector<PolarLine> hough_lines(const EdgeMap& edges, double rho_res = 1.0,
                                          double theta_res = std::numbers::pi / 180.0,
                                          int threshold = 1, double min_rho_sep = 0.0,
                                          double min_theta_sep = 0.0) {
  if (!(rho_res > 0.0) || !(theta_res > 0.0) || threshold < 1 || !(min_rho_sep >= 0.0) ||
      !(min_theta_sep >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad Hough resolution or threshold");
  }
  const int n_theta = std::max(1, static_cast<int>(std::lround(std::numbers::pi / theta_res)));
  const double max_rho = std::hypot(edges.width, edges.height);
  const int n_rho = static_cast<int>(std::ceil(2.0 * max_rho / rho_res)) + 1;
  std::vector<double> cs(n_theta), sn(n_theta);
  for (int t = 0; t < n_theta; ++t) {
    cs[t] = std::cos(t * theta_res);
    sn[t] = std::sin(t * theta_res);
  }
  std::vector<int> acc(static_cast<std::size_t>(n_theta) * n_rho, 0);
  auto cell = [&](int t, int r) -> int& { return acc[static_cast<std::size_t>(t) * n_rho + r]; };
  for (int y = 0; y < edges.height; ++y) {
    for (int x = 0; x < edges.width; ++x) {
      if (!edges.is_edge(x, y)) continue;
      for (int t = 0; t < n_theta; ++t) {
        const double rho = x * cs[t] + y * sn[t];
        const int r = static_cast<int>(std::lround((rho + max_rho) / rho_res));
        ++cell(t, r);
      }
    }
  }
  std::vector<PolarLine> lines;
  for (int t = 0; t < n_theta; ++t) {
    for (int r = 0; r < n_rho; ++r) {
      const int v = cell(t, r);
      if (v < threshold) continue;
      bool peak = true;
      for (int dt = -1; dt <= 1 && peak; ++dt) {
        for (int dr = -1; dr <= 1; ++dr) {
          if (dt == 0 && dr == 0) continue;
          const int nt = t + dt, nr = r + dr;
          if (nt < 0 || nt >= n_theta || nr < 0 || nr >= n_rho) continue;
          const int nv = cell(nt, nr);
          // plateau ties go to the lowest (theta, rho) index
          const bool earlier = dt < 0 || (dt == 0 && dr < 0);
          if (nv > v || (earlier && nv == v)) {
            peak = false;
            break;
          }
        }
      }
      if (peak) lines.push_back({r * rho_res - max_rho, t * theta_res, v});
    }
  }
  std::stable_sort(lines.begin(), lines.end(),
                   [](const PolarLine& a, const PolarLine& b) { return a.votes > b.votes; });
  if (!(min_rho_sep > 0.0) || !(min_theta_sep > 0.0)) return lines;
  std::vector<PolarLine> kept;
  for (const PolarLine& l : lines) {
    const bool near = std::any_of(kept.begin(), kept.end(), [&](const PolarLine& k) {
      double dt = std::abs(l.theta - k.theta), dr = std::abs(l.rho - k.rho);
      if (std::numbers::pi - dt < dt) dt = std::numbers::pi - dt, dr = std::abs(l.rho + k.rho);
      return dt < min_theta_sep && dr < min_rho_sep;
    });
    if (!near) kept.push_back(l);
  }
  return kept;
}

inline Point2 line_intersection(const PolarLine& a, const PolarLine& b) {
  const double ca = std::cos(a.theta), sa = std::sin(a.theta);
  const double cb = std::cos(b.theta), sb = std::sin(b.theta);
  const double det = ca * sb - sa * cb;  // sin(theta_b - theta_a)
  if (std::abs(det) <= 1e-9) throw Error(ErrorCode::kParallelLines, "lines are parallel");
  return {(a.rho * sb - b.rho * sa) / det, (ca * b.rho - cb * a.rho) / det};
}

// ---------------------------------------------------------------------------
// Shi-Tomasi

/// Minimum eigenvalue of the structure tensor summed over a 3x3 window of
/// Sobel gradients. Always >= 0.
template <class T>
RealPlane shi_tomasi_score(const Raster<T>& img) {
  const Gradients g = sobel_gradients(img);
  const int w = img.width(), h = img.height();
  RealPlane xx(w, h), xy(w, h), yy(w, h);
  for (std::size_t i = 0; i < xx.size(); ++i) {
    const double gx = g.gx.pixels()[i], gy = g.gy.pixels()[i];
    xx.pixels()[i] = gx * gx;
    xy.pixels()[i] = gx * gy;
    yy.pixels()[i] = gy * gy;
  }
  RealPlane score(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double a = 0, b = 0, c = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          a += xx.clamped(x + dx, y + dy);
          b += xy.clamped(x + dx, y + dy);
          c += yy.clamped(x + dx, y + dy);
        }
      }
      const double half_tr = 0.5 * (a + c);
      const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
      score(x, y) = std::max(0.0, half_tr - disc);
    }
  }
  return score;
}

struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool contains(int px, int py) const { return px >= x && py >= y && px < x + w && py < y + h; }
  int area() const { return w * h; }
};

/// Strongest Shi-Tomasi corners, optionally restricted to `region`.
template <class T>
std::vector<Point2> shi_tomasi_features(const Raster<T>& img, int max_n, double quality,
                                        double min_dist,
                                        std::optional<PixelRect> region = std::nullopt) {
  if (max_n < 1 || !(quality > 0.0 && quality <= 1.0) || !(min_dist >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad Shi-Tomasi parameters");
  }
  const RealPlane score = shi_tomasi_score(img);
  const PixelRect r = region.value_or(PixelRect{0, 0, img.width(), img.height()});
  double best = 0.0;
  for (int y = std::max(0, r.y); y < std::min(img.height(), r.y + r.h); ++y) {
    for (int x = std::max(0, r.x); x < std::min(img.width(), r.x + r.w); ++x) {
      best = std::max(best, score(x, y));
    }
  }
  if (!(best > 0.0)) return {};
  struct Candidate {
    double s;
    int x, y;
  };
  std::vector<Candidate> cand;
  const double floor = quality * best;
  for (int y = std::max(0, r.y); y < std::min(img.height(), r.y + r.h); ++y) {
    for (int x = std::max(0, r.x); x < std::min(img.width(), r.x + r.w); ++x) {
      const double s = score(x, y);
      if (!(s > 0.0) || s < floor) continue;
      bool peak = true;
      for (int dy = -1; dy <= 1 && peak; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx || dy) && score.contains(x + dx, y + dy) && score(x + dx, y + dy) > s) {
            peak = false;
            break;
          }
        }
      }
      if (peak) cand.push_back({s, x, y});
    }
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Candidate& a, const Candidate& b) { return a.s > b.s; });
  std::vector<Point2> out;
  const double min_d2 = min_dist * min_dist;
  for (const auto& c : cand) {
    const bool far = std::all_of(out.begin(), out.end(), [&](Point2 p) {
      const double dx = p.x - c.x, dy = p.y - c.y;
      return dx * dx + dy * dy >= min_d2;
    });
    if (!far) continue;
    out.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
    if (static_cast<int>(out.size()) == max_n) break;
  }
  return out;
}

}  // namespace shoulderscope::imgproc
