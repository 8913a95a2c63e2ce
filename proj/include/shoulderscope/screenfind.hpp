#pragma once

// Touch-screen corner detection from Canny edges and Hough lines, and the
// normalized DLT homography used to map frame pixels onto the reference
// keyboard image.

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "shoulderscope/error.hpp"
#include "shoulderscope/geom.hpp"
#include "shoulderscope/imgproc.hpp"

namespace shoulderscope::screenfind {

using geom::Homography;
using geom::Point2;
using imgproc::PolarLine;

namespace detail {

inline double triangle_area(Point2 a, Point2 b, Point2 c) {
  return 0.5 * std::abs(geom::cross(b - a, c - a));
}

inline double span_squared(std::span<const Point2> pts) {
  double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
  for (const Point2 p : pts) {
    xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
  }
  const double dx = xmax - xmin, dy = ymax - ymin;
  return dx * dx + dy * dy;
}

inline bool has_collinear_triple(std::span<const Point2> pts) {
  const double tol = 1e-6 * span_squared(pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        if (triangle_area(pts[i], pts[j], pts[k]) < tol) return true;
      }
    }
  }
  return false;
}

}  // namespace detail

/// Corners ordered top-left, top-right, bottom-right, bottom-left.
class ScreenQuad {
 public:
  explicit ScreenQuad(const std::array<Point2, 4>& corners) : c_(corners) {
    if (detail::has_collinear_triple(c_)) {
      throw Error(ErrorCode::kDegenerateQuad, "three corners are collinear");
    }
    int sign = 0;
    for (int i = 0; i < 4; ++i) {
      const double z = geom::cross(c_[(i + 1) % 4] - c_[i], c_[(i + 2) % 4] - c_[(i + 1) % 4]);
      const int s = z > 0.0 ? 1 : -1;
      if (sign == 0) sign = s;
      if (s != sign) throw Error(ErrorCode::kDegenerateQuad, "quadrilateral is not convex");
    }
    if (!(area() > 0.0)) throw Error(ErrorCode::kDegenerateQuad, "quadrilateral has no area");
  }

  const std::array<Point2, 4>& corners() const { return c_; }
  Point2 operator[](std::size_t i) const { return c_[i]; }

  double area() const {
    double a = 0.0;
    for (int i = 0; i < 4; ++i) a += geom::cross(c_[i], c_[(i + 1) % 4]);
    return 0.5 * std::abs(a);
  }

 private:
  std::array<Point2, 4> c_;
};

/// Orders four points by angle about their centroid and rotates the cycle so
/// the corner with the smallest x + y comes first.
inline std::array<Point2, 4> order_corners(std::array<Point2, 4> pts) {
  Point2 c{};
  for (const Point2 p : pts) c = c + 0.25 * p;
  std::sort(pts.begin(), pts.end(), [c](Point2 a, Point2 b) {
    return std::atan2(a.y - c.y, a.x - c.x) < std::atan2(b.y - c.y, b.x - c.x);
  });
  const auto first = std::min_element(pts.begin(), pts.end(),
                                      [](Point2 a, Point2 b) { return a.x + a.y < b.x + b.y; });
  std::rotate(pts.begin(), first, pts.end());
  return pts;
}

struct PointPair {
  Point2 src;
  Point2 dst;
};

/// Correspondences for DLT: at least four pairs, no collinear triple on either side.
class PointPairSet {
 public:
  explicit PointPairSet(std::vector<PointPair> pairs) : pairs_(std::move(pairs)) {
    if (pairs_.size() < 4) throw Error(ErrorCode::kInvalidArgument, "need at least 4 pairs");
    std::vector<Point2> s, d;
    for (const auto& p : pairs_) s.push_back(p.src), d.push_back(p.dst);
    if (detail::has_collinear_triple(s) || detail::has_collinear_triple(d)) {
      throw Error(ErrorCode::kCollinearPoints, "three correspondences are collinear");
    }
  }

  const std::vector<PointPair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }

 private:
  std::vector<PointPair> pairs_;
};

namespace detail {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
inline geom::Mat3 hartley_normalizer(std::span<const Point2> pts) {
  Point2 c{};
  for (const Point2 p : pts) c = c + (1.0 / pts.size()) * p;
  double mean = 0.0;
  for (const Point2 p : pts) mean += geom::distance(p, c) / pts.size();
  const double s = std::sqrt(2.0) / mean;
  geom::Mat3 t;
  t << s, 0, -s * c.x, 0, s, -s * c.y, 0, 0, 1;
  return t;
}

inline Point2 transform(const geom::Mat3& t, Point2 p) {
  const geom::Vec3 q = t * geom::Vec3(p.x, p.y, 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

}  // namespace detail

/// Normalized DLT; the result maps source points onto destination points.
inline Homography dlt_homography(const PointPairSet& set) {
  const auto& pairs = set.pairs();
  const std::size_t n = pairs.size();
  std::vector<Point2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) src[i] = pairs[i].src, dst[i] = pairs[i].dst;
  const geom::Mat3 ts = detail::hartley_normalizer(src);
  const geom::Mat3 td = detail::hartley_normalizer(dst);

  const Eigen::Index rows = static_cast<Eigen::Index>(std::max<std::size_t>(2 * n, 9));
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = detail::transform(ts, src[i]);
    const Point2 q = detail::transform(td, dst[i]);
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << -p.x, -p.y, -1, 0, 0, 0, q.x * p.x, q.x * p.y, q.x;
    a.row(r + 1) << 0, 0, 0, -p.x, -p.y, -1, q.y * p.x, q.y * p.y, q.y;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(7) - sv(8) <= 1e-9 * sv(0)) {
    throw Error(ErrorCode::kRankDeficient, "DLT null space is not one-dimensional");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  geom::Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  geom::Mat3 m = td.inverse() * hn * ts;
  m /= m.norm();
  return Homography(m);
}

inline Homography dlt_homography(std::vector<PointPair> pairs) {
  return dlt_homography(PointPairSet(std::move(pairs)));
}

/// Frame px -> reference px from the four ordered screen corners.
inline Homography frame_to_reference(const ScreenQuad& quad, const std::array<Point2, 4>& ref) {
  std::vector<PointPair> pairs;
  for (int i = 0; i < 4; ++i) pairs.push_back({quad[i], ref[i]});
  return dlt_homography(std::move(pairs));
}

/// Outer corners of a width x height reference raster in quad order. Pixel
/// centers sit at integer coordinates, so the raster edge lies half a pixel out.
inline std::array<Point2, 4> reference_corners(double width, double height) {
  const double x0 = -0.5, y0 = -0.5, x1 = width - 0.5, y1 = height - 0.5;
  return {Point2{x0, y0}, Point2{x1, y0}, Point2{x1, y1}, Point2{x0, y1}};
}

// ---------------------------------------------------------------------------
// Corner detection

struct ScreenFindConfig {
  double canny_sigma = 1.4;
  // hysteresis thresholds as fractions of the maximum gradient magnitude
  double low_fraction = 0.2;
  double high_fraction = 0.5;
  double rho_res = 1.0;
  double theta_res = std::numbers::pi / 180.0;
  int hough_threshold = 0;  // 0: 10% of the smaller image side
  double family_angle = std::numbers::pi / 6.0;
  double min_side = 0.0;  // 0: 10% of the smaller image side
  double min_area_fraction = 0.10;
  bool refine = true;
};

namespace detail {

struct FittedLine {
  Point2 point;      // a point on the line
  Point2 direction;  // unit
  bool horizontal;
};

inline FittedLine to_fitted(const PolarLine& l, bool horizontal) {
  const Point2 n{std::cos(l.theta), std::sin(l.theta)};
  return {l.rho * n, {-n.y, n.x}, horizontal};
}

inline PolarLine to_polar(const FittedLine& f) {
  Point2 n{-f.direction.y, f.direction.x};
  double rho = geom::dot(n, f.point);
  double theta = std::atan2(n.y, n.x);
  if (theta < 0.0) theta += std::numbers::pi, rho = -rho;
  if (theta >= std::numbers::pi) theta -= std::numbers::pi, rho = -rho;
  return {rho, theta, 0};
}

// Position across the image center, used to measure separation within a family.
inline double offset_at_center(const PolarLine& l, bool horizontal, double cx, double cy) {
  const double c = std::cos(l.theta), s = std::sin(l.theta);
  return horizontal ? (l.rho - cx * c) / s : (l.rho - cy * s) / c;
}

// Subpixel edge location from a parabola through the magnitudes across the edge.
inline Point2 subpixel_edge(const imgproc::EdgeMap& e, int x, int y) {
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
  const double m0 = e.magnitude(x, y);
  const double mm = e.magnitude.clamped(x - dx, y - dy);
  const double mp = e.magnitude.clamped(x + dx, y + dy);
  const double denom = mm - 2.0 * m0 + mp;
  double off = 0.0;
  if (denom < 0.0) off = std::clamp(0.5 * (mm - mp) / denom, -0.5, 0.5);
  return {x + off * dx, y + off * dy};
}

// Total least squares refit on edge pixels near the line whose gradient is
// roughly normal to it.
inline FittedLine refine_line(const imgproc::EdgeMap& e, FittedLine line, double band) {
  const Point2 normal{-line.direction.y, line.direction.x};
  std::vector<Point2> pts;
  for (int y = 0; y < e.height; ++y) {
    for (int x = 0; x < e.width; ++x) {
      if (!e.is_edge(x, y)) continue;
      const Point2 p{static_cast<double>(x), static_cast<double>(y)};
      if (std::abs(geom::dot(p - line.point, normal)) > band + 1.0) continue;
      const double g = e.direction(x, y);
      if (std::abs(std::cos(g) * normal.x + std::sin(g) * normal.y) < std::cos(0.5)) continue;
      const Point2 q = subpixel_edge(e, x, y);
      if (std::abs(geom::dot(q - line.point, normal)) <= band) pts.push_back(q);
    }
  }
  if (pts.size() < 2) return line;
  Point2 c{};
  for (const Point2 p : pts) c = c + (1.0 / pts.size()) * p;
  double sxx = 0, sxy = 0, syy = 0;
  for (const Point2 p : pts) {
    const Point2 d = p - c;
    sxx += d.x * d.x, sxy += d.x * d.y, syy += d.y * d.y;
  }
  const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Point2 dir{std::cos(angle), std::sin(angle)};
  if (geom::dot(dir, line.direction) < 0.0) dir = -1.0 * dir;
  return {c, dir, line.horizontal};
}

}  // namespace detail

/// Result of line selection; exposed for diagnostics and tests.
struct QuadDetection {
  ScreenQuad quad;
  std::array<PolarLine, 2> horizontal;
  std::array<PolarLine, 2> vertical;
};

template <class T>
QuadDetection detect_screen_quad_detailed(const imgproc::Raster<T>& img,
                                          const ScreenFindConfig& cfg = {}) {
  const int w = img.width(), h = img.height();
  auto [mag, dir] = imgproc::detail::magnitude_direction(img, cfg.canny_sigma);
  const double peak = *std::max_element(mag.pixels().begin(), mag.pixels().end());
  if (!(peak > 0.0)) throw Error(ErrorCode::kInsufficientLines, "image has no edges");
  const imgproc::EdgeMap edges = imgproc::detail::nms_hysteresis(
      std::move(mag), std::move(dir), cfg.low_fraction * peak, cfg.high_fraction * peak);

  const double small_side = std::min(w, h);
  const int votes = cfg.hough_threshold > 0
                        ? cfg.hough_threshold
                        : std::max(2, static_cast<int>(0.1 * small_side));
  const double min_side = cfg.min_side > 0.0 ? cfg.min_side : 0.1 * small_side;
  const auto lines = imgproc::hough_lines(edges, cfg.rho_res, cfg.theta_res, votes);

  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  const double half_pi = 0.5 * std::numbers::pi;
  std::vector<PolarLine> hs, vs;
  for (const auto& l : lines) {
    if (std::abs(l.theta - half_pi) < cfg.family_angle) {
      hs.push_back(l);
    } else if (l.theta < cfg.family_angle || l.theta > std::numbers::pi - cfg.family_angle) {
      vs.push_back(l);
    }
  }
  auto pick = [&](const std::vector<PolarLine>& fam, bool horizontal) {
    if (fam.empty()) throw Error(ErrorCode::kInsufficientLines, "no line in a family");
    const double first = detail::offset_at_center(fam[0], horizontal, cx, cy);
    for (std::size_t i = 1; i < fam.size(); ++i) {
      const double off = detail::offset_at_center(fam[i], horizontal, cx, cy);
      if (std::abs(off - first) > min_side) return std::array<PolarLine, 2>{fam[0], fam[i]};
    }
    throw Error(ErrorCode::kInsufficientLines, "fewer than two separated lines in a family");
  };
  const auto hpair = pick(hs, true);
  const auto vpair = pick(vs, false);

  std::array<PolarLine, 2> hfit = hpair, vfit = vpair;
  if (cfg.refine) {
    for (auto* fam : {&hfit, &vfit}) {
      for (auto& l : *fam) {
        const bool horizontal = fam == &hfit;
        auto f = detail::to_fitted(l, horizontal);
        f = detail::refine_line(edges, f, 2.5);
        f = detail::refine_line(edges, f, 1.5);
        const int v = l.votes;
        l = detail::to_polar(f);
        l.votes = v;
      }
    }
  }
  std::array<Point2, 4> pts{};
  int k = 0;
  for (const auto& hl : hfit) {
    for (const auto& vl : vfit) pts[k++] = imgproc::line_intersection(hl, vl);
  }
  ScreenQuad quad(order_corners(pts));
  if (quad.area() < cfg.min_area_fraction * w * h) {
    throw Error(ErrorCode::kDegenerateQuad, "screen quad covers too little of the image");
  }
  return {quad, hpair, vpair};
}

template <class T>
ScreenQuad detect_screen_quad(const imgproc::Raster<T>& img, const ScreenFindConfig& cfg = {}) {
  return detect_screen_quad_detailed(img, cfg).quad;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Homography& h, const std::string& maps = "frame_to_reference") {
  nlohmann::json m = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m.push_back(h.matrix()(r, c));
  }
  return {{"maps", maps}, {"matrix", m}};
}

inline Homography homography_from_json(const nlohmann::json& j) {
  const auto& m = j.at("matrix");
  if (!m.is_array() || m.size() != 9) {
    throw Error(ErrorCode::kInvalidArgument, "homography needs 9 numbers");
  }
  geom::Mat3 h;
  for (int i = 0; i < 9; ++i) h(i / 3, i % 3) = m.at(i).get<double>();
  return Homography(h);
}

inline nlohmann::json to_json(const ScreenQuad& q) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Point2 p : q.corners()) arr.push_back({p.x, p.y});
  return {{"corners", arr}};
}

inline ScreenQuad quad_from_json(const nlohmann::json& j) {
  const auto& arr = j.at("corners");
  if (!arr.is_array() || arr.size() != 4) {
    throw Error(ErrorCode::kInvalidArgument, "quad needs 4 corners");
  }
  std::array<Point2, 4> c{};
  for (int i = 0; i < 4; ++i) c[i] = {arr[i].at(0).get<double>(), arr[i].at(1).get<double>()};
  return ScreenQuad(c);
}

}  // namespace shoulderscope::screenfind
