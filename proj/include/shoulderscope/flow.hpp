#pragma once

// Pyramidal Lucas-Kanade sparse tracking (KLT).

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "shoulderscope/error.hpp"
#include "shoulderscope/geom.hpp"
#include "shoulderscope/imgproc.hpp"

namespace shoulderscope::flow {

using geom::Point2;
using imgproc::GrayImage;
using imgproc::RealPlane;

struct Pyramid {
  std::vector<RealPlane> levels;  // levels[0] is full resolution

  int size() const { return static_cast<int>(levels.size()); }
};

/// Largest level count the image supports (smallest level side >= 8 px).
inline int max_pyramid_levels(int width, int height) {
  int levels = 1;
  int side = std::min(width, height);
  while (side / 2 >= 8) {
    side /= 2;
    ++levels;
  }
  return levels;
}

template <class T>
Pyramid build_pyramid(const imgproc::Raster<T>& img, int levels) {
  if (levels < 1) throw Error(ErrorCode::kInvalidArgument, "levels must be >= 1");
  const double min_side = std::min(img.width(), img.height());
  if (min_side / std::ldexp(1.0, levels - 1) < 8.0) {
    throw Error(ErrorCode::kTooManyLevels, "coarsest level would be smaller than 8 px");
  }
  Pyramid p;
  p.levels.reserve(levels);
  p.levels.push_back(imgproc::to_real(img));
  for (int k = 1; k < levels; ++k) {
    const RealPlane blurred = imgproc::gaussian_blur(p.levels.back(), 1.0);
    const int w = (blurred.width() + 1) / 2;
    const int h = (blurred.height() + 1) / 2;
    RealPlane next(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) next(x, y) = blurred(2 * x, 2 * y);
    }
    p.levels.push_back(std::move(next));
  }
  return p;
}

struct TrackedPoint {
  Point2 pos;
  bool valid = false;
};

struct LkParams {
  int window = 15;
  int max_iter = 20;
  double eps = 0.03;
  // G is rejected when lambda_min / window^2 falls below this, with
  // intensities scaled to [0, 1].
  double min_eig = 1e-4;
};

/// Coarse-to-fine Lucas-Kanade for each point of `prev` into `next`.
/// `guess`, when given, holds one initial displacement per point (level-0 px).
inline std::vector<TrackedPoint> lk_step(const Pyramid& prev, const Pyramid& next,
                                         std::span<const Point2> pts, const LkParams& prm = {},
                                         std::span<const Point2> guess = {}) {
  if (!guess.empty() && guess.size() != pts.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one guess per point required");
  }
  if (prm.window < 5 || prm.window % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "window must be odd and >= 5");
  }
  if (prev.size() != next.size() || prev.size() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "pyramids must have equal level counts");
  }
  const int half = prm.window / 2;
  const int n = prm.window * prm.window;
  const double scale = 1.0 / 255.0;
  std::vector<double> ival(n), ix(n), iy(n);
  std::vector<TrackedPoint> out;
  out.reserve(pts.size());

  for (std::size_t pi = 0; pi < pts.size(); ++pi) {
    const Point2 p0 = pts[pi];
    const RealPlane& base = prev.levels[0];
    if (!(p0.x >= half && p0.y >= half && p0.x <= base.width() - 1 - half &&
          p0.y <= base.height() - 1 - half)) {
      out.push_back({p0, false});
      continue;
    }
    bool ok = true;
    const int top = prev.size() - 1;
    double gx = guess.empty() ? 0.0 : std::ldexp(guess[pi].x, -top);
    double gy = guess.empty() ? 0.0 : std::ldexp(guess[pi].y, -top);
    for (int level = top; level >= 0 && ok; --level) {
      const RealPlane& I = prev.levels[level];
      const RealPlane& J = next.levels[level];
      const double f = std::ldexp(1.0, -level);
      const double px = p0.x * f, py = p0.y * f;
      double a = 0.0, b = 0.0, c = 0.0;
      for (int j = -half, k = 0; j <= half; ++j) {
        for (int i = -half; i <= half; ++i, ++k) {
          const double x = px + i, y = py + j;
          ival[k] = imgproc::sample_bilinear(I, x, y);
          ix[k] = 0.5 * (imgproc::sample_bilinear(I, x + 1.0, y) -
                         imgproc::sample_bilinear(I, x - 1.0, y));
          iy[k] = 0.5 * (imgproc::sample_bilinear(I, x, y + 1.0) -
                         imgproc::sample_bilinear(I, x, y - 1.0));
          a += ix[k] * ix[k];
          b += ix[k] * iy[k];
          c += iy[k] * iy[k];
        }
      }
      const double det = a * c - b * b;
      const double lambda_min =
          0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
      // a coarse level without texture passes its estimate down unrefined
      const bool textured = lambda_min * scale * scale / n >= prm.min_eig && det > 0.0;
      if (!textured && level == 0) {
        ok = false;
        break;
      }
      double dx = 0.0, dy = 0.0;
      for (int iter = 0; textured && iter < prm.max_iter; ++iter) {
        double bx = 0.0, by = 0.0;
        const double ox = px + gx + dx, oy = py + gy + dy;
        for (int j = -half, k = 0; j <= half; ++j) {
          for (int i = -half; i <= half; ++i, ++k) {
            const double diff = ival[k] - imgproc::sample_bilinear(J, ox + i, oy + j);
            bx += diff * ix[k];
            by += diff * iy[k];
          }
        }
        const double ux = (c * bx - b * by) / det;
        const double uy = (a * by - b * bx) / det;
        dx += ux;
        dy += uy;
        const double nx = px + gx + dx, ny = py + gy + dy;
        if (!(nx >= 0.0 && ny >= 0.0 && nx <= J.width() - 1.0 && ny <= J.height() - 1.0)) {
          ok = level > 0;
          dx -= ux;
          dy -= uy;
          break;
        }
        if (std::hypot(ux, uy) < prm.eps) break;
      }
      if (level > 0) {
        gx = 2.0 * (gx + dx);
        gy = 2.0 * (gy + dy);
      } else {
        gx += dx;
        gy += dy;
      }
    }
    const Point2 moved{p0.x + gx, p0.y + gy};
    const bool inside = moved.x >= 0.0 && moved.y >= 0.0 && moved.x <= base.width() - 1.0 &&
                        moved.y <= base.height() - 1.0;
    out.push_back({ok ? moved : p0, ok && inside});
  }
  return out;
}

struct FeatureTrack {
  int id = 0;
  std::vector<Point2> positions;  // one per frame; frozen after the track is lost
  std::vector<bool> valid;

  std::size_t frames() const { return positions.size(); }
  bool valid_at(std::size_t t) const { return t < valid.size() && valid[t]; }
  bool valid_to_end() const { return !valid.empty() && valid.back(); }

  std::optional<std::size_t> first_valid() const {
    for (std::size_t t = 0; t < valid.size(); ++t) {
      if (valid[t]) return t;
    }
    return std::nullopt;
  }

  // Length of the first contiguous valid run.
  double path_length() const {
    const auto t0 = first_valid();
    if (!t0) return 0.0;
    double len = 0.0;
    for (std::size_t t = *t0 + 1; t < positions.size() && valid[t]; ++t) {
      len += geom::distance(positions[t], positions[t - 1]);
    }
    return len;
  }
};

struct TrackConfig {
  int levels = 3;
  LkParams lk;
  int auto_seed_count = 6;
  double seed_quality = 0.01;
  double seed_min_dist = 5.0;
  // Points tracked back into the previous frame must land within this
  // distance of where they started; 0 disables the check.
  double fb_max = 1.0;
  // Seed each step with the median displacement of the tracks over the
  // previous step.
  bool predict = true;
  // track_region only: a track whose step differs from the median step of
  // all tracks by more than max(group_tol_px, group_tol_frac * |median|) is
  // dropped. 0 disables the check.
  double group_tol_px = 1.0;
  double group_tol_frac = 0.2;
};

namespace detail {

inline double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace detail

namespace detail {

inline bool window_inside(Point2 p, int half, int w, int h) {
  return p.x >= half && p.y >= half && p.x <= w - 1 - half && p.y <= h - 1 - half;
}

inline FeatureTrack start_track(int id, Point2 p, std::size_t t, bool valid) {
  FeatureTrack tr;
  tr.id = id;
  tr.positions.assign(t + 1, p);
  tr.valid.assign(t + 1, false);
  tr.valid.back() = valid;
  return tr;
}

// Median displacement over step t-1 -> t of the tracks valid at both ends.
inline std::optional<Point2> median_step(const std::vector<FeatureTrack>& tracks, std::size_t t) {
  std::vector<double> dx, dy;
  for (const auto& tr : tracks) {
    if (t < 1 || !tr.valid_at(t - 1) || !tr.valid_at(t)) continue;
    const Point2 d = tr.positions[t] - tr.positions[t - 1];
    dx.push_back(d.x);
    dy.push_back(d.y);
  }
  if (dx.empty()) return std::nullopt;
  return Point2{median(dx), median(dy)};
}

// Extends every track to frame t (the index of `next`).
inline void advance(const Pyramid& prev, const Pyramid& next, std::vector<FeatureTrack>& tracks,
                    std::size_t t, const TrackConfig& cfg) {
  std::vector<Point2> live;
  std::vector<std::size_t> live_ids;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (tracks[i].valid.back()) {
      live.push_back(tracks[i].positions.back());
      live_ids.push_back(i);
    }
  }
  Point2 predicted{};
  if (cfg.predict && t >= 2) predicted = median_step(tracks, t - 1).value_or(Point2{});
  // Candidate initial displacements, best forward-backward agreement wins.
  std::vector<Point2> starts{Point2{}};
  if (predicted.x != 0.0 || predicted.y != 0.0) starts.insert(starts.begin(), predicted);
  std::vector<TrackedPoint> moved(live.size(), TrackedPoint{{}, false});
  std::vector<double> err(live.size(), 1e300);
  for (const Point2 start : starts) {
    if (live.empty()) break;
    const std::vector<Point2> guess(live.size(), start);
    auto cand = lk_step(prev, next, live, cfg.lk, guess);
    std::vector<double> e(live.size(), 0.0);
    if (cfg.fb_max > 0.0) {
      std::vector<Point2> fwd(live.size()), back_guess(live.size());
      for (std::size_t k = 0; k < live.size(); ++k) {
        fwd[k] = cand[k].pos;
        back_guess[k] = live[k] - cand[k].pos;
      }
      const auto back = lk_step(next, prev, fwd, cfg.lk, back_guess);
      for (std::size_t k = 0; k < live.size(); ++k) {
        e[k] = back[k].valid ? geom::distance(back[k].pos, live[k]) : 1e300;
        if (e[k] > cfg.fb_max) cand[k].valid = false;
      }
    }
    for (std::size_t k = 0; k < live.size(); ++k) {
      if (cand[k].valid && (!moved[k].valid || e[k] < err[k])) moved[k] = cand[k], err[k] = e[k];
    }
  }
  for (auto& tr : tracks) {
    tr.positions.push_back(tr.positions.back());
    tr.valid.push_back(false);
  }
  for (std::size_t k = 0; k < live_ids.size(); ++k) {
    auto& tr = tracks[live_ids[k]];
    if (moved[k].valid) {
      tr.positions.back() = moved[k].pos;
      tr.valid.back() = true;
    }
  }
}

inline int clamp_levels(const TrackConfig& cfg, int w, int h) {
  return std::clamp(cfg.levels, 1, max_pyramid_levels(w, h));
}

}  // namespace detail

/// Pyramidal LK tracks of `seeds` through `frames`. A lost track keeps its
/// last position and stays invalid.
template <class Frame>
std::vector<FeatureTrack> track_sequence(std::span<const Frame> frames,
                                         std::span<const Point2> seeds,
                                         const TrackConfig& cfg = {}) {
  if (frames.size() < 2 || seeds.empty()) {
    throw Error(ErrorCode::kEmptySequence, "need >= 2 frames and >= 1 seed");
  }
  const int w = frames[0].width(), h = frames[0].height();
  const int levels = detail::clamp_levels(cfg, w, h);
  std::vector<FeatureTrack> tracks;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    tracks.push_back(detail::start_track(static_cast<int>(i), seeds[i], 0,
                                         detail::window_inside(seeds[i], cfg.lk.window / 2, w, h)));
  }
  Pyramid prev = build_pyramid(frames[0], levels);
  for (std::size_t t = 1; t < frames.size(); ++t) {
    Pyramid next = build_pyramid(frames[t], levels);
    detail::advance(prev, next, tracks, t, cfg);
    prev = std::move(next);
  }
  return tracks;
}

template <class Frame>
std::vector<FeatureTrack> track_sequence(const std::vector<Frame>& frames,
                                         std::span<const Point2> seeds,
                                         const TrackConfig& cfg = {}) {
  return track_sequence(std::span<const Frame>(frames), seeds, cfg);
}

/// Shi-Tomasi seeds on the first frame, optionally inside `region`.
template <class Frame>
std::vector<Point2> auto_seeds(const Frame& first, int count, const TrackConfig& cfg = {},
                               std::optional<imgproc::PixelRect> region = std::nullopt) {
  return imgproc::shi_tomasi_features(first, count, cfg.seed_quality, cfg.seed_min_dist, region);
}

/// Tracks `count` features of a moving object that starts inside `region`.
/// The region follows the median track motion, and whenever fewer than
/// `count` tracks are alive, fresh features from inside it are added.
/// Tracks added at frame t are invalid before t.
template <class Frame>
std::vector<FeatureTrack> track_region(std::span<const Frame> frames, imgproc::PixelRect region,
                                       int count, const TrackConfig& cfg = {}) {
  if (frames.size() < 2) throw Error(ErrorCode::kEmptySequence, "need >= 2 frames");
  if (count < 1 || region.area() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need count >= 1 and a non-empty region");
  }
  const int w = frames[0].width(), h = frames[0].height();
  const int levels = detail::clamp_levels(cfg, w, h);
  const int half = cfg.lk.window / 2;
  std::vector<FeatureTrack> tracks;
  Point2 shift{};
  auto top_up = [&](std::size_t t) {
    std::size_t alive = 0;
    for (const auto& tr : tracks) alive += tr.valid_at(t);
    if (alive >= static_cast<std::size_t>(count)) return;
    const imgproc::PixelRect r{region.x + static_cast<int>(std::lround(shift.x)),
                               region.y + static_cast<int>(std::lround(shift.y)), region.w,
                               region.h};
    const auto found = auto_seeds(frames[t], count + static_cast<int>(alive), cfg, r);
    for (const Point2 p : found) {
      if (alive >= static_cast<std::size_t>(count)) break;
      if (!detail::window_inside(p, half, w, h)) continue;
      const bool fresh = std::none_of(tracks.begin(), tracks.end(), [&](const FeatureTrack& tr) {
        return tr.valid_at(t) && geom::distance(tr.positions[t], p) < cfg.seed_min_dist;
      });
      if (!fresh) continue;
      tracks.push_back(detail::start_track(static_cast<int>(tracks.size()), p, t, true));
      ++alive;
    }
  };
  top_up(0);
  if (tracks.empty()) throw Error(ErrorCode::kNoValidTracks, "no trackable features in region");
  Pyramid prev = build_pyramid(frames[0], levels);
  for (std::size_t t = 1; t < frames.size(); ++t) {
    Pyramid next = build_pyramid(frames[t], levels);
    detail::advance(prev, next, tracks, t, cfg);
    if (const auto d = detail::median_step(tracks, t)) {
      shift = shift + *d;
      if (cfg.group_tol_px > 0.0) {
        const double tol = std::max(cfg.group_tol_px, cfg.group_tol_frac * geom::norm(*d));
        for (auto& tr : tracks) {
          if (!tr.valid_at(t) || !tr.valid_at(t - 1)) continue;
          if (geom::distance(tr.positions[t] - tr.positions[t - 1], *d) > tol) {
            tr.valid[t] = false;
            tr.positions[t] = tr.positions[t - 1];
          }
        }
      }
    }
    top_up(t);
    prev = std::move(next);
  }
  return tracks;
}

template <class Frame>
std::vector<FeatureTrack> track_region(const std::vector<Frame>& frames,
                                       imgproc::PixelRect region, int count,
                                       const TrackConfig& cfg = {}) {
  return track_region(std::span<const Frame>(frames), region, count, cfg);
}

}  // namespace shoulderscope::flow
