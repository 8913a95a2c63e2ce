#pragma once

// Touched-key recognition: k-means on fingertip intensities, the upper half of
// the darkest cluster as touched points, homography mapping and key voting,
// plus the full recognition workflow over a frame sequence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "shoulderscope/error.hpp"
#include "shoulderscope/flow.hpp"
#include "shoulderscope/geom.hpp"
#include "shoulderscope/imgproc.hpp"
#include "shoulderscope/layout.hpp"
#include "shoulderscope/rng.hpp"
#include "shoulderscope/screenfind.hpp"
#include "shoulderscope/tapdetect.hpp"

namespace shoulderscope::keyrec {

using geom::Point2;
using imgproc::GrayImage;
using imgproc::PixelRect;

/// Bilinear upscaling with aligned corner samples: output pixel i samples the
/// input at i * (w - 1) / (W - 1).
template <class T>
imgproc::Raster<T> upscale(const imgproc::Raster<T>& img, int factor) {
  if (factor < 1) throw Error(ErrorCode::kBadFactor, "factor must be >= 1");
  if (factor == 1) return img;
  const int w = img.width(), h = img.height();
  const int W = w * factor, H = h * factor;
  const double sx = w > 1 ? static_cast<double>(w - 1) / (W - 1) : 0.0;
  const double sy = h > 1 ? static_cast<double>(h - 1) / (H - 1) : 0.0;
  imgproc::Raster<T> out(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double v = imgproc::sample_bilinear(img, x * sx, y * sy);
      if constexpr (std::is_same_v<T, std::uint8_t>) {
        out(x, y) = imgproc::saturate_u8(v);
      } else {
        out(x, y) = static_cast<T>(v);
      }
    }
  }
  return out;
}

/// Input-image coordinate of upscaled coordinate `u` along an axis of `n` input px.
inline double upscaled_to_source(double u, int n, int factor) {
  if (n <= 1 || factor == 1) return n <= 1 ? 0.0 : u;
  return u * (n - 1) / (static_cast<double>(n) * factor - 1);
}

inline double source_to_upscaled(double s, int n, int factor) {
  if (n <= 1 || factor == 1) return n <= 1 ? 0.0 : s;
  return s * (static_cast<double>(n) * factor - 1) / (n - 1);
}

// ---------------------------------------------------------------------------
// Fingertip ROI

struct FingerRoi {
  PixelRect rect;
};

struct RoiConfig {
  int above = 20;
  int below = 20;
  int half_width = 20;
};

template <class T>
FingerRoi locate_finger_roi(const imgproc::Raster<T>& frame, Point2 tip,
                            const RoiConfig& cfg = {}) {
  if (!(tip.x >= 0.0 && tip.y >= 0.0 && tip.x <= frame.width() - 1.0 &&
        tip.y <= frame.height() - 1.0)) {
    throw Error(ErrorCode::kOutOfBounds, "tip estimate outside the frame");
  }
  const int cx = static_cast<int>(std::lround(tip.x));
  const int cy = static_cast<int>(std::lround(tip.y));
  const int x0 = std::max(0, cx - cfg.half_width);
  const int x1 = std::min(frame.width() - 1, cx + cfg.half_width);
  const int y0 = std::max(0, cy - cfg.above);
  const int y1 = std::min(frame.height() - 1, cy + cfg.below);
  const PixelRect r{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  if (r.area() < 25) throw Error(ErrorCode::kOutOfBounds, "finger ROI smaller than 25 px");
  return {r};
}

// ---------------------------------------------------------------------------
// Intensity clustering

struct Pixel {
  int x = 0;
  int y = 0;
  double value = 0.0;
};

template <class T>
std::vector<Pixel> roi_pixels(const imgproc::Raster<T>& img, const FingerRoi& roi) {
  std::vector<Pixel> px;
  px.reserve(static_cast<std::size_t>(roi.rect.area()));
  for (int y = roi.rect.y; y < roi.rect.y + roi.rect.h; ++y) {
    for (int x = roi.rect.x; x < roi.rect.x + roi.rect.w; ++x) {
      px.push_back({x, y, static_cast<double>(img(x, y))});
    }
  }
  return px;
}

struct ClusterResult {
  int k = 0;
  std::vector<double> centers;  // ascending
  std::vector<int> assignment;  // per pixel
  int darkest = 0;
  std::vector<Pixel> pixels;
  std::vector<double> objective;  // within-cluster sum of squares after each iteration
  int iterations = 0;
  bool converged = false;

  std::size_t cluster_size(int c) const {
    return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), c));
  }
};

/// 1D Lloyd's algorithm on intensities. Seeds sit at intensity quantiles and
/// are jittered by at most +-0.25 from the seeded generator; clusters that
/// lose all pixels are dropped.
inline ClusterResult kmeans_intensity(std::span<const Pixel> pixels, int k, int max_iter = 100,
                                      std::uint64_t seed = 0) {
  if (pixels.empty()) throw Error(ErrorCode::kEmptyInput, "no pixels to cluster");
  if (k < 1 || max_iter < 1) throw Error(ErrorCode::kInvalidArgument, "need k, max_iter >= 1");
  const std::size_t n = pixels.size();
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = pixels[i].value;
  std::sort(sorted.begin(), sorted.end());

  Rng rng(derive_seed({seed, 0x6b6d65616e73ULL}));
  std::vector<double> centers;
  for (int j = 0; j < k; ++j) {
    const auto idx = std::min(n - 1, static_cast<std::size_t>((j + 0.5) / k * n));
    centers.push_back(sorted[idx] + rng.uniform(-0.25, 0.25));
  }
  std::sort(centers.begin(), centers.end());

  ClusterResult res;
  res.pixels.assign(pixels.begin(), pixels.end());
  res.assignment.assign(n, -1);
  auto nearest = [&](double v) {
    int best = 0;
    double bd = std::abs(v - centers[0]);
    for (int c = 1; c < static_cast<int>(centers.size()); ++c) {
      const double d = std::abs(v - centers[c]);
      if (d < bd) bd = d, best = c;
    }
    return best;
  };
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = nearest(pixels[i].value);
      if (c != res.assignment[i]) changed = true, res.assignment[i] = c;
    }
    if (!changed) {
      res.converged = true;
      break;
    }
    const std::size_t kc = centers.size();
    std::vector<double> sum(kc, 0.0);
    std::vector<std::size_t> count(kc, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[res.assignment[i]] += pixels[i].value;
      ++count[res.assignment[i]];
    }
    std::vector<int> remap(kc, -1);
    std::vector<double> next;
    for (std::size_t c = 0; c < kc; ++c) {
      if (count[c] == 0) continue;
      remap[c] = static_cast<int>(next.size());
      next.push_back(sum[c] / count[c]);
    }
    for (auto& a : res.assignment) a = remap[a];
    centers = std::move(next);
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = pixels[i].value - centers[res.assignment[i]];
      wcss += d * d;
    }
    res.objective.push_back(wcss);
    res.iterations = iter + 1;
  }
  res.k = static_cast<int>(centers.size());
  res.centers = std::move(centers);
  res.darkest = 0;
  return res;
}

/// Upper half (smaller y) of the darkest cluster's vertical span; the lower
/// half is taken to be the fingertip's reflection on the screen.
inline std::vector<Point2> select_touch_pixels(const ClusterResult& c, const FingerRoi& roi) {
  if (c.k < 1) throw Error(ErrorCode::kEmptyCluster, "no clusters");
  int ymin = INT32_MAX, ymax = INT32_MIN;
  for (std::size_t i = 0; i < c.pixels.size(); ++i) {
    if (c.assignment[i] != c.darkest || !roi.rect.contains(c.pixels[i].x, c.pixels[i].y)) {
      continue;
    }
    ymin = std::min(ymin, c.pixels[i].y);
    ymax = std::max(ymax, c.pixels[i].y);
  }
  if (ymin > ymax) throw Error(ErrorCode::kEmptyCluster, "darkest cluster has no ROI pixels");
  const double mid = 0.5 * (ymin + ymax);
  std::vector<Point2> out;
  for (std::size_t i = 0; i < c.pixels.size(); ++i) {
    const Pixel& p = c.pixels[i];
    if (c.assignment[i] != c.darkest || !roi.rect.contains(p.x, p.y)) continue;
    if (ymin == ymax || p.y < mid) out.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Key voting

struct KeyGuess {
  std::string primary;
  std::optional<std::string> secondary;
  std::vector<Point2> mapped_points;
  double confidence = 0.0;
};

inline KeyGuess vote_key(std::span<const Point2> points, const layout::KeyboardLayout& l) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "no points to vote");
  const auto& keys = l.keys();
  std::vector<int> count(keys.size(), 0);
  for (const Point2 p : points) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (keys[i].rect.contains(p)) {
        ++count[i];
        break;
      }
    }
  }
  const double bs = l.behind_sign();
  // more votes first; then nearer the camera side; then label
  auto better = [&](std::size_t a, std::size_t b) {
    if (count[a] != count[b]) return count[a] > count[b];
    const double ya = bs * keys[a].rect.center().y, yb = bs * keys[b].rect.center().y;
    if (ya != yb) return ya < yb;
    return keys[a].label < keys[b].label;
  };
  std::vector<std::size_t> order(keys.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), better);
  const std::size_t best = order[0];
  if (count[best] == 0) throw Error(ErrorCode::kNoKeyHit, "no mapped point lies in a key");

  KeyGuess g;
  g.primary = keys[best].label;
  g.mapped_points.assign(points.begin(), points.end());
  g.confidence = static_cast<double>(count[best]) / points.size();
  const layout::Rect& pr = keys[best].rect;
  std::optional<std::size_t> behind;
  double gap = 0.0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i == best) continue;
    const layout::Rect& r = keys[i].rect;
    const bool column = r.x < pr.right() && pr.x < r.right();
    const double dy = bs * (r.center().y - pr.center().y);
    if (!column || !(dy > 0.0)) continue;
    if (!behind || dy < gap) behind = i, gap = dy;
  }
  if (behind) {
    g.secondary = keys[*behind].label;
  } else if (order.size() > 1 && count[order[1]] > 0) {
    g.secondary = keys[order[1]].label;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Full workflow

struct RecognizeConfig {
  screenfind::ScreenFindConfig screen;
  flow::TrackConfig track;
  tapdetect::TapConfig tap;
  RoiConfig roi;
  int upscale_factor = 4;
  int clusters = 5;
  int kmeans_max_iter = 100;
  std::uint64_t seed = 0;
  std::size_t screen_frame = 0;
  // Seeds come from this box when set; otherwise the strongest corners of the
  // whole first frame are tracked and the ones that moved most are kept.
  std::optional<PixelRect> hand_box;
  int candidate_seeds = 40;
  double min_path_length = 3.0;
  // The first tip estimate is moved to the darkest point of the intensity
  // profile up to tip_search_mm ahead (tip_search_back_mm behind) along the
  // toward direction; at touching frames the tracked tip is re-centred the
  // same way within +-tip_refine_mm. 0 disables either step.
  double tip_search_mm = 6.0;
  double tip_search_back_mm = 1.0;
  double tip_refine_mm = 1.5;
};

struct TapResult {
  std::size_t frame = 0;
  Point2 tip;              // frame px
  FingerRoi roi;           // upscaled-crop px
  std::vector<Point2> touch_points;  // frame px
  KeyGuess guess;
};

struct Recognition {
  std::vector<std::string> code;
  std::vector<std::optional<std::string>> alternates;
  std::vector<double> confidence;
  std::vector<std::size_t> touching_frames;
  screenfind::ScreenQuad quad;
  geom::Homography frame_to_reference;
  Point2 toward;
  std::vector<flow::FeatureTrack> tracks;
  tapdetect::TouchReport report;
  std::vector<TapResult> taps;

  Recognition(screenfind::ScreenQuad q, geom::Homography f2r, Point2 t)
      : quad(std::move(q)), frame_to_reference(f2r), toward(t) {}

  /// Code with the least confident position replaced by its alternate, or
  /// nothing when no alternate exists.
  std::optional<std::vector<std::string>> second_guess() const {
    std::optional<std::size_t> pos;
    for (std::size_t i = 0; i < code.size(); ++i) {
      if (!alternates[i]) continue;
      if (!pos || confidence[i] < confidence[*pos]) pos = i;
    }
    if (!pos) return std::nullopt;
    auto c = code;
    c[*pos] = *alternates[*pos];
    return c;
  }
};

namespace detail {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineAbort&) {
    throw;
  } catch (const Error& e) {
    throw PipelineAbort(name, e.code(), e.what());
  }
}

// Tip estimate: the furthest point along `toward` among tracks valid at `f`,
// centered across the finger at the mean cross coordinate.
inline std::optional<Point2> tip_estimate(const std::vector<flow::FeatureTrack>& tracks,
                                          std::size_t f, Point2 toward) {
  const Point2 across{-toward.y, toward.x};
  double best = -1e300, cross_sum = 0.0;
  int n = 0;
  for (const auto& tr : tracks) {
    if (!tr.valid_at(f)) continue;
    const Point2 p = tr.positions[f];
    best = std::max(best, geom::dot(p, toward));
    cross_sum += geom::dot(p, across);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return best * toward + (cross_sum / n) * across;
}

// Frame px per mm of the keyboard plane at frame point `p`.
inline double px_per_mm(const geom::Homography& f2r, const layout::KeyboardLayout& l, Point2 p) {
  const geom::Homography r2f = f2r.inverse();
  const Point2 q = f2r.apply(p);
  return geom::distance(r2f.apply(q), r2f.apply(q + Point2{1.0 / l.mm_per_px(), 0.0}));
}

template <class T>
Point2 refine_tip(const imgproc::Raster<T>& frame, Point2 tip, Point2 toward, double back,
                  double forward) {
  const Point2 across{-toward.y, toward.x};
  double best_s = 0.0, best_v = 1e300;
  for (double s = -back; s <= forward; s += 0.5) {
    double v = 0.0;
    for (int c = -2; c <= 2; ++c) {
      const Point2 p = tip + s * toward + static_cast<double>(c) * across;
      v += imgproc::sample_bilinear(frame, p.x, p.y);
    }
    if (v < best_v) best_v = v, best_s = s;
  }
  const Point2 r = tip + best_s * toward;
  return {std::clamp(r.x, 0.0, frame.width() - 1.0), std::clamp(r.y, 0.0, frame.height() - 1.0)};
}

// Fingertip per frame. Each track gets a fixed offset to the tip when it
// first appears alongside a known tip; the tip is then the median of
// position + offset over the valid tracks. The first tip search starts no
// further back than the front edge of `region`, the box the tracks started in.
template <class T>
std::vector<std::optional<Point2>> fingertip_path(std::span<const imgproc::Raster<T>> frames,
                                                  const std::vector<flow::FeatureTrack>& tracks,
                                                  Point2 toward, const geom::Homography& f2r,
                                                  const layout::KeyboardLayout& l,
                                                  const RecognizeConfig& cfg,
                                                  std::optional<PixelRect> region = {}) {
  double front = -1e300;
  if (region) {
    for (const int dx : {0, region->w - 1}) {
      for (const int dy : {0, region->h - 1}) {
        front = std::max(front, geom::dot(Point2{region->x + dx + 0.0, region->y + dy + 0.0}, toward));
      }
    }
  }
  const Point2 across{-toward.y, toward.x};
  std::vector<std::optional<Point2>> path(frames.size());
  std::vector<std::optional<Point2>> offset(tracks.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (!offset[i] || !tracks[i].valid_at(t)) continue;
      xs.push_back(tracks[i].positions[t].x + offset[i]->x);
      ys.push_back(tracks[i].positions[t].y + offset[i]->y);
    }
    if (!xs.empty()) {
      path[t] = Point2{flow::detail::median(xs), flow::detail::median(ys)};
    } else if (auto tip = tip_estimate(tracks, t, toward)) {
      if (t == 0 && geom::dot(*tip, toward) < front) {
        tip = front * toward + geom::dot(*tip, across) * across;
      }
      if (cfg.tip_search_mm > 0.0) {
        const double s = px_per_mm(f2r, l, *tip);
        tip = refine_tip(frames[t], *tip, toward, cfg.tip_search_back_mm * s,
                         cfg.tip_search_mm * s);
      }
      path[t] = tip;
    }
    if (!path[t]) continue;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (!offset[i] && tracks[i].valid_at(t)) offset[i] = *path[t] - tracks[i].positions[t];
    }
  }
  return path;
}

// Box around the first-frame corners that start moving first. A corner
// counts as moving once it is min_path_length px from where it began;
// background corners dragged along later by the passing finger start late.
template <class T>
std::optional<PixelRect> moving_region(std::span<const imgproc::Raster<T>> frames,
                                       const RecognizeConfig& cfg) {
  const auto cand = flow::auto_seeds(frames[0], cfg.candidate_seeds, cfg.track);
  if (cand.empty()) return std::nullopt;
  const auto all = flow::track_sequence(frames, std::span<const Point2>(cand), cfg.track);
  std::vector<std::optional<std::size_t>> onset(all.size());
  std::size_t first = SIZE_MAX;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& tr = all[i];
    for (std::size_t t = 0; t < tr.frames() && tr.valid[t]; ++t) {
      if (geom::distance(tr.positions[t], tr.positions[0]) >= cfg.min_path_length) {
        onset[i] = t;
        first = std::min(first, t);
        break;
      }
    }
  }
  int x0 = INT32_MAX, y0 = INT32_MAX, x1 = INT32_MIN, y1 = INT32_MIN;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!onset[i] || *onset[i] > first + 2) continue;
    const Point2 p = all[i].positions[0];
    x0 = std::min(x0, static_cast<int>(std::floor(p.x)));
    y0 = std::min(y0, static_cast<int>(std::floor(p.y)));
    x1 = std::max(x1, static_cast<int>(std::ceil(p.x)));
    y1 = std::max(y1, static_cast<int>(std::ceil(p.y)));
  }
  if (x0 > x1) return std::nullopt;
  return PixelRect{x0 - 1, y0 - 1, x1 - x0 + 3, y1 - y0 + 3};
}

}  // namespace detail

/// Recognizes the touched keys of one tap on frame `f` at the tip estimate.
template <class T>
TapResult recognize_tap(const imgproc::Raster<T>& frame, Point2 tip,
                        const geom::Homography& f2r, const layout::KeyboardLayout& l,
                        const RecognizeConfig& cfg, std::size_t f) {
  const int k = cfg.upscale_factor;
  const int margin = (std::max({cfg.roi.above, cfg.roi.below, cfg.roi.half_width}) + k - 1) / k + 2;
  const int cx = static_cast<int>(std::lround(tip.x));
  const int cy = static_cast<int>(std::lround(tip.y));
  const int x0 = std::clamp(cx - margin, 0, frame.width() - 1);
  const int y0 = std::clamp(cy - margin, 0, frame.height() - 1);
  const int x1 = std::clamp(cx + margin, 0, frame.width() - 1);
  const int y1 = std::clamp(cy + margin, 0, frame.height() - 1);
  const int cw = x1 - x0 + 1, ch = y1 - y0 + 1;
  const auto crop = imgproc::crop(frame, x0, y0, cw, ch);
  const auto up = upscale(crop, k);
  const Point2 tip_up{source_to_upscaled(tip.x - x0, cw, k), source_to_upscaled(tip.y - y0, ch, k)};
  TapResult res;
  res.frame = f;
  res.tip = tip;
  res.roi = locate_finger_roi(up, tip_up, cfg.roi);
  const auto pixels = roi_pixels(up, res.roi);
  const auto clusters = kmeans_intensity(pixels, cfg.clusters, cfg.kmeans_max_iter,
                                         derive_seed({cfg.seed, f}));
  const auto touch = select_touch_pixels(clusters, res.roi);
  std::vector<Point2> mapped;
  mapped.reserve(touch.size());
  for (const Point2 p : touch) {
    const Point2 src{x0 + upscaled_to_source(p.x, cw, k), y0 + upscaled_to_source(p.y, ch, k)};
    res.touch_points.push_back(src);
    mapped.push_back(f2r.apply(src));
  }
  res.guess = vote_key(mapped, l);
  return res;
}

template <class T>
Recognition recognize_sequence(std::span<const imgproc::Raster<T>> frames,
                               const layout::KeyboardLayout& l, const RecognizeConfig& cfg = {}) {
  if (frames.size() < 2) {
    throw PipelineAbort("load", ErrorCode::kEmptySequence, "need at least 2 frames");
  }
  if (cfg.screen_frame >= frames.size()) {
    throw PipelineAbort("load", ErrorCode::kInvalidArgument, "screen frame out of range");
  }
  const auto& first = frames[cfg.screen_frame];
  const auto quad = detail::stage("screenfind", [&] {
    return screenfind::detect_screen_quad(first, cfg.screen);
  });
  const auto h = detail::stage("homography", [&] {
    return screenfind::frame_to_reference(
        quad, screenfind::reference_corners(l.ref_width(), l.ref_height()));
  });
  const Point2 toward = detail::stage("homography", [&] {
    return tapdetect::auto_toward_direction(h, {0.5 * l.ref_width(), 0.5 * l.ref_height()});
  });

  std::optional<PixelRect> region = cfg.hand_box;
  if (!region) {
    region = detail::stage("track", [&] { return detail::moving_region(frames, cfg); });
    // nothing moves, so nothing was typed
    if (!region) return Recognition(quad, h, toward);
  }
  auto tracks = detail::stage("track", [&] {
    return flow::track_region(frames, *region, cfg.track.auto_seed_count, cfg.track);
  });

  auto report = detail::stage("tapdetect", [&] {
    const auto v = tapdetect::signed_velocities(tracks, toward);
    return tapdetect::detect_touching_frames(v, cfg.tap);
  });

  std::vector<TapResult> taps;
  const auto tips = detail::fingertip_path(frames, tracks, toward, h, l, cfg, region);
  for (const std::size_t f : report.touching_frames) {
    taps.push_back(detail::stage("keyrec", [&] {
      auto tip = tips[f];
      if (!tip) throw Error(ErrorCode::kNoValidTracks, "no valid track at a touching frame");
      if (cfg.tip_refine_mm > 0.0) {
        const double s = detail::px_per_mm(h, l, *tip);
        tip = detail::refine_tip(frames[f], *tip, toward, cfg.tip_refine_mm * s,
                                 cfg.tip_refine_mm * s);
      }
      return recognize_tap(frames[f], *tip, h, l, cfg, f);
    }));
  }
  Recognition r(quad, h, toward);
  for (const auto& t : taps) {
    r.code.push_back(t.guess.primary);
    r.alternates.push_back(t.guess.secondary);
    r.confidence.push_back(t.guess.confidence);
  }
  r.touching_frames = report.touching_frames;
  r.tracks = std::move(tracks);
  r.report = std::move(report);
  r.taps = std::move(taps);
  return r;
}

template <class T>
Recognition recognize_sequence(const std::vector<imgproc::Raster<T>>& frames,
                               const layout::KeyboardLayout& l, const RecognizeConfig& cfg = {}) {
  return recognize_sequence(std::span<const imgproc::Raster<T>>(frames), l, cfg);
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::json to_json(const Recognition& r) {
  nlohmann::json alts = nlohmann::json::array();
  for (const auto& a : r.alternates) alts.push_back(a ? nlohmann::json(*a) : nlohmann::json());
  return {{"code", r.code},
          {"alternates", alts},
          {"confidence", r.confidence},
          {"touching_frames", r.touching_frames}};
}

/// Reference raster with key outlines and the mapped touch points burned in.
inline GrayImage annotate_reference(const layout::KeyboardLayout& l, const Recognition& r) {
  GrayImage img = layout::render_reference(l);
  for (const auto& k : l.keys()) {
    const int x0 = static_cast<int>(std::ceil(k.rect.x));
    const int y0 = static_cast<int>(std::ceil(k.rect.y));
    const int x1 = static_cast<int>(std::ceil(k.rect.right())) - 1;
    const int y1 = static_cast<int>(std::ceil(k.rect.bottom())) - 1;
    for (int x = x0; x <= x1; ++x) {
      if (img.contains(x, y0)) img(x, y0) = 0;
      if (img.contains(x, y1)) img(x, y1) = 0;
    }
    for (int y = y0; y <= y1; ++y) {
      if (img.contains(x0, y)) img(x0, y) = 0;
      if (img.contains(x1, y)) img(x1, y) = 0;
    }
  }
  for (const auto& t : r.taps) {
    for (const Point2 p : t.guess.mapped_points) {
      const int x = static_cast<int>(std::lround(p.x)), y = static_cast<int>(std::lround(p.y));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (img.contains(x + dx, y + dy)) img(x + dx, y + dy) = 255;
        }
      }
    }
  }
  return img;
}

}  // namespace shoulderscope::keyrec
