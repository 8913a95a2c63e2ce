#pragma once

// Touching-frame detection from tracked-point velocities: a frame is a
// touching frame when most tracks switch from moving toward the screen to
// moving away from it there.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "shoulderscope/error.hpp"
#include "shoulderscope/flow.hpp"
#include "shoulderscope/geom.hpp"

namespace shoulderscope::tapdetect {

using geom::Point2;

/// velocity[t][i]: speed of track i over transition t -> t+1, positive toward
/// the screen. Entries of invalid tracks are absent.
struct VelocityField {
  std::size_t frames = 0;
  std::size_t tracks = 0;
  std::vector<std::vector<std::optional<double>>> velocity;

  std::size_t transitions() const { return velocity.size(); }
};

struct TouchReport {
  std::vector<std::size_t> touching_frames;
  std::map<std::size_t, int> votes;  // frames with at least one vote
};

struct TapConfig {
  double majority = 2.0 / 3.0;
  double zero_eps = 0.15;
  std::optional<std::size_t> expected_taps;
};

inline VelocityField signed_velocities(std::span<const flow::FeatureTrack> tracks,
                                       Point2 toward) {
  if (std::abs(geom::norm(toward) - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "toward must be a unit vector");
  }
  VelocityField v;
  v.tracks = tracks.size();
  bool any = false;
  for (const auto& tr : tracks) {
    v.frames = std::max(v.frames, tr.frames());
    if (tr.frames() >= 2 && tr.valid_at(0) && tr.valid_at(1)) any = true;
  }
  if (!any) throw Error(ErrorCode::kNoValidTracks, "no track is valid over a transition");
  v.velocity.assign(v.frames - 1, std::vector<std::optional<double>>(tracks.size()));
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& tr = tracks[i];
    for (std::size_t t = 0; t + 1 < tr.frames(); ++t) {
      if (tr.valid_at(t) && tr.valid_at(t + 1)) {
        v.velocity[t][i] = geom::dot(tr.positions[t + 1] - tr.positions[t], toward);
      }
    }
  }
  return v;
}

inline VelocityField signed_velocities(const std::vector<flow::FeatureTrack>& tracks,
                                       Point2 toward) {
  return signed_velocities(std::span<const flow::FeatureTrack>(tracks), toward);
}

/// Touching frames of one velocity series: for each run + ... (0 ...) -, the
/// frame reached by the last non-negative transition, i.e. the index of the
/// first negative transition. A missing entry breaks a run.
inline std::vector<std::size_t> track_touch_frames(std::span<const std::optional<double>> v,
                                                   double zero_eps) {
  std::vector<std::size_t> out;
  enum class State { kIdle, kApproach } state = State::kIdle;
  for (std::size_t t = 0; t < v.size(); ++t) {
    if (!v[t]) {
      state = State::kIdle;
      continue;
    }
    const double s = *v[t];
    const int q = s > zero_eps ? 1 : (s < -zero_eps ? -1 : 0);
    if (q > 0) {
      state = State::kApproach;
    } else if (q < 0) {
      if (state == State::kApproach) out.push_back(t);
      state = State::kIdle;
    }
  }
  return out;
}

inline TouchReport detect_touching_frames(const VelocityField& v, double majority = 2.0 / 3.0,
                                          double zero_eps = 0.15,
                                          std::optional<std::size_t> expected_taps = {}) {
  if (!(majority >= 0.5 && majority <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "majority must be in [0.5, 1]");
  }
  if (!(zero_eps >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "zero_eps must be >= 0");
  TouchReport rep;
  std::vector<std::optional<double>> series(v.transitions());
  for (std::size_t i = 0; i < v.tracks; ++i) {
    for (std::size_t t = 0; t < v.transitions(); ++t) series[t] = v.velocity[t][i];
    for (const std::size_t f : track_touch_frames(series, zero_eps)) ++rep.votes[f];
  }
  std::vector<std::size_t> hits;
  for (const auto& [f, count] : rep.votes) {
    // tracks valid over the transition into the touching frame and out of it
    int valid = 0;
    for (std::size_t i = 0; i < v.tracks; ++i) {
      if (f >= 1 && v.velocity[f - 1][i] && v.velocity[f][i]) ++valid;
    }
    if (valid > 0 && count >= majority * valid) hits.push_back(f);
  }
  // adjacent hits belong to one episode; keep the last
  for (std::size_t k = 0; k < hits.size(); ++k) {
    if (k + 1 < hits.size() && hits[k + 1] == hits[k] + 1) continue;
    rep.touching_frames.push_back(hits[k]);
  }
  if (expected_taps && rep.touching_frames.size() > *expected_taps) {
    std::vector<std::size_t> keep = rep.touching_frames;
    std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
      return rep.votes.at(a) > rep.votes.at(b);
    });
    keep.resize(*expected_taps);
    std::sort(keep.begin(), keep.end());
    rep.touching_frames = std::move(keep);
  }
  return rep;
}

inline TouchReport detect_touching_frames(const VelocityField& v, const TapConfig& cfg) {
  return detect_touching_frames(v, cfg.majority, cfg.zero_eps, cfg.expected_taps);
}

/// Image direction of increasing reference y at `ref_point`, where `h` maps
/// frame px to reference px.
inline Point2 auto_toward_direction(const geom::Homography& h, Point2 ref_point) {
  const geom::Homography inv = h.inverse();
  const Point2 a = inv.apply(ref_point);
  const Point2 b = inv.apply(ref_point + Point2{0.0, 1.0});
  const Point2 d = b - a;
  const double n = geom::norm(d);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kSingularMatrix, "direction collapses under the homography");
  }
  return (1.0 / n) * d;
}

/// Same as above at the reference origin; for affine maps the result does not
/// depend on the point.
inline Point2 auto_toward_direction(const geom::Homography& h) {
  return auto_toward_direction(h, Point2{0.0, 0.0});
}

inline Point2 auto_toward_direction(const geom::Mat3& m) {
  return auto_toward_direction(geom::Homography(m));
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const TouchReport& r) {
  nlohmann::json votes = nlohmann::json::object();
  for (const auto& [f, c] : r.votes) votes[std::to_string(f)] = c;
  return {{"touching_frames", r.touching_frames}, {"votes", votes}};
}

}  // namespace shoulderscope::tapdetect
