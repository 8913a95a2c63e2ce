#pragma once

// Synthetic tapping videos with exact ground truth: a keyboard plane seen by a
// known camera and a banded 2D fingertip with its screen reflection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "shoulderscope/error.hpp"
#include "shoulderscope/geom.hpp"
#include "shoulderscope/imgproc.hpp"
#include "shoulderscope/layout.hpp"
#include "shoulderscope/rng.hpp"
#include "shoulderscope/screenfind.hpp"
#include "shoulderscope/tapdetect.hpp"

namespace shoulderscope::synthcam {

using geom::Point2;
using imgproc::GrayImage;
using imgproc::PixelRect;

// ---------------------------------------------------------------------------
// Cameras

struct CameraPreset {
  std::string name;
  double distance_mm;   // horizontal distance to the device
  double height_mm;     // camera height above the device
  double azimuth_deg;   // 0: straight in front
  double view_angle_deg = 40.0;  // angle between line of sight and screen plane
  double focal_mm = 27.86;
  double pixel_pitch_mm = 0.00398;
  int width = 320;
  int height = 240;
};

inline const std::vector<CameraPreset>& camera_presets() {
  static const std::vector<CameraPreset> presets = {
      {"front", 2100.0, 500.0, 0.0},
      {"left-front", 2250.0, 500.0, -35.0},
      {"right-front", 2400.0, 500.0, 35.0},
      {"front-2m", 2000.0, 500.0, 0.0},
      {"front-3m", 3000.0, 500.0, 0.0},
      {"front-4m", 4000.0, 500.0, 0.0},
      {"front-5m", 5000.0, 500.0, 0.0},
  };
  return presets;
}

inline const CameraPreset& camera_preset(std::string_view name) {
  for (const auto& p : camera_presets()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::kUnknownPreset, "unknown camera preset '" + std::string(name) + "'");
}

struct Camera {
  geom::CameraIntrinsics intrinsics;
  geom::CameraExtrinsics extrinsics;
  geom::PlaneFrame plane;
};

/// Device centered at the world origin, z up. The screen is tilted so the
/// line of sight meets it at `view_angle_deg`; reference x runs to the image
/// right and reference y down the tilted screen.
inline Camera make_camera(const CameraPreset& p, const layout::KeyboardLayout& l) {
  using geom::Vec3;
  const double az = p.azimuth_deg * std::numbers::pi / 180.0;
  const Vec3 eye(p.distance_mm * std::sin(az), -p.distance_mm * std::cos(az), p.height_mm);
  const Vec3 v = eye.normalized();
  const Vec3 a = Vec3::UnitZ().cross(v).normalized();
  Vec3 w = v.cross(a).normalized();
  if (w.z() < 0.0) w = -w;
  const double tilt = (90.0 - p.view_angle_deg) * std::numbers::pi / 180.0;
  const Vec3 n = std::cos(tilt) * v + std::sin(tilt) * w;
  Vec3 b = n.cross(a).normalized();
  if (b.z() > 0.0) b = -b;
  const double s = l.mm_per_px();
  const Vec3 origin = -(0.5 * l.ref_width() * s) * a - (0.5 * l.ref_height() * s) * b;
  return {geom::CameraIntrinsics(p.focal_mm, p.pixel_pitch_mm, p.pixel_pitch_mm,
                                 0.5 * (p.width - 1), 0.5 * (p.height - 1)),
          geom::look_at(eye, Vec3::Zero()), geom::PlaneFrame(origin, s * a, s * b)};
}

// ---------------------------------------------------------------------------
// Scene

struct SceneConfig {
  layout::KeyboardLayout layout;
  geom::Homography reference_to_frame;
  int width = 320;
  int height = 240;
  std::optional<CameraPreset> camera;  // informational when set

  SceneConfig(layout::KeyboardLayout l, geom::Homography r2f)
      : layout(std::move(l)), reference_to_frame(r2f) {}

  double finger_width_mm = layout::kDefaultFingerWidthMm;
  double finger_length_mm = 16.0;
  double dark_band_mm = 0.8;
  double gray_band_mm = 0.8;
  double mirror_band_mm = 0.8;
  double approach_amplitude_mm = 4.0;
  // bright top, gray middle, dark bottom, mirrored dark, mirrored bright
  std::array<std::uint8_t, 5> band_levels{230, 180, 60, 70, 200};
  // square skin marks on the finger body, centers in finger-local mm
  // (across, along toward; the contact row is 0)
  std::uint8_t mark_level = 150;
  double mark_size_mm = 1.2;
  std::vector<Point2> marks_mm{{-3.8, -3.0}, {0.6, -3.6},  {4.1, -2.8},   {-1.9, -6.1},
                               {2.7, -7.0},  {-4.4, -8.3}, {0.2, -9.4},   {4.0, -10.6},
                               {-2.6, -11.7}, {1.8, -13.0}, {-4.6, -14.0}, {4.5, -14.3}};
  std::uint8_t bezel = 220;
  layout::ReferenceStyle reference;
  int supersample = 3;
  double noise_sigma = 0.0;
  double jitter_px = 0.0;       // per-frame hand tremor, px
  double contact_spread = 0.2;  // contact offset from key center, fraction of key size

  void validate() const {
    if (!(band_levels[0] > band_levels[1] && band_levels[1] > band_levels[2])) {
      throw Error(ErrorCode::kInvalidArgument, "finger bands must darken toward the tip");
    }
    if (width < 16 || height < 16 || supersample < 1 || !(noise_sigma >= 0.0) ||
        !(jitter_px >= 0.0) || !(finger_width_mm > 0.0) || !(finger_length_mm > 0.0) ||
        !(dark_band_mm > 0.0) || !(gray_band_mm > 0.0) || !(mirror_band_mm > 0.0) ||
        !(contact_spread >= 0.0 && contact_spread < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "bad scene parameters");
    }
  }
};

inline SceneConfig make_scene(const layout::KeyboardLayout& l, const CameraPreset& p) {
  const Camera cam = make_camera(p, l);
  SceneConfig cfg(l, geom::plane_to_image_homography(cam.intrinsics, cam.extrinsics, cam.plane));
  cfg.width = p.width;
  cfg.height = p.height;
  cfg.camera = p;
  return cfg;
}

inline geom::Homography frame_to_reference(const SceneConfig& cfg) {
  return cfg.reference_to_frame.inverse();
}

/// Screen corners in frame px, in quad order.
inline std::array<Point2, 4> screen_corners(const SceneConfig& cfg) {
  const auto ref = screenfind::reference_corners(cfg.layout.ref_width(), cfg.layout.ref_height());
  std::array<Point2, 4> out{};
  for (int i = 0; i < 4; ++i) out[i] = cfg.reference_to_frame.apply(ref[i]);
  return out;
}

/// Keyboard plane through the homography; reference raster pixels sampled
/// bilinearly, bezel outside the screen.
inline GrayImage render_scene(const SceneConfig& cfg) {
  cfg.validate();
  for (const Point2 c : screen_corners(cfg)) {
    if (!(c.x >= 0.0 && c.y >= 0.0 && c.x <= cfg.width - 1.0 && c.y <= cfg.height - 1.0)) {
      throw Error(ErrorCode::kQuadOutOfFrame, "screen corner outside the image");
    }
  }
  const GrayImage ref = layout::render_reference(cfg.layout, cfg.reference);
  const geom::Mat3 m = cfg.reference_to_frame.inverse().matrix();
  const int ss = cfg.supersample;
  const double rw = ref.width() - 0.5, rh = ref.height() - 0.5;
  GrayImage out(cfg.width, cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      double acc = 0.0;
      for (int j = 0; j < ss; ++j) {
        for (int i = 0; i < ss; ++i) {
          const double px = x + (i + 0.5) / ss - 0.5;
          const double py = y + (j + 0.5) / ss - 0.5;
          const geom::Vec3 q = m * geom::Vec3(px, py, 1.0);
          const double X = q.x() / q.z(), Y = q.y() / q.z();
          if (X >= -0.5 && Y >= -0.5 && X < rw && Y < rh) {
            acc += imgproc::sample_bilinear(ref, X, Y);
          } else {
            acc += cfg.bezel;
          }
        }
      }
      out(x, y) = imgproc::saturate_u8(acc / (ss * ss));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finger

enum class PhaseKind { kHover, kApproach, kDwell, kRetreat };

/// `lift` is the tip's distance from contact as a fraction of the approach
/// amplitude; dwell is lift 0 with the reflection visible.
struct Phase {
  PhaseKind kind = PhaseKind::kDwell;
  double lift = 0.0;
};

struct FingerGeometry {
  Point2 contact;   // frame px
  Point2 toward;    // unit, image direction toward the screen
  Point2 across;    // unit, perpendicular to toward
  double px_per_mm; // local scale at the contact
};

inline FingerGeometry finger_geometry(const SceneConfig& cfg, Point2 contact_ref) {
  const auto& h = cfg.reference_to_frame;
  const Point2 c = h.apply(contact_ref);
  const Point2 e = h.apply(contact_ref + Point2{1.0 / cfg.layout.mm_per_px(), 0.0});
  const Point2 t = tapdetect::auto_toward_direction(h.inverse(), contact_ref);
  return {c, t, {-t.y, t.x}, geom::distance(c, e)};
}

/// Frame-px bounding box of the finger-local region [u0, u1] x [v0, v1] (mm)
/// for a finger drawn at `tip`.
inline PixelRect local_box(const SceneConfig& cfg, const FingerGeometry& g, Point2 tip, double u0,
                           double u1, double v0, double v1, double pad) {
  const double s = g.px_per_mm;
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const double u : {u0, u1}) {
    for (const double v : {v0, v1}) {
      const Point2 p = tip + (u * s) * g.across + (v * s) * g.toward;
      x0 = std::min(x0, p.x), y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x), y1 = std::max(y1, p.y);
    }
  }
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0 - pad)));
  const int iy0 = std::max(0, static_cast<int>(std::floor(y0 - pad)));
  const int ix1 = std::min(cfg.width - 1, static_cast<int>(std::ceil(x1 + pad)));
  const int iy1 = std::min(cfg.height - 1, static_cast<int>(std::ceil(y1 + pad)));
  return {ix0, iy0, std::max(0, ix1 - ix0 + 1), std::max(0, iy1 - iy0 + 1)};
}

/// Whole finger including its reflection.
inline PixelRect finger_bounds(const SceneConfig& cfg, const FingerGeometry& g, Point2 tip,
                               double pad) {
  const double half = 0.5 * cfg.finger_width_mm;
  return local_box(cfg, g, tip, -half, half, -cfg.finger_length_mm,
                   cfg.dark_band_mm + 2.0 * cfg.mirror_band_mm, pad);
}

/// Finger interior above the shaded tip bands, where the skin marks lie.
inline PixelRect body_bounds(const SceneConfig& cfg, const FingerGeometry& g, Point2 tip) {
  const double inset = 1.0;
  const double half = 0.5 * cfg.finger_width_mm - inset;
  return local_box(cfg, g, tip, -half, half, -cfg.finger_length_mm + inset,
                   -cfg.gray_band_mm - inset, 0.0);
}

namespace detail {

// Band intensity at finger-local (u across, v toward) relative to the contact
// row, or nothing for background.
inline std::optional<double> finger_level(const SceneConfig& cfg, double s, double u, double v,
                                          bool mirror) {
  const double half = 0.5 * cfg.finger_width_mm * s;
  if (std::abs(u) > half) return std::nullopt;
  const double td = cfg.dark_band_mm * s, tg = cfg.gray_band_mm * s, tm = cfg.mirror_band_mm * s;
  const double r = 0.25 * cfg.finger_width_mm * s;
  double bottom = td;
  const double au = std::abs(u) - (half - r);
  if (au > 0.0) bottom -= r - std::sqrt(std::max(0.0, r * r - au * au));
  const auto& lv = cfg.band_levels;
  if (v <= bottom) {
    if (v < -cfg.finger_length_mm * s) return std::nullopt;
    const double hm = 0.5 * cfg.mark_size_mm * s;
    for (const Point2 m : cfg.marks_mm) {
      if (std::abs(u - m.x * s) <= hm && std::abs(v - m.y * s) <= hm) return cfg.mark_level;
    }
    const double e = bottom - v;
    if (e < td) return lv[2];
    if (e < td + tg) return lv[1];
    return lv[0];
  }
  if (!mirror) return std::nullopt;
  const double m = v - bottom;
  if (m < tm) return lv[3];
  if (m < 2.0 * tm) return lv[4];
  return std::nullopt;
}

}  // namespace detail

/// Draws the fingertip over `frame` in place. The tip sits `lift` approach
/// amplitudes away from the contact against the toward direction, moved by
/// `offset` px (hand tremor).
inline void draw_finger(GrayImage& frame, Point2 contact_ref, Phase phase,
                        const SceneConfig& cfg, Point2 offset = {}) {
  const FingerGeometry g = finger_geometry(cfg, contact_ref);
  const double s = g.px_per_mm;
  const double lift = phase.kind == PhaseKind::kDwell ? 0.0 : phase.lift;
  const Point2 tip = g.contact - (lift * cfg.approach_amplitude_mm * s) * g.toward + offset;
  const bool mirror = phase.kind == PhaseKind::kDwell;
  const PixelRect box = finger_bounds(cfg, g, tip, 2.0);
  const int ss = cfg.supersample;
  for (int y = box.y; y < box.y + box.h; ++y) {
    for (int x = box.x; x < box.x + box.w; ++x) {
      double acc = 0.0;
      int hits = 0;
      for (int j = 0; j < ss; ++j) {
        for (int i = 0; i < ss; ++i) {
          const Point2 p{x + (i + 0.5) / ss - 0.5, y + (j + 0.5) / ss - 0.5};
          const Point2 d = p - tip;
          const auto lv = detail::finger_level(cfg, s, geom::dot(d, g.across),
                                               geom::dot(d, g.toward), mirror);
          if (lv) acc += *lv, ++hits;
        }
      }
      if (hits == 0) continue;
      const double bg = frame(x, y);
      frame(x, y) = imgproc::saturate_u8((acc + (ss * ss - hits) * bg) / (ss * ss));
    }
  }
}

/// draw_finger for a contact inside a key.
inline void render_finger(GrayImage& frame, Point2 contact_ref, Phase phase,
                          const SceneConfig& cfg, Point2 offset = {}) {
  if (!layout::key_at(cfg.layout, contact_ref)) {
    throw Error(ErrorCode::kContactOutsideKeys, "contact point is not inside a key");
  }
  draw_finger(frame, contact_ref, phase, cfg, offset);
}

// ---------------------------------------------------------------------------
// Tap scripts and videos

struct Tap {
  std::string label;
  int approach = 4;
  int dwell = 2;
  int retreat = 4;
};

struct TapScript {
  std::vector<Tap> taps;
  int lead_in = 3;
  int transit = 6;  // minimum frames between taps
  int lead_out = 3;
  double fps = 30.0;
  // Peak hand speed between taps in mm per frame; longer moves take more
  // frames. 0 keeps every transit at `transit` frames.
  double max_speed_mm = 2.5;

  int transit_frames(double distance_mm) const {
    if (!(max_speed_mm > 0.0)) return transit;
    const double need = std::ceil(0.5 * std::numbers::pi * distance_mm / max_speed_mm);
    return std::max(transit, static_cast<int>(need));
  }

  void validate(const layout::KeyboardLayout& l) const {
    for (const auto& t : taps) {
      if (!l.has_label(t.label)) {
        throw Error(ErrorCode::kUnknownLabel, "no key '" + t.label + "' in layout");
      }
      if (t.dwell < 1 || t.approach < 1 || t.retreat < 1) {
        throw Error(ErrorCode::kInvalidArgument, "tap phases need at least one frame");
      }
    }
    if (lead_in < 1 || transit < 1 || lead_out < 0 || !(max_speed_mm >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "bad script timing");
    }
  }
};

/// One tap per character of `pin`, each character a key label.
inline TapScript script_from_pin(const layout::KeyboardLayout& l, std::string_view pin,
                                 const Tap& timing = {}) {
  TapScript s;
  for (const char c : pin) {
    Tap t = timing;
    t.label = std::string(1, c);
    s.taps.push_back(t);
  }
  s.validate(l);
  return s;
}

struct TapTruth {
  std::size_t frame = 0;  // last dwell frame
  std::size_t episode_begin = 0;
  std::size_t episode_end = 0;
  Point2 contact_frame_px;
  Point2 contact_ref_px;
  std::string label;
};

struct GroundTruth {
  std::vector<TapTruth> taps;
  std::array<Point2, 4> corners{};
  geom::Homography frame_to_reference;
  PixelRect hand_box;
  std::size_t frames = 0;

  std::vector<std::size_t> touching_frames() const {
    std::vector<std::size_t> f;
    for (const auto& t : taps) f.push_back(t.frame);
    return f;
  }
  std::vector<std::string> code() const {
    std::vector<std::string> c;
    for (const auto& t : taps) c.push_back(t.label);
    return c;
  }
};

struct Video {
  std::vector<GrayImage> frames;
  GroundTruth truth;
};

struct FrameState {
  Point2 contact_ref;
  Phase phase;
};

inline Video synth_tap_video(const SceneConfig& cfg, const TapScript& script, std::uint64_t seed) {
  cfg.validate();
  script.validate(cfg.layout);
  if (script.taps.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "script has no taps");
  }
  const GrayImage background = render_scene(cfg);

  std::vector<Point2> contacts;
  for (std::size_t i = 0; i < script.taps.size(); ++i) {
    const auto& r = cfg.layout.key(script.taps[i].label).rect;
    Rng rng(derive_seed({seed, 1, i}));
    const double sx = cfg.contact_spread * 0.5 * r.w, sy = cfg.contact_spread * 0.5 * r.h;
    contacts.push_back(r.center() + Point2{rng.uniform(-sx, sx), rng.uniform(-sy, sy)});
  }

  std::vector<FrameState> states;
  Video video;
  auto& gt = video.truth;
  for (int i = 0; i < script.lead_in; ++i) states.push_back({contacts[0], {PhaseKind::kHover, 1.0}});
  for (std::size_t k = 0; k < script.taps.size(); ++k) {
    const Tap& t = script.taps[k];
    if (k > 0) {
      const int n = script.transit_frames(geom::distance(contacts[k - 1], contacts[k]) *
                                          cfg.layout.mm_per_px());
      for (int j = 0; j < n; ++j) {
        // eased so the hand accelerates and decelerates smoothly
        const double a = 0.5 - 0.5 * std::cos(std::numbers::pi * (j + 1.0) / n);
        states.push_back({contacts[k - 1] + a * (contacts[k] - contacts[k - 1]),
                          {PhaseKind::kHover, 1.0}});
      }
    }
    TapTruth tt;
    tt.episode_begin = states.size() - 1;
    for (int j = 0; j < t.approach; ++j) {
      states.push_back({contacts[k], {PhaseKind::kApproach, 1.0 - (j + 1.0) / (t.approach + 1.0)}});
    }
    for (int j = 0; j < t.dwell; ++j) states.push_back({contacts[k], {PhaseKind::kDwell, 0.0}});
    tt.frame = states.size() - 1;
    for (int j = 0; j < t.retreat; ++j) {
      states.push_back({contacts[k], {PhaseKind::kRetreat, (j + 1.0) / t.retreat}});
    }
    tt.episode_end = states.size() - 1;
    tt.contact_ref_px = contacts[k];
    tt.contact_frame_px = cfg.reference_to_frame.apply(contacts[k]);
    tt.label = t.label;
    gt.taps.push_back(tt);
  }
  for (int i = 0; i < script.lead_out; ++i) {
    states.push_back({contacts.back(), {PhaseKind::kHover, 1.0}});
  }

  // Frames depend only on their own RNG stream, so workers render disjoint
  // strided subsets.
  video.frames.assign(states.size(), background);
  auto render = [&](std::size_t first, std::size_t stride) {
    for (std::size_t f = first; f < states.size(); f += stride) {
      GrayImage& frame = video.frames[f];
      Rng rng(derive_seed({seed, 2, f}));
      Point2 offset{};
      if (cfg.jitter_px > 0.0) {
        offset = {rng.normal(0.0, cfg.jitter_px), rng.normal(0.0, cfg.jitter_px)};
      }
      draw_finger(frame, states[f].contact_ref, states[f].phase, cfg, offset);
      if (cfg.noise_sigma > 0.0) {
        for (auto& p : frame.pixels()) p = imgproc::saturate_u8(p + rng.normal(0.0, cfg.noise_sigma));
      }
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(1, states.size()));
  if (workers == 1) {
    render(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(render, w, workers);
  }

  const FingerGeometry g0 = finger_geometry(cfg, contacts[0]);
  const Point2 tip0 = g0.contact - (cfg.approach_amplitude_mm * g0.px_per_mm) * g0.toward;
  gt.hand_box = body_bounds(cfg, g0, tip0);
  gt.corners = screen_corners(cfg);
  gt.frame_to_reference = frame_to_reference(cfg);
  gt.frames = video.frames.size();
  return video;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const GroundTruth& gt) {
  nlohmann::json taps = nlohmann::json::array();
  for (const auto& t : gt.taps) {
    taps.push_back({{"frame", t.frame},
                    {"episode", {t.episode_begin, t.episode_end}},
                    {"contact_frame_px", {t.contact_frame_px.x, t.contact_frame_px.y}},
                    {"contact_ref_px", {t.contact_ref_px.x, t.contact_ref_px.y}},
                    {"label", t.label}});
  }
  nlohmann::json corners = nlohmann::json::array();
  for (const Point2 c : gt.corners) corners.push_back({c.x, c.y});
  nlohmann::json h = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) h.push_back(gt.frame_to_reference.matrix()(r, c));
  }
  return {{"taps", taps},
          {"corners", corners},
          {"homography", h},
          {"hand_box", {gt.hand_box.x, gt.hand_box.y, gt.hand_box.w, gt.hand_box.h}},
          {"frames", gt.frames}};
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  try {
    GroundTruth gt;
    for (const auto& t : j.at("taps")) {
      TapTruth tt;
      tt.frame = t.at("frame").get<std::size_t>();
      if (t.contains("episode")) {
        tt.episode_begin = t.at("episode").at(0).get<std::size_t>();
        tt.episode_end = t.at("episode").at(1).get<std::size_t>();
      }
      tt.contact_frame_px = {t.at("contact_frame_px").at(0).get<double>(),
                             t.at("contact_frame_px").at(1).get<double>()};
      tt.contact_ref_px = {t.at("contact_ref_px").at(0).get<double>(),
                           t.at("contact_ref_px").at(1).get<double>()};
      tt.label = t.at("label").get<std::string>();
      gt.taps.push_back(tt);
    }
    const auto& c = j.at("corners");
    for (int i = 0; i < 4; ++i) gt.corners[i] = {c.at(i).at(0).get<double>(), c.at(i).at(1).get<double>()};
    gt.frame_to_reference = screenfind::homography_from_json({{"matrix", j.at("homography")}});
    if (j.contains("hand_box")) {
      const auto& b = j.at("hand_box");
      gt.hand_box = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
    }
    gt.frames = j.value("frames", std::size_t{0});
    return gt;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("ground truth JSON: ") + e.what());
  }
}

}  // namespace shoulderscope::synthcam
