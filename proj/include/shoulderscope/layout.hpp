#pragma once

// Reference-keyboard geometry, device presets, key lookup and the key-size
// predictor f*h / (d * (1 + d/w)).

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "shoulderscope/error.hpp"
#include "shoulderscope/geom.hpp"
#include "shoulderscope/imgproc.hpp"

namespace shoulderscope::layout {

using geom::Point2;

/// Axis-aligned rectangle in reference px, half-open: [x, x + w) x [y, y + h).
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  Point2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
  bool contains(double px, double py) const {
    return px >= x && py >= y && px < x + w && py < y + h;
  }
  bool contains(Point2 p) const { return contains(p.x, p.y); }

  /// True when the interiors intersect; shared edges do not count.
  bool overlaps(const Rect& o) const {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Key {
  std::string label;
  Rect rect;

  friend bool operator==(const Key&, const Key&) = default;
};

/// Front edge of the keyboard (the typist's side). The camera faces the typist,
/// so keys behind a key, away from the camera, lie toward the front edge:
/// +y for kBottom.
enum class Orientation { kBottom, kTop };

inline std::string_view to_string(Orientation o) {
  return o == Orientation::kBottom ? "bottom" : "top";
}

inline Orientation orientation_from_string(std::string_view s) {
  if (s == "bottom") return Orientation::kBottom;
  if (s == "top") return Orientation::kTop;
  throw Error(ErrorCode::kInvalidArgument, "unknown orientation '" + std::string(s) + "'");
}

class KeyboardLayout {
 public:
  KeyboardLayout(std::vector<Key> keys, double ref_width, double ref_height, double mm_per_px,
                 Orientation orientation = Orientation::kBottom)
      : keys_(std::move(keys)),
        ref_width_(ref_width),
        ref_height_(ref_height),
        mm_per_px_(mm_per_px),
        orientation_(orientation) {
    validate();
  }

  const std::vector<Key>& keys() const { return keys_; }
  std::size_t size() const { return keys_.size(); }
  double ref_width() const { return ref_width_; }
  double ref_height() const { return ref_height_; }
  double mm_per_px() const { return mm_per_px_; }
  Orientation orientation() const { return orientation_; }

  /// +1 when "behind" means larger reference y, -1 otherwise.
  double behind_sign() const { return orientation_ == Orientation::kBottom ? 1.0 : -1.0; }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (keys_[i].label == label) return i;
    }
    return std::nullopt;
  }

  const Key& key(std::string_view label) const {
    const auto i = index_of(label);
    if (!i) throw Error(ErrorCode::kUnknownLabel, "no key '" + std::string(label) + "'");
    return keys_[*i];
  }

  bool has_label(std::string_view label) const { return index_of(label).has_value(); }

  /// Union bounding box of all key rects.
  Rect bounding_box() const;

  friend bool operator==(const KeyboardLayout&, const KeyboardLayout&) = default;

 private:
  void validate() const {
    if (!(ref_width_ > 0.0) || !(ref_height_ > 0.0) || !(mm_per_px_ > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "layout dimensions must be positive");
    }
    if (keys_.empty()) throw Error(ErrorCode::kInvalidArgument, "layout has no keys");
    std::set<std::string> labels;
    for (const auto& k : keys_) {
      const Rect& r = k.rect;
      if (k.label.empty()) throw Error(ErrorCode::kInvalidArgument, "empty key label");
      if (!labels.insert(k.label).second) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate key label '" + k.label + "'");
      }
      if (!(r.w > 0.0) || !(r.h > 0.0) || !(r.x >= 0.0) || !(r.y >= 0.0) ||
          !(r.right() <= ref_width_) || !(r.bottom() <= ref_height_)) {
        throw Error(ErrorCode::kInvalidArgument, "key '" + k.label + "' outside reference");
      }
    }
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      for (std::size_t j = i + 1; j < keys_.size(); ++j) {
        if (keys_[i].rect.overlaps(keys_[j].rect)) {
          throw Error(ErrorCode::kInvalidArgument,
                      "keys '" + keys_[i].label + "' and '" + keys_[j].label + "' overlap");
        }
      }
    }
  }

  std::vector<Key> keys_;
  double ref_width_;
  double ref_height_;
  double mm_per_px_;
  Orientation orientation_;
};

inline Rect KeyboardLayout::bounding_box() const {
  double x0 = keys_[0].rect.x, y0 = keys_[0].rect.y;
  double x1 = keys_[0].rect.right(), y1 = keys_[0].rect.bottom();
  for (const auto& k : keys_) {
    x0 = std::min(x0, k.rect.x), y0 = std::min(y0, k.rect.y);
    x1 = std::max(x1, k.rect.right()), y1 = std::max(y1, k.rect.bottom());
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

inline std::optional<std::string> key_at(const KeyboardLayout& l, double x, double y) {
  for (const auto& k : l.keys()) {
    if (k.rect.contains(x, y)) return k.label;
  }
  return std::nullopt;
}

inline std::optional<std::string> key_at(const KeyboardLayout& l, Point2 p) {
  return key_at(l, p.x, p.y);
}

// ---------------------------------------------------------------------------
// Key size on the image

struct KeyImageSize {
  double sensor_mm;
  double px;
};

/// f: focal length, h: camera height above the screen plane, d: distance to
/// the key front, w: physical key size, all mm; pixel_pitch in mm/px.
inline KeyImageSize predicted_key_image_size(double f, double h, double d, double w,
                                             double pixel_pitch) {
  for (double v : {f, h, d, w, pixel_pitch}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kBadInput, "key-size inputs must be positive and finite");
    }
  }
  const double sensor = f * h / (d * (1.0 + d / w));
  return {sensor, sensor / pixel_pitch};
}

// ---------------------------------------------------------------------------
// Presets

struct DevicePreset {
  std::string name;
  double key_height_mm;
  double key_length_mm;
};

inline const std::vector<DevicePreset>& device_presets() {
  static const std::vector<DevicePreset> presets = {
      {"ipad", 9.0, 17.0},
      {"iphone5", 8.0, 16.0},
      {"nexus7", 10.0, 16.0},
  };
  return presets;
}

inline const DevicePreset& device_preset(std::string_view name) {
  for (const auto& p : device_presets()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::kUnknownPreset, "unknown device preset '" + std::string(name) + "'");
}

enum class LayoutStyle { kDigitPad, kQwertyRow };

inline constexpr double kDefaultPxPerMm = 10.0;
inline constexpr double kKeyGapMm = 2.0;
inline constexpr double kMarginMm = 2.0;

/// Average fingertip dimensions in mm (index and middle finger) with the
/// standard deviations of the measured sample.
struct FingertipStats {
  double height_mean, height_sd;
  double length_mean, length_sd;
  double width_mean, width_sd;
};
inline constexpr FingertipStats kIndexFingertip{9.6, 1.2, 12.9, 1.6, 13.1, 1.9};
inline constexpr FingertipStats kMiddleFingertip{10.4, 1.3, 13.1, 1.7, 13.7, 1.7};
inline constexpr double kDefaultFingerWidthMm = 13.0;

/// Digit pad: rows 1-2-3, 4-5-6, 7-8-9 and 0 below 8. QWERTY row: Q..P.
inline KeyboardLayout builtin_layout(const DevicePreset& preset, LayoutStyle style,
                                     double px_per_mm = kDefaultPxPerMm) {
  if (!(preset.key_height_mm > 0.0) || !(preset.key_length_mm > 0.0) || !(px_per_mm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "preset dimensions must be positive");
  }
  const double kw = preset.key_length_mm * px_per_mm;
  const double kh = preset.key_height_mm * px_per_mm;
  const double gap = kKeyGapMm * px_per_mm;
  const double margin = kMarginMm * px_per_mm;
  std::vector<Key> keys;
  int cols = 0, rows = 0;
  auto place = [&](const std::string& label, int col, int row) {
    keys.push_back({label, {margin + col * (kw + gap), margin + row * (kh + gap), kw, kh}});
  };
  if (style == LayoutStyle::kDigitPad) {
    cols = 3, rows = 4;
    for (int i = 0; i < 9; ++i) place(std::to_string(i + 1), i % 3, i / 3);
    place("0", 1, 3);
  } else {
    cols = 10, rows = 1;
    const std::string row = "QWERTYUIOP";
    for (int i = 0; i < 10; ++i) place(std::string(1, row[i]), i, 0);
  }
  const double width = 2.0 * margin + cols * kw + (cols - 1) * gap;
  const double height = 2.0 * margin + rows * kh + (rows - 1) * gap;
  return KeyboardLayout(std::move(keys), width, height, 1.0 / px_per_mm);
}

/// Names accepted on the command line: "<device>-digits" or "<device>-qwerty".
inline KeyboardLayout builtin_layout(std::string_view name, double px_per_mm = kDefaultPxPerMm) {
  const auto dash = name.rfind('-');
  if (dash == std::string_view::npos) {
    throw Error(ErrorCode::kUnknownPreset, "unknown layout '" + std::string(name) + "'");
  }
  const auto style_name = name.substr(dash + 1);
  LayoutStyle style;
  if (style_name == "digits") {
    style = LayoutStyle::kDigitPad;
  } else if (style_name == "qwerty") {
    style = LayoutStyle::kQwertyRow;
  } else {
    throw Error(ErrorCode::kUnknownPreset, "unknown layout style '" + std::string(name) + "'");
  }
  return builtin_layout(device_preset(name.substr(0, dash)), style, px_per_mm);
}

// ---------------------------------------------------------------------------
// Reference raster

struct ReferenceStyle {
  std::uint8_t wallpaper = 90;
  std::uint8_t key = 130;
};

/// Reference image of the keyboard: one pixel per reference px, pixel (i, j)
/// takes the key color when its center lies in a key rect.
inline imgproc::GrayImage render_reference(const KeyboardLayout& l,
                                           const ReferenceStyle& style = {}) {
  const int w = static_cast<int>(std::ceil(l.ref_width()));
  const int h = static_cast<int>(std::ceil(l.ref_height()));
  imgproc::GrayImage img(w, h, style.wallpaper);
  for (const auto& k : l.keys()) {
    const int x0 = std::max(0, static_cast<int>(std::ceil(k.rect.x)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(k.rect.y)));
    const int x1 = std::min(w, static_cast<int>(std::ceil(k.rect.right())));
    const int y1 = std::min(h, static_cast<int>(std::ceil(k.rect.bottom())));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) img(x, y) = style.key;
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const KeyboardLayout& l) {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& k : l.keys()) {
    keys.push_back({{"label", k.label},
                    {"x", k.rect.x},
                    {"y", k.rect.y},
                    {"w", k.rect.w},
                    {"h", k.rect.h}});
  }
  return {{"ref_width", l.ref_width()},
          {"ref_height", l.ref_height()},
          {"mm_per_px", l.mm_per_px()},
          {"orientation", std::string(to_string(l.orientation()))},
          {"keys", keys}};
}

inline KeyboardLayout layout_from_json(const nlohmann::json& j) {
  try {
    std::vector<Key> keys;
    for (const auto& k : j.at("keys")) {
      keys.push_back({k.at("label").get<std::string>(),
                      {k.at("x").get<double>(), k.at("y").get<double>(), k.at("w").get<double>(),
                       k.at("h").get<double>()}});
    }
    const auto orient = j.contains("orientation")
                            ? orientation_from_string(j.at("orientation").get<std::string>())
                            : Orientation::kBottom;
    return KeyboardLayout(std::move(keys), j.at("ref_width").get<double>(),
                          j.at("ref_height").get<double>(), j.at("mm_per_px").get<double>(),
                          orient);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("layout JSON: ") + e.what());
  }
}

}  // namespace shoulderscope::layout
