#pragma once

// Privacy-enhancing keyboard layouts: per-session label shuffling and
// Brownian-motion key movement.

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shoulderscope/error.hpp"
#include "shoulderscope/layout.hpp"
#include "shoulderscope/rng.hpp"

namespace shoulderscope::pek {

using layout::Key;
using layout::KeyboardLayout;
using layout::Rect;

enum class Mode { kShuffled, kBrownian };

inline Mode mode_from_string(std::string_view s) {
  if (s == "shuffled") return Mode::kShuffled;
  if (s == "brownian") return Mode::kBrownian;
  throw Error(ErrorCode::kInvalidArgument, "unknown PEK mode '" + std::string(s) + "'");
}

inline constexpr double kDefaultSigma = 2.0;

struct PekSession {
  KeyboardLayout base;
  std::uint64_t rng_seed = 0;
  Mode mode = Mode::kShuffled;
  double sigma = kDefaultSigma;
  std::size_t steps = 1;
};

/// Labels reassigned by drawing a random remaining label for each key in turn
/// and removing it from the pool.
inline KeyboardLayout shuffle_layout(const KeyboardLayout& base, std::uint64_t seed) {
  std::vector<std::string> pool;
  for (const auto& k : base.keys()) pool.push_back(k.label);
  Rng rng(derive_seed({seed, 0x73687566ULL}));
  std::vector<Key> keys = base.keys();
  for (auto& k : keys) {
    const auto j = static_cast<std::size_t>(rng.below(pool.size()));
    k.label = std::move(pool[j]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return KeyboardLayout(std::move(keys), base.ref_width(), base.ref_height(), base.mm_per_px(),
                        base.orientation());
}

namespace detail {

// Folds v into [lo, hi] by repeated reflection at both ends.
inline double reflect(double v, double lo, double hi) {
  const double span = hi - lo;
  if (!(span > 0.0)) return lo;
  double t = std::fmod(v - lo, 2.0 * span);
  if (t < 0.0) t += 2.0 * span;
  return lo + (t <= span ? t : 2.0 * span - t);
}

}  // namespace detail

/// One Brownian step. Each key center moves by N(0, sigma^2) per axis from
/// RNG(seed, step_index, key_index), reflected into `region` (default: the
/// bounding box of `current`). A move that would overlap another key is
/// dropped; keys are updated in order against the latest positions.
inline KeyboardLayout brownian_step(const KeyboardLayout& current, double sigma,
                                    std::uint64_t seed, std::uint64_t step_index,
                                    std::optional<Rect> region = std::nullopt) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
  }
  const Rect reg = region.value_or(current.bounding_box());
  std::vector<Key> keys = current.keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    Rng rng(derive_seed({seed, step_index, i}));
    const double dx = rng.normal(0.0, sigma);
    const double dy = rng.normal(0.0, sigma);
    Rect r = keys[i].rect;
    r.x = detail::reflect(r.x + dx, reg.x, reg.right() - r.w);
    r.y = detail::reflect(r.y + dy, reg.y, reg.bottom() - r.h);
    bool clash = false;
    for (std::size_t j = 0; j < keys.size() && !clash; ++j) {
      clash = j != i && r.overlaps(keys[j].rect);
    }
    if (!clash) keys[i].rect = r;
  }
  return KeyboardLayout(std::move(keys), current.ref_width(), current.ref_height(),
                        current.mm_per_px(), current.orientation());
}

inline std::vector<KeyboardLayout> simulate_session(const KeyboardLayout& base, Mode mode,
                                                    std::uint64_t seed, std::size_t steps,
                                                    double sigma = kDefaultSigma) {
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "steps must be >= 1");
  std::vector<KeyboardLayout> out;
  out.reserve(steps);
  if (mode == Mode::kShuffled) {
    const KeyboardLayout s = shuffle_layout(base, seed);
    for (std::size_t i = 0; i < steps; ++i) out.push_back(s);
    return out;
  }
  const Rect region = base.bounding_box();
  KeyboardLayout cur = base;
  for (std::size_t i = 0; i < steps; ++i) {
    cur = brownian_step(cur, sigma, seed, i, region);
    out.push_back(cur);
  }
  return out;
}

inline std::vector<KeyboardLayout> simulate_session(const PekSession& s) {
  return simulate_session(s.base, s.mode, s.rng_seed, s.steps, s.sigma);
}

/// True when every key lies in `region` and no two keys overlap.
inline bool invariants_hold(const KeyboardLayout& l, const Rect& region) {
  const auto& keys = l.keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const Rect& r = keys[i].rect;
    if (r.x < region.x || r.y < region.y || r.right() > region.right() ||
        r.bottom() > region.bottom()) {
      return false;
    }
    for (std::size_t j = i + 1; j < keys.size(); ++j) {
      if (r.overlaps(keys[j].rect)) return false;
    }
  }
  return true;
}

struct UniformityResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
  std::vector<std::vector<long>> counts;  // counts[position][label index]
};

/// Chi-squared test of the label-by-position table over `samples` seeded
/// shuffles. Both margins are fixed, so the table has (n - 1)^2 degrees of freedom.
inline UniformityResult shuffle_uniformity(const KeyboardLayout& base, std::size_t samples,
                                           std::uint64_t seed) {
  const std::size_t n = base.size();
  if (n < 2 || samples < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need >= 2 keys and >= 1 sample");
  }
  UniformityResult res;
  res.counts.assign(n, std::vector<long>(n, 0));
  for (std::size_t s = 0; s < samples; ++s) {
    const auto l = shuffle_layout(base, derive_seed({seed, s}));
    for (std::size_t pos = 0; pos < n; ++pos) {
      ++res.counts[pos][*base.index_of(l.keys()[pos].label)];
    }
  }
  const double expected = static_cast<double>(samples) / n;
  for (const auto& row : res.counts) {
    for (const long c : row) res.statistic += (c - expected) * (c - expected) / expected;
  }
  res.dof = static_cast<int>((n - 1) * (n - 1));
  const boost::math::chi_squared dist(res.dof);
  res.p_value = boost::math::cdf(boost::math::complement(dist, res.statistic));
  return res;
}

inline nlohmann::json to_json(const std::vector<KeyboardLayout>& seq) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : seq) arr.push_back(layout::to_json(l));
  return arr;
}

}  // namespace shoulderscope::pek
