#pragma once

#include <gtest/gtest.h>

#include <cstdint>

#include "shoulderscope/error.hpp"
#include "shoulderscope/imgproc.hpp"
#include "shoulderscope/rng.hpp"

#define EXPECT_ERROR_CODE(stmt, ec)                                 \
  do {                                                              \
    try {                                                           \
      stmt;                                                         \
      ADD_FAILURE() << "expected " << shoulderscope::to_string(ec); \
    } catch (const shoulderscope::Error& e_) {                      \
      EXPECT_EQ(e_.code(), ec) << e_.what();                        \
    }                                                               \
  } while (0)

namespace test_support {

// Smooth random texture: uniform noise blurred once, rescaled to [20, 235].
inline shoulderscope::imgproc::GrayImage texture(int w, int h, std::uint64_t seed,
                                                 double sigma = 1.5) {
  using namespace shoulderscope;
  Rng rng(seed);
  imgproc::RealPlane raw(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) raw(x, y) = rng.uniform(0.0, 255.0);
  const auto b = imgproc::gaussian_blur(raw, sigma);
  double lo = 1e9, hi = -1e9;
  for (const double v : b.pixels()) lo = std::min(lo, v), hi = std::max(hi, v);
  imgproc::GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(x, y) = imgproc::saturate_u8(20.0 + 215.0 * (b(x, y) - lo) / (hi - lo));
  return out;
}

// out(x, y) = src(x - dx, y - dy), clamped at the border.
inline shoulderscope::imgproc::GrayImage shifted(const shoulderscope::imgproc::GrayImage& src,
                                                 int dx, int dy) {
  shoulderscope::imgproc::GrayImage out(src.width(), src.height());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) out(x, y) = src.clamped(x - dx, y - dy);
  return out;
}

}  // namespace test_support
