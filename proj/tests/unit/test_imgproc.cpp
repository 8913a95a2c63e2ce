#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include "shoulderscope/imgproc.hpp"
#include "support.hpp"

using namespace shoulderscope;
using namespace shoulderscope::imgproc;

namespace {

GrayImage rectangle(int w, int h, int x0, int y0, int x1, int y1, std::uint8_t in,
                    std::uint8_t out) {
  GrayImage img(w, h, out);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img(x, y) = in;
  return img;
}

}  // namespace

TEST(Pgm, HeaderAndRoundTrip) {
  const auto bytes = save_pgm(GrayImage(1, 1, 0));
  const std::string head(bytes.begin(), bytes.end() - 1);
  EXPECT_EQ(head, "P5\n1 1\n255\n");
  EXPECT_EQ(bytes.back(), 0);

  const GrayImage img = test_support::texture(64, 64, 9);
  const GrayImage back = load_pgm(save_pgm(img));
  EXPECT_EQ(back.data(), img.data());
  EXPECT_EQ(back.width(), 64);
}

TEST(Pgm, Errors) {
  const std::string p2 = "P2\n1 1\n255\n0\n";
  EXPECT_ERROR_CODE(load_pgm(std::vector<std::uint8_t>(p2.begin(), p2.end())),
                    ErrorCode::kMalformedHeader);
  const std::string maxval = "P5\n1 1\n65535\n\x01\x02";
  EXPECT_ERROR_CODE(load_pgm(std::vector<std::uint8_t>(maxval.begin(), maxval.end())),
                    ErrorCode::kMalformedHeader);
  auto bytes = save_pgm(GrayImage(4, 4, 7));
  bytes.pop_back();
  EXPECT_ERROR_CODE(load_pgm(bytes), ErrorCode::kTruncatedData);
}

TEST(Pgm, FrameDirectory) {
  const auto dir = std::filesystem::temp_directory_path() / "shoulderscope_imgproc_frames";
  std::filesystem::remove_all(dir);
  std::vector<GrayImage> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(test_support::texture(20, 10, i));
  save_frame_directory(frames, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "frame_000001.pgm"));
  const auto back = load_frame_directory(dir);
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(back[i].data(), frames[i].data());
  std::filesystem::remove_all(dir);
  EXPECT_ERROR_CODE(load_frame_directory(dir), ErrorCode::kIoError);
}

TEST(GaussianBlur, ConstantImpulseAndBadSigma) {
  const auto c = gaussian_blur(GrayImage(20, 15, 100), 1.3);
  for (const double v : c.pixels()) EXPECT_NEAR(v, 100.0, 1e-9);

  GrayImage imp(21, 21, 0);
  imp(10, 10) = 1;
  const auto b = gaussian_blur(imp, 1.0);
  // numpy/OpenCV: squared centre tap of the normalized radius-3 kernel
  EXPECT_NEAR(b(10, 10), 0.15924112569070245, 1e-6);
  double sum = 0;
  for (const double v : b.pixels()) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);

  EXPECT_ERROR_CODE(gaussian_blur(imp, 0.0), ErrorCode::kBadSigma);
}

TEST(Sobel, StepConstantAndTranspose) {
  const GrayImage step = rectangle(10, 9, 5, 0, 10, 9, 255, 0);
  const auto g = sobel_gradients(step);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 10; ++x) {
      // OpenCV Sobel with replicated border: 1020 at x = 4, 5
      EXPECT_EQ(g.gx(x, y), (x == 4 || x == 5) ? 1020.0 : 0.0) << x << "," << y;
      EXPECT_EQ(g.gy(x, y), 0.0);
    }
  }
  const auto z = sobel_gradients(GrayImage(5, 5, 77));
  for (const double v : z.gx.pixels()) EXPECT_EQ(v, 0.0);

  const GrayImage img = test_support::texture(12, 12, 4);
  GrayImage t(12, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) t(x, y) = img(y, x);
  const auto a = sobel_gradients(img), b = sobel_gradients(t);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) EXPECT_EQ(a.gx(x, y), b.gy(y, x));

  EXPECT_ERROR_CODE(sobel_gradients(GrayImage(2, 5)), ErrorCode::kTooSmall);
}

TEST(Canny, RectangleBoundary) {
  // black 60x40 rectangle on white, occupying [20, 80) x [30, 70)
  const GrayImage img = rectangle(100, 100, 20, 30, 80, 70, 0, 255);
  const EdgeMap e = canny(img);
  int covered = 0, total = 0;
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 100; ++x) {
      const double dx = std::max({19.5 - x, x - 79.5, 0.0});
      const double dy = std::max({29.5 - y, y - 69.5, 0.0});
      const bool inside = x >= 20 && x < 80 && y >= 30 && y < 70;
      const double d = inside ? std::min({x - 19.5, 79.5 - x, y - 29.5, 69.5 - y})
                              : std::hypot(dx, dy);
      if (e.is_edge(x, y)) {
        EXPECT_LE(d, 1.0) << x << "," << y;
      }
    }
  }
  // boundary pixel pairs: each side must have an edge pixel on one side of it
  for (int x = 20; x < 80; ++x) {
    total += 2;
    covered += e.is_edge(x, 29) || e.is_edge(x, 30);
    covered += e.is_edge(x, 69) || e.is_edge(x, 70);
  }
  for (int y = 30; y < 70; ++y) {
    total += 2;
    covered += e.is_edge(19, y) || e.is_edge(20, y);
    covered += e.is_edge(79, y) || e.is_edge(80, y);
  }
  EXPECT_GE(covered, 0.95 * total);
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 100; ++x) {
      if (e.is_edge(x, y)) {
        EXPECT_GT(e.magnitude(x, y), 0.0);
      }
    }
  }
}

TEST(Canny, SparseEdgesOnLargeCleanImage) {
  // edges cover far less than a tenth of the pixels
  const GrayImage img = rectangle(320, 240, 70, 60, 250, 180, 255, 0);
  const EdgeMap e = canny(img);
  EXPECT_GT(e.count(), 500u);
  for (int x = 80; x < 240; ++x) EXPECT_TRUE(e.is_edge(x, 59) || e.is_edge(x, 60)) << x;
}

TEST(Canny, ConstantAndBadThresholds) {
  EXPECT_EQ(canny(GrayImage(30, 30, 90)).count(), 0u);
  EXPECT_EQ(canny(GrayImage(30, 30, 90), 1.4, 10, 20).count(), 0u);
  EXPECT_ERROR_CODE(canny(GrayImage(30, 30), 1.4, 20, 20), ErrorCode::kBadThresholds);
}

TEST(Hough, VerticalLine) {
  EdgeMap e{100, 100, GrayImage(100, 100), RealPlane(100, 100), RealPlane(100, 100)};
  for (int y = 0; y < 100; ++y) e.mask(30, y) = 1;
  const auto lines = hough_lines(e, 1.0, std::numbers::pi / 180.0, 10);
  ASSERT_FALSE(lines.empty());
  EXPECT_NEAR(lines[0].rho, 30.0, 1.0);
  const double dt = std::min(lines[0].theta, std::numbers::pi - lines[0].theta);
  EXPECT_LE(dt, std::numbers::pi / 180.0);
  EXPECT_EQ(lines[0].votes, 100);
}

TEST(Hough, RectangleSidesAndMonotoneThreshold) {
  const GrayImage img = rectangle(120, 100, 20, 30, 90, 80, 255, 0);
  const EdgeMap e = canny(img);
  const auto lines = hough_lines(e, 1.0, std::numbers::pi / 180.0, 20);
  ASSERT_GE(lines.size(), 4u);
  bool seen[4] = {};
  for (int i = 0; i < 4; ++i) {
    const auto& l = lines[i];
    const bool vertical = std::min(l.theta, std::numbers::pi - l.theta) < 0.02;
    const bool horizontal = std::abs(l.theta - std::numbers::pi / 2) < 0.02;
    ASSERT_TRUE(vertical || horizontal);
    const double pos = horizontal ? l.rho : std::abs(l.rho);
    if (vertical && std::abs(pos - 19.5) <= 1.0) seen[0] = true;
    if (vertical && std::abs(pos - 89.5) <= 1.0) seen[1] = true;
    if (horizontal && std::abs(pos - 29.5) <= 1.0) seen[2] = true;
    if (horizontal && std::abs(pos - 79.5) <= 1.0) seen[3] = true;
  }
  for (const bool s : seen) EXPECT_TRUE(s);
  for (std::size_t i = 1; i < lines.size(); ++i) EXPECT_GE(lines[i - 1].votes, lines[i].votes);
  EXPECT_LE(hough_lines(e, 1.0, std::numbers::pi / 180.0, 45).size(), lines.size());
}

TEST(Hough, SeparationDropsNeighbouringPeaks) {
  // two parallel lines 3 px apart and a third far away
  EdgeMap e{100, 100, GrayImage(100, 100), RealPlane(100, 100), RealPlane(100, 100)};
  for (int y = 0; y < 100; ++y) e.mask(30, y) = e.mask(33, y) = e.mask(70, y) = 1;
  const auto all = hough_lines(e, 1.0, std::numbers::pi / 180.0, 50);
  const auto sep = hough_lines(e, 1.0, std::numbers::pi / 180.0, 50, 5.0, 0.1);
  ASSERT_EQ(sep.size(), 2u);
  EXPECT_GT(all.size(), sep.size());
  EXPECT_NEAR(std::abs(sep[0].rho), 30.0, 0.5);
  EXPECT_NEAR(std::abs(sep[1].rho), 70.0, 0.5);
  EXPECT_ERROR_CODE(hough_lines(e, 1.0, 0.1, 5, -1.0), ErrorCode::kInvalidArgument);
}

TEST(Hough, EmptyMap) {
  EdgeMap e{50, 50, GrayImage(50, 50), RealPlane(50, 50), RealPlane(50, 50)};
  EXPECT_TRUE(hough_lines(e).empty());
}

TEST(LineIntersection, Examples) {
  const Point2 a = line_intersection({5, 0}, {7, std::numbers::pi / 2});
  EXPECT_NEAR(a.x, 5.0, 1e-12);
  EXPECT_NEAR(a.y, 7.0, 1e-12);
  const Point2 b = line_intersection({0, std::numbers::pi / 4}, {0, 3 * std::numbers::pi / 4});
  EXPECT_NEAR(b.x, 0.0, 1e-12);
  EXPECT_NEAR(b.y, 0.0, 1e-12);
  EXPECT_ERROR_CODE(line_intersection({1, 0.3}, {4, 0.3}), ErrorCode::kParallelLines);
}

TEST(ShiTomasi, SquareCorner) {
  // white quadrant x >= 30, y >= 30: corner at (29.5, 29.5)
  const GrayImage img = rectangle(60, 60, 30, 30, 60, 60, 255, 0);
  const auto f = shi_tomasi_features(img, 5, 0.1, 3.0);
  ASSERT_FALSE(f.empty());
  EXPECT_LE(std::hypot(f[0].x - 29.5, f[0].y - 29.5), 1.5);
  EXPECT_TRUE(shi_tomasi_features(GrayImage(30, 30, 5), 5, 0.1, 3.0).empty());
  const auto score = shi_tomasi_score(test_support::texture(30, 30, 2));
  for (const double v : score.pixels()) EXPECT_GE(v, 0.0);
}

TEST(ShiTomasi, Checkerboard) {
  GrayImage img(40, 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) img(x, y) = ((x / 10 + y / 10) % 2) ? 255 : 0;
  const auto f = shi_tomasi_features(img, 9, 0.1, 5.0);
  ASSERT_EQ(f.size(), 9u);
  for (const double cy : {9.5, 19.5, 29.5}) {
    for (const double cx : {9.5, 19.5, 29.5}) {
      const bool found = std::any_of(f.begin(), f.end(), [&](const Point2& p) {
        return std::hypot(p.x - cx, p.y - cy) <= 1.5;
      });
      EXPECT_TRUE(found) << cx << "," << cy;
    }
  }
}

TEST(Imgproc, TranslationEquivariance) {
  const GrayImage img = test_support::texture(60, 60, 8);
  const GrayImage s = test_support::shifted(img, 3, 2);
  const auto a = sobel_gradients(gaussian_blur(img, 1.0));
  const auto b = sobel_gradients(gaussian_blur(s, 1.0));
  for (int y = 12; y < 48; ++y)
    for (int x = 12; x < 48; ++x) EXPECT_NEAR(b.gx(x + 3, y + 2), a.gx(x, y), 1e-9);
}
