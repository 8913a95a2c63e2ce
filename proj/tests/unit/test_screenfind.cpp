#include <algorithm>
#include <cmath>
#include <vector>

#include "shoulderscope/screenfind.hpp"
#include "shoulderscope/synthcam.hpp"
#include "support.hpp"

using namespace shoulderscope;
using namespace shoulderscope::screenfind;
using geom::Mat3;
using imgproc::GrayImage;

namespace {

const std::vector<Point2> kUnitSquare{{0, 0}, {1, 0}, {1, 1}, {0, 1}};

std::vector<PointPair> pairs_through(const Mat3& m, const std::vector<Point2>& src) {
  const Homography h(m);
  std::vector<PointPair> out;
  for (const Point2 p : src) out.push_back({p, h.apply(p)});
  return out;
}

}  // namespace

TEST(Dlt, IdentityAndScale) {
  std::vector<PointPair> same, twice;
  for (const Point2 p : kUnitSquare) {
    same.push_back({p, p});
    twice.push_back({p, 2.0 * p});
  }
  EXPECT_TRUE(geom::approx_equal(dlt_homography(same), Homography(), 1e-12));
  Mat3 d = Mat3::Identity();
  d(0, 0) = d(1, 1) = 2;
  EXPECT_TRUE(geom::approx_equal(dlt_homography(twice), Homography(d), 1e-12));
}

TEST(Dlt, RecoversPlantedProjective) {
  Mat3 planted;
  planted << 1.2, 0.1, 3.0, -0.2, 0.9, 1.0, 0.1, 0.05, 1.0;
  // unit-square images under `planted`, from OpenCV perspectiveTransform
  const std::vector<Point2> dst{{3.0, 1.0},
                                {3.8181818181818183, 0.7272727272727273},
                                {3.739130434782609, 1.4782608695652175},
                                {2.952380952380952, 1.8095238095238093}};
  std::vector<PointPair> pairs;
  for (int i = 0; i < 4; ++i) pairs.push_back({kUnitSquare[i], dst[i]});
  const Homography h = dlt_homography(pairs);
  const Mat3 a = h.canonical(), b = Homography(planted).canonical();
  EXPECT_LE((a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(), 1e-8);
  for (int i = 0; i < 4; ++i) EXPECT_LE(geom::distance(h.apply(kUnitSquare[i]), dst[i]), 1e-6);
}

TEST(Dlt, ExactOnRandomFourPointSets) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point2> src{{rng.uniform(0, 100), rng.uniform(0, 100)},
                            {rng.uniform(200, 300), rng.uniform(0, 100)},
                            {rng.uniform(200, 300), rng.uniform(200, 300)},
                            {rng.uniform(0, 100), rng.uniform(200, 300)}};
    Mat3 m;
    m << rng.uniform(0.5, 2), rng.uniform(-0.3, 0.3), rng.uniform(-20, 20), rng.uniform(-0.3, 0.3),
        rng.uniform(0.5, 2), rng.uniform(-20, 20), rng.uniform(-5e-4, 5e-4),
        rng.uniform(-5e-4, 5e-4), 1;
    const auto pairs = pairs_through(m, src);
    const Homography h = dlt_homography(pairs);
    for (const auto& p : pairs) EXPECT_LT(geom::distance(h.apply(p.src), p.dst), 1e-6);
  }
}

TEST(Dlt, TranslationEquivariance) {
  Mat3 m;
  m << 1.1, 0.2, 5, -0.1, 0.9, 3, 2e-4, -1e-4, 1;
  const std::vector<Point2> src{{10, 10}, {200, 20}, {190, 150}, {15, 160}, {90, 80}};
  const Homography h = dlt_homography(pairs_through(m, src));
  std::vector<PointPair> moved;
  for (const auto& p : pairs_through(m, src)) moved.push_back({p.src + Point2{40, -25}, p.dst});
  const Homography g = dlt_homography(moved);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Point2 p{rng.uniform(0, 200), rng.uniform(0, 160)};
    EXPECT_LE(geom::distance(g.apply(p + Point2{40, -25}), h.apply(p)), 1e-8);
  }
}

TEST(Dlt, NoiseRobustness) {
  Rng rng(99);
  const std::vector<Point2> quad{{0, 0}, {1000, 0}, {1000, 700}, {0, 700}};
  std::vector<double> errors;
  for (int trial = 0; trial < 100; ++trial) {
    Mat3 m;
    m << 0.5, 0.05, 100, -0.03, 0.45, 80, 1e-4, 5e-5, 1;
    const Homography truth(m);
    std::vector<PointPair> pairs;
    for (const Point2 p : quad) {
      pairs.push_back({p, truth.apply(p) + Point2{rng.normal(0, 0.5), rng.normal(0, 0.5)}});
    }
    const Homography h = dlt_homography(pairs);
    for (const Point2 p : quad) errors.push_back(geom::distance(h.apply(p), truth.apply(p)));
  }
  std::nth_element(errors.begin(), errors.begin() + errors.size() / 2, errors.end());
  EXPECT_LE(errors[errors.size() / 2], 2.0);
}

TEST(Dlt, Errors) {
  const std::vector<PointPair> collinear{{{0, 0}, {0, 0}}, {{1, 1}, {1, 0}}, {{2, 2}, {1, 1}},
                                         {{0, 1}, {0, 1}}};
  EXPECT_ERROR_CODE(dlt_homography(collinear), ErrorCode::kCollinearPoints);
  const std::vector<PointPair> three{{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
  EXPECT_ERROR_CODE(dlt_homography(three), ErrorCode::kInvalidArgument);
}

TEST(ScreenQuad, OrderingAndValidation) {
  const auto c = order_corners({Point2{120, 80}, Point2{20, 30}, Point2{20, 80}, Point2{120, 30}});
  EXPECT_EQ(c[0].x, 20);
  EXPECT_EQ(c[0].y, 30);
  EXPECT_EQ(c[1].x, 120);
  EXPECT_EQ(c[2].y, 80);
  EXPECT_EQ(c[3].x, 20);
  EXPECT_ERROR_CODE(ScreenQuad({Point2{0, 0}, Point2{5, 0}, Point2{10, 0}, Point2{0, 5}}),
                    ErrorCode::kDegenerateQuad);
  EXPECT_ERROR_CODE(ScreenQuad({Point2{0, 0}, Point2{10, 10}, Point2{10, 0}, Point2{0, 10}}),
                    ErrorCode::kDegenerateQuad);
}

TEST(FrameToReference, IdentityWhenQuadEqualsReference) {
  const auto ref = reference_corners(300, 200);
  EXPECT_TRUE(geom::approx_equal(frame_to_reference(ScreenQuad(ref), ref), Homography(), 1e-12));
}

TEST(DetectScreenQuad, AxisAlignedRectangle) {
  GrayImage img(160, 120, 0);
  for (int y = 30; y < 80; ++y)
    for (int x = 20; x < 120; ++x) img(x, y) = 255;
  const ScreenQuad q = detect_screen_quad(img);
  const Point2 want[4] = {{20, 30}, {120, 30}, {120, 80}, {20, 80}};
  for (int i = 0; i < 4; ++i) EXPECT_LE(geom::distance(q[i], want[i]), 1.0) << i;
}

TEST(DetectScreenQuad, BlankImage) {
  EXPECT_ERROR_CODE(detect_screen_quad(GrayImage(100, 80, 40)), ErrorCode::kInsufficientLines);
}

TEST(DetectScreenQuad, SmallQuadRejected) {
  GrayImage img(200, 200, 0);
  for (int y = 90; y < 120; ++y)
    for (int x = 90; x < 130; ++x) img(x, y) = 255;
  ScreenFindConfig cfg;
  cfg.min_side = 10;
  cfg.hough_threshold = 15;
  EXPECT_ERROR_CODE(detect_screen_quad(img, cfg), ErrorCode::kDegenerateQuad);
  cfg.min_area_fraction = 0.01;
  EXPECT_NO_THROW(detect_screen_quad(img, cfg));
}

TEST(DetectScreenQuad, SynthcamSceneCornersAndKeyCentres) {
  const auto l = layout::builtin_layout("ipad-digits");
  for (const char* preset : {"front", "left-front", "right-front"}) {
    const auto cfg = synthcam::make_scene(l, synthcam::camera_preset(preset));
    const GrayImage img = synthcam::render_scene(cfg);
    const ScreenQuad q = detect_screen_quad(img);
    const auto truth = synthcam::screen_corners(cfg);
    for (int i = 0; i < 4; ++i) EXPECT_LE(geom::distance(q[i], truth[i]), 1.0) << preset << i;

    const Homography f2r =
        frame_to_reference(q, reference_corners(l.ref_width(), l.ref_height()));
    for (const auto& k : l.keys()) {
      const Point2 in_frame = cfg.reference_to_frame.apply(k.rect.center());
      EXPECT_LE(geom::distance(f2r.apply(in_frame), k.rect.center()), 1.5) << preset << k.label;
    }
  }
}

TEST(ScreenfindJson, RoundTrip) {
  Mat3 m;
  m << 1.5, 0.1, 3, -0.2, 0.8, 4, 1e-3, 2e-3, 1;
  const auto j = to_json(Homography(m));
  EXPECT_EQ(j.at("maps"), "frame_to_reference");
  EXPECT_TRUE(geom::approx_equal(homography_from_json(j), Homography(m), 1e-15));
  const ScreenQuad q({Point2{1, 2}, Point2{50, 3}, Point2{49, 40}, Point2{2, 41}});
  const ScreenQuad back = quad_from_json(to_json(q));
  for (int i = 0; i < 4; ++i) EXPECT_EQ(back[i].x, q[i].x);
}
