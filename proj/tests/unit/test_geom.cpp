#include <cmath>
#include <numbers>

#include "shoulderscope/geom.hpp"
#include "support.hpp"

using namespace shoulderscope;
using namespace shoulderscope::geom;

namespace {

Mat3 random_homography(Rng& rng) {
  Mat3 m;
  m << rng.uniform(0.5, 2.0), rng.uniform(-0.3, 0.3), rng.uniform(-50, 50),
      rng.uniform(-0.3, 0.3), rng.uniform(0.5, 2.0), rng.uniform(-50, 50),
      rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), 1.0;
  return m;
}

}  // namespace

TEST(Dehomogenize, DividesByW) {
  const Point2 a = dehomogenize({2, 4, 2});
  EXPECT_DOUBLE_EQ(a.x, 1.0);
  EXPECT_DOUBLE_EQ(a.y, 2.0);
  const Point2 b = dehomogenize({3, 5, 1});
  EXPECT_DOUBLE_EQ(b.x, 3.0);
  EXPECT_DOUBLE_EQ(b.y, 5.0);
  EXPECT_ERROR_CODE(dehomogenize({1, 1, 0}), ErrorCode::kPointAtInfinity);
}

TEST(IntrinsicMatrix, Examples) {
  EXPECT_TRUE(intrinsic_matrix(CameraIntrinsics(1, 1, 1, 0, 0)).isApprox(Mat3::Identity()));
  // numpy: 3.67 / 0.00398
  EXPECT_NEAR(CameraIntrinsics(3.67, 0.00398, 0.00398, 0, 0).fx_px(), 922.1105527638191, 1e-9);
  Mat3 want;
  want << 2, 0, 10, 0, 1, 20, 0, 0, 1;
  EXPECT_EQ(intrinsic_matrix(CameraIntrinsics(2, 1, 2, 10, 20)), want);
  EXPECT_ERROR_CODE(CameraIntrinsics(0, 1, 1, 0, 0), ErrorCode::kInvalidArgument);
}

TEST(ProjectPoint, Examples) {
  const CameraExtrinsics id;
  const Point2 a = dehomogenize(project_point(CameraIntrinsics(1, 1, 1, 0, 0), id, {0, 0, 5, 1}));
  EXPECT_NEAR(a.x, 0.0, 1e-15);
  EXPECT_NEAR(a.y, 0.0, 1e-15);
  const Point2 b =
      dehomogenize(project_point(CameraIntrinsics(100, 1, 1, 50, 50), id, {1, 2, 10, 1}));
  EXPECT_NEAR(b.x, 60.0, 1e-12);
  EXPECT_NEAR(b.y, 70.0, 1e-12);
  EXPECT_ERROR_CODE(project_point(CameraIntrinsics(1, 1, 1, 0, 0), id, {0, 0, -1, 1}),
                    ErrorCode::kBehindCamera);
}

TEST(Extrinsics, RejectsNonRotation) {
  Mat3 r = Mat3::Identity();
  r(0, 1) = 1e-3;
  EXPECT_ERROR_CODE(CameraExtrinsics(r, Vec3::Zero()), ErrorCode::kInvalidArgument);
  EXPECT_ERROR_CODE(CameraExtrinsics(-Mat3::Identity(), Vec3::Zero()),
                    ErrorCode::kInvalidArgument);
}

TEST(PlaneToWorld, Examples) {
  const HPoint3 a = plane_to_world(PlaneFrame::canonical(), {3, 4, 1});
  EXPECT_EQ((Vec3(a.x, a.y, a.z)), Vec3(3, 4, 0));
  EXPECT_EQ(a.w, 1.0);
  const HPoint3 b = plane_to_world(PlaneFrame({1, 1, 1}, {1, 0, 0}, {0, 1, 0}), {0, 0, 1});
  EXPECT_EQ((Vec3(b.x, b.y, b.z)), Vec3(1, 1, 1));
  const HPoint3 c = plane_to_world(PlaneFrame({0, 0, 0}, {0, 0, 1}, {0, 1, 0}), {2, 3, 1});
  EXPECT_EQ((Vec3(c.x, c.y, c.z)), Vec3(0, 3, 2));
  EXPECT_ERROR_CODE(plane_to_world(PlaneFrame::canonical(), {1, 1, 0}),
                    ErrorCode::kPointAtInfinity);
}

TEST(PlaneToImageHomography, FrontoParallelIsIdentity) {
  const auto h = plane_to_image_homography(CameraIntrinsics(1, 1, 1, 0, 0), CameraExtrinsics(),
                                           PlaneFrame({0, 0, 1}, {1, 0, 0}, {0, 1, 0}));
  EXPECT_TRUE(approx_equal(h, Homography(), 1e-12));
}

TEST(PlaneToImageHomography, TwoPathsAgree) {
  Rng rng(11);
  const CameraIntrinsics intr(4.0, 0.002, 0.002, 320, 240);
  const auto extr = look_at({100, -900, 600}, {0, 0, 0});
  const PlaneFrame pf({-80, -50, 0}, {1, 0, 0}, {0, 1, 0});
  const auto h = plane_to_image_homography(intr, extr, pf);
  for (int i = 0; i < 20; ++i) {
    const double s = rng.uniform(0, 160), t = rng.uniform(0, 100);
    const Point2 a = h.apply(s, t);
    const Point2 b = dehomogenize(project_point(intr, extr, plane_to_world(pf, {s, t, 1})));
    EXPECT_NEAR(a.x, b.x, 1e-9);
    EXPECT_NEAR(a.y, b.y, 1e-9);
  }
}

TEST(PlaneToImageHomography, PlaneThroughCameraIsDegenerate) {
  // the plane x = 0 contains the camera center at the origin
  EXPECT_ERROR_CODE(plane_to_image_homography(CameraIntrinsics(1, 1, 1, 0, 0), CameraExtrinsics(),
                                              PlaneFrame({0, 0, 1}, {0, 1, 0}, {0, 0, 1})),
                    ErrorCode::kDegenerateConfiguration);
}

TEST(ComposeBetweenViews, Examples) {
  Rng rng(3);
  const Homography h2(random_homography(rng));
  EXPECT_TRUE(approx_equal(compose_between_views(h2, h2), Homography(), 1e-12));
  EXPECT_TRUE(approx_equal(compose_between_views(Homography(2.0 * h2.matrix()), h2), Homography(),
                           1e-12));
  const Homography h1(random_homography(rng));
  const auto c = compose_between_views(h1, h2);
  for (int i = 0; i < 10; ++i) {
    const Point2 p{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    const Point2 a = c.apply(h2.apply(p));
    const Point2 b = h1.apply(p);
    EXPECT_NEAR(a.x, b.x, 1e-9);
    EXPECT_NEAR(a.y, b.y, 1e-9);
  }
  EXPECT_ERROR_CODE(Homography(Mat3::Zero()), ErrorCode::kSingularMatrix);
}

TEST(Apply, Examples) {
  const Point2 a = apply(Homography(), 5, 7);
  EXPECT_EQ(a.x, 5.0);
  EXPECT_EQ(a.y, 7.0);
  const Point2 b = apply(Homography(Vec3(2, 2, 1).asDiagonal().toDenseMatrix()), 3, 4);
  EXPECT_EQ(b.x, 6.0);
  EXPECT_EQ(b.y, 8.0);
  Mat3 m = Mat3::Identity();
  m(2, 0) = 0.1;
  const Point2 c = apply(Homography(m), 10, 0);
  EXPECT_NEAR(c.x, 5.0, 1e-15);
  EXPECT_NEAR(c.y, 0.0, 1e-15);
  EXPECT_ERROR_CODE(apply(Homography(m), -10, 0), ErrorCode::kPointAtInfinity);
}

TEST(Homography, RoundTripAndScaleInvariance) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Homography h(random_homography(rng));
    const Homography hc(rng.uniform(-5, 5) * h.matrix() + Mat3::Zero());
    const Point2 p{rng.uniform(-200, 200), rng.uniform(-200, 200)};
    const Point2 back = h.inverse().apply(h.apply(p));
    EXPECT_NEAR(back.x, p.x, 1e-9);
    EXPECT_NEAR(back.y, p.y, 1e-9);
    const Point2 a = h.apply(p), b = hc.apply(p);
    EXPECT_NEAR(a.x, b.x, 1e-12 * std::max(1.0, std::abs(a.x)));
    EXPECT_NEAR(a.y, b.y, 1e-12 * std::max(1.0, std::abs(a.y)));
  }
}

TEST(LookAt, ProducesProperRotation) {
  const auto e = look_at({300, -2000, 500}, {0, 0, 0});
  EXPECT_LT((e.R().transpose() * e.R() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(e.R().determinant(), 1.0, 1e-12);
  const HPoint2 q = project_point(CameraIntrinsics(1, 1, 1, 0, 0), e, {0, 0, 0, 1});
  EXPECT_NEAR(q.x / q.w, 0.0, 1e-12);
  EXPECT_NEAR(q.y / q.w, 0.0, 1e-12);
}
