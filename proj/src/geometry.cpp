#include "cpsl/geometry.hpp"

#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "cpsl/errors.hpp"
#include "cpsl/parallel.hpp"
#include "kernels.hpp"

namespace cpsl {

RelativePose relativePose(const Camera& src, const Camera& dst) {
  const Mat3 R = dst.rotation() * src.rotation().transpose();
  const Vec3 t = dst.translation() - R * src.translation();
  return {R, t};
}

PlaneHomography planeHomography(const Camera& src, const Camera& dst, double depth) {
  if (!(depth > 0.0)) throw InvariantError("plane depth must be positive");
  const auto [R, t] = relativePose(src, dst);
  const Vec3 n(0.0, 0.0, 1.0);
  // Source-plane points map into the target frame via M; invert to go back.
  const Mat3 M = R + t * n.transpose() / depth;
  const double det = M.determinant();
  if (!(std::abs(det) > 1e-9)) {
    throw DegenerateCameraError("layer plane passes through the target camera center");
  }
  Mat3 H = src.intrinsics() * M.inverse() * dst.intrinsicsInverse();
  if (H(2, 2) != 0.0) H /= H(2, 2);
  if (!(std::abs(H.determinant()) > 1e-12)) {
    throw DegenerateCameraError("plane homography is singular");
  }
  return {H, depth};
}

Reprojection reprojectPoint(const Camera& src, const Camera& dst, const Vec2& pixel, double z) {
  if (!(z > 0.0)) throw InvariantError("reprojection depth must be positive");
  const Vec3 xs = z * (src.intrinsicsInverse() * Vec3(pixel.x(), pixel.y(), 1.0));
  const auto [R, t] = relativePose(src, dst);
  const Vec3 xt = R * xs + t;
  if (!(xt.z() > 0.0)) throw BehindCameraError("point lies behind the target camera");
  const Vec3 p = dst.intrinsics() * xt;
  return {Vec2(p.x() / p.z(), p.y() / p.z()), xt.z()};
}

double parallaxMagnitude(const Camera& src, const Camera& dst, const Vec2& pixel, double zNear,
                         double zFar) {
  if (!(zNear > 0.0) || !(zNear < zFar)) {
    throw InvariantError("parallax needs 0 < zNear < zFar");
  }
  const Reprojection a = reprojectPoint(src, dst, pixel, zNear);
  const Reprojection b = reprojectPoint(src, dst, pixel, zFar);
  return (a.pixel - b.pixel).norm();
}

Layer warpLayer(const Layer& layer, const PlaneHomography& H, int outWidth, int outHeight,
                Filter filter) {
  Layer out;
  out.depth = layer.depth;
  out.confidence = layer.confidence;
  out.saliencyScore = layer.saliencyScore;
  out.instanceIds = layer.instanceIds;
  out.rgba = ImageF(outWidth, outHeight, 4, 0.0f);

  const Mat3& M = H.H;
  parallelFor(0, outHeight, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      float* dst = out.rgba.row(y);
      for (int x = 0; x < outWidth; ++x, dst += 4) detail::sampleWarp(layer.rgba, M, x, y, filter, dst);
    }
  }, 8);
  return out;
}

Camera orbitPose(const Camera& src, double yawDeg, double pitchDeg, double baseline,
                 double pivotDepth) {
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  // Work in the source camera frame, then express the result in world.
  const Mat3 yaw = Eigen::AngleAxisd(yawDeg * kDeg, Vec3::UnitY()).toRotationMatrix();
  const Mat3 pitch = Eigen::AngleAxisd(pitchDeg * kDeg, Vec3::UnitX()).toRotationMatrix();
  const Mat3 camToSrc = yaw * pitch;
  const Vec3 pivot(0.0, 0.0, pivotDepth);
  Vec3 centerSrc = pivot - camToSrc * pivot;
  centerSrc += camToSrc * Vec3(baseline, 0.0, 0.0);

  const Mat3 srcToWorld = src.rotation().transpose();
  const Vec3 srcCenter = src.center();
  const Mat3 camToWorld = srcToWorld * camToSrc;
  const Vec3 centerWorld = srcToWorld * centerSrc + srcCenter;
  const Mat3 R = camToWorld.transpose();
  const Vec3 t = -R * centerWorld;
  return src.withPose(R, t);
}

}  // namespace cpsl
