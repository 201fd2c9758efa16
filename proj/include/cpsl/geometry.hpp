#pragma once

#include "cpsl/core.hpp"

namespace cpsl {

/// 3x3 map from target-view homogeneous pixel coordinates to source-view
/// pixel coordinates for the fronto-parallel plane at `layerDepth`.
struct PlaneHomography {
  Mat3 H = Mat3::Identity();
  double layerDepth = 1.0;

  Vec2 apply(double x, double y) const {
    const Vec3 p = H * Vec3(x, y, 1.0);
    return {p.x() / p.z(), p.y() / p.z()};
  }
};

/// Relative motion taking source-camera coordinates to target-camera
/// coordinates: X_t = R X_s + t.
struct RelativePose {
  Mat3 R;
  Vec3 t;
};
RelativePose relativePose(const Camera& src, const Camera& dst);

/// Homography induced by the plane z = depth in the source camera frame.
/// Throws DegenerateCameraError when the plane passes through the target
/// camera center, InvariantError when depth <= 0.
PlaneHomography planeHomography(const Camera& src, const Camera& dst, double depth);

struct Reprojection {
  Vec2 pixel;
  double depth;  // z of the point in the target camera frame
};

/// Unprojects `pixel` at source depth z, moves it into the target frame and
/// projects it. Throws BehindCameraError if the target depth is <= 0.
Reprojection reprojectPoint(const Camera& src, const Camera& dst, const Vec2& pixel, double z);

/// Screen-space distance between the target projections of `pixel` placed
/// at zNear and at zFar.
double parallaxMagnitude(const Camera& src, const Camera& dst, const Vec2& pixel, double zNear,
                         double zFar);

enum class Filter { Nearest, Bilinear };

/// Inverse-maps every target pixel through H into the source layer.
/// Samples falling outside the source are transparent. Alpha and
/// premultiplied color share the filter, so premultiplication is preserved.
Layer warpLayer(const Layer& layer, const PlaneHomography& H, int outWidth, int outHeight,
                Filter filter = Filter::Bilinear);

/// Target pose orbiting the source camera around the point on its optical
/// axis at `pivotDepth`: yaw about the vertical axis, pitch about the
/// horizontal axis (degrees), plus a lateral baseline along the rotated
/// camera x axis.
Camera orbitPose(const Camera& src, double yawDeg, double pitchDeg, double baseline,
                 double pivotDepth);

}  // namespace cpsl
