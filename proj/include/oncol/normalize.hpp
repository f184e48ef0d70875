#pragma once

#include <span>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "oncol/dualquat.hpp"
#include "oncol/field.hpp"

namespace oncol {

/// Affine map into the unit-diagonal first-quadrant space of Eqs. 16-17:
/// normalize(x) = (1/scale) * R * (x - bias), rescale is the exact inverse.
struct NormalizationFrame {
  double scale{1.0};
  Vec3 bias{0.0, 0.0, 0.0};
  Eigen::Matrix3d rotation{Eigen::Matrix3d::Identity()};

  bool is_axis_aligned() const {
    return (rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12;
  }
};

inline Vec3 normalize_point(const NormalizationFrame& f, const Vec3& x) {
  return (f.rotation * (x - f.bias)) / f.scale;
}

inline Vec3 rescale_point(const NormalizationFrame& f, const Vec3& xn) {
  return f.scale * (f.rotation.transpose() * xn) + f.bias;
}

/// Directional quantities (velocities) drop the bias.
inline Vec3 normalize_vector(const NormalizationFrame& f, const Vec3& v) {
  return (f.rotation * v) / f.scale;
}

/// Back-map for displacement-like vectors (field forces). Using the same
/// scale factor as rescale_point makes world-space integration equivalent
/// to integrating in normalized space and mapping the trajectory back.
inline Vec3 rescale_vector(const NormalizationFrame& f, const Vec3& vn) {
  return f.scale * (f.rotation.transpose() * vn);
}

/// Bias = min corner and scale = diagonal of the (rotated) bounding box,
/// so normalized points land in the first quadrant with unit diagonal.
/// align_to_diagonal rotates (goal - start) onto (1,1,1)/sqrt(3) first.
inline NormalizationFrame frame_from_trajectory(std::span<const Vec3> reference,
                                                bool align_to_diagonal = false) {
  if (reference.size() < 2) throw Error("frame_from_trajectory: need >= 2 points");

  NormalizationFrame frame;
  if (align_to_diagonal) {
    const Vec3 dir = reference.back() - reference.front();
    if (dir.norm() > 1e-12) {
      const Vec3 target = Vec3(1.0, 1.0, 1.0).normalized();
      frame.rotation =
          Eigen::Quaterniond::FromTwoVectors(dir.normalized(), target).toRotationMatrix();
    }
  }

  Vec3 lo = frame.rotation * reference[0];
  Vec3 hi = lo;
  for (const Vec3& p : reference) {
    const Vec3 q = frame.rotation * p;
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  const double diag = (hi - lo).norm();
  if (diag < 1e-12) throw Error("frame_from_trajectory: degenerate trajectory (all points identical)");
  frame.scale = diag;
  frame.bias = frame.rotation.transpose() * lo;
  return frame;
}

/// Ellipsoids stay axis-aligned under identity rotation (C preserved
/// exactly); under a rotated frame the obstacle is conservatively replaced
/// by its bounding sphere, which is exact for spheres.
inline EllipsoidObstacle normalize_obstacle(const NormalizationFrame& f,
                                            const EllipsoidObstacle& obstacle) {
  EllipsoidObstacle out;
  out.center = normalize_point(f, obstacle.center);
  out.velocity = normalize_vector(f, obstacle.velocity);
  if (f.is_axis_aligned()) {
    out.radii = obstacle.radii / f.scale;
  } else {
    const double r = obstacle.radii.maxCoeff() / f.scale;
    out.radii = Vec3(r, r, r);
  }
  return out;
}

}  // namespace oncol
