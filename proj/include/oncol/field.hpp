#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <span>

#include "oncol/dualquat.hpp"

namespace oncol {

/// Axis-aligned ellipsoid with C(x) = 1 on its surface. velocity is nonzero
/// for moving obstacles (other arms, drifting scene objects).
struct EllipsoidObstacle {
  Vec3 center{0.0, 0.0, 0.0};
  Vec3 radii{1.0, 1.0, 1.0};
  Vec3 velocity{0.0, 0.0, 0.0};

  static EllipsoidObstacle sphere(const Vec3& center, double radius,
                                  const Vec3& velocity = Vec3::Zero()) {
    return {center, Vec3(radius, radius, radius), velocity};
  }
};

/// Gains of the dynamic potential field, p = [lambda, beta, eta].
/// beta > 1 keeps the gradient finite at the theta = pi/2 branch boundary.
struct FieldParams {
  double lambda{10.0};
  double beta{4.0};
  double eta{1.0};
};

inline double isopotential(const EllipsoidObstacle& obstacle, const Vec3& x) {
  double c = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = (x[k] - obstacle.center[k]) / obstacle.radii[k];
    c += d * d;
  }
  return c;
}

/// Angle between the (relative) velocity and the obstacle-to-system ray.
/// Undefined when the velocity vanishes or x sits on the center; callers
/// treat the field as zero there.
inline std::optional<double> approach_angle(const Vec3& x, const Vec3& v, const Vec3& o) {
  const Vec3 r = x - o;
  const double rn = r.norm(), vn = v.norm();
  if (rn < 1e-12 || vn < 1e-12) return std::nullopt;
  const double c = std::clamp(r.dot(v) / (rn * vn), -1.0, 1.0);
  return std::acos(c);
}

inline std::atomic<std::uint64_t>& field_singularity_count() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}

/// U_D of Eq.-13 form, active only while moving toward the obstacle
/// (theta in [pi/2, pi]). Velocities are taken relative to the obstacle.
inline double potential(const FieldParams& params, const EllipsoidObstacle& obstacle,
                        const Vec3& x, const Vec3& v) {
  const Vec3 vrel = v - obstacle.velocity;
  const auto theta = approach_angle(x, vrel, obstacle.center);
  if (!theta) return 0.0;
  const double cos_t = std::cos(*theta);
  if (cos_t >= 0.0) return 0.0;
  const double c = isopotential(obstacle, x);
  return params.lambda * std::pow(-cos_t, params.beta) * vrel.norm() / std::pow(c, params.eta);
}

/// Negative gradient of the potential w.r.t. x:
///   lambda*|v|*(-cos t)^(beta-1) * C^-eta * (beta*grad(cos t) - eta*cos t/C * grad C)
/// Zero on the inactive half-space and at the degenerate configurations.
inline Vec3 field_force(const FieldParams& params, const EllipsoidObstacle& obstacle,
                        const Vec3& x, const Vec3& v) {
  const Vec3 vrel = v - obstacle.velocity;
  const Vec3 r = x - obstacle.center;
  const double rn = r.norm(), vn = vrel.norm();
  if (vn < 1e-12) return Vec3::Zero();
  if (rn < 1e-12) {
    if (field_singularity_count()++ == 0)
      std::cerr << "oncol: field evaluated at obstacle center, returning zero force\n";
    return Vec3::Zero();
  }
  const double cos_t = std::clamp(r.dot(vrel) / (rn * vn), -1.0, 1.0);
  if (cos_t >= 0.0) return Vec3::Zero();

  const double c = isopotential(obstacle, x);
  const Vec3 grad_cos = vrel / (rn * vn) - (cos_t / (rn * rn)) * r;
  Vec3 grad_c;
  for (int k = 0; k < 3; ++k)
    grad_c[k] = 2.0 * (x[k] - obstacle.center[k]) / (obstacle.radii[k] * obstacle.radii[k]);

  const double scale = params.lambda * vn * std::pow(-cos_t, params.beta - 1.0) /
                       std::pow(c, params.eta);
  return scale * (params.beta * grad_cos - (params.eta * cos_t / c) * grad_c);
}

/// Superposition over an obstacle set.
inline Vec3 total_field_force(const FieldParams& params,
                              std::span<const EllipsoidObstacle> obstacles, const Vec3& x,
                              const Vec3& v) {
  Vec3 sum = Vec3::Zero();
  for (const EllipsoidObstacle& ob : obstacles) sum += field_force(params, ob, x, v);
  return sum;
}

}  // namespace oncol
