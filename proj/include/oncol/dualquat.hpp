#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace oncol {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vec3 = Eigen::Vector3d;

/// Plain Hamilton quaternion. Rotations are kept unit-norm; pure
/// translations use the (0, t) form.
struct Quaternion {
  double w{1.0};
  double x{0.0};
  double y{0.0};
  double z{0.0};

  static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

  static Quaternion pure_translation(const Vec3& t) {
    return {0.0, t.x(), t.y(), t.z()};
  }

  static Quaternion from_axis_angle(const Vec3& axis, double angle) {
    const Vec3 v = axis.normalized();
    const double h = 0.5 * angle;
    const double s = std::sin(h);
    return {std::cos(h), v.x() * s, v.y() * s, v.z() * s};
  }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quaternion conjugate() const { return {w, -x, -y, -z}; }

  Quaternion normalized() const {
    const double n = norm();
    if (n <= 0.0) throw Error("cannot normalize zero quaternion");
    return {w / n, x / n, y / n, z / n};
  }

  /// Same rotation, sign fixed to w >= 0 (deterministic serialization).
  Quaternion canonicalized() const { return w < 0.0 ? Quaternion{-w, -x, -y, -z} : *this; }

  Quaternion operator-() const { return {-w, -x, -y, -z}; }
  Quaternion operator+(const Quaternion& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
  Quaternion operator-(const Quaternion& o) const { return {w - o.w, x - o.x, y - o.y, z - o.z}; }
  Quaternion operator*(double k) const { return {w * k, x * k, y * k, z * k}; }

  /// Hamilton product.
  Quaternion operator*(const Quaternion& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Vec3 vec() const { return {x, y, z}; }

  /// Rotate a 3-vector by this (unit) quaternion.
  Vec3 rotate(const Vec3& p) const {
    const Quaternion r = (*this) * Quaternion::pure_translation(p) * conjugate();
    return r.vec();
  }
};

inline double dot(const Quaternion& a, const Quaternion& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double norm(const Quaternion& q) { return q.norm(); }

/// Unit dual quaternion q = real + eta * dual with eta^2 = 0.
/// real encodes rotation, dual = 1/2 (q_t x q_r) encodes translation.
struct DualQuaternion {
  Quaternion real{};
  Quaternion dual{0.0, 0.0, 0.0, 0.0};

  static DualQuaternion identity() { return {Quaternion::identity(), {0.0, 0.0, 0.0, 0.0}}; }

  DualQuaternion conjugate() const { return {real.conjugate(), dual.conjugate()}; }

  /// Both invariants of a unit dual quaternion.
  bool is_unit(double tol_real = 1e-9, double tol_orth = 1e-8) const {
    return std::abs(real.norm() - 1.0) <= tol_real && std::abs(dot(real, dual)) <= tol_orth;
  }
};

/// eta^2 = 0 algebra: (A + eta B)(C + eta D) = AC + eta (AD + BC).
inline DualQuaternion dual_quaternion_multiply(const DualQuaternion& a, const DualQuaternion& b) {
  return {a.real * b.real, a.real * b.dual + a.dual * b.real};
}

inline DualQuaternion operator*(const DualQuaternion& a, const DualQuaternion& b) {
  return dual_quaternion_multiply(a, b);
}

/// SE(3) pose: translation in meters plus a unit rotation quaternion.
struct Pose {
  Vec3 translation{0.0, 0.0, 0.0};
  Quaternion rotation{};
};

inline DualQuaternion pose_to_dual_quaternion(const Pose& p) {
  const double n = p.rotation.norm();
  if (std::abs(n - 1.0) > 1e-6)
    throw Error("invalid pose: rotation quaternion norm " + std::to_string(n) + " is not unit");
  const Quaternion qr = p.rotation.normalized().canonicalized();
  const Quaternion qt = Quaternion::pure_translation(p.translation);
  return {qr, (qt * qr) * 0.5};
}

inline Pose dual_quaternion_to_pose(const DualQuaternion& q) {
  const Quaternion qr = q.real.normalized();
  const Quaternion qt = (q.dual * 2.0) * qr.conjugate();
  return {qt.vec(), qr.canonicalized()};
}

/// Pose relative to the trajectory's final pose (delta_i = q_i x q_last).
struct FeaturizedPose {
  DualQuaternion delta{};
};

struct FeaturizedTrajectory {
  std::vector<FeaturizedPose> deltas;
};

enum class FeaturizeMode {
  paper,      // delta_i = q_i x q_last, as written
  conjugate,  // delta_i = q_i x conj(q_last), the usual relative pose
};

/// Featurize all but the final pose against the final pose. Output length
/// is trajectory.size() - 1.
inline FeaturizedTrajectory featurize(const std::vector<Pose>& trajectory,
                                      FeaturizeMode mode = FeaturizeMode::paper) {
  if (trajectory.size() < 2)
    throw Error("featurize: trajectory too short (" + std::to_string(trajectory.size()) +
                " poses, need >= 2)");
  DualQuaternion last = pose_to_dual_quaternion(trajectory.back());
  if (mode == FeaturizeMode::conjugate) last = last.conjugate();
  FeaturizedTrajectory out;
  out.deltas.reserve(trajectory.size() - 1);
  for (std::size_t i = 0; i + 1 < trajectory.size(); ++i)
    out.deltas.push_back({pose_to_dual_quaternion(trajectory[i]) * last});
  return out;
}

/// Semantic similarity of Eq.-5 form: sign-invariant distance between the
/// rotational parts. dual_weight > 0 additionally includes the dual part
/// (0 reproduces the published metric, which ignores translation).
inline double semantic_similarity(const FeaturizedPose& a, const FeaturizedPose& b,
                                  double dual_weight = 0.0) {
  const Quaternion& ar = a.delta.real;
  const Quaternion& br = b.delta.real;
  const Quaternion& ad = a.delta.dual;
  const Quaternion& bd = b.delta.dual;
  const Quaternion rm = ar - br, rp = ar + br;
  double minus = dot(rm, rm), plus = dot(rp, rp);
  if (dual_weight != 0.0) {
    const Quaternion dm = ad - bd, dp = ad + bd;
    const double w2 = dual_weight * dual_weight;
    minus += w2 * dot(dm, dm);
    plus += w2 * dot(dp, dp);
  }
  return std::sqrt(std::min(minus, plus));
}

}  // namespace oncol
