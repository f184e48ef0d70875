#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "oncol/dualquat.hpp"

namespace oncol {

enum class DemoKind { line, minjerk, arc, lift_place };

inline DemoKind demo_kind_from_string(const std::string& s) {
  if (s == "line") return DemoKind::line;
  if (s == "minjerk") return DemoKind::minjerk;
  if (s == "arc") return DemoKind::arc;
  if (s == "lift-place") return DemoKind::lift_place;
  throw Error("unknown demo kind '" + s + "' (expected line|minjerk|arc|lift-place)");
}

struct DemoGenSpec {
  DemoKind kind{DemoKind::minjerk};
  std::vector<Vec3> waypoints;
  double duration{1.0};
  std::size_t samples{100};  // produces samples + 1 poses
  Quaternion rotation_start{};
  Quaternion rotation_end{};  // slerped; equal to rotation_start for constant
  double arc_height{0.0};     // 0 = chord/4
  double lift_height{0.1};

  DemoGenSpec() { rotation_end = rotation_start; }
};

namespace detail {

/// Minimum-jerk time scaling, zero velocity/acceleration at both ends.
inline double min_jerk_fraction(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }

inline Quaternion slerp(const Quaternion& a, const Quaternion& b, double t) {
  Quaternion q1 = b;
  double d = dot(a, q1);
  if (d < 0.0) {
    q1 = -q1;
    d = -d;
  }
  if (d > 1.0 - 1e-10) {
    Quaternion out = a + (q1 - a) * t;
    return out.normalized();
  }
  const double omega = std::acos(std::clamp(d, -1.0, 1.0));
  const double sin_o = std::sin(omega);
  return (a * (std::sin((1.0 - t) * omega) / sin_o) + q1 * (std::sin(t * omega) / sin_o))
      .normalized();
}

struct Polyline {
  std::vector<Vec3> pts;
  std::vector<double> cumulative;  // arclength up to each vertex

  explicit Polyline(std::vector<Vec3> p) : pts(std::move(p)) {
    cumulative.resize(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
      cumulative[i] = cumulative[i - 1] + (pts[i] - pts[i - 1]).norm();
  }

  double length() const { return cumulative.back(); }

  Vec3 at_fraction(double f) const {
    const double target = std::clamp(f, 0.0, 1.0) * length();
    std::size_t i = 1;
    while (i + 1 < pts.size() && cumulative[i] < target) ++i;
    const double seg = cumulative[i] - cumulative[i - 1];
    const double a = seg > 0.0 ? (target - cumulative[i - 1]) / seg : 0.0;
    return (1.0 - a) * pts[i - 1] + a * pts[i];
  }
};

inline std::vector<Vec3> arc_points(const Vec3& a, const Vec3& b, double height,
                                    std::size_t samples) {
  const Vec3 chord = b - a;
  const double len = chord.norm();
  if (len < 1e-12) throw Error("arc: waypoints coincide");
  const double h = height > 0.0 ? height : len / 4.0;
  const Vec3 e1 = chord / len;
  Vec3 up = Vec3::UnitZ() - Vec3::UnitZ().dot(e1) * e1;
  if (up.norm() < 1e-9) up = Vec3::UnitY() - Vec3::UnitY().dot(e1) * e1;
  const Vec3 e2 = up.normalized();

  // Circle through the endpoints and the raised midpoint, in (e1, e2).
  const double half = len / 2.0;
  const double k = (h * h - half * half) / (2.0 * h);
  const double radius = std::sqrt(half * half + k * k);
  const Vec3 center = a + half * e1 + k * e2;
  double theta_a = std::atan2(-k, -half);
  const double theta_b = std::atan2(-k, half);
  if (theta_a < M_PI / 2.0) theta_a += 2.0 * M_PI;

  std::vector<Vec3> out;
  out.reserve(samples + 1);
  for (std::size_t i = 0; i <= samples; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(samples);
    const double th = theta_a + (theta_b - theta_a) * min_jerk_fraction(u);
    out.push_back(center + radius * (std::cos(th) * e1 + std::sin(th) * e2));
  }
  return out;
}

}  // namespace detail

/// Synthesize a demonstration trajectory of samples + 1 poses.
inline std::vector<Pose> generate_demo(const DemoGenSpec& spec) {
  if (spec.waypoints.size() < 2) throw Error("demo-gen: need >= 2 waypoints");
  if (spec.samples < 2) throw Error("demo-gen: need >= 2 samples");
  if (spec.duration <= 0.0) throw Error("demo-gen: duration must be positive");
  if ((spec.kind == DemoKind::arc || spec.kind == DemoKind::lift_place) &&
      spec.waypoints.size() != 2)
    throw Error("demo-gen: arc and lift-place take exactly 2 waypoints");

  std::vector<Vec3> points;
  switch (spec.kind) {
    case DemoKind::line: {
      detail::Polyline path(spec.waypoints);
      for (std::size_t i = 0; i <= spec.samples; ++i)
        points.push_back(
            path.at_fraction(static_cast<double>(i) / static_cast<double>(spec.samples)));
      break;
    }
    case DemoKind::minjerk: {
      detail::Polyline path(spec.waypoints);
      for (std::size_t i = 0; i <= spec.samples; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(spec.samples);
        points.push_back(path.at_fraction(detail::min_jerk_fraction(u)));
      }
      break;
    }
    case DemoKind::arc:
      points = detail::arc_points(spec.waypoints[0], spec.waypoints[1], spec.arc_height,
                                  spec.samples);
      break;
    case DemoKind::lift_place: {
      const Vec3 up(0.0, 0.0, spec.lift_height);
      detail::Polyline path({spec.waypoints[0], spec.waypoints[0] + up, spec.waypoints[1] + up,
                             spec.waypoints[1]});
      for (std::size_t i = 0; i <= spec.samples; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(spec.samples);
        points.push_back(path.at_fraction(detail::min_jerk_fraction(u)));
      }
      break;
    }
  }

  std::vector<Pose> poses;
  poses.reserve(points.size());
  const Quaternion r0 = spec.rotation_start.normalized();
  const Quaternion r1 = spec.rotation_end.normalized();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(points.size() - 1);
    poses.push_back({points[i], detail::slerp(r0, r1, u).canonicalized()});
  }
  return poses;
}

/// Sample indices closest to the spec's waypoints: the demo's critical
/// configurations within the densely sampled recording.
inline std::vector<std::size_t> critical_sample_indices(const DemoGenSpec& spec,
                                                        const std::vector<Pose>& poses) {
  std::vector<std::size_t> out{0};
  std::size_t cursor = 0;
  for (std::size_t w = 1; w + 1 < spec.waypoints.size(); ++w) {
    std::size_t best = cursor;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = cursor + 1; i + 1 < poses.size(); ++i) {
      const double d = (poses[i].translation - spec.waypoints[w]).norm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best > cursor) {
      out.push_back(best);
      cursor = best;
    }
  }
  out.push_back(poses.size() - 1);
  return out;
}

}  // namespace oncol
