#pragma once

#include <cmath>
#include <limits>

#include "oncol/dualquat.hpp"

namespace oncol {

/// Collaborative phase coupling: a coupled arm's phase rate drops toward
/// zero as its end-effector nears a higher-priority arm. Exactly one arm
/// of an interacting pair should have coupling enabled (lower priority
/// value = higher priority = never yields).
struct PhaseCoupling {
  double alpha_hat{25.0 / 3.0};
  double epsilon_s{0.25};  // inflation radius, m
  bool enabled{false};
  int priority{0};
};

/// Eq.-22 vicinity: the distance inside the inflation radius, unbounded
/// (+inf) outside it.
inline double vicinity(const Vec3& x, const Vec3& x_other, double epsilon_s) {
  const double d = (x - x_other).norm();
  return d <= epsilon_s ? d : std::numeric_limits<double>::infinity();
}

/// alpha_s = alpha_hat * (1 - e^-d); alpha_hat exactly when unbounded,
/// zero at contact. Disabled coupling runs at alpha_hat unconditionally.
inline double phase_rate(const PhaseCoupling& coupling, const Vec3& x, const Vec3& x_other) {
  if (!coupling.enabled) return coupling.alpha_hat;
  const double d = vicinity(x, x_other, coupling.epsilon_s);
  return coupling.alpha_hat * (1.0 - std::exp(-d));
}

/// Same law against a precomputed vicinity (for the nearest of several
/// higher-priority arms).
inline double phase_rate_from_vicinity(const PhaseCoupling& coupling, double d) {
  if (!coupling.enabled) return coupling.alpha_hat;
  return coupling.alpha_hat * (1.0 - std::exp(-d));
}

}  // namespace oncol
