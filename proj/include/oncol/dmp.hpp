#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "oncol/dualquat.hpp"

namespace oncol {

struct DmpGains {
  double alpha_z{25.0};
  double beta_z{25.0 / 4.0};
  double alpha_s_hat{25.0 / 3.0};
  double tau{1.0};  // seconds
};

/// Gaussian basis over the phase. Centers decay 1 -> 0 with the canonical
/// system; widths come from the neighbor spacing so adjacent kernels
/// overlap at e^-1 regardless of where the center sits on the decay.
struct RbfBasis {
  std::vector<double> centers;
  std::vector<double> widths;

  std::size_t count() const { return centers.size(); }

  static RbfBasis make(std::size_t count = 30, double alpha_s_hat = 25.0 / 3.0) {
    RbfBasis b;
    b.centers.resize(count);
    b.widths.resize(count);
    for (std::size_t i = 0; i < count; ++i)
      b.centers[i] = std::exp(-alpha_s_hat * static_cast<double>(i) / static_cast<double>(count));
    for (std::size_t i = 0; i + 1 < count; ++i) {
      const double gap = b.centers[i] - b.centers[i + 1];
      b.widths[i] = 2.0 / (gap * gap);
    }
    b.widths[count - 1] = b.widths[count - 2];
    return b;
  }
};

struct DmpState {
  Vec3 x{0.0, 0.0, 0.0};  // position
  Vec3 z{0.0, 0.0, 0.0};  // scaled velocity, xdot = z / tau
  double s{1.0};          // phase in (0, 1]
};

constexpr double kPhaseFloor = 1e-12;

/// Discrete DMP over three Cartesian axes sharing one canonical phase.
struct DmpModel {
  DmpGains gains{};
  RbfBasis basis{};
  std::array<std::vector<double>, 3> weights{};
  Vec3 start{0.0, 0.0, 0.0};
  Vec3 goal{0.0, 0.0, 0.0};
  bool degenerate{false};

  /// f(s) = s * (sum w_i Psi_i) / (sum Psi_i) per axis; zero once the basis
  /// support has decayed away.
  Vec3 forcing(double s) const {
    const std::size_t c = basis.count();
    double den = 0.0;
    Vec3 num = Vec3::Zero();
    for (std::size_t i = 0; i < c; ++i) {
      const double d = s - basis.centers[i];
      const double psi = std::exp(-basis.widths[i] * d * d);
      den += psi;
      for (int k = 0; k < 3; ++k) num[k] += weights[k][i] * psi;
    }
    if (den < 1e-300) return Vec3::Zero();
    return num * (s / den);
  }

  DmpState initial_state() const { return {start, Vec3::Zero(), 1.0}; }

  Vec3 velocity(const DmpState& st) const { return st.z / gains.tau; }

  /// One explicit-Euler tick. alpha_s is supplied externally so the phase
  /// law can be replaced by the collaborative coupling term.
  DmpState step(const DmpState& st, double dt, const Vec3& perturbation, double alpha_s) const {
    if (dt <= 0.0) throw Error("step: dt must be positive");
    static const char* axis_name[3] = {"x", "y", "z"};
    for (int k = 0; k < 3; ++k)
      if (!std::isfinite(perturbation[k]))
        throw Error(std::string("step: non-finite perturbation component ") + axis_name[k]);
    const Vec3 f = forcing(st.s);
    DmpState out;
    const Vec3 zdot =
        (gains.alpha_z * (gains.beta_z * (goal - st.x) - st.z) + f + perturbation) / gains.tau;
    out.z = st.z + dt * zdot;
    out.x = st.x + dt * st.z / gains.tau;
    out.s = std::max(st.s - dt * alpha_s * st.s / gains.tau, kPhaseFloor);
    return out;
  }

  using PerturbationSource = std::function<Vec3(const Vec3& x, const Vec3& v, double s)>;
  using AlphaSource = std::function<double(const Vec3& x, double s)>;

  /// Integrate for ceil(duration/dt) ticks; returns ticks + 1 states with
  /// the initial state first. Sample k is at time k*dt.
  std::vector<DmpState> rollout(double dt, double duration,
                                const PerturbationSource& perturbation_source = {},
                                const AlphaSource& alpha_s_source = {}) const {
    if (dt <= 0.0) throw Error("rollout: dt must be positive");
    if (duration < 0.0) throw Error("rollout: duration must be nonnegative");
    const std::size_t steps = static_cast<std::size_t>(std::ceil(duration / dt - 1e-12));
    std::vector<DmpState> states;
    states.reserve(steps + 1);
    states.push_back(initial_state());
    for (std::size_t k = 0; k < steps; ++k) {
      const DmpState& st = states.back();
      const Vec3 pert =
          perturbation_source ? perturbation_source(st.x, velocity(st), st.s) : Vec3::Zero();
      const double alpha = alpha_s_source ? alpha_s_source(st.x, st.s) : gains.alpha_s_hat;
      try {
        states.push_back(step(st, dt, pert, alpha));
      } catch (const Error& e) {
        throw Error(std::string(e.what()) + " at timestep " + std::to_string(k));
      }
    }
    return states;
  }
};

/// Weights by per-basis weighted normal equations against the standard
/// forcing target tau^2*a - alpha_z*(beta_z*(g - x) - tau*v). The phase
/// sequence uses the same Euler recurrence as step(), so fitted models
/// reproduce the demonstration under the integrator that executes them.
inline DmpModel fit_lwr(const std::vector<Vec3>& demonstration, double dt,
                        DmpGains gains = {}, RbfBasis basis = RbfBasis::make()) {
  const std::size_t n = demonstration.size();
  if (n < 3) throw Error("fit_lwr: demonstration needs >= 3 samples");
  if (dt <= 0.0) throw Error("fit_lwr: dt must be positive");

  DmpModel model;
  gains.tau = static_cast<double>(n - 1) * dt;
  model.gains = gains;
  model.basis = std::move(basis);
  model.start = demonstration.front();
  model.goal = demonstration.back();
  const std::size_t c = model.basis.count();
  for (int k = 0; k < 3; ++k) model.weights[k].assign(c, 0.0);

  Vec3 lo = demonstration[0], hi = demonstration[0];
  for (const Vec3& p : demonstration) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if ((hi - lo).norm() < 1e-12) {
    model.degenerate = true;
    return model;
  }

  // Invert the discrete update map: with z_j = tau*(x_{j+1} - x_j)/dt the
  // Euler recurrence reproduces the samples exactly when f(s_j) hits the
  // target below, so the only fit error left is the RBF residual.
  std::vector<Vec3> zed(n);
  for (std::size_t j = 0; j + 1 < n; ++j)
    zed[j] = gains.tau * (demonstration[j + 1] - demonstration[j]) / dt;
  zed[n - 1] = zed[n - 2];

  std::vector<double> phase(n);
  phase[0] = 1.0;
  const double decay = 1.0 - gains.alpha_s_hat * dt / gains.tau;
  for (std::size_t j = 1; j < n; ++j)
    phase[j] = std::max(phase[j - 1] * decay, kPhaseFloor);

  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < c; ++i) {
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j + 1 < n; ++j) {
        const double d = phase[j] - model.basis.centers[i];
        const double psi = std::exp(-model.basis.widths[i] * d * d);
        const double target =
            gains.tau * (zed[j + 1][k] - zed[j][k]) / dt -
            gains.alpha_z * (gains.beta_z * (model.goal[k] - demonstration[j][k]) - zed[j][k]);
        num += psi * phase[j] * target;
        den += psi * phase[j] * phase[j];
      }
      model.weights[k][i] = (den < 1e-300) ? 0.0 : num / den;
    }
  }
  return model;
}

}  // namespace oncol
