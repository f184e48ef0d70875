#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "oncol/dmp.hpp"
#include "oncol/field.hpp"
#include "oncol/normalize.hpp"

namespace oncol {

struct OptimizerConfig {
  double lambda_p{0.1};        // energy-term weight
  double mass{1.0};            // point mass, kg
  std::size_t n_samples{0};    // N_t; 0 derives it from tau and dt
  double penalty_weight{1e3};  // exterior penalty on max(0, 1 - C)^2
  std::size_t max_evals{500};
  FieldParams initial_params{};
  std::pair<double, double> lambda_bounds{1e-2, 1e3};
  std::pair<double, double> beta_bounds{1.1, 16.0};
  std::pair<double, double> eta_bounds{0.1, 8.0};
  double dt{0.01};
};

struct OptimizationResult {
  FieldParams params{};
  double objective{0.0};
  std::size_t constraint_violations{0};
  std::size_t evaluations{0};
  bool converged{false};
  std::vector<double> trace;  // best-so-far penalized objective per evaluation
};

struct ObjectiveBreakdown {
  double cost{0.0};
  std::size_t violations{0};
  double penalty{0.0};

  bool finite() const { return std::isfinite(cost); }
};

struct FieldRolloutSample {
  double t{0.0};
  Vec3 x{0.0, 0.0, 0.0};
  Vec3 v{0.0, 0.0, 0.0};
  double min_c{std::numeric_limits<double>::infinity()};
};

namespace detail {

inline Vec3 interp_uniform(const std::vector<Vec3>& points, double fraction) {
  if (points.size() == 1) return points.front();
  const double u = std::clamp(fraction, 0.0, 1.0) * static_cast<double>(points.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(u), points.size() - 2);
  const double a = u - static_cast<double>(i);
  return (1.0 - a) * points[i] + a * points[i + 1];
}

}  // namespace detail

/// Eq.-19 evaluation: deviation plus speed-squared total variation over a
/// rollout perturbed by the field, all in normalized space, with the
/// stay-outside constraint tallied per sample.
inline ObjectiveBreakdown evaluate_field_objective(
    const FieldParams& params, const std::vector<Vec3>& reference, const DmpModel& model,
    const std::vector<EllipsoidObstacle>& obstacles, const OptimizerConfig& config,
    std::vector<FieldRolloutSample>* log = nullptr) {
  if (reference.size() < 2) throw Error("objective: reference needs >= 2 points");

  const double duration = model.gains.tau;
  std::size_t n_t;
  double dt;
  if (config.n_samples >= 2) {
    n_t = config.n_samples;
    dt = duration / static_cast<double>(n_t - 1);
  } else {
    dt = config.dt;
    n_t = static_cast<std::size_t>(std::ceil(duration / dt - 1e-12)) + 1;
  }

  const NormalizationFrame frame = frame_from_trajectory(reference);

  ObjectiveBreakdown out;
  const double inf = std::numeric_limits<double>::infinity();
  double dev = 0.0, energy = 0.0;
  Vec3 v_prev_n = Vec3::Zero();

  DmpState state = model.initial_state();
  for (std::size_t j = 0; j < n_t; ++j) {
    const double t = static_cast<double>(j) * dt;
    if (!state.x.allFinite() || !state.z.allFinite()) {
      out.cost = inf;
      ++out.violations;
      return out;
    }
    const Vec3 xn = normalize_point(frame, state.x);
    const Vec3 vn = normalize_vector(frame, model.velocity(state));

    double min_c = inf;
    Vec3 force_n = Vec3::Zero();
    for (const EllipsoidObstacle& ob : obstacles) {
      EllipsoidObstacle moved = ob;
      moved.center += ob.velocity * t;
      const EllipsoidObstacle obn = normalize_obstacle(frame, moved);
      min_c = std::min(min_c, isopotential(obn, xn));
      force_n += field_force(params, obn, xn, vn);
    }

    const double f_cc = 1.0 - min_c;
    if (f_cc >= 0.0) {
      ++out.violations;
      out.penalty += f_cc * f_cc;
    }
    const Vec3 ref_n =
        normalize_point(frame, detail::interp_uniform(reference, t / duration));
    dev += (xn - ref_n).squaredNorm() * dt;
    if (j > 0) energy += std::abs(vn.squaredNorm() - v_prev_n.squaredNorm()) * dt;
    v_prev_n = vn;

    if (log) log->push_back({t, state.x, model.velocity(state), min_c});

    if (j + 1 < n_t) {
      const Vec3 force = rescale_vector(frame, force_n);
      try {
        state = model.step(state, dt, force, model.gains.alpha_s_hat);
      } catch (const Error&) {
        out.cost = inf;
        ++out.violations;
        return out;
      }
    }
  }
  out.cost = dev + 0.5 * config.lambda_p * config.mass * energy;
  return out;
}

inline std::pair<double, std::size_t> objective(const FieldParams& params,
                                                const std::vector<Vec3>& reference,
                                                const DmpModel& model,
                                                const std::vector<EllipsoidObstacle>& obstacles,
                                                const OptimizerConfig& config) {
  const ObjectiveBreakdown b = evaluate_field_objective(params, reference, model, obstacles, config);
  return {b.cost, b.violations};
}

/// Derivative-free Nelder-Mead search on log-scaled parameters with an
/// exterior quadratic penalty; feasibility is confirmed by a penalty-free
/// verification pass at the returned params.
inline OptimizationResult optimize(const std::vector<Vec3>& reference, const DmpModel& model,
                                   const std::vector<EllipsoidObstacle>& obstacles,
                                   const OptimizerConfig& config) {
  if (config.max_evals < 1) throw Error("optimize: max_evals must be >= 1");

  using U = std::array<double, 3>;
  const U lo = {std::log(config.lambda_bounds.first), std::log(config.beta_bounds.first),
                std::log(config.eta_bounds.first)};
  const U hi = {std::log(config.lambda_bounds.second), std::log(config.beta_bounds.second),
                std::log(config.eta_bounds.second)};
  const auto clamp_u = [&](U u) {
    for (int i = 0; i < 3; ++i) u[i] = std::clamp(u[i], lo[i], hi[i]);
    return u;
  };
  const auto to_params = [](const U& u) {
    return FieldParams{std::exp(u[0]), std::exp(u[1]), std::exp(u[2])};
  };

  OptimizationResult result;
  const double inf = std::numeric_limits<double>::infinity();
  double best_feasible_cost = inf;
  FieldParams best_feasible_params{};
  bool have_feasible = false;
  double best_penalized = inf;
  FieldParams best_penalized_params = to_params(clamp_u(
      {std::log(config.initial_params.lambda), std::log(config.initial_params.beta),
       std::log(config.initial_params.eta)}));

  const auto evaluate = [&](const U& u) {
    const FieldParams p = to_params(u);
    const ObjectiveBreakdown b = evaluate_field_objective(p, reference, model, obstacles, config);
    const double penalized =
        b.finite() ? b.cost + config.penalty_weight * b.penalty : inf;
    ++result.evaluations;
    if (b.finite() && b.violations == 0 && b.cost < best_feasible_cost) {
      best_feasible_cost = b.cost;
      best_feasible_params = p;
      have_feasible = true;
    }
    if (penalized < best_penalized) {
      best_penalized = penalized;
      best_penalized_params = p;
    }
    result.trace.push_back(have_feasible ? best_feasible_cost : inf);
    return penalized;
  };
  const auto budget_left = [&] { return result.evaluations < config.max_evals; };

  // Initial simplex around the (clamped) starting point, vertex 0 exact.
  U u0 = clamp_u({std::log(config.initial_params.lambda), std::log(config.initial_params.beta),
                  std::log(config.initial_params.eta)});
  std::vector<U> simplex{u0};
  for (int i = 0; i < 3; ++i) {
    U u = u0;
    const double step = 0.3;
    u[i] = (u[i] + step <= hi[i]) ? u[i] + step : u[i] - step;
    simplex.push_back(clamp_u(u));
  }
  std::vector<double> fvals;
  for (const U& u : simplex) {
    if (!budget_left()) break;
    fvals.push_back(evaluate(u));
  }
  while (fvals.size() < simplex.size()) {
    simplex.pop_back();  // budget exhausted during initialization
  }

  const auto order = [&] {
    std::vector<std::size_t> idx(simplex.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return fvals[a] < fvals[b]; });
    std::vector<U> s2(simplex.size());
    std::vector<double> f2(simplex.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s2[i] = simplex[idx[i]];
      f2[i] = fvals[idx[i]];
    }
    simplex.swap(s2);
    fvals.swap(f2);
  };

  if (simplex.size() == 4) {
    while (budget_left()) {
      order();
      double spread = 0.0;
      for (std::size_t i = 1; i < simplex.size(); ++i)
        for (int k = 0; k < 3; ++k)
          spread = std::max(spread, std::abs(simplex[i][k] - simplex[0][k]));
      if (spread < 1e-5) break;

      U centroid = {0.0, 0.0, 0.0};
      for (std::size_t i = 0; i + 1 < simplex.size(); ++i)
        for (int k = 0; k < 3; ++k) centroid[k] += simplex[i][k] / 3.0;

      const auto affine = [&](double coef) {
        U u;
        for (int k = 0; k < 3; ++k) u[k] = centroid[k] + coef * (simplex[3][k] - centroid[k]);
        return clamp_u(u);
      };

      const U reflected = affine(-1.0);
      const double fr = evaluate(reflected);
      if (fr < fvals[0] && budget_left()) {
        const U expanded = affine(-2.0);
        const double fe = evaluate(expanded);
        if (fe < fr) {
          simplex[3] = expanded;
          fvals[3] = fe;
        } else {
          simplex[3] = reflected;
          fvals[3] = fr;
        }
      } else if (fr < fvals[2]) {
        simplex[3] = reflected;
        fvals[3] = fr;
      } else if (budget_left()) {
        const U contracted = affine(fr < fvals[3] ? -0.5 : 0.5);
        const double fc = evaluate(contracted);
        if (fc < std::min(fr, fvals[3])) {
          simplex[3] = contracted;
          fvals[3] = fc;
        } else {
          for (std::size_t i = 1; i < simplex.size() && budget_left(); ++i) {
            for (int k = 0; k < 3; ++k)
              simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
            simplex[i] = clamp_u(simplex[i]);
            fvals[i] = evaluate(simplex[i]);
          }
        }
      }
    }
  }

  result.params = have_feasible ? best_feasible_params : best_penalized_params;
  const ObjectiveBreakdown verify =
      evaluate_field_objective(result.params, reference, model, obstacles, config);
  result.objective = verify.cost;
  result.constraint_violations = verify.violations;
  result.converged = verify.finite() && verify.violations == 0;
  return result;
}

}  // namespace oncol
