#pragma once

// Entropic minimizing-movement scheme. Each step solves
//
//     min_pi  KL(pi || K) + G(pi 1) + kappa Fbar(pi^T 1),   kappa = 2h / eps,
//
// where G pins the first marginal to the previous iterate, by alternating
//     a <- rho_prev / (K b),   b <- prox(K^T a) / (K^T a),
// and returns rho_next = b * (K^T a).

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ejko/entropic_ot.hpp"
#include "ejko/error.hpp"
#include "ejko/free_energy.hpp"
#include "ejko/grid_measure.hpp"
#include "ejko/kernel.hpp"
#include "ejko/numerics.hpp"

namespace ejko {

/// eps |log eps| / h^2, the realized constant of the scaling constraint.
inline double scaling_ratio(double epsilon, double h) { return epsilon * std::abs(std::log(epsilon)) / (h * h); }

struct SchemeConfig {
  double h = 0.0;
  double epsilon = 0.0;
  double horizon = 0.0;
  ScalingOptions scaling{};
  KernelOptions kernel{};

  /// N = round(T / h).
  std::size_t steps() const { return static_cast<std::size_t>(std::llround(horizon / h)); }
  double ratio() const { return scaling_ratio(epsilon, h); }

  void validate() const {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("time step h must be positive");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be positive");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon T must be nonnegative");
    const double n = static_cast<double>(steps());
    if (std::abs(n * h - horizon) > 1e-9 * std::max(1.0, horizon))
      throw InvalidArgument("horizon T is not an integer multiple of h");
  }
};

struct StepDiagnostics {
  std::size_t inner_iterations = 0;
  /// ||a * (K b) - rho_prev||_1 at exit.
  double residual = std::numeric_limits<double>::infinity();
  /// max_j |log b_new - log b_old| over the last inner iteration.
  double scaling_change = std::numeric_limits<double>::infinity();
  std::size_t absorptions = 0;
  /// sum c pi + eps sum pi log(pi / lambda^2)
  double transport_objective = std::numeric_limits<double>::quiet_NaN();
  /// |sum rho_next - 1| before renormalization.
  double mass_drift = 0.0;
};

struct StepResult {
  Vector rho;
  ScalingState state;
  StepDiagnostics diagnostics;
};

/// One step on raw weight vectors. `warm`, when initialized for this kernel, seeds the
/// column scaling. Throws ConvergenceError when the inner loop hits max_iter.
inline StepResult jko_step(const Vector& rho_prev, KernelOperator& k, const FreeEnergySpec& spec, double h,
                           const ScalingOptions& opt = {}, const ScalingState* warm = nullptr,
                           bool compute_objective = true) {
  detail::check_options(opt);
  const std::size_t m = k.size();
  if (static_cast<std::size_t>(rho_prev.size()) != m || spec.size() != m)
    throw GridMismatch("jko_step: previous iterate, kernel and free energy sizes differ");
  if (!(h > 0.0)) throw InvalidArgument("jko_step: h must be positive");
  if ((rho_prev.array() < 0.0).any() || !rho_prev.allFinite())
    throw InvalidArgument("jko_step: previous iterate must be finite and nonnegative");
  const double eps = k.epsilon();
  const double kappa = 2.0 * h / eps;
  if (!std::isfinite(kappa)) throw InvalidArgument("jko_step: 2h/eps is not finite");

  const double neg_inf = -std::numeric_limits<double>::infinity();
  const Vector log_mu = detail::safe_log(rho_prev);
  ScalingState st;
  st.log_a = Vector::Constant(static_cast<Eigen::Index>(m), neg_inf);
  st.log_b = (warm && warm->initialized(m)) ? warm->log_b : Vector::Zero(static_cast<Eigen::Index>(m));

  StepDiagnostics diag;
  Vector log_rho;
  Vector log_b_true_prev;
  for (std::size_t it = 0;; ++it) {
    const Vector log_kb = detail::log_product(k, st.log_b, false, &rho_prev, opt.log_domain);
    if (it > 0) {
      CompensatedSum r;
      for (Eigen::Index i = 0; i < rho_prev.size(); ++i) {
        const double row = std::isfinite(st.log_a[i]) ? std::exp(st.log_a[i] + log_kb[i]) : 0.0;
        r.add(std::abs(row - rho_prev[i]));
      }
      st.residual = r.value();
      st.residual_history.push_back(st.residual);
      diag.residual = st.residual;
      if (st.residual <= opt.tol && diag.scaling_change <= opt.tol) {
        st.converged = true;
        break;
      }
      if (it >= opt.max_iter) break;
    }

    st.log_a = log_mu - log_kb;
    for (Eigen::Index i = 0; i < rho_prev.size(); ++i)
      if (!(rho_prev[i] > 0.0)) st.log_a[i] = neg_inf;
    ++st.iterations;
    detail::stabilize(k, st, opt);

    const Vector log_qt = detail::log_product(k, st.log_a, true, nullptr, opt.log_domain);
    const Vector log_q = log_qt - k.col_potential() / eps;
    log_rho = kl_prox_log(spec, log_q, kappa);
    st.log_b = log_rho - log_qt;
    Vector log_b_true = log_rho - log_q;
    diag.scaling_change = log_b_true_prev.size() == log_b_true.size()
                              ? (log_b_true - log_b_true_prev).cwiseAbs().maxCoeff()
                              : std::numeric_limits<double>::infinity();
    log_b_true_prev = std::move(log_b_true);
    detail::stabilize(k, st, opt);
  }

  diag.inner_iterations = st.iterations;
  diag.absorptions = st.absorptions;
  if (!st.converged)
    throw ConvergenceError(st.residual, "inner scaling loop did not converge in " + std::to_string(opt.max_iter) +
                                           " iterations (residual " + format_double(st.residual) + ")");

  Vector rho = log_rho.array().exp().matrix();
  const double mass = rho.sum();
  diag.mass_drift = std::abs(mass - 1.0);
  rho /= mass;
  if (compute_objective)
    diag.transport_objective =
        regularized_cost(TransportPlan::factored(k, st), *k.costs(), eps, spec.tile_volume());
  return StepResult{std::move(rho), std::move(st), diag};
}

struct SchemeRun {
  double h = 0.0;
  double epsilon = 0.0;
  /// rho^0 ... rho^n for the completed steps.
  std::vector<DiscreteMeasure> iterates;
  std::vector<double> free_energy;
  std::vector<double> entropy;
  std::vector<double> second_moment;
  /// One entry per completed step.
  std::vector<StepDiagnostics> steps;
  /// Index n of the step that failed (producing rho^n), if any.
  std::optional<std::size_t> failed_step;
  std::string failure;

  bool ok() const noexcept { return !failed_step.has_value(); }
  std::size_t completed_steps() const noexcept { return steps.size(); }
};

/// Called after every completed step with (n, run).
using StepObserver = std::function<void(std::size_t, const SchemeRun&)>;

namespace detail {
inline void record_iterate(SchemeRun& run, const FreeEnergySpec& spec, DiscreteMeasure rho) {
  run.free_energy.push_back(discrete_free_energy(spec, rho.weights()));
  run.entropy.push_back(discrete_entropy(rho));
  run.second_moment.push_back(ejko::second_moment(rho));
  run.iterates.push_back(std::move(rho));
}
}  // namespace detail

/// Runs N = round(T / h) steps on a prebuilt kernel. Any step failure stops the run and
/// is recorded in `failed_step` / `failure`; the iterates before it are kept.
inline SchemeRun run_scheme(const DiscreteMeasure& rho0, KernelOperator& k, const FreeEnergySpec& spec,
                            const SchemeConfig& config, const StepObserver& observer = {}) {
  config.validate();
  if (spec.grid_ptr()) require_same_grid(*spec.grid_ptr(), rho0.grid());
  if (k.size() != rho0.size()) throw GridMismatch("run_scheme: kernel size does not match the grid");
  if (std::abs(k.epsilon() - config.epsilon) > 1e-15 * config.epsilon)
    throw InvalidArgument("run_scheme: kernel epsilon differs from the configured epsilon");

  SchemeRun run;
  run.h = config.h;
  run.epsilon = config.epsilon;
  detail::record_iterate(run, spec, rho0);
  if (!std::isfinite(run.free_energy.front())) throw InvalidArgument("run_scheme: initial free energy is not finite");

  const std::size_t n_steps = config.steps();
  ScalingState warm;
  for (std::size_t n = 1; n <= n_steps; ++n) {
    try {
      StepResult r = jko_step(run.iterates.back().weights(), k, spec, config.h, config.scaling, &warm);
      warm = std::move(r.state);
      run.steps.push_back(r.diagnostics);
      detail::record_iterate(run, spec, DiscreteMeasure(rho0.grid_ptr(), std::move(r.rho)));
    } catch (const Error& e) {
      run.failed_step = n;
      run.failure = e.what();
      return run;
    }
    if (observer) observer(n, run);
  }
  return run;
}

inline SchemeRun run_scheme(const DiscreteMeasure& rho0, const CostSpec& cost, const FreeEnergySpec& spec,
                            const SchemeConfig& config, const StepObserver& observer = {}) {
  config.validate();
  if (std::abs(cost_h(cost) - config.h) > 1e-12 * config.h)
    throw InvalidArgument("run_scheme: cost time step differs from the configured h");
  KernelOperator k = gibbs_kernel(cost, rho0.grid(), config.epsilon, config.kernel);
  return run_scheme(rho0, k, spec, config, observer);
}

/// Piecewise-constant interpolation: rho(t) = rho^{n+1} on [nh, (n+1)h), rho(T) = rho^N.
inline const DiscreteMeasure& interpolate(const SchemeRun& run, double t) {
  const std::size_t n_steps = run.iterates.size() - 1;
  const double horizon = run.h * static_cast<double>(n_steps);
  if (!(t >= 0.0) || t > horizon * (1.0 + 1e-12))
    throw InvalidArgument("interpolate: t outside [0, T]");
  if (n_steps == 0) return run.iterates.front();
  const auto n = static_cast<std::size_t>(std::floor(t / run.h + 1e-9)) + 1;
  return run.iterates[std::min(n, n_steps)];
}

}  // namespace ejko
