#pragma once

// Acceptance checks shared by `ejko check` and the acceptance test binary. Each check
// computes its reference independently of the code under test (closed forms,
// brute-force search, quadrature) and reports one pass/fail line.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ejko/ejko.hpp"

namespace ejko::checks {

struct CheckResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

inline double fro(const Matrix& m) { return m.norm(); }

// Closed form J_ij = (-1)^{j-i} h^{j-i} / (j-i)!, zero below the diagonal.
inline Matrix closed_form_J(int n, double h) {
  Matrix J = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double fact = 1.0;
    for (int j = i; j < n; ++j) {
      if (j > i) fact *= (j - i);
      J(i, j) = ((j - i) % 2 ? -1.0 : 1.0) * std::pow(h, j - i) / fact;
    }
  }
  return J;
}

inline double gamma_factorial(int k) { return std::tgamma(k + 1.0); }

// S1 S3 - S2^2 in extended precision, with S3 summed as a power series for t < 1.
inline long double green_determinant(double t) {
  const long double tl = t;
  const long double s1 = -std::expm1(-2 * tl);
  const long double em = std::expm1(-tl);
  const long double s2 = em * em;
  long double s3 = 0;
  if (t < 1.0) {
    long double term = 1, p2 = 1;
    for (int k = 1; k < 60; ++k) {
      term *= -tl / k;
      p2 *= 2;
      if (k >= 3) s3 += 4 * term - p2 * term;
    }
  } else {
    s3 = 2 * tl - 3 + 4 * std::exp(-tl) - std::exp(-2 * tl);
  }
  return s1 * s3 - s2 * s2;
}

// Minimizes phi(r) over r = log rho by repeated grid refinement.
inline double grid_search_min(const std::function<long double(double)>& phi, double lo, double hi) {
  const int points = 2001;
  for (int round = 0; round < 40; ++round) {
    double best_r = lo;
    long double best = phi(lo);
    for (int k = 1; k < points; ++k) {
      const double r = lo + (hi - lo) * k / (points - 1);
      const long double v = phi(r);
      if (v < best) {
        best = v;
        best_r = r;
      }
    }
    const double step = (hi - lo) / (points - 1);
    lo = best_r - 2 * step;
    hi = best_r + 2 * step;
    if (step < 1e-13) break;
  }
  return 0.5 * (lo + hi);
}

// Exact unregularized optimal transport on n points by enumerating every basic
// feasible solution: each choice of 2n - 1 cells forming a spanning tree of the
// bipartite row/column graph determines a unique coupling.
inline double brute_force_ot(const Vector& mu, const Vector& nu, const Matrix& c) {
  const int n = static_cast<int>(mu.size());
  const int cells = n * n, basis = 2 * n - 1;
  std::vector<char> pick(cells, 0);
  std::fill(pick.begin(), pick.begin() + basis, 1);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> edges;
  std::vector<double> supply(2 * n);
  std::vector<int> degree(2 * n);
  std::vector<char> used;
  do {
    edges.clear();
    for (int k = 0; k < cells; ++k)
      if (pick[k]) edges.push_back(k);
    std::fill(degree.begin(), degree.end(), 0);
    for (int e : edges) {
      ++degree[e / n];
      ++degree[n + e % n];
    }
    for (int i = 0; i < n; ++i) {
      supply[i] = mu[i];
      supply[n + i] = nu[i];
    }
    used.assign(edges.size(), 0);
    double cost = 0.0;
    bool feasible = true;
    for (int round = 0; round < basis && feasible; ++round) {
      int leaf_edge = -1, leaf_node = -1;
      for (std::size_t q = 0; q < edges.size() && leaf_edge < 0; ++q) {
        if (used[q]) continue;
        const int r = edges[q] / n, col = n + edges[q] % n;
        if (degree[r] == 1) leaf_edge = int(q), leaf_node = r;
        else if (degree[col] == 1) leaf_edge = int(q), leaf_node = col;
      }
      if (leaf_edge < 0) {
        feasible = false;  // contains a cycle
        break;
      }
      const int r = edges[leaf_edge] / n, col = n + edges[leaf_edge] % n;
      const int other = leaf_node == r ? col : r;
      const double flow = supply[leaf_node];
      if (flow < -1e-12) feasible = false;
      supply[leaf_node] = 0.0;
      supply[other] -= flow;
      --degree[r];
      --degree[col];
      used[leaf_edge] = 1;
      cost += flow * c(r, col - n);
    }
    if (feasible) {
      for (double rest : supply) feasible = feasible && std::abs(rest) <= 1e-12;
      if (feasible) best = std::min(best, cost);
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

// Full single-step objective (1/2h)(sum c pi + eps sum pi log(pi/lambda^2)) + Fbar(pi^T 1).
inline double step_objective(const Matrix& pi, const Matrix& c, double eps, double h, double lambda,
                             const FreeEnergySpec& spec) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < pi.rows(); ++i)
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      const double p = pi(i, j);
      if (p > 0.0) s += c(i, j) * p + eps * p * std::log(p / (lambda * lambda));
    }
  const Vector nu = pi.colwise().sum().transpose();
  double f = 0.0;
  for (Eigen::Index j = 0; j < nu.size(); ++j)
    f += spec.potential()[j] * nu[j] + lambda * spec.internal().value(nu[j] / lambda);
  return s / (2.0 * h) + f;
}

inline Vector kramers_potential(const UniformGrid& g) {
  Vector f(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) f[Eigen::Index(i)] = 0.5 * g.point(i)[1] * g.point(i)[1];
  return f;
}

template <typename Fn>
CheckResult timed(int id, std::string title, Fn&& body) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  r.id = id;
  r.title = std::move(title);
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace detail

/// Criterion 1: mean-squared-derivative matrix identities.
inline CheckResult matrix_identities() {
  return detail::timed(1, "mean-squared-derivative matrix identities", [](CheckResult& r) {
    double worst_t1 = 0, worst_t2 = 0, worst_t3 = 0, worst_tr = 0, worst_j = 0, worst_k = 0;
    for (int n : {1, 2, 3})
      for (double h : {0.1, 0.02}) {
        const MsdMatrices m = build_msd_matrices(n, 1, h);
        const MsdIdentityTerms t = msd_identity_terms(m);
        auto antisym = [](const Matrix& T) {
          const double nt = detail::fro(T);
          return nt == 0.0 ? 0.0 : detail::fro(T + T.transpose()) / nt;
        };
        worst_t1 = std::max(worst_t1, antisym(t.T1));
        worst_t3 = std::max(worst_t3, antisym(t.T3));
        worst_t2 = std::max(worst_t2, detail::fro(t.T2) / detail::fro(t.J2TMJ1));

        Matrix J2 = Matrix::Zero(n, n), J1 = Matrix::Zero(n, n), D = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
          J1(i, i) = std::pow(h, i);
          for (int j = i; j < n; ++j) J2(i, j) = std::pow(h, j) / detail::gamma_factorial(j - i);
        }
        D(n - 1, n - 1) = 1.0;
        const double tr = (D * J2.transpose() * m.M * J2).trace();
        const double tr_rhs = n * n * std::pow(h, 2.0 * (n - 1));
        worst_tr = std::max(worst_tr, std::abs(tr - tr_rhs) / tr_rhs);

        const Matrix J_inv = J2.fullPivLu().solve(J1);
        const Matrix J_cf = detail::closed_form_J(n, h);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double scale = std::max(std::abs(J_cf(i, j)), 1e-300);
            const double e = J_cf(i, j) == 0.0 ? std::abs(J_inv(i, j)) : std::abs(J_inv(i, j) - J_cf(i, j)) / scale;
            worst_j = std::max(worst_j, e);
          }

        const Matrix K_inv = std::pow(h, 2.0 * n - 2.0) * (J2.transpose() * m.M * J1).fullPivLu().inverse();
        for (int i = 1; i <= n; ++i)
          for (int j = 1; j <= n; ++j) {
            const double cf = ((n - j) % 2 ? -1.0 : 1.0) * std::pow(h, 2 * n - i - j) /
                              detail::gamma_factorial(2 * n - i - j + 1);
            worst_k = std::max(worst_k, std::abs(K_inv(i - 1, j - 1) - cf) / std::abs(cf));
          }
      }
    r.passed = worst_t1 <= 1e-9 && worst_t3 <= 1e-9 && worst_t2 <= 1e-9 && worst_tr <= 1e-9 && worst_j <= 1e-12 &&
               worst_k <= 1e-9;
    r.detail = "T1 antisym " + detail::fmt(worst_t1) + ", T2 " + detail::fmt(worst_t2) + ", T3 antisym " +
               detail::fmt(worst_t3) + ", trace " + detail::fmt(worst_tr) + ", J " + detail::fmt(worst_j) + ", K_h " +
               detail::fmt(worst_k);
  });
}

/// Criterion 2: Kolmogorov cost against |x - y|^2 (n = 1) and the Kramers cost (n = 2).
inline CheckResult cost_cross_validation() {
  return detail::timed(2, "cost cross-validation", [](CheckResult& r) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst1 = 0.0, worst2 = 0.0;
    for (double h : {0.1, 0.02}) {
      const KolmogorovCost k1(1, 1, h), k2(2, 1, h);
      const KramersCost kr(1, h, 0.0);
      for (int s = 0; s < 1000; ++s) {
        const double x = u(rng), y = u(rng);
        worst1 = std::max(worst1, std::abs(k1(&x, &y) - (x - y) * (x - y)) / std::max(1.0, (x - y) * (x - y)));
        const double a[2] = {u(rng), u(rng)}, b[2] = {u(rng), u(rng)};
        const double vk = k2(a, b), vr = kr(a, b);
        worst2 = std::max(worst2, std::abs(vk - vr) / std::max(std::abs(vr), 1e-300));
      }
    }
    r.passed = worst1 <= 1e-12 && worst2 <= 1e-9;
    r.detail = "n=1 vs |x-y|^2 " + detail::fmt(worst1) + ", n=2 vs Kramers " + detail::fmt(worst2);
  });
}

/// Criterion 3: Green-function identities, determinant sign and normalization.
inline CheckResult green_function_identities() {
  return detail::timed(3, "Green-function identities", [](CheckResult& r) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
      double t = u(rng);
      if (t == 0.0) t = 1e-3;
      const long double oracle = detail::green_determinant(t);
      const SFunctions sf = s_functions(t);
      const double closed = printed_denominator(t);
      worst = std::max({worst, double(std::abs(sf.det - oracle) / oracle), double(std::abs(closed - oracle) / oracle)});
    }
    bool positive = true;
    for (int k = 1; k <= 10000; ++k) positive = positive && s_functions(10.0 * k / 10000.0).det > 0.0;

    double worst_mass_err = 0.0;
    for (double t : {0.14, 0.3, 1.0}) {
      const GreenParams p{0.1, 0.5, 0.14};
      const SFunctions sf = s_functions(t);
      const double sx = std::sqrt(sf.s3), sv = std::sqrt(sf.s1);
      const double mx = p.x0 - p.v0 * std::expm1(-t), mv = p.v0 * std::exp(-t);
      auto g = build_grid({{mx - 8 * sx, mx + 8 * sx}, {mv - 8 * sv, mv + 8 * sv}}, {400, 400});
      const Vector d = exact_density(p, t, *g);
      worst_mass_err = std::max(worst_mass_err, std::abs(d.sum() * g->tile_volume() - 1.0));
    }
    r.passed = worst <= 1e-12 && positive && worst_mass_err <= 1e-3;
    r.detail = "determinant identity " + detail::fmt(worst) + ", positive on sweep " + (positive ? "yes" : "no") +
               ", |mass - 1| " + detail::fmt(worst_mass_err);
  });
}

/// Criterion 4: KL-proximal map against scalar grid search.
inline CheckResult prox_correctness() {
  return detail::timed(4, "KL-proximal map vs grid search", [](CheckResult& r) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) { return std::exp(std::log(lo) + u(rng) * (std::log(hi) - std::log(lo))); };
    double worst = 0.0;
    for (const InternalEnergy& energy : {InternalEnergy::boltzmann(), InternalEnergy::power_law(2)}) {
      for (int s = 0; s < 100; ++s) {
        const double q = log_uniform(1e-3, 1.0), f = 5.0 * u(rng), kappa = log_uniform(1e-2, 1e2),
                     lambda = log_uniform(1e-3, 1.0);
        const FreeEnergySpec spec(lambda, Vector::Constant(1, f), energy);
        const double got = kl_prox(spec, Vector::Constant(1, q), kappa)[0];
        auto phi = [&](double r) -> long double {
          const long double rho = std::exp(static_cast<long double>(r));
          const long double u = energy.kind() == InternalEnergy::Kind::Boltzmann
                                    ? rho * (r - std::log(static_cast<long double>(lambda)))
                                    : lambda * std::pow(rho / lambda, 2.0L);
          return rho * (r - std::log(static_cast<long double>(q))) - rho + kappa * (f * rho + u);
        };
        const double want = std::exp(detail::grid_search_min(phi, std::log(q) - 1000.0, std::log(q) + 100.0));
        worst = std::max(worst, std::abs(got - want) / want);
      }
    }
    r.passed = worst <= 1e-6;
    r.detail = "max relative deviation " + detail::fmt(worst) + " over 200 tuples";
  });
}

/// Criterion 5: entropic OT closed form, brute-force comparison, marginal residuals.
inline CheckResult entropic_ot() {
  return detail::timed(5, "entropic OT", [](CheckResult& r) {
    auto two = build_grid({{-0.5, 1.5}}, {2});
    KernelOperator k2 = gibbs_kernel(WeightedQuadraticCost(Matrix::Zero(1, 1), 1.0), *two, 1.0);
    ScalingOptions tight;
    tight.tol = 1e-14;
    const Vector half = Vector::Constant(2, 0.5);
    const SinkhornResult s2 = sinkhorn(k2, half, half, tight);
    const double alpha = 0.5 / (1.0 + std::exp(-1.0)), beta = 0.5 * std::exp(-1.0) / (1.0 + std::exp(-1.0));
    const Matrix p = s2.plan.to_dense();
    const double closed_err = std::max({std::abs(p(0, 0) - alpha), std::abs(p(1, 1) - alpha),
                                        std::abs(p(0, 1) - beta), std::abs(p(1, 0) - beta)});

    auto five = build_grid({{0.0, 5.0}}, {5});
    const CostSpec cost = WeightedQuadraticCost(Matrix::Zero(1, 1), 1.0);
    Matrix c(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) c(i, j) = std::pow(five->point(i)[0] - five->point(j)[0], 2);
    std::mt19937_64 rng(5);
    double worst_gap = 0.0, worst_res = 0.0;
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int inst = 0; inst < 5; ++inst) {
      Vector mu(5), nu(5);
      for (int i = 0; i < 5; ++i) {
        mu[i] = u(rng);
        nu[i] = u(rng);
      }
      mu /= mu.sum();
      nu /= nu.sum();
      const double opt = detail::brute_force_ot(mu, nu, c);
      KernelOperator k = gibbs_kernel(cost, *five, 0.01);
      ScalingOptions o;
      o.log_domain = true;
      o.max_iter = 1000000;
      const SinkhornResult s = sinkhorn(k, mu, nu, o);
      const double tc = transport_cost(s.plan, *k.costs());
      worst_gap = std::max(worst_gap, opt > 0.0 ? std::abs(tc - opt) / opt : tc);
      worst_res = std::max({worst_res, (s.plan.row_sums() - mu).cwiseAbs().sum(),
                            (s.plan.col_sums() - nu).cwiseAbs().sum()});
    }
    r.passed = closed_err <= 1e-9 && worst_gap <= 0.02 && worst_res <= 1e-8;
    r.detail = "two-point plan error " + detail::fmt(closed_err) + ", 5-point cost gap " + detail::fmt(worst_gap) +
               ", residual " + detail::fmt(worst_res);
  });
}

/// Criterion 6: single-step optimality against random feasible perturbations.
inline CheckResult step_optimality() {
  return detail::timed(6, "JKO step optimality on micro-instances", [](CheckResult& r) {
    struct Instance {
      GridPtr grid;
      CostSpec cost;
      InternalEnergy energy;
      bool kramers;
    };
    const double h = 0.1;
    std::vector<Instance> instances = {
        {build_grid({{-1.0, 1.0}}, {6}), WeightedQuadraticCost(Matrix::Identity(1, 1), h), InternalEnergy::boltzmann(), false},
        {build_grid({{-1.0, 1.0}}, {7}), WeightedQuadraticCost(Matrix::Identity(1, 1), h), InternalEnergy::power_law(2), false},
        {build_grid({{-0.2, 0.2}, {-1.0, 1.0}}, {2, 4}), KramersCost(1, h, 0.0), InternalEnergy::boltzmann(), true},
    };
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    double worst = -1e300;
    std::size_t trials = 0;
    for (const auto& inst : instances) {
      for (double eps : {0.05, 0.5}) {
        const std::size_t m = inst.grid->size();
        Vector rho(static_cast<Eigen::Index>(m));
        for (auto& w : rho) w = 0.1 + u(rng);
        rho /= rho.sum();
        Vector f = detail::kramers_potential(*inst.grid);
        if (!inst.kramers)
          for (auto& v : f) v = u(rng);
        const FreeEnergySpec spec(inst.grid, f, inst.energy);
        KernelOperator k = gibbs_kernel(inst.cost, *inst.grid, eps);
        ScalingOptions o;
        o.tol = 1e-13;
        o.max_iter = 200000;
        const StepResult step = jko_step(rho, k, spec, h, o);
        const Matrix pi = TransportPlan::factored(k, step.state).to_dense();
        const Matrix c = k.costs()->dense();
        const double lambda = inst.grid->tile_volume();
        const double base = detail::step_objective(pi, c, eps, h, lambda, spec);
        for (int t = 0; t < 1000; ++t) {
          const double delta = t % 3 == 0 ? 1e-3 : (t % 3 == 1 ? 1e-2 : 1e-1);
          Matrix p = pi;
          for (Eigen::Index i = 0; i < p.rows(); ++i) {
            for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) *= std::exp(delta * z(rng));
            p.row(i) *= rho[i] / p.row(i).sum();
          }
          worst = std::max(worst, base - detail::step_objective(p, c, eps, h, lambda, spec));
          ++trials;
        }
      }
    }
    r.passed = worst <= 1e-6;
    r.detail = "max (produced - perturbed) objective " + detail::fmt(worst) + " over " + std::to_string(trials) +
               " perturbations";
  });
}

/// Largest eps with eps |log eps| <= h^2 (bisection on the increasing branch eps < 1/e).
inline double largest_admissible_epsilon(double h) {
  double lo = 1e-300, hi = std::exp(-1.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (mid * std::abs(std::log(mid)) <= h * h ? lo : hi) = mid;
  }
  return lo;
}

/// Criterion 7: heat equation end to end.
inline CheckResult heat_equation() {
  return detail::timed(7, "heat equation end to end", [](CheckResult& r) {
    const double h = 0.0125, horizon = 0.25, var0 = 0.25;
    auto grid = build_grid({{-3.0, 3.0}}, {200});
    auto gaussian = [&](double var) {
      Vector d(static_cast<Eigen::Index>(grid->size()));
      for (std::size_t i = 0; i < grid->size(); ++i) {
        const double x = grid->point(i)[0];
        d[Eigen::Index(i)] = std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
      }
      return d;
    };
    const DiscreteMeasure rho0 = DiscreteMeasure::from_density(grid, gaussian(var0));
    const FreeEnergySpec spec = FreeEnergySpec::zero_potential(grid, InternalEnergy::boltzmann());
    SchemeConfig cfg;
    cfg.h = h;
    cfg.epsilon = largest_admissible_epsilon(h);
    cfg.horizon = horizon;
    cfg.scaling.log_domain = true;
    cfg.scaling.max_iter = 200000;
    const SchemeRun run = run_scheme(rho0, WeightedQuadraticCost(Matrix::Identity(1, 1), h), spec, cfg);
    if (!run.ok()) {
      r.detail = "run failed at step " + std::to_string(*run.failed_step) + ": " + run.failure;
      return;
    }
    const double err = l1_distance_to_density(run.iterates.back(), gaussian(var0 + 2.0 * horizon));
    const double slack = 10.0 * cfg.epsilon * std::abs(std::log(cfg.epsilon));
    bool descent = true;
    for (std::size_t n = 1; n < run.free_energy.size(); ++n)
      descent = descent && run.free_energy[n] <= run.free_energy[n - 1] + slack;
    r.passed = err <= 0.1 && descent;
    r.detail = "eps " + detail::fmt(cfg.epsilon) + " (ratio " + detail::fmt(cfg.ratio()) + "), terminal L1 error " +
               detail::fmt(err) + " (limit 0.1), descent " + (descent ? "holds" : "violated");
  });
}

struct KramersOutcome {
  bool completed = false;
  double max_mass_error = 0.0;
  double error_at_02 = 0.0;
  std::vector<double> errors;  ///< per step, absolute time t0 + n h
  std::string failure;
};

/// Kramers run on [-0.5,0.5]x[-2.4,2.4] from the Green function at t0 = 0.14 to t = 0.3.
inline KramersOutcome kramers_run(double eps, std::size_t nx, std::size_t nv, KernelMode mode = KernelMode::Dense) {
  const double h = 0.02, t0 = 0.14;
  auto grid = build_grid({{-0.5, 0.5}, {-2.4, 2.4}}, {nx, nv});
  const GreenParams p{0.0, 0.0, t0};
  const DiscreteMeasure rho0 = sample_on_grid(p, t0, grid);
  const FreeEnergySpec spec(grid, detail::kramers_potential(*grid), InternalEnergy::boltzmann());
  SchemeConfig cfg;
  cfg.h = h;
  cfg.epsilon = eps;
  cfg.horizon = 0.16;
  cfg.scaling.log_domain = true;
  cfg.scaling.max_iter = 100000;
  cfg.kernel.mode = mode;
  const SchemeRun run = run_scheme(rho0, KramersCost(1, h, 0.0), spec, cfg);
  KramersOutcome out;
  out.completed = run.ok();
  out.failure = run.failure;
  for (std::size_t n = 0; n < run.iterates.size(); ++n) {
    out.max_mass_error = std::max(out.max_mass_error, std::abs(run.iterates[n].weights().sum() - 1.0));
    if (n > 0) out.max_mass_error = std::max(out.max_mass_error, run.steps[n - 1].mass_drift);
    out.errors.push_back(l1_distance_to_density(run.iterates[n], exact_density(p, t0 + n * h, *grid)));
  }
  out.error_at_02 = out.errors.size() > 3 ? out.errors[3] : std::nan("");
  return out;
}

/// Criterion 8: Kramers desk-scale error ordering.
inline CheckResult kramers_desk(std::size_t nx = 60, std::size_t nv = 40) {
  return detail::timed(8, "Kramers desk scale", [&](CheckResult& r) {
    const std::array<double, 3> eps = {0.05, 0.09, 0.5};
    std::array<KramersOutcome, 3> o;
    for (int k = 0; k < 3; ++k) o[k] = kramers_run(eps[k], nx, nv);
    bool mass = true;
    for (const auto& x : o) mass = mass && x.completed && x.max_mass_error <= 1e-8;
    const bool ordered = o[0].error_at_02 <= o[1].error_at_02 && o[1].error_at_02 <= o[2].error_at_02;
    bool ceiling = true;
    for (const auto& x : o) ceiling = ceiling && x.error_at_02 < 0.8;
    r.passed = mass && ordered && ceiling;
    r.detail = std::to_string(nx) + "x" + std::to_string(nv) + ": (a) mass " + (mass ? "ok" : "FAILED") +
               "; (b) errors at t=0.2 for eps 0.05/0.09/0.5 = " + detail::fmt(o[0].error_at_02) + "/" +
               detail::fmt(o[1].error_at_02) + "/" + detail::fmt(o[2].error_at_02) + ", ordering " +
               (ordered ? "ok" : "FAILED") + "; (c) ceiling 0.8 " + (ceiling ? "ok" : "FAILED");
  });
}

/// Criterion 9: dense and matrix-free kernels give the same plans.
inline CheckResult dense_matrix_free() {
  return detail::timed(9, "dense vs matrix-free plans", [](CheckResult& r) {
    const double h = 0.02, eps = 0.09;
    auto grid = build_grid({{-0.5, 0.5}, {-2.4, 2.4}}, {30, 20});
    const GreenParams p{0.0, 0.0, 0.14};
    const Vector mu = sample_on_grid(p, 0.14, grid).weights();
    const CostSpec cost = KramersCost(1, h, 0.0);
    const FreeEnergySpec spec(grid, detail::kramers_potential(*grid), InternalEnergy::boltzmann());
    ScalingOptions o;
    o.log_domain = true;
    KernelOptions dense, free;
    free.mode = KernelMode::MatrixFree;
    free.tile_rows = 64;

    KernelOperator jd = gibbs_kernel(cost, *grid, eps, dense);
    KernelOperator jf = gibbs_kernel(cost, *grid, eps, free);
    const StepResult sd = jko_step(mu, jd, spec, h, o);
    const StepResult sf = jko_step(mu, jf, spec, h, o);
    const double step_diff =
        (TransportPlan::factored(jd, sd.state).to_dense() - TransportPlan::factored(jf, sf.state).to_dense())
            .cwiseAbs()
            .maxCoeff();

    // transport from the initial state to the next scheme iterate
    KernelOperator kd = gibbs_kernel(cost, *grid, eps, dense);
    KernelOperator kf = gibbs_kernel(cost, *grid, eps, free);
    const Matrix pd = sinkhorn(kd, mu, sd.rho, o).plan.to_dense();
    const Matrix pf = sinkhorn(kf, mu, sd.rho, o).plan.to_dense();
    const double ot_diff = (pd - pf).cwiseAbs().maxCoeff();
    r.passed = ot_diff <= 1e-8 && step_diff <= 1e-8;
    r.detail = "max entrywise plan difference: OT " + detail::fmt(ot_diff) + ", JKO step " + detail::fmt(step_diff);
  });
}

inline std::string format_line(const CheckResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%6.1fs", r.seconds);
  return std::string(r.passed ? "PASS" : "FAIL") + "  [" + std::to_string(r.id) + "] " + r.title + " (" + buf +
         "): " + r.detail;
}

}  // namespace ejko::checks
