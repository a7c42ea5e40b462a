#pragma once

// Brute-force ground truth: exact Gibbs marginals by enumeration, multi-start
// critical-point search on L(A), finite differences, and the fiber
// sub-optimization check for colinear kernels.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "bethe/beliefs.hpp"
#include "bethe/error.hpp"
#include "bethe/gbp.hpp"
#include "bethe/model.hpp"
#include "bethe/reduce.hpp"

namespace bethe {

inline constexpr std::size_t kEnumerationCap = 10'000'000;

struct ExactSummary {
  double log_partition = 0.0;
  PseudoMarginals marginals;
};

/// Enumerates every configuration of the variables used by some region and
/// accumulates Z = sum_x prod_a f_a(x_a) and the region marginals, with the
/// factors -ln f_a obtained from mobius_factors. Two passes: the first finds
/// the maximal log-weight, the second sums shifted weights.
inline ExactSummary exact_gibbs(const FactorModel& m, std::size_t cap = kEnumerationCap) {
  const auto vars = detail::covered_variables(m);
  const std::size_t total = detail::joint_size(m, vars, cap);
  std::vector<std::size_t> cards;
  for (std::size_t v : vars) cards.push_back(m.variables()[v].states);
  std::vector<std::size_t> pos_of(m.variables().size(), 0);
  for (std::size_t k = 0; k < vars.size(); ++k) pos_of[vars[k]] = k;

  const auto neg_log_f = mobius_factors(m, m.hamiltonians());
  // Per-region stride of each joint digit into the region table.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> digit_strides(m.size());
  for (std::size_t a = 0; a < m.size(); ++a) {
    std::vector<std::size_t> rc;
    for (std::size_t v : m.region(a).vars) rc.push_back(m.variables()[v].states);
    const auto rs = row_major_strides(rc);
    for (std::size_t k = 0; k < rc.size(); ++k) digit_strides[a].push_back({pos_of[m.region(a).vars[k]], rs[k]});
  }

  std::vector<std::size_t> digits(cards.size(), 0), local(m.size(), 0);
  auto for_each_config = [&](auto&& visit) {
    std::fill(digits.begin(), digits.end(), 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
      double lw = 0.0;
      for (std::size_t a = 0; a < m.size(); ++a) {
        std::size_t off = 0;
        for (const auto& [d, st] : digit_strides[a]) off += digits[d] * st;
        local[a] = off;
        lw -= neg_log_f[a][off];
      }
      visit(lw);
      for (std::size_t k = cards.size(); k-- > 0;) {
        if (++digits[k] < cards[k]) break;
        digits[k] = 0;
      }
    }
  };

  double mx = -std::numeric_limits<double>::infinity();
  for_each_config([&](double lw) { mx = std::max(mx, lw); });

  ExactSummary out;
  out.marginals.tables.resize(m.size());
  for (std::size_t a = 0; a < m.size(); ++a) out.marginals.tables[a].assign(m.states(a), 0.0);
  double z = 0.0;
  for_each_config([&](double lw) {
    const double w = std::exp(lw - mx);
    z += w;
    for (std::size_t a = 0; a < m.size(); ++a) out.marginals.tables[a][local[a]] += w;
  });
  for (auto& t : out.marginals.tables)
    for (auto& v : t) v /= z;
  out.log_partition = mx + std::log(z);
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

/// (BT(Q + h u) - BT(Q - h u)) / (2h).
inline double finite_difference_gradient(const FactorModel& m, const PseudoMarginals& q, const TangentVector& u,
                                         double h) {
  detail::check_shape(m, q.tables, "finite_difference_gradient");
  detail::check_shape(m, u.tables, "finite_difference_gradient");
  PseudoMarginals plus = q, minus = q;
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t x = 0; x < m.states(a); ++x) {
      plus.tables[a][x] += h * u.tables[a][x];
      minus.tables[a][x] -= h * u.tables[a][x];
    }
  if (!plus.interior() || !minus.interior())
    throw ValidationError("finite_difference_gradient: step leaves the interior of L(A)");
  return (bethe_energy(m, plus) - bethe_energy(m, minus)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Critical points

struct CriticalPointOptions {
  std::size_t restarts = 32;
  double tol = kCriticalityTol;  // projected-gradient threshold for acceptance
  std::uint64_t seed = 0;
  std::size_t max_iter = 5'000;
};

struct CriticalPointSearch {
  std::vector<PseudoMarginals> points;  // deduplicated, sorted lexicographically
  std::vector<double> energies;         // BT at each point
  std::size_t runs = 0;
  std::size_t accepted_runs = 0;
};

inline constexpr double kInteriorFloor = 1e-12;
inline constexpr double kPointMergeDistance = 1e-6;

namespace detail {

/// Largest t with x + t d >= floor entrywise (infinity when d >= 0).
inline double interior_step_limit(const Eigen::VectorXd& x, const Eigen::VectorXd& d, double floor) {
  double t = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < d.size(); ++k)
    if (d(k) < 0.0) t = std::min(t, (x(k) - floor) / -d(k));
  return std::max(t, 0.0);
}

/// Descent from `q` in the null-space coordinates of L(A). The direction is
/// the Newton direction when the reduced Hessian B^T diag(c/Q) B is positive
/// definite and the projected gradient preconditioned by B^T diag(1/Q) B
/// otherwise; step sizes follow Armijo backtracking (c = 1e-4, shrink 0.5)
/// clamped to keep entries >= 1e-12 and at most half way to the boundary.
inline PseudoMarginals descend(const FactorModel& m, PseudoMarginals q, const CriticalPointOptions& opt, bool& ok) {
  const auto& lp = local_polytope(m);
  const Eigen::MatrixXd& basis = lp.basis();
  Eigen::VectorXd curv(static_cast<Eigen::Index>(lp.ambient_dimension()));
  ok = false;
  if (lp.dimension() == 0) {
    ok = true;
    return q;
  }
  Eigen::VectorXd x = lp.flatten(q.tables);
  double f = bethe_energy(m, q);
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const Eigen::VectorXd g = basis.transpose() * lp.flatten(bethe_gradient(m, q));
    const double gn = g.norm();
    if (gn <= opt.tol) {
      ok = true;
      return q;
    }
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t s = 0; s < m.states(a); ++s)
        curv(lp.at(a, s)) = static_cast<double>(m.counting(a)) / q.tables[a][s];
    const Eigen::MatrixXd hess = basis.transpose() * curv.asDiagonal() * basis;
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    Eigen::VectorXd step;
    bool newton_step = false;
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd newton = -llt.solve(g);
      if (newton.allFinite() && newton.dot(g) < 0.0) {
        step = newton;
        newton_step = true;
      }
    }
    if (!newton_step) {
      // Gradient in the metric B^T diag(1/Q) B, which is positive definite and
      // shrinks moves of small entries.
      for (Eigen::Index k = 0; k < x.size(); ++k) curv(k) = 1.0 / x(k);
      const Eigen::MatrixXd metric = basis.transpose() * curv.asDiagonal() * basis;
      step = -metric.llt().solve(g);
      if (!step.allFinite() || step.dot(g) >= 0.0) step = -g;
    }
    const Eigen::VectorXd d = basis * step;
    const double slope = g.dot(step);
    // Fraction-to-boundary rule: never travel more than half way to Q = 0.
    double t = std::min({1.0, 0.5 * interior_step_limit(x, d, 0.0), interior_step_limit(x, d, kInteriorFloor)});
    bool moved = false;
    while (t > 1e-20) {
      const Eigen::VectorXd xn = x + t * d;
      PseudoMarginals qn{lp.unflatten(xn)};
      if (qn.interior()) {
        const double fn = bethe_energy(m, qn);
        // Near convergence energy differences drown in rounding; a full Newton
        // step is then accepted when it shrinks the projected gradient.
        const bool armijo = fn <= f + 1e-4 * t * slope;
        if (armijo || (newton_step && t == 1.0 && projected_gradient_norm(m, qn) < 0.5 * gn)) {
          x = xn;
          q = std::move(qn);
          f = fn;
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) break;  // stalled, typically against the boundary
  }
  ok = q.interior() && projected_gradient_norm(m, q) <= opt.tol;
  return q;
}

inline bool tables_less(const PseudoMarginals& a, const PseudoMarginals& b) { return a.tables < b.tables; }

}  // namespace detail

/// Multi-start descent from sample_pseudomarginals(seed + r); keeps interior
/// end points with projected gradient <= tol, merged at max-abs distance 1e-6.
inline CriticalPointSearch enumerate_critical_points(const FactorModel& m, const CriticalPointOptions& opt = {}) {
  CriticalPointSearch out;
  std::vector<PseudoMarginals> found;
  for (std::size_t r = 0; r < std::max<std::size_t>(opt.restarts, 1); ++r) {
    ++out.runs;
    bool ok = false;
    PseudoMarginals q = detail::descend(m, sample_pseudomarginals(m, opt.seed + r), opt, ok);
    if (!ok) continue;
    ++out.accepted_runs;
    found.push_back(std::move(q));
  }
  std::sort(found.begin(), found.end(), detail::tables_less);
  for (auto& q : found) {
    const bool known = std::any_of(out.points.begin(), out.points.end(), [&](const PseudoMarginals& p) {
      return table_distance(p.tables, q.tables) <= kPointMergeDistance;
    });
    if (!known) out.points.push_back(std::move(q));
  }
  for (const auto& p : out.points) out.energies.push_back(bethe_energy(m, p));
  return out;
}

/// Symmetric Hausdorff distance between two point sets under max-abs table
/// distance; 0 for two empty sets, infinity if exactly one is empty.
inline double hausdorff_distance(const std::vector<PseudoMarginals>& a, const std::vector<PseudoMarginals>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto directed = [](const auto& from, const auto& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, table_distance(p.tables, q.tables));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

// ---------------------------------------------------------------------------
// Fiber sub-optimization

/// For fixed P over E_{a_down}: sum_y P(y) sum_{z in fiber(y)} k(z) (H_a(z) + ln k(z)),
/// with 0 ln 0 = 0. `kernel` is indexed by E_a like ReductionStep::kernel.
inline double fiber_objective(const FactorModel& m, std::size_t a, std::size_t down, const Table& p_down,
                              const Table& kernel) {
  const auto proj = m.projection(a, down);
  if (kernel.size() != proj.size() || p_down.size() != m.states(down))
    throw ValidationError("fiber_objective: dimension mismatch");
  double v = 0.0;
  for (std::size_t z = 0; z < kernel.size(); ++z) {
    const double k = kernel[z];
    if (k < 0.0) throw ValidationError("fiber_objective: negative kernel entry");
    if (k > 0.0) v += p_down[proj[z]] * k * (m.hamiltonian(a)[z] + std::log(k));
  }
  return v;
}

namespace detail {

/// Euclidean projection of v onto {w : w >= lo, sum w = 1}.
inline std::vector<double> project_shifted_simplex(std::vector<double> v, double lo) {
  const std::size_t n = v.size();
  const double mass = 1.0 - lo * static_cast<double>(n);
  for (auto& x : v) x -= lo;
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += u[k];
    const double t = (cum - mass) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  for (auto& x : v) x = std::max(x - theta, 0.0) + lo;
  return v;
}

}  // namespace detail

struct FiberCheck {
  bool passed = false;
  double closed_form = 0.0;     // objective at pi*
  double best_descent = 0.0;    // smallest objective reached by descent
  double margin = 0.0;          // best_descent - closed_form
};

/// Compares the closed-form kernel pi* (the Gibbs conditional of H_a on each
/// fiber) with projected-gradient descent over kernels from `starts` random
/// starting kernels; passes iff objective(pi*) <= every descent result + tol.
/// `reduced` holds pseudo-marginals of the model with a removed.
inline FiberCheck fiber_min_check_report(const FactorModel& m, std::string_view a, const PseudoMarginals& reduced,
                                         double tol, std::uint64_t seed = 0, std::size_t starts = 20) {
  std::string target;
  const std::size_t ia = detail::require_beat(m, a, BeatKind::colinear, target);
  const std::size_t id = m.region_index(target);
  if (reduced.tables.size() + 1 != m.size()) throw ValidationError("fiber_min_check: expected reduced-model beliefs");
  const Table& p = reduced.tables.at(detail::reduced_index(id, ia));
  if (p.size() != m.states(id)) throw ValidationError("fiber_min_check: dimension mismatch");

  const auto [pi_star, hhat] = colinear_kernel(m, ia, id);
  const auto proj = m.projection(ia, id);
  std::vector<std::vector<std::size_t>> fibers(m.states(id));
  for (std::size_t z = 0; z < proj.size(); ++z) fibers[proj[z]].push_back(z);

  FiberCheck out;
  out.closed_form = fiber_objective(m, ia, id, p, pi_star);
  out.best_descent = std::numeric_limits<double>::infinity();
  const Table& ha = m.hamiltonian(ia);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr double eps = 1e-12;
  for (std::size_t s = 0; s < starts; ++s) {
    Table k(ha.size());
    for (const auto& fib : fibers) {
      double z = 0.0;
      for (std::size_t i : fib) z += (k[i] = std::exp(2.0 * normal(rng)));
      for (std::size_t i : fib) k[i] /= z;
    }
    // Each fiber is an independent simplex problem weighted by P(y).
    for (std::size_t y = 0; y < fibers.size(); ++y) {
      const auto& fib = fibers[y];
      if (fib.size() < 2 || p[y] <= 0.0) continue;
      auto obj = [&](const std::vector<double>& w) {
        double v = 0.0;
        for (std::size_t j = 0; j < fib.size(); ++j) v += w[j] * (ha[fib[j]] + std::log(w[j]));
        return v;
      };
      std::vector<double> w;
      for (std::size_t i : fib) w.push_back(std::max(k[i], eps));
      w = detail::project_shifted_simplex(w, eps);
      double fw = obj(w);
      double t = 1.0;
      for (int it = 0; it < 5000; ++it) {
        std::vector<double> g(fib.size());
        for (std::size_t j = 0; j < fib.size(); ++j) g[j] = ha[fib[j]] + std::log(w[j]) + 1.0;
        bool moved = false;
        t = std::min(1.0, 2.0 * t);
        while (t > 1e-18) {
          std::vector<double> cand(fib.size());
          for (std::size_t j = 0; j < fib.size(); ++j) cand[j] = w[j] - t * g[j];
          cand = detail::project_shifted_simplex(cand, eps);
          double dec = 0.0;
          for (std::size_t j = 0; j < fib.size(); ++j) dec += g[j] * (cand[j] - w[j]);
          const double fc = obj(cand);
          if (fc <= fw + 1e-4 * dec) {
            const double change = fw - fc;
            w = std::move(cand);
            fw = fc;
            moved = change > 1e-16;
            break;
          }
          t *= 0.5;
        }
        if (!moved) break;
      }
      for (std::size_t j = 0; j < fib.size(); ++j) k[fib[j]] = w[j];
    }
    out.best_descent = std::min(out.best_descent, fiber_objective(m, ia, id, p, k));
  }
  out.margin = out.best_descent - out.closed_form;
  out.passed = out.margin >= -tol;
  return out;
}

inline bool fiber_min_check(const FactorModel& m, std::string_view a, const PseudoMarginals& reduced, double tol,
                            std::uint64_t seed = 0) {
  return fiber_min_check_report(m, a, reduced, tol, seed).passed;
}

}  // namespace bethe
