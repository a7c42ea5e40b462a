#pragma once

// Model-level retraction of beat points: Hamiltonian rewriting, the maps
// phi / s (linear steps) and psi (colinear steps), and the reduction of a
// model to the core of its region poset with lifting / projection of beliefs.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bethe/beliefs.hpp"
#include "bethe/error.hpp"
#include "bethe/gbp.hpp"
#include "bethe/model.hpp"
#include "bethe/poset.hpp"

namespace bethe {

/// How a recorded table changes a Hamiltonian:
///   replace          H~ = table
///   subtract_lifted  H~ = H - table, table = H^ o pi lifted onto the region (colinear Case 1)
///   scale_correct    H~ = H - table, table = H^ / c_B(a_down)               (colinear Case 2)
enum class RewriteKind { replace, subtract_lifted, scale_correct };

inline const char* to_string(RewriteKind k) {
  switch (k) {
    case RewriteKind::replace: return "replace";
    case RewriteKind::subtract_lifted: return "subtract-lifted";
    case RewriteKind::scale_correct: return "scale-correct";
  }
  return "?";
}

struct HamiltonianRewrite {
  std::string region;
  RewriteKind kind = RewriteKind::replace;
  Table table;  // over E_region

  friend bool operator==(const HamiltonianRewrite&, const HamiltonianRewrite&) = default;
};

inline Table apply_rewrite(const Table& h, const HamiltonianRewrite& rw) {
  if (rw.table.size() != h.size()) throw ValidationError("rewrite table for '" + rw.region + "' has wrong dimension");
  if (rw.kind == RewriteKind::replace) return rw.table;
  Table out(h.size());
  for (std::size_t x = 0; x < h.size(); ++x) out[x] = h[x] - rw.table[x];
  return out;
}

struct ReductionStep {
  BeatKind kind = BeatKind::linear;
  std::string removed;
  std::string target;     // a_up (linear) or a_down (colinear)
  int rewrite_case = 0;   // 0 for linear steps, 1 or 2 for colinear steps
  long long target_counting = 0;  // c_B(target) in the reduced poset
  std::vector<HamiltonianRewrite> rewrites;
  /// Colinear steps: pi(x | x_{a_down}) for every x in E_removed; the
  /// conditioning configuration is the projection of x, all other entries of
  /// the dense kernel over E_removed x E_target are zero.
  Table kernel;
  /// Colinear steps: H^_{a_down}(y) = H_{a_down}(y) + log sum_{z_{a_down} = y} e^{-H_a(z)}.
  Table hhat;
  std::shared_ptr<const FactorModel> source;
  std::shared_ptr<const FactorModel> result;
};

namespace detail {

inline std::size_t reduced_index(std::size_t source_index, std::size_t removed) {
  return source_index > removed ? source_index - 1 : source_index;
}

inline std::size_t require_beat(const FactorModel& m, std::string_view a, BeatKind kind, std::string& target) {
  const std::size_t idx = m.region_index(a);
  for (const auto& bp : find_beat_points(m.poset()))
    if (bp.point == a && bp.kind == kind) {
      target = bp.target;
      return idx;
    }
  throw ValidationError("region '" + std::string(a) + "' is not a " + to_string(kind) + " point");
}

inline const FactorModel& source_of(const ReductionStep& step) {
  if (!step.source || !step.result) throw ValidationError("reduction step carries no models");
  return *step.source;
}

}  // namespace detail

/// Removes a linear region; every remaining table is kept (i*H).
inline std::pair<FactorModel, ReductionStep> retract_linear_model(const FactorModel& m, std::string_view a) {
  ReductionStep step;
  step.kind = BeatKind::linear;
  step.removed = std::string(a);
  const std::size_t idx = detail::require_beat(m, a, BeatKind::linear, step.target);
  FactorModel out = m.without_region(idx);
  step.target_counting = out.counting(out.region_index(step.target));
  step.source = std::make_shared<const FactorModel>(m);
  step.result = std::make_shared<const FactorModel>(out);
  return {std::move(out), std::move(step)};
}

/// Gibbs kernel pi(x | x_{a_down}) = e^{-H_a(x)} / sum_{z_{a_down} = x_{a_down}} e^{-H_a(z)} and
/// H^(y) = H_{a_down}(y) + log sum_{z_{a_down} = y} e^{-H_a(z)}.
inline std::pair<Table, Table> colinear_kernel(const FactorModel& m, std::size_t a, std::size_t down) {
  const auto proj = m.projection(a, down);
  const Table& ha = m.hamiltonian(a);
  Table neg(ha.size());
  for (std::size_t z = 0; z < ha.size(); ++z) neg[z] = -ha[z];
  const Table lse = detail::grouped_log_sum_exp(neg, proj, m.states(down));
  Table kernel(ha.size());
  for (std::size_t z = 0; z < ha.size(); ++z) kernel[z] = std::exp(neg[z] - lse[proj[z]]);
  Table hhat(m.states(down));
  for (std::size_t y = 0; y < hhat.size(); ++y) hhat[y] = m.hamiltonian(down)[y] + lse[y];
  return {std::move(kernel), std::move(hhat)};
}

/// Removes a colinear region a with lower neighbour a_down and rewrites one
/// Hamiltonian so that BT_{A,H}(psi(Q)) = BT_{B,H~}(Q):
///   Case 1 (a_down linear in B with target b_up): H~_{b_up} = H_{b_up} - H^ o pi^{b_up}_{a_down};
///   Case 2 (otherwise):                           H~_{a_down} = H_{a_down} - H^ / c_B(a_down).
inline std::pair<FactorModel, ReductionStep> retract_colinear_model(const FactorModel& m, std::string_view a) {
  ReductionStep step;
  step.kind = BeatKind::colinear;
  step.removed = std::string(a);
  const std::size_t idx = detail::require_beat(m, a, BeatKind::colinear, step.target);
  const std::size_t down = m.region_index(step.target);
  std::tie(step.kernel, step.hhat) = colinear_kernel(m, idx, down);

  const FactorModel base = m.without_region(idx);
  const std::size_t bdown = base.region_index(step.target);
  step.target_counting = base.counting(bdown);
  std::vector<Table> tables = base.hamiltonians();

  std::optional<std::string> up;
  for (const auto& bp : find_beat_points(base.poset()))
    if (bp.point == step.target && bp.kind == BeatKind::linear) up = bp.target;

  if (up) {
    step.rewrite_case = 1;
    const std::size_t bup = base.region_index(*up);
    const auto proj = base.projection(bup, bdown);
    Table lifted(base.states(bup));
    for (std::size_t x = 0; x < lifted.size(); ++x) lifted[x] = step.hhat[proj[x]];
    step.rewrites.push_back({*up, RewriteKind::subtract_lifted, std::move(lifted)});
  } else {
    step.rewrite_case = 2;
    if (step.target_counting == 0)
      throw DegenerateModel("colinear removal of '" + step.removed + "': c_B('" + step.target +
                            "') = 0 outside the linear case");
    Table corr(step.hhat.size());
    for (std::size_t y = 0; y < corr.size(); ++y) corr[y] = step.hhat[y] / static_cast<double>(step.target_counting);
    step.rewrites.push_back({step.target, RewriteKind::scale_correct, std::move(corr)});
  }
  for (const auto& rw : step.rewrites) {
    const std::size_t r = base.region_index(rw.region);
    tables[r] = apply_rewrite(tables[r], rw);
  }
  FactorModel out = base.with_hamiltonians(std::move(tables));
  step.source = std::make_shared<const FactorModel>(m);
  step.result = std::make_shared<const FactorModel>(out);
  return {std::move(out), std::move(step)};
}

/// Re-applies a recorded step (region removal plus recorded rewrites) to `m`.
inline FactorModel apply_step(const FactorModel& m, const ReductionStep& step) {
  std::string target;
  detail::require_beat(m, step.removed, step.kind, target);
  if (target != step.target)
    throw ValidationError("recorded target '" + step.target + "' of '" + step.removed + "' does not match '" + target + "'");
  const FactorModel base = m.without_region(m.region_index(step.removed));
  if (step.rewrites.empty()) return base;
  std::vector<Table> tables = base.hamiltonians();
  for (const auto& rw : step.rewrites) {
    const std::size_t r = base.region_index(rw.region);
    tables[r] = apply_rewrite(tables[r], rw);
  }
  return base.with_hamiltonians(std::move(tables));
}

// ---------------------------------------------------------------------------
// Belief maps

/// phi: L(A) -> L(B), drops the removed region's table. Used for both kinds of
/// steps when projecting forwards.
inline PseudoMarginals phi(const ReductionStep& step, const PseudoMarginals& q) {
  const FactorModel& src = detail::source_of(step);
  detail::check_shape(src, q.tables, "phi");
  const std::size_t removed = src.region_index(step.removed);
  PseudoMarginals out;
  for (std::size_t a = 0; a < q.tables.size(); ++a)
    if (a != removed) out.tables.push_back(q.tables[a]);
  return out;
}

/// s: L(B) -> L(A) for a linear step, reinstating Q_a as the marginal of Q_{a_up}.
inline PseudoMarginals s(const ReductionStep& step, const PseudoMarginals& q) {
  if (step.kind != BeatKind::linear) throw ValidationError("s applies to linear steps only");
  const FactorModel& src = detail::source_of(step);
  detail::check_shape(*step.result, q.tables, "s");
  const std::size_t removed = src.region_index(step.removed);
  const std::size_t up = src.region_index(step.target);
  const auto proj = src.projection(up, removed);
  const Table& qup = q.tables[detail::reduced_index(up, removed)];
  Table qa(src.states(removed), 0.0);
  for (std::size_t y = 0; y < qup.size(); ++y) qa[proj[y]] += qup[y];
  PseudoMarginals out;
  out.tables = q.tables;
  out.tables.insert(out.tables.begin() + static_cast<std::ptrdiff_t>(removed), std::move(qa));
  return out;
}

/// psi: L(B) -> L(A) for a colinear step, psi(Q)_a(x) = pi(x | x_{a_down}) Q_{a_down}(x_{a_down}).
inline PseudoMarginals psi(const ReductionStep& step, const PseudoMarginals& q) {
  if (step.kind != BeatKind::colinear) throw ValidationError("psi applies to colinear steps only");
  const FactorModel& src = detail::source_of(step);
  detail::check_shape(*step.result, q.tables, "psi");
  const std::size_t removed = src.region_index(step.removed);
  const std::size_t down = src.region_index(step.target);
  const auto proj = src.projection(removed, down);
  const Table& qd = q.tables[detail::reduced_index(down, removed)];
  if (step.kernel.size() != proj.size()) throw ValidationError("psi: kernel has wrong dimension");
  Table qa(proj.size());
  for (std::size_t x = 0; x < qa.size(); ++x) qa[x] = step.kernel[x] * qd[proj[x]];
  PseudoMarginals out;
  out.tables = q.tables;
  out.tables.insert(out.tables.begin() + static_cast<std::ptrdiff_t>(removed), std::move(qa));
  return out;
}

/// The inverse-direction map of a step: s for linear, psi for colinear.
inline PseudoMarginals lift_step(const ReductionStep& step, const PseudoMarginals& q) {
  return step.kind == BeatKind::linear ? s(step, q) : psi(step, q);
}

// ---------------------------------------------------------------------------
// Pipeline

struct ReductionTrace {
  FactorModel initial;
  std::vector<ReductionStep> steps;
  FactorModel final_model;
};

/// Removes beat points greedily in the order of poset_core's core(): at each
/// step the first beat point of the current poset.
inline ReductionTrace reduce_to_core(const FactorModel& m) {
  ReductionTrace trace{m, {}, m};
  for (;;) {
    const auto beats = find_beat_points(trace.final_model.poset());
    if (beats.empty()) return trace;
    const auto& bp = beats.front();
    auto [next, step] = bp.kind == BeatKind::linear ? retract_linear_model(trace.final_model, bp.point)
                                                    : retract_colinear_model(trace.final_model, bp.point);
    trace.final_model = std::move(next);
    trace.steps.push_back(std::move(step));
  }
}

/// Replays the recorded steps from the initial model, re-attaching the
/// source / result models of every step, and returns the final model. Throws
/// if a recorded step is not applicable.
inline FactorModel replay_trace(ReductionTrace& trace) {
  FactorModel cur = trace.initial;
  for (auto& step : trace.steps) {
    FactorModel next = apply_step(cur, step);
    step.source = std::make_shared<const FactorModel>(cur);
    step.result = std::make_shared<const FactorModel>(next);
    cur = std::move(next);
  }
  return cur;
}

/// Core-side beliefs to full-model beliefs: s / psi applied backwards.
inline PseudoMarginals lift_beliefs(const ReductionTrace& trace, const PseudoMarginals& q) {
  detail::check_shape(trace.final_model, q.tables, "lift_beliefs");
  PseudoMarginals cur = q;
  for (auto it = trace.steps.rbegin(); it != trace.steps.rend(); ++it) cur = lift_step(*it, cur);
  return cur;
}

/// Full-model beliefs to core-side beliefs: drop removed regions forwards.
inline PseudoMarginals project_beliefs(const ReductionTrace& trace, const PseudoMarginals& q) {
  detail::check_shape(trace.initial, q.tables, "project_beliefs");
  PseudoMarginals cur = q;
  for (const auto& step : trace.steps) cur = phi(step, cur);
  return cur;
}

/// The Galois pair of a recorded step on the step's source / result posets
/// (g = r, f = i on (A, B) for linear; g = i, f = r on (B, A) for colinear).
struct StepAdjunction {
  Poset left;
  Poset right;
  GaloisPair pair;
};

inline StepAdjunction step_adjunction(const ReductionStep& step) {
  const FactorModel& src = detail::source_of(step);
  const Retraction r = retract(src.poset(), {step.removed, step.kind, step.target});
  const auto adj = adjunction_of(src.poset(), r, step.kind);
  return {*adj.left, *adj.right, adj.pair};
}

}  // namespace bethe
