#pragma once

// Generalized Belief Propagation on chain-length <= 1 region posets.
//
// Messages live on cover pairs (lower i < upper a) and are tables over E_i.
// The log-domain factor-graph update is the production path; the
// multiplicative general-poset update is kept as an independent route.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bethe/beliefs.hpp"
#include "bethe/error.hpp"
#include "bethe/model.hpp"

namespace bethe {

/// One table per model cover (same order as FactorModel::covers()), over the
/// lower region's configurations. Whether entries are log-messages M or
/// multiplicative messages m is fixed by the function consuming them.
struct MessageSet {
  std::vector<Table> values;

  friend bool operator==(const MessageSet&, const MessageSet&) = default;
};

namespace detail {

inline void check_messages(const FactorModel& m, const MessageSet& msgs) {
  if (msgs.values.size() != m.covers().size()) throw ValidationError("expected one message per cover pair");
  for (std::size_t k = 0; k < msgs.values.size(); ++k)
    if (msgs.values[k].size() != m.states(m.covers()[k].lower))
      throw ValidationError("message on cover " + std::to_string(k) + " has wrong dimension");
}

inline void require_finite(const MessageSet& msgs, const char* where) {
  for (std::size_t k = 0; k < msgs.values.size(); ++k)
    for (double v : msgs.values[k])
      if (!std::isfinite(v))
        throw NumericError(std::string(where) + ": non-finite message entry on cover " + std::to_string(k));
}

/// Sum of log-messages into lower region `j` from all its upper neighbours
/// except the one on cover `skip` (pass covers().size() to keep all).
inline Table incoming_to(const FactorModel& m, const MessageSet& msgs, std::size_t j, std::size_t skip) {
  Table s(m.states(j), 0.0);
  for (std::size_t k : m.covers_above(j)) {
    if (k == skip) continue;
    for (std::size_t x = 0; x < s.size(); ++x) s[x] += msgs.values[k][x];
  }
  return s;
}

/// log sum_y exp(v(y)) grouped by proj(y), with a max shift per group.
inline Table grouped_log_sum_exp(const Table& v, const std::vector<std::size_t>& proj, std::size_t groups) {
  Table mx(groups, -std::numeric_limits<double>::infinity());
  for (std::size_t y = 0; y < v.size(); ++y) mx[proj[y]] = std::max(mx[proj[y]], v[y]);
  Table acc(groups, 0.0);
  for (std::size_t y = 0; y < v.size(); ++y) acc[proj[y]] += std::exp(v[y] - mx[proj[y]]);
  Table out(groups);
  for (std::size_t x = 0; x < groups; ++x) out[x] = mx[x] + std::log(acc[x]);
  return out;
}

inline double log_sum_exp(const Table& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

inline double oscillation(const Table& t) {
  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  return *hi - *lo;
}

}  // namespace detail

/// All-zero log-messages (every multiplicative message equal to 1).
inline MessageSet zero_messages(const FactorModel& m) {
  MessageSet out;
  for (const auto& cov : m.covers()) out.values.emplace_back(m.states(cov.lower), 0.0);
  return out;
}

/// Log-messages with entries drawn uniformly from [-scale, scale].
inline MessageSet random_messages(const FactorModel& m, std::uint64_t seed, double scale = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-scale, scale);
  MessageSet out = zero_messages(m);
  for (auto& t : out.values)
    for (auto& v : t) v = unif(rng);
  return out;
}

inline MessageSet exp_messages(const MessageSet& log_msgs) {
  MessageSet out = log_msgs;
  for (auto& t : out.values)
    for (auto& v : t) v = std::exp(v);
  return out;
}

inline MessageSet log_messages(const MessageSet& msgs) {
  MessageSet out = msgs;
  for (auto& t : out.values)
    for (auto& v : t) {
      if (!(v > 0.0)) throw ValidationError("log_messages: nonpositive message entry");
      v = std::log(v);
    }
  return out;
}

/// Subtracts C(M) = sup_x M(x) from every log-message.
inline MessageSet normalize(const MessageSet& msgs) {
  MessageSet out = msgs;
  for (auto& t : out.values) {
    if (t.empty()) continue;
    const double c = *std::max_element(t.begin(), t.end());
    for (auto& v : t) v -= c;
  }
  return out;
}

/// One synchronous log-domain update:
/// M'_{a->i}(x) = H_i(x) + log sum_{y : y_i = x} exp(-H_a(y) + sum_{j < a, j != i} sum_{b > j, b != a} M_{b->j}(y_j)).
inline MessageSet factor_graph_step(const FactorModel& m, const MessageSet& msgs) {
  detail::check_messages(m, msgs);
  const auto& covers = m.covers();
  // into[k] for cover k = (j, a): messages reaching j from its other upper regions.
  std::vector<Table> into(covers.size());
  for (std::size_t k = 0; k < covers.size(); ++k) into[k] = detail::incoming_to(m, msgs, covers[k].lower, k);

  MessageSet out;
  out.values.resize(covers.size());
  for (std::size_t k = 0; k < covers.size(); ++k) {
    const auto& cov = covers[k];
    const auto& ha = m.hamiltonian(cov.upper);
    Table v(ha.size());
    for (std::size_t y = 0; y < ha.size(); ++y) {
      double s = -ha[y];
      for (std::size_t k2 : m.covers_below(cov.upper))
        if (k2 != k) s += into[k2][covers[k2].projection[y]];
      v[y] = s;
    }
    Table msg = detail::grouped_log_sum_exp(v, cov.projection, m.states(cov.lower));
    const auto& hi = m.hamiltonian(cov.lower);
    for (std::size_t x = 0; x < msg.size(); ++x) msg[x] += hi[x];
    out.values[k] = std::move(msg);
  }
  return out;
}

/// One synchronous application of the condensed multiplicative update
/// m'_{a->b}(x) = m_{a->b}(x) * [sum_{y_b = x} e^{-H_a(y)} prod_{c <= a} prod_{d >= c, d !<= a} m_{d->c}(y_c)]
///                             / [e^{-H_b(x)} prod_{c <= b} prod_{d >= c, d !<= b} m_{d->c}(x_c)],
/// evaluated directly from the order relation. Messages m_{a->a} are 1.
inline MessageSet general_poset_step(const FactorModel& m, const MessageSet& msgs) {
  detail::check_messages(m, msgs);
  for (const auto& t : msgs.values)
    for (double v : t)
      if (!(v > 0.0)) throw ValidationError("general_poset_step: nonpositive message");
  const Poset& p = m.poset();
  const std::size_t n = p.size();
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> cover_of;  // (lower, upper) -> cover
  for (std::size_t k = 0; k < m.covers().size(); ++k) cover_of[{m.covers()[k].lower, m.covers()[k].upper}] = k;

  // Product of m_{d->c}(z_c) over c <= r and d >= c with d !<= r, at every z in E_r.
  auto incoming_product = [&](std::size_t r) {
    Table prod(m.states(r), 1.0);
    for (std::size_t c = 0; c < n; ++c) {
      if (!p.leq(c, r)) continue;
      const auto proj = m.projection(r, c);
      for (std::size_t d = 0; d < n; ++d) {
        if (!p.leq(c, d) || p.leq(d, r)) continue;
        auto it = cover_of.find({c, d});
        if (it == cover_of.end()) throw ValidationError("general_poset_step: relation without a message");
        const auto& msg = msgs.values[it->second];
        for (std::size_t z = 0; z < prod.size(); ++z) prod[z] *= msg[proj[z]];
      }
    }
    return prod;
  };

  std::vector<Table> inc(n);
  for (std::size_t r = 0; r < n; ++r) inc[r] = incoming_product(r);

  MessageSet out;
  out.values.resize(m.covers().size());
  for (std::size_t k = 0; k < m.covers().size(); ++k) {
    const auto& cov = m.covers()[k];
    const auto& ha = m.hamiltonian(cov.upper);
    const auto& hb = m.hamiltonian(cov.lower);
    Table num(m.states(cov.lower), 0.0);
    for (std::size_t y = 0; y < ha.size(); ++y) num[cov.projection[y]] += std::exp(-ha[y]) * inc[cov.upper][y];
    Table next(num.size());
    for (std::size_t x = 0; x < num.size(); ++x)
      next[x] = msgs.values[k][x] * num[x] / (std::exp(-hb[x]) * inc[cov.lower][x]);
    out.values[k] = std::move(next);
  }
  return out;
}

/// Region beliefs b_a(x) proportional to e^{-H_a(x)} prod_{c <= a} n_{c->a}(x_c)
/// from log-messages, each normalized to sum to 1.
inline PseudoMarginals beliefs_from_messages(const FactorModel& m, const MessageSet& msgs) {
  detail::check_messages(m, msgs);
  const auto& covers = m.covers();
  PseudoMarginals q;
  q.tables.resize(m.size());
  for (std::size_t a = 0; a < m.size(); ++a) {
    const auto& h = m.hamiltonian(a);
    Table logb(h.size());
    const Table own = detail::incoming_to(m, msgs, a, covers.size());
    for (std::size_t y = 0; y < h.size(); ++y) logb[y] = -h[y] + own[y];
    for (std::size_t k : m.covers_below(a)) {
      const Table into = detail::incoming_to(m, msgs, covers[k].lower, k);
      for (std::size_t y = 0; y < h.size(); ++y) logb[y] += into[covers[k].projection[y]];
    }
    const double lz = detail::log_sum_exp(logb);
    Table b(h.size());
    for (std::size_t y = 0; y < h.size(); ++y) b[y] = std::exp(logb[y] - lz);
    q.tables[a] = std::move(b);
  }
  return q;
}

/// Lambda = max over covers (i < a) of osc(H_i) + osc(H_a). Every normalized
/// updated message lies in [-Lambda, 0].
inline double oscillation_bound(const FactorModel& m) {
  double lambda = 0.0;
  for (const auto& cov : m.covers())
    lambda = std::max(lambda, detail::oscillation(m.hamiltonian(cov.lower)) + detail::oscillation(m.hamiltonian(cov.upper)));
  return lambda;
}

inline double message_distance(const MessageSet& a, const MessageSet& b) { return table_distance(a.values, b.values); }

// ---------------------------------------------------------------------------
// Iteration

struct BPOptions {
  double damping = 0.5;
  double tol = 1e-10;
  std::size_t max_iter = 10'000;
};

struct BPRunReport {
  std::size_t iterations = 0;
  double residual = 0.0;  // max-abs change of normalized log-messages in the last sweep
  bool converged = false;
  MessageSet messages;  // normalized
  PseudoMarginals beliefs;
};

/// Damped synchronous iteration M <- normalize((1 - damping) normalize(step(M)) + damping M).
inline BPRunReport run_gbp(const FactorModel& m, const MessageSet& initial, const BPOptions& opt = {}) {
  if (!(opt.damping >= 0.0 && opt.damping < 1.0)) throw ValidationError("damping must lie in [0, 1)");
  if (!(opt.tol > 0.0)) throw ValidationError("tolerance must be positive");
  detail::check_messages(m, initial);
  detail::require_finite(initial, "run_gbp");

  BPRunReport rep;
  MessageSet cur = normalize(initial);
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    MessageSet next = normalize(factor_graph_step(m, cur));
    if (opt.damping > 0.0) {
      for (std::size_t k = 0; k < next.values.size(); ++k)
        for (std::size_t x = 0; x < next.values[k].size(); ++x)
          next.values[k][x] = (1.0 - opt.damping) * next.values[k][x] + opt.damping * cur.values[k][x];
      next = normalize(next);
    }
    detail::require_finite(next, "run_gbp");
    rep.residual = message_distance(next, cur);
    rep.iterations = it;
    cur = std::move(next);
    if (rep.residual <= opt.tol) {
      rep.converged = true;
      break;
    }
  }
  rep.messages = std::move(cur);
  rep.beliefs = beliefs_from_messages(m, rep.messages);
  return rep;
}

inline constexpr double kFixedPointMergeDistance = 1e-6;

struct FixedPointSearch {
  std::vector<BPRunReport> fixed_points;  // converged and deduplicated
  std::size_t runs = 0;
  std::size_t converged_runs = 0;
  std::vector<double> residuals;         // final residual of every run, in run order
  std::vector<std::size_t> iterations;   // sweeps of every run, in run order
};

/// Multi-start GBP: restart 0 starts from zero messages, restart r > 0 from
/// random_messages(seed + r). Converged runs closer than 1e-6 in normalized
/// log-message space are merged; results are sorted lexicographically by
/// their messages.
inline FixedPointSearch find_fixed_points(const FactorModel& m, const BPOptions& opt, std::size_t restarts,
                                          std::uint64_t seed) {
  FixedPointSearch s;
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    const MessageSet start = r == 0 ? zero_messages(m) : random_messages(m, seed + r);
    BPRunReport rep = run_gbp(m, start, opt);
    ++s.runs;
    s.residuals.push_back(rep.residual);
    s.iterations.push_back(rep.iterations);
    if (!rep.converged) continue;
    ++s.converged_runs;
    const bool known = std::any_of(s.fixed_points.begin(), s.fixed_points.end(), [&](const BPRunReport& f) {
      return message_distance(f.messages, rep.messages) <= kFixedPointMergeDistance;
    });
    if (!known) s.fixed_points.push_back(std::move(rep));
  }
  std::sort(s.fixed_points.begin(), s.fixed_points.end(),
            [](const BPRunReport& a, const BPRunReport& b) { return a.messages.values < b.messages.values; });
  return s;
}

}  // namespace bethe
