#pragma once

// Pseudo-marginals on the local polytope L(A), its tangent space, and the
// generalized Bethe free energy with its differential.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bethe/error.hpp"
#include "bethe/model.hpp"

namespace bethe {

/// One probability table per region, indexed like the model's regions.
struct PseudoMarginals {
  std::vector<Table> tables;

  bool interior() const {
    for (const auto& t : tables)
      for (double q : t)
        if (!(q > 0.0)) return false;
    return true;
  }

  friend bool operator==(const PseudoMarginals&, const PseudoMarginals&) = default;
};

/// A direction in the tangent space of L(A): tables that sum to zero and
/// commute with marginalization.
struct TangentVector {
  std::vector<Table> tables;
};

namespace detail {

template <class Tables>
void check_shape(const FactorModel& m, const Tables& t, const char* what) {
  if (t.size() != m.size()) throw ValidationError(std::string(what) + ": expected one table per region");
  for (std::size_t a = 0; a < m.size(); ++a)
    if (t[a].size() != m.states(a))
      throw ValidationError(std::string(what) + ": table for '" + m.region(a).key + "' has " +
                            std::to_string(t[a].size()) + " entries, expected " + std::to_string(m.states(a)));
}

inline void require_interior(const PseudoMarginals& q, const char* what) {
  if (!q.interior()) throw ValidationError(std::string(what) + ": pseudo-marginals on the boundary of L(A)");
}

}  // namespace detail

/// Largest violation of normalization, non-negativity and marginalization.
inline double consistency_residual(const FactorModel& m, const PseudoMarginals& q) {
  detail::check_shape(m, q.tables, "consistency_residual");
  double worst = 0.0;
  for (const auto& t : q.tables) {
    double s = 0.0;
    for (double v : t) {
      s += v;
      worst = std::max(worst, -v);
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  for (const auto& cov : m.covers()) {
    Table marg(m.states(cov.lower), 0.0);
    const auto& up = q.tables[cov.upper];
    for (std::size_t y = 0; y < up.size(); ++y) marg[cov.projection[y]] += up[y];
    for (std::size_t x = 0; x < marg.size(); ++x)
      worst = std::max(worst, std::abs(marg[x] - q.tables[cov.lower][x]));
  }
  return worst;
}

inline bool is_locally_consistent(const FactorModel& m, const PseudoMarginals& q, double tol) {
  return consistency_residual(m, q) <= tol;
}

// ---------------------------------------------------------------------------
// Tangent space

/// Orthonormal basis of T L(A), the null space of the normalization and
/// marginalization constraints, in the flattened coordinates (region tables
/// concatenated in region order).
class LocalPolytope {
 public:
  explicit LocalPolytope(const FactorModel& m) {
    offsets_.push_back(0);
    for (std::size_t a = 0; a < m.size(); ++a) offsets_.push_back(offsets_.back() + m.states(a));
    const auto n = static_cast<Eigen::Index>(offsets_.back());

    std::size_t rows = m.size();
    for (const auto& cov : m.covers()) rows += m.states(cov.lower);
    Eigen::MatrixXd constraints_t = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(rows));
    Eigen::Index row = 0;
    for (std::size_t a = 0; a < m.size(); ++a, ++row)
      for (std::size_t x = 0; x < m.states(a); ++x) constraints_t(at(a, x), row) = 1.0;
    for (const auto& cov : m.covers()) {
      for (std::size_t x = 0; x < m.states(cov.lower); ++x) {
        constraints_t(at(cov.lower, x), row + static_cast<Eigen::Index>(x)) = -1.0;
      }
      for (std::size_t y = 0; y < cov.projection.size(); ++y)
        constraints_t(at(cov.upper, y), row + static_cast<Eigen::Index>(cov.projection[y])) += 1.0;
      row += static_cast<Eigen::Index>(m.states(cov.lower));
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(constraints_t);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    Eigen::MatrixXd q = qr.householderQ();
    basis_ = q.rightCols(n - rank);
  }

  std::size_t ambient_dimension() const { return offsets_.back(); }
  std::size_t dimension() const { return static_cast<std::size_t>(basis_.cols()); }
  const Eigen::MatrixXd& basis() const { return basis_; }
  Eigen::Index at(std::size_t region, std::size_t x) const { return static_cast<Eigen::Index>(offsets_[region] + x); }

  template <class Tables>
  Eigen::VectorXd flatten(const Tables& tables) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(ambient_dimension()));
    for (std::size_t a = 0; a + 1 < offsets_.size(); ++a)
      for (std::size_t x = 0; x < tables[a].size(); ++x) v(at(a, x)) = tables[a][x];
    return v;
  }

  std::vector<Table> unflatten(const Eigen::VectorXd& v) const {
    std::vector<Table> out(offsets_.size() - 1);
    for (std::size_t a = 0; a < out.size(); ++a) {
      out[a].resize(offsets_[a + 1] - offsets_[a]);
      for (std::size_t x = 0; x < out[a].size(); ++x) out[a][x] = v(at(a, x));
    }
    return out;
  }

  /// Tangent vector with the given coordinates in the basis.
  TangentVector tangent(const Eigen::VectorXd& coords) const { return {unflatten(basis_ * coords)}; }

 private:
  std::vector<std::size_t> offsets_;
  Eigen::MatrixXd basis_;
};

/// Tangent basis of the model's local polytope, computed once per structure.
inline const LocalPolytope& local_polytope(const FactorModel& m) {
  auto cache = m.cache();
  std::call_once(cache->once, [&] { cache->polytope = std::make_shared<const LocalPolytope>(m); });
  return *cache->polytope;
}

// ---------------------------------------------------------------------------
// Sampling

enum class SampleMode { global, perturbed };

namespace detail {

/// Variables used by at least one region, ascending.
inline std::vector<std::size_t> covered_variables(const FactorModel& m) {
  std::vector<char> used(m.variables().size(), 0);
  for (const auto& r : m.regions())
    for (std::size_t v : r.vars) used[v] = 1;
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < used.size(); ++v)
    if (used[v]) out.push_back(v);
  return out;
}

inline std::size_t joint_size(const FactorModel& m, const std::vector<std::size_t>& vars, std::size_t cap) {
  std::size_t n = 1;
  for (std::size_t v : vars) {
    n *= m.variables()[v].states;
    if (n > cap) throw CapExceeded("joint configuration space exceeds " + std::to_string(cap) + " configurations");
  }
  return n;
}

}  // namespace detail

inline constexpr std::size_t kSamplingCap = 10'000'000;

/// A deterministic interior point of L(A). `global` marginalizes a random
/// strictly positive joint distribution; `perturbed` moves that point along a
/// random tangent direction while keeping every entry at least half its size.
inline PseudoMarginals sample_pseudomarginals(const FactorModel& m, std::uint64_t seed,
                                              SampleMode mode = SampleMode::global) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto vars = detail::covered_variables(m);
  const std::size_t total = detail::joint_size(m, vars, kSamplingCap);
  std::vector<std::size_t> cards;
  for (std::size_t v : vars) cards.push_back(m.variables()[v].states);

  Table joint(total);
  double z = 0.0;
  for (auto& w : joint) {
    w = std::exp(normal(rng));
    z += w;
  }
  for (auto& w : joint) w /= z;

  std::vector<std::size_t> all(vars.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  PseudoMarginals q;
  for (std::size_t a = 0; a < m.size(); ++a) {
    std::vector<std::size_t> local;  // positions of region vars inside `vars`
    for (std::size_t v : m.region(a).vars)
      local.push_back(static_cast<std::size_t>(std::find(vars.begin(), vars.end(), v) - vars.begin()));
    const auto proj = projection_map(all, local, cards);
    Table t(m.states(a), 0.0);
    for (std::size_t x = 0; x < total; ++x) t[proj[x]] += joint[x];
    q.tables.push_back(std::move(t));
  }
  if (mode == SampleMode::global) return q;

  const auto& lp = local_polytope(m);
  if (lp.dimension() == 0) return q;
  Eigen::VectorXd coords(static_cast<Eigen::Index>(lp.dimension()));
  for (Eigen::Index k = 0; k < coords.size(); ++k) coords(k) = normal(rng);
  const Eigen::VectorXd dir = lp.basis() * coords;
  const Eigen::VectorXd base = lp.flatten(q.tables);
  double t = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < dir.size(); ++k)
    if (dir(k) < 0.0) t = std::min(t, -base(k) / dir(k));
  t = std::isfinite(t) ? 0.5 * t : 1.0;
  q.tables = lp.unflatten(base + t * dir);
  return q;
}

// ---------------------------------------------------------------------------
// Bethe free energy

enum class EntropyMode {
  interior,  // every entry must be > 0
  boundary   // 0 ln 0 := 0
};

/// sum_a c(a) (E_{Q_a}[H_a] - S(Q_a)), entropy in nats.
inline double bethe_energy(const FactorModel& m, const PseudoMarginals& q, EntropyMode mode = EntropyMode::interior) {
  detail::check_shape(m, q.tables, "bethe_energy");
  if (mode == EntropyMode::interior) detail::require_interior(q, "bethe_energy");
  double total = 0.0;
  for (std::size_t a = 0; a < m.size(); ++a) {
    const auto& h = m.hamiltonian(a);
    const auto& t = q.tables[a];
    double local = 0.0;
    for (std::size_t x = 0; x < t.size(); ++x) {
      if (t[x] < 0.0) throw ValidationError("bethe_energy: negative probability");
      if (t[x] > 0.0) local += t[x] * (h[x] + std::log(t[x]));
    }
    total += static_cast<double>(m.counting(a)) * local;
  }
  return total;
}

/// Per-entry partial derivatives c(a) (H_a(x) + ln Q_a(x)), dropping the
/// constant +c(a) that vanishes on tangent directions.
inline std::vector<Table> bethe_gradient(const FactorModel& m, const PseudoMarginals& q) {
  detail::check_shape(m, q.tables, "bethe_gradient");
  detail::require_interior(q, "bethe_gradient");
  std::vector<Table> g(m.size());
  for (std::size_t a = 0; a < m.size(); ++a) {
    const double c = static_cast<double>(m.counting(a));
    g[a].resize(m.states(a));
    for (std::size_t x = 0; x < g[a].size(); ++x) g[a][x] = c * (m.hamiltonian(a)[x] + std::log(q.tables[a][x]));
  }
  return g;
}

inline double bethe_differential(const FactorModel& m, const PseudoMarginals& q, const TangentVector& u) {
  detail::check_shape(m, u.tables, "bethe_differential");
  const auto g = bethe_gradient(m, q);
  double d = 0.0;
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t x = 0; x < g[a].size(); ++x) d += u.tables[a][x] * g[a][x];
  return d;
}

/// Coordinates of the Bethe gradient in the tangent basis.
inline Eigen::VectorXd projected_gradient(const FactorModel& m, const PseudoMarginals& q) {
  const auto& lp = local_polytope(m);
  return lp.basis().transpose() * lp.flatten(bethe_gradient(m, q));
}

inline double projected_gradient_norm(const FactorModel& m, const PseudoMarginals& q) {
  return projected_gradient(m, q).norm();
}

inline constexpr double kCriticalityTol = 1e-8;

inline bool is_critical(const FactorModel& m, const PseudoMarginals& q, double tol = kCriticalityTol) {
  return q.interior() && projected_gradient_norm(m, q) <= tol;
}

/// Max-abs distance between two collections of tables with the same shape.
inline double table_distance(const std::vector<Table>& a, const std::vector<Table>& b) {
  if (a.size() != b.size()) throw ValidationError("table_distance: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw ValidationError("table_distance: shape mismatch");
    for (std::size_t x = 0; x < a[i].size(); ++x) d = std::max(d, std::abs(a[i][x] - b[i][x]));
  }
  return d;
}

}  // namespace bethe
