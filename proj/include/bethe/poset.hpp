#pragma once

// Finite posets: order closure, Moebius function, counting coefficients,
// beat points (linear / colinear), retractions, cores, isomorphism search and
// Galois-connection checks.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bethe/error.hpp"

namespace bethe {

class Poset {
 public:
  using Pair = std::pair<std::string, std::string>;

  Poset() = default;

  /// Builds the order generated by `less_than` (pairs (x, y) with x < y).
  /// Redundant pairs are allowed; covers are the transitive reduction.
  static Poset from_relations(std::vector<std::string> elements,
                              const std::vector<Pair>& less_than) {
    Poset p;
    p.ids_ = std::move(elements);
    const std::size_t n = p.ids_.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (!p.index_.emplace(p.ids_[i], i).second)
        throw ValidationError("duplicate poset element '" + p.ids_[i] + "'");
    }
    p.leq_.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) p.leq_[i * n + i] = 1;
    for (const auto& [lo, hi] : less_than) {
      const std::size_t x = p.index_of(lo);
      const std::size_t y = p.index_of(hi);
      if (x == y) throw ValidationError("reflexive pair (" + lo + ", " + lo + ") in strict relation");
      p.leq_[x * n + y] = 1;
    }
    // Warshall closure.
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        if (p.leq_[i * n + k])
          for (std::size_t j = 0; j < n; ++j)
            if (p.leq_[k * n + j]) p.leq_[i * n + j] = 1;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (p.leq_[i * n + j] && p.leq_[j * n + i])
          throw ValidationError("order relation has a cycle through '" + p.ids_[i] + "' and '" +
                                p.ids_[j] + "'");
    p.build_covers();
    return p;
  }

  /// Builds a poset from its Hasse diagram. Rejects (x, x) and transitively
  /// redundant pairs.
  static Poset from_covers(std::vector<std::string> elements, const std::vector<Pair>& covers) {
    Poset p = from_relations(std::move(elements), covers);
    if (p.covers_.size() != covers.size()) {
      for (const auto& [lo, hi] : covers) {
        if (!p.covers(p.index_of(lo), p.index_of(hi)))
          throw ValidationError("cover pair (" + lo + ", " + hi + ") is transitively redundant");
      }
      throw ValidationError("duplicate cover pairs");
    }
    return p;
  }

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const { return ids_; }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(std::string_view id) const {
    if (auto i = find(id)) return *i;
    throw ValidationError("unknown poset element '" + std::string(id) + "'");
  }

  bool leq(std::size_t x, std::size_t y) const { return leq_[x * size() + y] != 0; }
  bool less(std::size_t x, std::size_t y) const { return x != y && leq(x, y); }

  bool covers(std::size_t lower, std::size_t upper) const {
    return std::binary_search(covers_.begin(), covers_.end(), std::pair{lower, upper});
  }

  /// Hasse diagram as (lower, upper) index pairs in lexicographic order.
  const std::vector<std::pair<std::size_t, std::size_t>>& cover_pairs() const { return covers_; }

  std::vector<std::size_t> strictly_above(std::size_t x) const {
    std::vector<std::size_t> out;
    for (std::size_t y = 0; y < size(); ++y)
      if (less(x, y)) out.push_back(y);
    return out;
  }

  std::vector<std::size_t> strictly_below(std::size_t x) const {
    std::vector<std::size_t> out;
    for (std::size_t y = 0; y < size(); ++y)
      if (less(y, x)) out.push_back(y);
    return out;
  }

  bool is_minimal(std::size_t x) const {
    for (std::size_t y = 0; y < size(); ++y)
      if (less(y, x)) return false;
    return true;
  }

  bool is_maximal(std::size_t x) const {
    for (std::size_t y = 0; y < size(); ++y)
      if (less(x, y)) return false;
    return true;
  }

  /// Length (number of strict steps) of the longest chain; 0 for antichains.
  std::size_t height() const {
    const std::size_t n = size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return down_count(a) < down_count(b); });
    std::vector<std::size_t> depth(n, 0);
    std::size_t best = 0;
    for (std::size_t x : order) {
      for (std::size_t y : strictly_below(x)) depth[x] = std::max(depth[x], depth[y] + 1);
      best = std::max(best, depth[x]);
    }
    return best;
  }

  /// Subposet on `keep` (indices into this poset) with the induced order.
  Poset induced(std::span<const std::size_t> keep) const {
    Poset p;
    const std::size_t m = keep.size();
    p.ids_.reserve(m);
    for (std::size_t k : keep) p.ids_.push_back(id(k));
    for (std::size_t i = 0; i < m; ++i) p.index_.emplace(p.ids_[i], i);
    p.leq_.assign(m * m, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) p.leq_[i * m + j] = leq_[keep[i] * size() + keep[j]];
    p.build_covers();
    return p;
  }

  Poset without(std::size_t x) const {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < size(); ++i)
      if (i != x) keep.push_back(i);
    return induced(keep);
  }

  /// Element-for-element equality: same ids in the same order, same order relation.
  friend bool operator==(const Poset& a, const Poset& b) { return a.ids_ == b.ids_ && a.leq_ == b.leq_; }

  std::size_t down_count(std::size_t x) const {
    std::size_t c = 0;
    for (std::size_t y = 0; y < size(); ++y) c += leq(y, x) ? 1 : 0;
    return c;
  }

  std::size_t up_count(std::size_t x) const {
    std::size_t c = 0;
    for (std::size_t y = 0; y < size(); ++y) c += leq(x, y) ? 1 : 0;
    return c;
  }

 private:
  void build_covers() {
    covers_.clear();
    const std::size_t n = size();
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y) {
        if (!less(x, y)) continue;
        bool direct = true;
        for (std::size_t z = 0; z < n && direct; ++z)
          if (less(x, z) && less(z, y)) direct = false;
        if (direct) covers_.emplace_back(x, y);
      }
  }

  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::uint8_t> leq_;
  std::vector<std::pair<std::size_t, std::size_t>> covers_;
};

// ---------------------------------------------------------------------------
// Moebius function and counting coefficients

/// Integer Moebius values mu(upper, lower) for every pair lower <= upper.
class MobiusTable {
 public:
  MobiusTable() = default;
  explicit MobiusTable(const Poset& p) : n_(p.size()), values_(n_ * n_, 0), defined_(n_ * n_, 0) {
    // For a fixed upper element, mu(upper, c) = -sum_{c < b <= upper} mu(upper, b),
    // evaluated from the top down (larger down-sets first).
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p.down_count(a) > p.down_count(b); });
    for (std::size_t upper = 0; upper < n_; ++upper) {
      for (std::size_t c : order) {
        if (!p.leq(c, upper)) continue;
        long long v = 0;
        if (c == upper) {
          v = 1;
        } else {
          for (std::size_t b = 0; b < n_; ++b)
            if (p.less(c, b) && p.leq(b, upper)) v -= values_[upper * n_ + b];
        }
        values_[upper * n_ + c] = v;
        defined_[upper * n_ + c] = 1;
      }
    }
  }

  std::size_t size() const { return n_; }

  bool defined(std::size_t upper, std::size_t lower) const { return defined_[upper * n_ + lower] != 0; }

  /// mu(upper, lower); requires lower <= upper.
  long long at(std::size_t upper, std::size_t lower) const {
    if (!defined(upper, lower)) throw ValidationError("Moebius value requested for an incomparable pair");
    return values_[upper * n_ + lower];
  }

 private:
  std::size_t n_ = 0;
  std::vector<long long> values_;
  std::vector<std::uint8_t> defined_;
};

inline MobiusTable mobius(const Poset& p) { return MobiusTable(p); }

/// c(a) = sum over b >= a of mu(b, a), for every element.
inline std::vector<long long> counting_coefficients(const Poset& p) {
  const MobiusTable mu(p);
  std::vector<long long> c(p.size(), 0);
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < p.size(); ++b)
      if (p.leq(a, b)) c[a] += mu.at(b, a);
  return c;
}

inline long long c_coefficient(const Poset& p, std::string_view element) {
  const std::size_t a = p.index_of(element);
  const MobiusTable mu(p);
  long long c = 0;
  for (std::size_t b = 0; b < p.size(); ++b)
    if (p.leq(a, b)) c += mu.at(b, a);
  return c;
}

// ---------------------------------------------------------------------------
// Beat points, retractions, cores

enum class BeatKind { linear, colinear };

inline const char* to_string(BeatKind k) { return k == BeatKind::linear ? "linear" : "colinear"; }

struct BeatPoint {
  std::string point;
  BeatKind kind = BeatKind::linear;
  std::string target;  // unique min of the strict up-set (linear) or max of the strict down-set

  friend bool operator==(const BeatPoint&, const BeatPoint&) = default;
};

namespace detail {

/// Unique minimum of `xs` under p's order, if any.
inline std::optional<std::size_t> minimum_of(const Poset& p, const std::vector<std::size_t>& xs) {
  for (std::size_t m : xs) {
    if (std::all_of(xs.begin(), xs.end(), [&](std::size_t y) { return p.leq(m, y); })) return m;
  }
  return std::nullopt;
}

inline std::optional<std::size_t> maximum_of(const Poset& p, const std::vector<std::size_t>& xs) {
  for (std::size_t m : xs) {
    if (std::all_of(xs.begin(), xs.end(), [&](std::size_t y) { return p.leq(y, m); })) return m;
  }
  return std::nullopt;
}

}  // namespace detail

/// All beat points in element order; linear before colinear for the same
/// element. Uses strict up/down sets.
inline std::vector<BeatPoint> find_beat_points(const Poset& p) {
  std::vector<BeatPoint> out;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (auto up = detail::minimum_of(p, p.strictly_above(x)))
      out.push_back({p.id(x), BeatKind::linear, p.id(*up)});
    if (auto down = detail::maximum_of(p, p.strictly_below(x)))
      out.push_back({p.id(x), BeatKind::colinear, p.id(*down)});
  }
  return out;
}

inline bool is_beat_point(const Poset& p, const BeatPoint& bp) {
  const auto all = find_beat_points(p);
  return std::find(all.begin(), all.end(), bp) != all.end();
}

/// Result of removing one beat point. `map` is the retraction r on indices of
/// the source poset (the removed point goes to its target); `inclusion` sends
/// indices of the result back into the source.
struct Retraction {
  Poset poset;
  std::vector<std::size_t> map;
  std::vector<std::size_t> inclusion;
};

inline Retraction retract(const Poset& p, const BeatPoint& bp) {
  if (!is_beat_point(p, bp))
    throw ValidationError(std::string("'") + bp.point + "' is not a " + to_string(bp.kind) +
                          " point with target '" + bp.target + "'");
  const std::size_t removed = p.index_of(bp.point);
  Retraction r;
  r.poset = p.without(removed);
  r.map.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i != removed) {
      r.map[i] = r.poset.index_of(p.id(i));
      r.inclusion.push_back(i);
    }
  }
  r.map[removed] = r.poset.index_of(bp.target);
  return r;
}

struct CoreResult {
  Poset core;
  std::vector<BeatPoint> trace;
};

/// Removes beat points until none is left, choosing with `pick`, which gets the
/// current non-empty list of beat points and returns the position to remove.
template <class Pick>
CoreResult core(const Poset& p, Pick&& pick) {
  CoreResult res{p, {}};
  for (;;) {
    const auto beats = find_beat_points(res.core);
    if (beats.empty()) return res;
    const std::size_t k = pick(std::span<const BeatPoint>(beats));
    res.core = retract(res.core, beats.at(k)).poset;
    res.trace.push_back(beats[k]);
  }
}

/// Greedy core: always removes the first beat point in element order.
inline CoreResult core(const Poset& p) {
  return core(p, [](std::span<const BeatPoint>) { return std::size_t{0}; });
}

// ---------------------------------------------------------------------------
// Isomorphism

inline constexpr std::size_t kIsomorphismCap = 20;

/// Order isomorphism p -> q as a vector of q-indices, or nullopt. Backtracking
/// over candidates with matching (down-set, up-set, cover-degree) profiles.
inline std::optional<std::vector<std::size_t>> is_isomorphic(const Poset& p, const Poset& q,
                                                             std::size_t cap = kIsomorphismCap) {
  if (p.size() > cap || q.size() > cap)
    throw CapExceeded("isomorphism search limited to " + std::to_string(cap) + " elements");
  if (p.size() != q.size() || p.cover_pairs().size() != q.cover_pairs().size()) return std::nullopt;
  const std::size_t n = p.size();

  auto profile = [](const Poset& s, std::size_t x) {
    std::size_t up_covers = 0, down_covers = 0;
    for (const auto& [lo, hi] : s.cover_pairs()) {
      up_covers += lo == x;
      down_covers += hi == x;
    }
    return std::array<std::size_t, 4>{s.down_count(x), s.up_count(x), down_covers, up_covers};
  };
  std::vector<std::array<std::size_t, 4>> pp(n), qp(n);
  for (std::size_t i = 0; i < n; ++i) {
    pp[i] = profile(p, i);
    qp[i] = profile(q, i);
  }
  {
    auto a = pp, b = qp;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) return std::nullopt;
  }

  std::vector<std::size_t> assign(n);
  std::vector<char> used(n, 0);
  auto extend = [&](auto&& self, std::size_t k) -> bool {
    if (k == n) return true;
    for (std::size_t cand = 0; cand < n; ++cand) {
      if (used[cand] || pp[k] != qp[cand]) continue;
      bool ok = true;
      for (std::size_t j = 0; j < k && ok; ++j)
        ok = p.leq(k, j) == q.leq(cand, assign[j]) && p.leq(j, k) == q.leq(assign[j], cand);
      if (!ok) continue;
      used[cand] = 1;
      assign[k] = cand;
      if (self(self, k + 1)) return true;
      used[cand] = 0;
    }
    return false;
  };
  if (!extend(extend, 0)) return std::nullopt;
  return assign;
}

// ---------------------------------------------------------------------------
// Galois connections

/// g : P -> Q and f : Q -> P as index maps.
struct GaloisPair {
  std::vector<std::size_t> g;
  std::vector<std::size_t> f;
};

inline bool is_order_preserving(const Poset& from, const Poset& to, std::span<const std::size_t> map) {
  for (std::size_t x = 0; x < from.size(); ++x)
    for (std::size_t y = 0; y < from.size(); ++y)
      if (from.leq(x, y) && !to.leq(map[x], map[y])) return false;
  return true;
}

/// True iff g(a) <= b <=> a <= f(b) for all a in p, b in q. Throws OrderError
/// when g or f is not order preserving.
inline bool check_galois(const Poset& p, const Poset& q, const GaloisPair& pair) {
  if (pair.g.size() != p.size() || pair.f.size() != q.size())
    throw ValidationError("Galois pair maps are not total on their domains");
  for (std::size_t v : pair.g)
    if (v >= q.size()) throw ValidationError("g maps outside its codomain");
  for (std::size_t v : pair.f)
    if (v >= p.size()) throw ValidationError("f maps outside its codomain");
  if (!is_order_preserving(p, q, pair.g)) throw OrderError("g is not order preserving");
  if (!is_order_preserving(q, p, pair.f)) throw OrderError("f is not order preserving");
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < q.size(); ++b)
      if (q.leq(pair.g[a], b) != p.leq(a, pair.f[b])) return false;
  return true;
}

/// For g -| f between p and q: sum over b' in q with f(b') = b of c_q(b')
/// equals c_p(b), for every b in p.
inline bool coefficient_transfer_holds(const Poset& p, const Poset& q, const GaloisPair& pair) {
  const auto cp = counting_coefficients(p);
  const auto cq = counting_coefficients(q);
  std::vector<long long> pushed(p.size(), 0);
  for (std::size_t b = 0; b < q.size(); ++b) pushed.at(pair.f.at(b)) += cq[b];
  return pushed == cp;
}

/// The adjunction carried by a retraction: (r, i) on (A, B) for a linear point,
/// (i, r) on (B, A) for a colinear point. `left` is the domain of g.
struct RetractionAdjunction {
  const Poset* left;
  const Poset* right;
  GaloisPair pair;
};

inline RetractionAdjunction adjunction_of(const Poset& source, const Retraction& r, BeatKind kind) {
  if (kind == BeatKind::linear) return {&source, &r.poset, {r.map, r.inclusion}};
  return {&r.poset, &source, {r.inclusion, r.map}};
}

}  // namespace bethe
