#pragma once

// Factor-graph data model. A model is a chain-length <= 1 poset of regions,
// each region a set of variables with a Hamiltonian table over its joint
// configurations. Tables are row-major over the region's variables in model
// order (the last variable varies fastest).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bethe/error.hpp"
#include "bethe/poset.hpp"

namespace bethe {

using Table = std::vector<double>;

/// Natural order on ids: integers numerically, integers before other ids,
/// everything else lexicographically.
inline bool id_less(std::string_view a, std::string_view b) {
  auto as_int = [](std::string_view s, long long& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
  };
  long long x = 0, y = 0;
  const bool ia = as_int(a, x), ib = as_int(b, y);
  if (ia && ib) return x != y ? x < y : a < b;
  if (ia != ib) return ia;
  return a < b;
}

struct Variable {
  std::string id;
  std::size_t states = 0;

  friend bool operator==(const Variable&, const Variable&) = default;
};

enum class RegionKind { vertex, hyperedge };

struct Region {
  std::string key;
  RegionKind kind = RegionKind::hyperedge;
  std::vector<std::size_t> vars;  // ascending indices into the model's variables

  friend bool operator==(const Region&, const Region&) = default;
};

/// Key of a hyperedge over the given (sorted) variable ids: "1,2". A singleton
/// hyperedge is written "{1}" so it does not collide with vertex "1".
inline std::string hyperedge_key(const std::vector<std::string>& sorted_ids) {
  if (sorted_ids.size() == 1) return "{" + sorted_ids.front() + "}";
  std::string key;
  for (std::size_t k = 0; k < sorted_ids.size(); ++k) {
    if (k) key += ',';
    key += sorted_ids[k];
  }
  return key;
}

/// Strides for a row-major table over variables with the given cardinalities.
inline std::vector<std::size_t> row_major_strides(std::span<const std::size_t> cards) {
  std::vector<std::size_t> s(cards.size(), 1);
  for (std::size_t k = cards.size(); k-- > 1;) s[k - 1] = s[k] * cards[k];
  return s;
}

/// For each configuration of `upper_vars`, the index of its restriction to
/// `lower_vars` (a subset). Both lists are ascending variable indices.
inline std::vector<std::size_t> projection_map(std::span<const std::size_t> upper_vars,
                                               std::span<const std::size_t> lower_vars,
                                               std::span<const std::size_t> var_states) {
  std::vector<std::size_t> up_cards, low_cards, pos;
  for (std::size_t v : upper_vars) up_cards.push_back(var_states[v]);
  for (std::size_t v : lower_vars) {
    auto it = std::find(upper_vars.begin(), upper_vars.end(), v);
    if (it == upper_vars.end()) throw ValidationError("projection onto a non-subset region");
    pos.push_back(static_cast<std::size_t>(it - upper_vars.begin()));
    low_cards.push_back(var_states[v]);
  }
  const auto low_strides = row_major_strides(low_cards);
  std::size_t total = 1;
  for (std::size_t c : up_cards) total *= c;
  std::vector<std::size_t> out(total, 0);
  std::vector<std::size_t> digits(up_cards.size(), 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t low = 0;
    for (std::size_t k = 0; k < pos.size(); ++k) low += digits[pos[k]] * low_strides[k];
    out[idx] = low;
    for (std::size_t k = up_cards.size(); k-- > 0;) {
      if (++digits[k] < up_cards[k]) break;
      digits[k] = 0;
    }
  }
  return out;
}

/// One cover relation lower < upper of the region poset.
struct Cover {
  std::size_t lower;
  std::size_t upper;
  std::vector<std::size_t> projection;  // upper configuration -> lower configuration
};

class LocalPolytope;

namespace detail {
struct ModelCache {
  std::once_flag once;
  std::shared_ptr<const LocalPolytope> polytope;
};
}  // namespace detail

/// Poset A(H) of a hypergraph: vertices below every hyperedge containing them.
/// Element ids are vertex ids and hyperedge keys.
inline Poset poset_of_hypergraph(const std::vector<std::string>& vertices,
                                 const std::vector<std::vector<std::string>>& hyperedges) {
  std::set<std::string> declared(vertices.begin(), vertices.end());
  std::vector<std::string> elements = vertices;
  std::vector<Poset::Pair> rel;
  std::set<std::vector<std::string>> seen;
  for (auto edge : hyperedges) {
    if (edge.empty()) throw ValidationError("empty hyperedge");
    std::sort(edge.begin(), edge.end(), [](const auto& a, const auto& b) { return id_less(a, b); });
    if (std::adjacent_find(edge.begin(), edge.end()) != edge.end())
      throw ValidationError("hyperedge lists a vertex twice");
    for (const auto& v : edge)
      if (!declared.count(v)) throw ValidationError("hyperedge references undeclared vertex '" + v + "'");
    if (!seen.insert(edge).second) throw ValidationError("duplicate hyperedge " + hyperedge_key(edge));
    const std::string key = hyperedge_key(edge);
    elements.push_back(key);
    for (const auto& v : edge) rel.emplace_back(v, key);
  }
  return Poset::from_relations(std::move(elements), rel);
}

class FactorModel {
 public:
  FactorModel() = default;

  /// Validating constructor. `poset` element ids must equal the region keys in
  /// the same order.
  FactorModel(std::vector<Variable> variables, std::vector<Region> regions, Poset poset,
              std::vector<Table> hamiltonians)
      : variables_(std::move(variables)),
        regions_(std::move(regions)),
        poset_(std::move(poset)),
        hamiltonians_(std::move(hamiltonians)) {
    validate();
    index();
  }

  /// Model of the hypergraph (vertices, hyperedges) with all-zero Hamiltonians.
  /// Variables are reordered by natural id order; regions are the vertices in
  /// that order followed by the hyperedges in the given order.
  static FactorModel from_hypergraph(std::vector<Variable> variables,
                                     const std::vector<std::vector<std::string>>& hyperedges) {
    std::sort(variables.begin(), variables.end(), [](const auto& a, const auto& b) { return id_less(a.id, b.id); });
    std::vector<std::string> ids;
    for (const auto& v : variables) ids.push_back(v.id);
    Poset poset = poset_of_hypergraph(ids, hyperedges);
    // Under inclusion, a hyperedge inside another would give a chain of length 2.
    for (const auto& e : hyperedges)
      for (const auto& f : hyperedges) {
        std::set<std::string> se(e.begin(), e.end()), sf(f.begin(), f.end());
        if (se.size() < sf.size() && std::includes(sf.begin(), sf.end(), se.begin(), se.end()))
          throw ValidationError("hyperedge " + hyperedge_key({se.begin(), se.end()}) +
                                " is nested in another hyperedge; chains longer than 1 are not supported");
      }

    std::map<std::string, std::size_t> var_index;
    for (std::size_t i = 0; i < variables.size(); ++i) var_index[variables[i].id] = i;
    std::vector<Region> regions;
    for (std::size_t i = 0; i < variables.size(); ++i) regions.push_back({variables[i].id, RegionKind::vertex, {i}});
    for (const auto& edge : hyperedges) {
      Region r{"", RegionKind::hyperedge, {}};
      for (const auto& v : edge) r.vars.push_back(var_index.at(v));
      std::sort(r.vars.begin(), r.vars.end());
      std::vector<std::string> sorted_ids;
      for (std::size_t v : r.vars) sorted_ids.push_back(variables[v].id);
      r.key = hyperedge_key(sorted_ids);
      regions.push_back(std::move(r));
    }
    std::vector<Table> zero;
    for (const auto& r : regions) {
      std::size_t n = 1;
      for (std::size_t v : r.vars) n *= variables[v].states;
      zero.emplace_back(n, 0.0);
    }
    return FactorModel(std::move(variables), std::move(regions), std::move(poset), std::move(zero));
  }

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Region>& regions() const { return regions_; }
  const Region& region(std::size_t a) const { return regions_.at(a); }
  std::size_t size() const { return regions_.size(); }
  const Poset& poset() const { return poset_; }
  const std::vector<Table>& hamiltonians() const { return hamiltonians_; }
  const Table& hamiltonian(std::size_t a) const { return hamiltonians_.at(a); }
  std::size_t region_index(std::string_view key) const { return poset_.index_of(key); }

  /// |E_a| for region a.
  std::size_t states(std::size_t a) const { return hamiltonians_.at(a).size(); }
  std::size_t total_entries() const {
    std::size_t n = 0;
    for (const auto& t : hamiltonians_) n += t.size();
    return n;
  }

  const std::vector<long long>& counting() const { return counting_; }
  long long counting(std::size_t a) const { return counting_.at(a); }
  const MobiusTable& mobius_table() const { return mobius_; }

  const std::vector<Cover>& covers() const { return covers_; }
  /// Cover indices with the given region as upper / lower element.
  const std::vector<std::size_t>& covers_below(std::size_t a) const { return below_.at(a); }
  const std::vector<std::size_t>& covers_above(std::size_t a) const { return above_.at(a); }

  std::vector<std::size_t> var_states() const {
    std::vector<std::size_t> s;
    for (const auto& v : variables_) s.push_back(v.states);
    return s;
  }

  /// Restriction map from configurations of `upper` to those of `lower`.
  std::vector<std::size_t> projection(std::size_t upper, std::size_t lower) const {
    return projection_map(regions_.at(upper).vars, regions_.at(lower).vars, var_states());
  }

  /// Same structure, new tables.
  FactorModel with_hamiltonians(std::vector<Table> tables) const {
    FactorModel m = *this;
    m.hamiltonians_ = std::move(tables);
    m.validate_tables();
    return m;
  }

  /// Model on the induced subposet without region `a`; other tables unchanged.
  FactorModel without_region(std::size_t a) const {
    std::vector<Region> regions;
    std::vector<Table> tables;
    for (std::size_t i = 0; i < size(); ++i) {
      if (i == a) continue;
      regions.push_back(regions_[i]);
      tables.push_back(hamiltonians_[i]);
    }
    return FactorModel(variables_, std::move(regions), poset_.without(a), std::move(tables));
  }

  /// True when the regions are exactly A(H) for the hypergraph formed by the
  /// hyperedge regions, with a vertex region for every variable.
  bool is_hypergraph_model() const {
    std::size_t vertices = 0;
    for (std::size_t a = 0; a < size(); ++a) {
      if (regions_[a].kind == RegionKind::vertex) {
        if (a != vertices || regions_[a].vars != std::vector<std::size_t>{a}) return false;
        ++vertices;
      }
    }
    if (vertices != variables_.size()) return false;
    for (std::size_t a = 0; a < size(); ++a)
      for (std::size_t b = 0; b < size(); ++b) {
        const bool incidence = regions_[a].kind == RegionKind::vertex && regions_[b].kind == RegionKind::hyperedge &&
                               std::binary_search(regions_[b].vars.begin(), regions_[b].vars.end(), regions_[a].vars[0]);
        if (poset_.less(a, b) != incidence) return false;
      }
    return true;
  }

  friend bool operator==(const FactorModel& a, const FactorModel& b) {
    return a.variables_ == b.variables_ && a.regions_ == b.regions_ && a.poset_ == b.poset_ &&
           a.hamiltonians_ == b.hamiltonians_;
  }

  std::shared_ptr<detail::ModelCache> cache() const { return cache_; }

 private:
  void validate() {
    std::set<std::string> ids;
    for (const auto& v : variables_) {
      if (v.id.empty() || v.id.find_first_of(",{}") != std::string::npos)
        throw ValidationError("variable id '" + v.id + "' is empty or contains ',', '{' or '}'");
      if (!ids.insert(v.id).second) throw ValidationError("duplicate variable '" + v.id + "'");
      if (v.states < 1) throw ValidationError("variable '" + v.id + "' has no states");
    }
    if (poset_.size() != regions_.size()) throw ValidationError("poset and region list differ in size");
    for (std::size_t a = 0; a < regions_.size(); ++a) {
      const auto& r = regions_[a];
      if (poset_.id(a) != r.key) throw ValidationError("poset element '" + poset_.id(a) + "' does not match region '" + r.key + "'");
      if (r.vars.empty()) throw ValidationError("region '" + r.key + "' has no variables");
      for (std::size_t k = 0; k < r.vars.size(); ++k) {
        if (r.vars[k] >= variables_.size()) throw ValidationError("region '" + r.key + "' uses an undeclared variable");
        if (k && r.vars[k - 1] >= r.vars[k]) throw ValidationError("region '" + r.key + "' variables not strictly ascending");
      }
      if (r.kind == RegionKind::vertex && r.vars.size() != 1)
        throw ValidationError("vertex region '" + r.key + "' must hold exactly one variable");
    }
    if (poset_.height() > 1) throw ValidationError("region poset has a chain of length > 1");
    for (std::size_t a = 0; a < size(); ++a)
      for (std::size_t b = 0; b < size(); ++b) {
        if (!poset_.less(a, b)) continue;
        const auto& lo = regions_[a].vars;
        const auto& hi = regions_[b].vars;
        if (!std::includes(hi.begin(), hi.end(), lo.begin(), lo.end()))
          throw ValidationError("order '" + regions_[a].key + "' < '" + regions_[b].key + "' is not an inclusion");
      }
    validate_tables();
  }

  void validate_tables() const {
    if (hamiltonians_.size() != regions_.size()) throw ValidationError("one Hamiltonian table per region required");
    for (std::size_t a = 0; a < regions_.size(); ++a) {
      std::size_t n = 1;
      for (std::size_t v : regions_[a].vars) n *= variables_[v].states;
      if (hamiltonians_[a].size() != n)
        throw ValidationError("Hamiltonian of '" + regions_[a].key + "' has " + std::to_string(hamiltonians_[a].size()) +
                              " entries, expected " + std::to_string(n));
      for (double h : hamiltonians_[a])
        if (!std::isfinite(h)) throw ValidationError("non-finite Hamiltonian entry in '" + regions_[a].key + "'");
    }
  }

  void index() {
    mobius_ = MobiusTable(poset_);
    counting_ = counting_coefficients(poset_);
    below_.assign(size(), {});
    above_.assign(size(), {});
    const auto st = var_states();
    for (const auto& [lo, hi] : poset_.cover_pairs()) {
      below_[hi].push_back(covers_.size());
      above_[lo].push_back(covers_.size());
      covers_.push_back({lo, hi, projection_map(regions_[hi].vars, regions_[lo].vars, st)});
    }
  }

  std::vector<Variable> variables_;
  std::vector<Region> regions_;
  Poset poset_;
  std::vector<Table> hamiltonians_;
  MobiusTable mobius_;
  std::vector<long long> counting_;
  std::vector<Cover> covers_;
  std::vector<std::vector<std::size_t>> below_, above_;
  std::shared_ptr<detail::ModelCache> cache_ = std::make_shared<detail::ModelCache>();
};

// ---------------------------------------------------------------------------
// Zeta / Moebius conversion between factors and cumulative Hamiltonians

namespace detail {
inline void check_dims(const FactorModel& m, const std::vector<Table>& tables) {
  if (tables.size() != m.size()) throw ValidationError("expected one table per region");
  for (std::size_t a = 0; a < m.size(); ++a)
    if (tables[a].size() != m.states(a))
      throw ValidationError("table for '" + m.region(a).key + "' has wrong dimension");
}
}  // namespace detail

/// H_a(x) = sum over b <= a of -ln f_b(x_b).
inline std::vector<Table> zeta_hamiltonians(const FactorModel& m, const std::vector<Table>& log_factors) {
  detail::check_dims(m, log_factors);
  std::vector<Table> h(m.size());
  for (std::size_t a = 0; a < m.size(); ++a) {
    h[a].assign(m.states(a), 0.0);
    for (std::size_t b = 0; b < m.size(); ++b) {
      if (!m.poset().leq(b, a)) continue;
      const auto proj = m.projection(a, b);
      for (std::size_t x = 0; x < h[a].size(); ++x) h[a][x] -= log_factors[b][proj[x]];
    }
  }
  return h;
}

/// -ln f_a(x) = sum over b <= a of mu(a, b) H_b(x_b).
inline std::vector<Table> mobius_factors(const FactorModel& m, const std::vector<Table>& hamiltonians) {
  detail::check_dims(m, hamiltonians);
  std::vector<Table> out(m.size());
  for (std::size_t a = 0; a < m.size(); ++a) {
    out[a].assign(m.states(a), 0.0);
    for (std::size_t b = 0; b < m.size(); ++b) {
      if (!m.poset().leq(b, a)) continue;
      const double mu = static_cast<double>(m.mobius_table().at(a, b));
      const auto proj = m.projection(a, b);
      for (std::size_t x = 0; x < out[a].size(); ++x) out[a][x] += mu * hamiltonians[b][proj[x]];
    }
  }
  return out;
}

}  // namespace bethe
