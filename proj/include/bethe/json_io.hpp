#pragma once

// JSON formats: models (hypergraph and extended region form), posets,
// pseudo-marginals and reduction traces. Doubles are written with 17
// significant digits so every value round-trips bit-exactly.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bethe/beliefs.hpp"
#include "bethe/error.hpp"
#include "bethe/model.hpp"
#include "bethe/poset.hpp"
#include "bethe/reduce.hpp"

namespace bethe::io {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Text

/// Parses JSON text; syntax errors become ValidationError naming line and column.
inline Json parse(const std::string& text, const std::string& source = "input") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t k = 0; k < stop; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ValidationError("malformed JSON in " + source + " at line " + std::to_string(line) + ", column " +
                          std::to_string(col));
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json parse_file(const std::string& path) { return parse(read_file(path), "'" + path + "'"); }

namespace detail {

inline void format_double(std::string& out, double v) {
  if (!std::isfinite(v)) throw NumericError("cannot serialize a non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
  // Keep the value a JSON float so it reads back as a double.
  if (std::string_view(buf).find_first_of(".eEn") == std::string_view::npos) out += ".0";
}

inline bool is_scalar_array(const Json& j) {
  if (!j.is_array()) return false;
  for (const auto& e : j)
    if (e.is_structured()) return false;
  return true;
}

inline void write(std::string& out, const Json& j, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(d * indent), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(k).dump();
        out += indent < 0 ? ":" : ": ";
        write(out, v, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Number / string rows stay on one line.
      const bool inline_row = is_scalar_array(j);
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += inline_row && indent >= 0 ? ", " : ",";
        first = false;
        if (!inline_row) newline(depth + 1);
        write(out, v, indent, depth + 1);
      }
      if (!inline_row) newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float:
      format_double(out, j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Serializes with doubles as %.17g; indent < 0 gives compact output.
inline std::string dump(const Json& j, int indent = 2) {
  std::string out;
  detail::write(out, j, indent, 0);
  if (indent >= 0) out += '\n';
  return out;
}

/// 64-bit FNV-1a of a string, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

// ---------------------------------------------------------------------------
// Helpers

namespace detail {

inline const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline std::string id_of(const Json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return j.dump();
  throw ValidationError(where + ": ids must be strings or integers");
}

inline Table table_of(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array of numbers");
  Table t;
  t.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError(where + ": expected an array of numbers");
    t.push_back(v.get<double>());
  }
  return t;
}

inline Json table_json(const Table& t) {
  Json arr = Json::array();
  for (double v : t) arr.push_back(v);
  return arr;
}

inline std::vector<std::string> split_key(const std::string& key) {
  std::string body = key;
  if (body.size() >= 2 && body.front() == '{' && body.back() == '}') body = body.substr(1, body.size() - 2);
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = body.find(',', start);
    parts.push_back(body.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

/// Canonical region key for a hamiltonians/factors entry: vertex ids stay as
/// they are, hyperedge keys get their ids sorted.
inline std::string canonical_key(const FactorModel& m, const std::string& key) {
  if (m.poset().find(key)) return key;
  auto parts = split_key(key);
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return id_less(a, b); });
  const std::string k = parts.size() == 1 && key.front() != '{' ? parts.front() : hyperedge_key(parts);
  if (!m.poset().find(k)) throw ValidationError("table given for unknown region '" + key + "'");
  return k;
}

inline std::vector<Variable> variables_of(const Json& j) {
  if (!j.is_object()) throw ValidationError("model: 'variables' must map ids to state counts");
  std::vector<Variable> vars;
  for (const auto& [id, n] : j.items()) {
    if (!n.is_number_integer() || n.get<long long>() < 1)
      throw ValidationError("model: variable '" + id + "' needs a positive integer state count");
    vars.push_back({id, static_cast<std::size_t>(n.get<long long>())});
  }
  std::sort(vars.begin(), vars.end(), [](const auto& a, const auto& b) { return id_less(a.id, b.id); });
  return vars;
}

/// Applies "hamiltonians" or "factors" (exactly one may be present) to a model
/// whose tables are all zero.
inline FactorModel with_tables(const FactorModel& m, const Json& j) {
  const bool has_h = j.contains("hamiltonians"), has_f = j.contains("factors");
  if (has_h && has_f) throw ValidationError("model: give either 'hamiltonians' or 'factors', not both");
  if (!has_h && !has_f) return m;
  const Json& src = j.at(has_h ? "hamiltonians" : "factors");
  if (!src.is_object()) throw ValidationError("model: tables must be an object keyed by region");
  std::vector<Table> tables = m.hamiltonians();
  std::vector<char> seen(m.size(), 0);
  for (const auto& [key, val] : src.items()) {
    const std::size_t a = m.region_index(canonical_key(m, key));
    if (seen[a]) throw ValidationError("model: region '" + key + "' given twice");
    seen[a] = 1;
    Table t = table_of(val, "table '" + key + "'");
    if (t.size() != m.states(a))
      throw ValidationError("model: table '" + key + "' has " + std::to_string(t.size()) + " entries, expected " +
                            std::to_string(m.states(a)));
    if (has_f) {
      for (double& v : t) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("model: factor '" + key + "' must be strictly positive");
        v = std::log(v);
      }
    }
    tables[a] = std::move(t);
  }
  if (has_f) tables = zeta_hamiltonians(m, tables);
  return m.with_hamiltonians(std::move(tables));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Models

/// Reads either the hypergraph form
///   {"variables": {...}, "hyperedges": [[...]], "hamiltonians"|"factors": {...}}
/// or the extended region form used for reduced models
///   {"variables": {...}, "regions": [{"key", "kind", "variables"}], "covers": [[lower, upper]], ...}.
inline FactorModel model_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("model: expected a JSON object");
  auto vars = detail::variables_of(detail::require(j, "variables", "model"));
  FactorModel m;
  if (j.contains("regions")) {
    std::map<std::string, std::size_t> var_index;
    for (std::size_t i = 0; i < vars.size(); ++i) var_index[vars[i].id] = i;
    std::vector<Region> regions;
    std::vector<std::string> keys;
    for (const auto& r : j.at("regions")) {
      Region reg;
      reg.key = detail::id_of(detail::require(r, "key", "region"), "region key");
      const std::string kind = detail::require(r, "kind", "region '" + reg.key + "'").get<std::string>();
      if (kind == "vertex") reg.kind = RegionKind::vertex;
      else if (kind == "hyperedge") reg.kind = RegionKind::hyperedge;
      else throw ValidationError("region '" + reg.key + "': kind must be 'vertex' or 'hyperedge'");
      for (const auto& v : detail::require(r, "variables", "region '" + reg.key + "'")) {
        const std::string id = detail::id_of(v, "region variables");
        auto it = var_index.find(id);
        if (it == var_index.end()) throw ValidationError("region '" + reg.key + "' uses undeclared variable '" + id + "'");
        reg.vars.push_back(it->second);
      }
      std::sort(reg.vars.begin(), reg.vars.end());
      keys.push_back(reg.key);
      regions.push_back(std::move(reg));
    }
    std::vector<Poset::Pair> covers;
    if (j.contains("covers"))
      for (const auto& c : j.at("covers")) {
        if (!c.is_array() || c.size() != 2) throw ValidationError("model: covers must be [lower, upper] pairs");
        covers.emplace_back(detail::id_of(c[0], "cover"), detail::id_of(c[1], "cover"));
      }
    Poset p = Poset::from_covers(keys, covers);
    std::vector<Table> zero;
    for (const auto& r : regions) {
      std::size_t n = 1;
      for (std::size_t v : r.vars) n *= vars[v].states;
      zero.emplace_back(n, 0.0);
    }
    m = FactorModel(std::move(vars), std::move(regions), std::move(p), std::move(zero));
  } else {
    std::vector<std::vector<std::string>> edges;
    if (j.contains("hyperedges")) {
      if (!j.at("hyperedges").is_array()) throw ValidationError("model: 'hyperedges' must be an array");
      for (const auto& e : j.at("hyperedges")) {
        if (!e.is_array()) throw ValidationError("model: every hyperedge must be an array of ids");
        std::vector<std::string> ids;
        for (const auto& v : e) ids.push_back(detail::id_of(v, "hyperedge"));
        edges.push_back(std::move(ids));
      }
    }
    m = FactorModel::from_hypergraph(std::move(vars), edges);
  }
  return detail::with_tables(m, j);
}

inline Json model_to_json(const FactorModel& m) {
  Json j;
  Json vars = Json::object();
  for (const auto& v : m.variables()) vars[v.id] = v.states;
  j["variables"] = std::move(vars);
  if (m.is_hypergraph_model()) {
    Json edges = Json::array();
    for (const auto& r : m.regions()) {
      if (r.kind != RegionKind::hyperedge) continue;
      Json e = Json::array();
      for (std::size_t v : r.vars) e.push_back(m.variables()[v].id);
      edges.push_back(std::move(e));
    }
    j["hyperedges"] = std::move(edges);
  } else {
    Json regions = Json::array();
    for (const auto& r : m.regions()) {
      Json vs = Json::array();
      for (std::size_t v : r.vars) vs.push_back(m.variables()[v].id);
      regions.push_back(
          {{"key", r.key}, {"kind", r.kind == RegionKind::vertex ? "vertex" : "hyperedge"}, {"variables", vs}});
    }
    j["regions"] = std::move(regions);
    Json covers = Json::array();
    for (const auto& [lo, hi] : m.poset().cover_pairs()) covers.push_back({m.region(lo).key, m.region(hi).key});
    j["covers"] = std::move(covers);
  }
  Json h = Json::object();
  for (std::size_t a = 0; a < m.size(); ++a) h[m.region(a).key] = detail::table_json(m.hamiltonian(a));
  j["hamiltonians"] = std::move(h);
  return j;
}

inline FactorModel read_model(const std::string& path) { return model_from_json(parse_file(path)); }

/// Provenance hash: FNV-1a of the compact canonical model JSON.
inline std::string model_hash(const FactorModel& m) { return fnv1a_hex(dump(model_to_json(m), -1)); }

// ---------------------------------------------------------------------------
// Posets

inline Poset poset_from_json(const Json& j) {
  std::vector<std::string> elements;
  for (const auto& e : detail::require(j, "elements", "poset")) elements.push_back(detail::id_of(e, "poset element"));
  std::vector<Poset::Pair> covers;
  if (j.contains("covers"))
    for (const auto& c : j.at("covers")) {
      if (!c.is_array() || c.size() != 2) throw ValidationError("poset: covers must be [lower, upper] pairs");
      covers.emplace_back(detail::id_of(c[0], "cover"), detail::id_of(c[1], "cover"));
    }
  return Poset::from_covers(std::move(elements), covers);
}

inline Json poset_to_json(const Poset& p) {
  Json covers = Json::array();
  for (const auto& [lo, hi] : p.cover_pairs()) covers.push_back({p.id(lo), p.id(hi)});
  return {{"elements", p.ids()}, {"covers", std::move(covers)}};
}

// ---------------------------------------------------------------------------
// Pseudo-marginals

/// {"region-key": [probabilities...], ...}; every region must be present.
inline PseudoMarginals beliefs_from_json(const FactorModel& m, const Json& j) {
  if (!j.is_object()) throw ValidationError("beliefs: expected an object keyed by region");
  PseudoMarginals q;
  q.tables.resize(m.size());
  std::vector<char> seen(m.size(), 0);
  for (const auto& [key, val] : j.items()) {
    const std::size_t a = m.region_index(detail::canonical_key(m, key));
    if (seen[a]) throw ValidationError("beliefs: region '" + key + "' given twice");
    seen[a] = 1;
    q.tables[a] = detail::table_of(val, "beliefs '" + key + "'");
  }
  for (std::size_t a = 0; a < m.size(); ++a)
    if (!seen[a]) throw ValidationError("beliefs: missing region '" + m.region(a).key + "'");
  bethe::detail::check_shape(m, q.tables, "beliefs");
  return q;
}

inline Json beliefs_to_json(const FactorModel& m, const PseudoMarginals& q) {
  bethe::detail::check_shape(m, q.tables, "beliefs");
  Json j = Json::object();
  for (std::size_t a = 0; a < m.size(); ++a) j[m.region(a).key] = detail::table_json(q.tables[a]);
  return j;
}

inline PseudoMarginals uniform_beliefs(const FactorModel& m) {
  PseudoMarginals q;
  for (std::size_t a = 0; a < m.size(); ++a) q.tables.emplace_back(m.states(a), 1.0 / static_cast<double>(m.states(a)));
  return q;
}

// ---------------------------------------------------------------------------
// Reduction traces

inline Json step_to_json(const ReductionStep& step) {
  Json j;
  j["kind"] = to_string(step.kind);
  j["removed"] = step.removed;
  j["target"] = step.target;
  j["case"] = step.rewrite_case;
  j["target_counting"] = step.target_counting;
  Json rws = Json::array();
  for (const auto& rw : step.rewrites)
    rws.push_back({{"region", rw.region}, {"kind", to_string(rw.kind)}, {"table", detail::table_json(rw.table)}});
  j["rewrites"] = std::move(rws);
  if (step.kind == BeatKind::colinear) {
    j["kernel"] = detail::table_json(step.kernel);
    j["hhat"] = detail::table_json(step.hhat);
  }
  return j;
}

inline ReductionStep step_from_json(const Json& j) {
  ReductionStep step;
  const std::string kind = detail::require(j, "kind", "step").get<std::string>();
  if (kind == "linear") step.kind = BeatKind::linear;
  else if (kind == "colinear") step.kind = BeatKind::colinear;
  else throw ValidationError("step: kind must be 'linear' or 'colinear'");
  step.removed = detail::id_of(detail::require(j, "removed", "step"), "step");
  step.target = detail::id_of(detail::require(j, "target", "step"), "step");
  step.rewrite_case = j.value("case", 0);
  step.target_counting = j.value("target_counting", 0LL);
  if (j.contains("rewrites"))
    for (const auto& r : j.at("rewrites")) {
      HamiltonianRewrite rw;
      rw.region = detail::id_of(detail::require(r, "region", "rewrite"), "rewrite");
      const std::string k = detail::require(r, "kind", "rewrite").get<std::string>();
      if (k == "replace") rw.kind = RewriteKind::replace;
      else if (k == "subtract-lifted") rw.kind = RewriteKind::subtract_lifted;
      else if (k == "scale-correct") rw.kind = RewriteKind::scale_correct;
      else throw ValidationError("rewrite: unknown kind '" + k + "'");
      rw.table = detail::table_of(detail::require(r, "table", "rewrite"), "rewrite table");
      step.rewrites.push_back(std::move(rw));
    }
  if (j.contains("kernel")) step.kernel = detail::table_of(j.at("kernel"), "kernel");
  if (j.contains("hhat")) step.hhat = detail::table_of(j.at("hhat"), "hhat");
  return step;
}

inline Json trace_to_json(const ReductionTrace& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps) steps.push_back(step_to_json(s));
  return {{"initial", model_to_json(t.initial)}, {"steps", std::move(steps)}, {"final", model_to_json(t.final_model)}};
}

/// Reads a trace, replays its recorded steps from the initial model and
/// requires the result to equal the recorded final model bit for bit.
inline ReductionTrace trace_from_json(const Json& j) {
  ReductionTrace t;
  t.initial = model_from_json(detail::require(j, "initial", "trace"));
  for (const auto& s : detail::require(j, "steps", "trace")) t.steps.push_back(step_from_json(s));
  const FactorModel recorded = model_from_json(detail::require(j, "final", "trace"));
  t.final_model = replay_trace(t);
  if (!(t.final_model == recorded)) throw ValidationError("trace: replaying the steps does not reproduce the final model");
  return t;
}

}  // namespace bethe::io
