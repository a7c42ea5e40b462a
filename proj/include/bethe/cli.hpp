#pragma once

// Command-line front end: subcommands core, reduce, bp, energy, verify and
// oracle, each reading a JSON model and writing a JSON report.
//
// Exit status: 0 success, 1 invalid input (bad JSON, failed validation, caps),
// 2 verification failure.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bethe/beliefs.hpp"
#include "bethe/error.hpp"
#include "bethe/gbp.hpp"
#include "bethe/json_io.hpp"
#include "bethe/model.hpp"
#include "bethe/oracle.hpp"
#include "bethe/poset.hpp"
#include "bethe/reduce.hpp"

namespace bethe::cli {

using io::Json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitVerifyFailed = 2;

/// Tolerances of the `verify` certification.
inline constexpr double kVerifySetTol = 1e-6;       // Hausdorff distance of transported point sets
inline constexpr double kVerifyEnergyTol = 1e-9;    // |BT_full - BT_core| per matched pair
inline constexpr double kVerifyGradientTol = 1e-6;  // projected gradient of every point
inline constexpr double kVerifyMarginalTol = 1e-8;  // contractible case: lift vs exact marginals

struct RunConfig {
  std::string subcommand;
  std::string model_path;
  std::uint64_t seed = 0;
  double damping = 0.5;
  double tol = 1e-10;
  std::size_t max_iter = 10'000;
  std::size_t restarts = 32;
  std::string output_path;   // report destination; stdout when empty
  std::string beliefs_path;  // energy: pseudo-marginals file; uniform when empty
  std::string emit_poset;    // core: write the core poset JSON here
  std::string emit_trace;    // reduce: write the full trace JSON here
  bool exact = false;            // oracle: exact Gibbs summary
  bool critical_points = false;  // oracle: critical-point enumeration
};

/// Environment overrides BETHE_SEED / BETHE_TOL, applied on top of the
/// defaults and before command-line flags.
inline void apply_env(RunConfig& cfg, const std::function<const char*(const char*)>& getenv_fn) {
  if (const char* s = getenv_fn("BETHE_SEED"); s && *s) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(s, &used);
      if (used != std::string(s).size()) throw std::invalid_argument("trailing characters");
      cfg.seed = v;
    } catch (const std::exception&) {
      throw ValidationError(std::string("BETHE_SEED is not an unsigned integer: '") + s + "'");
    }
  }
  if (const char* s = getenv_fn("BETHE_TOL"); s && *s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != std::string(s).size() || !(v > 0.0)) throw std::invalid_argument("bad tolerance");
      cfg.tol = v;
    } catch (const std::exception&) {
      throw ValidationError(std::string("BETHE_TOL is not a positive number: '") + s + "'");
    }
  }
}

namespace detail {

inline Json config_json(const RunConfig& c) {
  return {{"subcommand", c.subcommand}, {"seed", c.seed},         {"damping", c.damping},
          {"tol", c.tol},               {"max_iter", c.max_iter}, {"restarts", c.restarts}};
}

inline Json report_header(const RunConfig& c, const FactorModel& m) {
  return {{"command", c.subcommand}, {"config", config_json(c)}, {"model_hash", io::model_hash(m)}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write '" + path + "'");
  f << text;
}

inline BPOptions bp_options(const RunConfig& c) { return {c.damping, c.tol, c.max_iter}; }

inline Json point_json(const FactorModel& m, const PseudoMarginals& q) {
  return {{"beliefs", io::beliefs_to_json(m, q)},
          {"bethe_energy", bethe_energy(m, q)},
          {"projected_gradient_norm", projected_gradient_norm(m, q)},
          {"consistency_residual", consistency_residual(m, q)}};
}

inline Json trace_summary(const ReductionTrace& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps)
    steps.push_back({{"kind", to_string(s.kind)}, {"removed", s.removed}, {"target", s.target}, {"case", s.rewrite_case}});
  return steps;
}

inline Json region_keys(const FactorModel& m) {
  Json keys = Json::array();
  for (const auto& r : m.regions()) keys.push_back(r.key);
  return keys;
}

/// Critical points of one side: deduplicated union of GBP fixed-point beliefs
/// and oracle descent end points.
struct SideSolution {
  std::vector<PseudoMarginals> points;
  std::size_t bp_fixed_points = 0;
  std::size_t oracle_points = 0;
};

inline SideSolution solve_side(const FactorModel& m, const RunConfig& c) {
  SideSolution s;
  std::vector<PseudoMarginals> all;
  const auto bp = find_fixed_points(m, bp_options(c), c.restarts, c.seed);
  for (const auto& fp : bp.fixed_points) all.push_back(fp.beliefs);
  s.bp_fixed_points = bp.fixed_points.size();
  CriticalPointOptions opt;
  opt.restarts = c.restarts;
  opt.seed = c.seed;
  const auto cp = enumerate_critical_points(m, opt);
  s.oracle_points = cp.points.size();
  all.insert(all.end(), cp.points.begin(), cp.points.end());
  std::sort(all.begin(), all.end(), bethe::detail::tables_less);
  for (auto& q : all) {
    const bool known = std::any_of(s.points.begin(), s.points.end(), [&](const PseudoMarginals& p) {
      return table_distance(p.tables, q.tables) <= kPointMergeDistance;
    });
    if (!known) s.points.push_back(std::move(q));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Subcommands

inline int run_core(const RunConfig& c, const Json& input, Json& report) {
  Poset p;
  if (input.contains("elements")) {
    p = io::poset_from_json(input);
    report = {{"command", c.subcommand},
              {"config", config_json(c)},
              {"input_hash", io::fnv1a_hex(io::dump(io::poset_to_json(p), -1))}};
  } else {
    const FactorModel m = io::model_from_json(input);
    p = m.poset();
    report = report_header(c, m);
  }
  const auto res = core(p);
  Json trace = Json::array();
  for (const auto& bp : res.trace) trace.push_back({{"point", bp.point}, {"kind", to_string(bp.kind)}, {"target", bp.target}});
  report["poset"] = io::poset_to_json(p);
  report["core"] = io::poset_to_json(res.core);
  report["core_size"] = res.core.size();
  report["trace"] = std::move(trace);
  if (!c.emit_poset.empty()) write_text(c.emit_poset, io::dump(io::poset_to_json(res.core)));
  return kExitOk;
}

inline int run_reduce(const RunConfig& c, const FactorModel& m, Json& report) {
  const auto trace = reduce_to_core(m);
  report = report_header(c, m);
  report["core_size"] = trace.final_model.size();
  report["core_regions"] = region_keys(trace.final_model);
  report["steps"] = trace_summary(trace);
  report["trace"] = io::trace_to_json(trace);
  if (!c.emit_trace.empty()) write_text(c.emit_trace, io::dump(io::trace_to_json(trace)));
  return kExitOk;
}

inline int run_bp(const RunConfig& c, const FactorModel& m, Json& report) {
  const auto search = find_fixed_points(m, bp_options(c), c.restarts, c.seed);
  report = report_header(c, m);
  report["oscillation_bound"] = oscillation_bound(m);
  report["runs"] = search.runs;
  report["converged_runs"] = search.converged_runs;
  Json res = Json::array();
  for (double r : search.residuals) res.push_back(r);
  report["residuals"] = std::move(res);
  Json its = Json::array();
  for (std::size_t k : search.iterations) its.push_back(k);
  report["iterations"] = std::move(its);
  Json fps = Json::array();
  for (const auto& fp : search.fixed_points) {
    Json j = point_json(m, fp.beliefs);
    j["iterations"] = fp.iterations;
    j["residual"] = fp.residual;
    Json msgs = Json::array();
    for (std::size_t k = 0; k < m.covers().size(); ++k) {
      const auto& cov = m.covers()[k];
      msgs.push_back({{"from", m.region(cov.upper).key},
                      {"to", m.region(cov.lower).key},
                      {"log_message", io::detail::table_json(fp.messages.values[k])}});
    }
    j["messages"] = std::move(msgs);
    fps.push_back(std::move(j));
  }
  report["fixed_points"] = std::move(fps);
  report["beliefs"] = search.fixed_points.empty() ? Json(nullptr) : io::beliefs_to_json(m, search.fixed_points.front().beliefs);
  return kExitOk;
}

inline int run_energy(const RunConfig& c, const FactorModel& m, Json& report) {
  const PseudoMarginals q =
      c.beliefs_path.empty() ? io::uniform_beliefs(m) : io::beliefs_from_json(m, io::parse_file(c.beliefs_path));
  report = report_header(c, m);
  report["beliefs_source"] = c.beliefs_path.empty() ? "uniform" : c.beliefs_path;
  report["bethe_energy"] = bethe_energy(m, q, EntropyMode::boundary);
  report["interior"] = q.interior();
  report["consistency_residual"] = consistency_residual(m, q);
  report["locally_consistent"] = is_locally_consistent(m, q, 1e-10);
  report["projected_gradient_norm"] = q.interior() ? Json(projected_gradient_norm(m, q)) : Json(nullptr);
  return kExitOk;
}

inline int run_oracle(const RunConfig& c, const FactorModel& m, Json& report) {
  const bool exact = c.exact || !c.critical_points;
  const bool crit = c.critical_points || !c.exact;
  report = report_header(c, m);
  if (exact) {
    const auto ex = exact_gibbs(m);
    report["exact"] = {{"log_partition", ex.log_partition}, {"marginals", io::beliefs_to_json(m, ex.marginals)}};
  }
  if (crit) {
    CriticalPointOptions opt;
    opt.restarts = c.restarts;
    opt.seed = c.seed;
    const auto cp = enumerate_critical_points(m, opt);
    Json pts = Json::array();
    for (const auto& q : cp.points) pts.push_back(point_json(m, q));
    report["critical_points"] = {{"runs", cp.runs}, {"accepted_runs", cp.accepted_runs}, {"points", std::move(pts)}};
  }
  return kExitOk;
}

/// Critical-point bijection certificate: reduce to the core, solve both sides, transport
/// the point sets with lift / project and compare them.
inline int run_verify(const RunConfig& c, const FactorModel& m, Json& report, std::ostream& err) {
  const auto trace = reduce_to_core(m);
  const auto full = solve_side(m, c);
  const auto core_side = solve_side(trace.final_model, c);

  std::vector<PseudoMarginals> lifted, projected;
  for (const auto& q : core_side.points) lifted.push_back(lift_beliefs(trace, q));
  for (const auto& q : full.points) projected.push_back(project_beliefs(trace, q));

  const double d_lift = hausdorff_distance(full.points, lifted);
  const double d_project = hausdorff_distance(projected, core_side.points);
  double energy_gap = 0.0, worst_gradient = 0.0;
  Json pairs = Json::array();
  for (std::size_t k = 0; k < core_side.points.size(); ++k) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < full.points.size(); ++f) {
      const double d = table_distance(full.points[f].tables, lifted[k].tables);
      if (d < best_d) {
        best_d = d;
        best = f;
      }
    }
    const double e_core = bethe_energy(trace.final_model, core_side.points[k]);
    const double g_lift = projected_gradient_norm(m, lifted[k]);
    worst_gradient = std::max({worst_gradient, g_lift, projected_gradient_norm(trace.final_model, core_side.points[k])});
    Json pj = {{"core_point", k}, {"core_energy", e_core}, {"lifted_gradient_norm", g_lift}};
    if (!full.points.empty()) {
      const double e_full = bethe_energy(m, full.points[best]);
      energy_gap = std::max(energy_gap, std::abs(e_full - e_core));
      pj["full_point"] = best;
      pj["full_energy"] = e_full;
      pj["belief_distance"] = best_d;
    }
    pairs.push_back(std::move(pj));
  }
  for (const auto& q : full.points) worst_gradient = std::max(worst_gradient, projected_gradient_norm(m, q));

  report = report_header(c, m);
  report["core_size"] = trace.final_model.size();
  report["core_regions"] = region_keys(trace.final_model);
  report["steps"] = trace_summary(trace);
  report["full_points"] = full.points.size();
  report["core_points"] = core_side.points.size();
  report["full_bp_fixed_points"] = full.bp_fixed_points;
  report["core_bp_fixed_points"] = core_side.bp_fixed_points;
  report["hausdorff_lift"] = d_lift;
  report["hausdorff_project"] = d_project;
  report["max_energy_gap"] = energy_gap;
  report["max_gradient_norm"] = worst_gradient;
  report["pairs"] = std::move(pairs);

  struct Check {
    const char* name;
    double value;
    double tol;
  };
  std::vector<Check> checks = {{"hausdorff_lift", d_lift, kVerifySetTol},
                               {"hausdorff_project", d_project, kVerifySetTol},
                               {"max_energy_gap", energy_gap, kVerifyEnergyTol},
                               {"max_gradient_norm", worst_gradient, kVerifyGradientTol}};
  if (trace.final_model.size() <= 1) {
    // Contractible: the lifted unique critical point is the exact Gibbs marginal.
    try {
      const auto ex = exact_gibbs(m);
      const double match = lifted.empty() ? std::numeric_limits<double>::infinity()
                                          : table_distance(lifted.front().tables, ex.marginals.tables);
      report["log_partition"] = ex.log_partition;
      report["marginal_match"] = match;
      checks.push_back({"marginal_match", match, kVerifyMarginalTol});
    } catch (const CapExceeded&) {
      report["marginal_match"] = nullptr;
    }
  }
  if (full.points.empty() || core_side.points.empty()) checks.push_back({"point_sets_nonempty", 1.0, 0.0});

  const Check* worst = nullptr;
  for (const auto& ch : checks)
    if (!(ch.value <= ch.tol) && (!worst || ch.value / std::max(ch.tol, 1e-300) > worst->value / std::max(worst->tol, 1e-300)))
      worst = &ch;
  report["passed"] = worst == nullptr;
  if (worst) {
    report["worst_offender"] = {{"check", worst->name}, {"value", worst->value}, {"tolerance", worst->tol}};
    err << "verify: " << worst->name << " = " << worst->value << " exceeds " << worst->tol << "\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

}  // namespace detail

/// Executes one subcommand; the JSON report goes to `out` (or the output file).
inline int run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    if (c.model_path.empty()) throw ValidationError("--model is required");
    const Json input = io::parse_file(c.model_path);
    Json report;
    int status = kExitOk;
    if (c.subcommand == "core") {
      status = detail::run_core(c, input, report);
    } else {
      const FactorModel m = io::model_from_json(input);
      if (c.subcommand == "reduce") status = detail::run_reduce(c, m, report);
      else if (c.subcommand == "bp") status = detail::run_bp(c, m, report);
      else if (c.subcommand == "energy") status = detail::run_energy(c, m, report);
      else if (c.subcommand == "oracle") status = detail::run_oracle(c, m, report);
      else if (c.subcommand == "verify") status = detail::run_verify(c, m, report, err);
      else throw ValidationError("unknown subcommand '" + c.subcommand + "'");
    }
    const std::string text = io::dump(report);
    if (c.output_path.empty()) out << text;
    else detail::write_text(c.output_path, text);
    return status;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const nlohmann::ordered_json::exception& e) {
    err << "error: invalid JSON content: " << e.what() << "\n";
    return kExitInvalid;
  }
}

/// Parses argv (after applying environment overrides) and runs the subcommand.
inline int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                      const std::function<const char*(const char*)>& getenv_fn = [](const char* k) {
                        return std::getenv(k);
                      }) {
  RunConfig cfg;
  try {
    apply_env(cfg, getenv_fn);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  CLI::App app{"Bethe free energy, generalized belief propagation and poset-core reduction"};
  app.require_subcommand(1);
  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model_path, "model JSON file")->required();
    sub->add_option("--seed", cfg.seed, "random seed (env BETHE_SEED)");
    sub->add_option("--damping", cfg.damping, "GBP damping in [0, 1)");
    sub->add_option("--tol", cfg.tol, "GBP residual tolerance (env BETHE_TOL)");
    sub->add_option("--max-iters", cfg.max_iter, "maximum GBP sweeps");
    sub->add_option("--restarts", cfg.restarts, "multi-start runs");
    sub->add_option("-o,--output", cfg.output_path, "write the report here instead of stdout");
  };
  auto* core_cmd = app.add_subcommand("core", "core of the region poset (model or poset JSON)");
  common(core_cmd);
  core_cmd->add_option("--emit-poset", cfg.emit_poset, "write the core poset JSON to this file");
  auto* reduce_cmd = app.add_subcommand("reduce", "reduce the model to the core of its poset");
  common(reduce_cmd);
  reduce_cmd->add_option("--emit-trace", cfg.emit_trace, "write the reduction trace JSON to this file");
  common(app.add_subcommand("bp", "multi-start GBP fixed points"));
  auto* energy_cmd = app.add_subcommand("energy", "Bethe free energy at given pseudo-marginals");
  common(energy_cmd);
  energy_cmd->add_option("--beliefs", cfg.beliefs_path, "pseudo-marginals JSON (uniform when omitted)");
  common(app.add_subcommand("verify", "certify the critical-point bijection across the reduction"));
  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force enumeration");
  common(oracle_cmd);
  oracle_cmd->add_flag("--exact", cfg.exact, "exact Gibbs partition function and marginals");
  oracle_cmd->add_flag("--critical-points", cfg.critical_points, "multi-start critical-point search");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  return run(cfg, out, err);
}

}  // namespace bethe::cli
