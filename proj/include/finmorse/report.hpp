#pragma once

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "finmorse/pipeline.hpp"

namespace finmorse {

using json = nlohmann::ordered_json;

inline json vec_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json ids_json(const WeightedGraph& g, const VertexSet& s) {
  json a = json::array();
  for (Index x : s) a.push_back(g.id(x));
  return a;
}

inline json to_json(const CountResult& c) {
  return {{"count", c.count}, {"threshold", c.threshold}, {"band", c.band},
          {"scale", c.scale}, {"ambiguous", c.ambiguous}, {"method", c.method}};
}

inline json shift_json(const WeightedGraph& g, const std::optional<ShiftRecord>& s) {
  if (!s) return nullptr;
  return {{"U", ids_json(g, s->U)},
          {"magnitude", s->magnitude},
          {"lambda1_shifted", s->lambda1_shifted},
          {"escalations", s->escalations}};
}

// {"n_minus","bs_count","holds","tol","ambiguous","shift"} plus diagnostics.
inline json to_json(const WeightedGraph& g, const BSResult& r) {
  // the largest few eigenvalues of T, descending
  json t = json::array();
  for (Eigen::Index i = r.t_eigenvalues.size() - 1; i >= 0 && i >= r.t_eigenvalues.size() - (r.bs_count + 3); --i)
    t.push_back(r.t_eigenvalues[i]);
  return {{"n_minus", r.n_minus},
          {"bs_count", r.bs_count},
          {"holds", r.holds},
          {"tol", r.tol},
          {"ambiguous", r.ambiguous},
          {"shift", shift_json(g, r.shift)},
          {"threshold", r.threshold},
          {"n_minus_ambiguous", r.n_minus_ambiguous},
          {"route", r.route},
          {"t_top", t}};
}

inline json to_json(const BracketResult& b) {
  return {{"lambda", b.lambda},   {"n_total", b.n_total},       {"n_K", b.n_K},
          {"n_complement", b.n_complement}, {"holds", b.holds}, {"ambiguous", b.ambiguous}};
}

inline json to_json(const PipelineReport& r, bool include_phi = true) {
  const auto& g = *r.omega;
  json verdicts = json::object();
  for (const auto& [k, v] : r.verdicts) verdicts[k] = v;
  json tols = json::object();
  for (const auto& [k, v] : r.tolerances) tols[k] = v;
  json brk = json::array();
  for (const auto& b : r.bracketing) brk.push_back(to_json(b));
  json out = {{"omega_size", g.size()},
              {"morse_index", r.morse_index},
              {"morse_ambiguous", r.morse_ambiguous},
              {"morse_method", r.morse_method},
              {"stable_level", r.stable_level ? json(*r.stable_level) : json(nullptr)},
              {"stable_K", r.stable_level ? ids_json(g, r.stable_K) : json(nullptr)},
              {"lambda1_scan", r.lambda1_scan},
              {"lambda1_exterior", r.lambda1_exterior},
              {"inner_layer", ids_json(g, r.layer)},
              {"doob_q_support", ids_json(g, r.doob_q_support)},
              {"doob_exterior_residual", r.doob_exterior_residual},
              {"doob_conjugation_residual", r.doob_conjugation_residual},
              {"spectra_deviation", r.spectra_deviation},
              {"spectra_compared", r.spectra_compared},
              {"bs_result", r.bs ? to_json(g, *r.bs) : json(nullptr)},
              {"bracketing_results", brk},
              {"nonneg_L_check", r.nonneg_L_check},
              {"nonneg_support", ids_json(g, r.nonneg_support)},
              {"verdicts", verdicts},
              {"errors", r.errors},
              {"tolerances", tols}};
  if (include_phi) {
    if (r.phi.size()) {
      json phi = json::object();
      for (Index x = 0; x < g.size(); ++x) phi[g.id(x)] = r.phi[x];
      out["phi"] = phi;
    } else {
      out["phi"] = nullptr;
    }
  }
  return out;
}

inline json to_json(const ParabolicityVerdict& p, const WeightedGraph& g) {
  json levels = json::array();
  for (std::size_t k = 0; k < p.c.size(); ++k) {
    json gp = json::array();
    for (Eigen::Index j = 0; j < p.green_probe[k].cols(); ++j) gp.push_back(p.green_probe[k](0, j));
    levels.push_back({{"level_index", k},
                      {"level_size", p.level_sizes[k]},
                      {"abscissa", p.abscissa[k]},
                      {"c_k", p.c[k]},
                      {"green_probe", gp}});
  }
  const auto& d = p.diagnostics;
  return {{"verdict", to_string(p.verdict)},
          {"heuristic", true},
          {"probe", ids_json(g, p.probe)},
          {"stall_tol", p.stall_tol},
          {"decay_window", p.decay_window},
          {"levels", levels},
          {"diagnostics",
           {{"c_rel_change", d.c_rel_change},
            {"green_rel_change", d.green_rel_change},
            {"c_stalled", d.c_stalled},
            {"green_cauchy", d.green_cauchy},
            {"decaying", d.decaying},
            {"model", d.model},
            {"slope", d.slope},
            {"r2_power", d.r2_power},
            {"r2_log", d.r2_log},
            {"notes", d.notes}}}};
}

inline std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ':');
  return s;
}

// level_index, level_size, c_k, then G(p0, p) for every probe vertex p.
// Commas inside lattice ids become ':' in the header.
inline void write_parabolicity_csv(std::ostream& os, const ParabolicityVerdict& p, const WeightedGraph& g) {
  os << "level_index,level_size,c_k";
  for (Index x : p.probe) os << ",G_" << csv_safe(g.id(p.probe.front())) << "_" << csv_safe(g.id(x));
  os << '\n';
  for (std::size_t k = 0; k < p.c.size(); ++k) {
    os << k << ',' << p.level_sizes[k] << ',' << format_g17(p.c[k]);
    for (Eigen::Index j = 0; j < p.green_probe[k].cols(); ++j) os << ',' << format_g17(p.green_probe[k](0, j));
    os << '\n';
  }
}

}  // namespace finmorse
