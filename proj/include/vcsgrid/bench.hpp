#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcsgrid/topocontrol.hpp"

namespace vcsgrid {

struct BenchConfig {
  std::string case_path;
  int samples = 50;
  double spread = 0.3;
  std::uint64_t seed = 1;
  double threshold_frac = 0.10;
  bool run_standard = true;
  bool run_local = true;
  std::string output_path;
  GreedyOptions greedy;
};

struct HeuristicOutcome {
  double saving = 0.0;
  double saving_over_mas = 0.0;
  int lines_removed = 0;
  long solves = 0;
  double effort = 1.0;  // solves relative to the standard heuristic on the same sample
  std::vector<LineId> outages;
};

struct SampleRow {
  int index = 0;
  std::uint64_t seed = 0;
  bool skipped = false;        // constrained DCOPF infeasible
  bool zero_mas = false;       // nothing to save; excluded from Saving/MAS aggregates
  double constrained_cost = 0.0;
  double unconstrained_cost = 0.0;
  double mas = 0.0;
  std::optional<HeuristicOutcome> standard, local;
};

struct Aggregate {
  double mean = 0.0, std = 0.0;
  int count = 0;
};

inline Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  a.count = static_cast<int>(xs.size());
  if (xs.empty()) return a;
  for (double x : xs) a.mean += x;
  a.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return a;
}

struct HeuristicSummary {
  Aggregate saving_over_mas;
  Aggregate lines_removed;
  double mean_effort = 0.0;
};

struct BenchReport {
  BenchConfig config;
  std::vector<SampleRow> rows;
  int skipped = 0;
  int zero_mas = 0;
  std::optional<HeuristicSummary> standard, local;
};

// splitmix64 step; gives each sample an independent, replayable seed.
inline std::uint64_t sample_seed(std::uint64_t base, int index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline HeuristicSummary summarize(const std::vector<SampleRow>& rows, bool local) {
  std::vector<double> ratio, removed, effort;
  for (const auto& r : rows) {
    if (r.skipped) continue;
    const auto& h = local ? r.local : r.standard;
    if (!h) continue;
    removed.push_back(h->lines_removed);
    effort.push_back(h->effort);
    if (!r.zero_mas) ratio.push_back(h->saving_over_mas);
  }
  HeuristicSummary s;
  s.saving_over_mas = aggregate(ratio);
  s.lines_removed = aggregate(removed);
  s.mean_effort = aggregate(effort).mean;
  return s;
}

using ProgressFn = std::function<void(const SampleRow&)>;

// Monte Carlo over generator costs with the load held fixed. Each sample
// perturbs the costs, measures the maximum attainable savings, and runs the
// configured heuristics from the original topology.
inline BenchReport run_monte_carlo(const GridCase& base, const BenchConfig& cfg, const ProgressFn& progress = {}) {
  if (cfg.samples < 1) throw InputError("sample count must be at least 1");
  if (!(cfg.spread >= 0.0 && cfg.spread < 1.0)) throw InputError("cost spread must lie in [0, 1)");
  BenchReport rep;
  rep.config = cfg;
  GreedyOptions gopt = cfg.greedy;
  gopt.threshold_frac = cfg.threshold_frac;

  for (int s = 0; s < cfg.samples; ++s) {
    SampleRow row;
    row.index = s;
    row.seed = sample_seed(cfg.seed, s);
    const GridCase sample = perturb_gencosts(base, row.seed, cfg.spread);
    const auto m = mas(sample);
    row.unconstrained_cost = m.unconstrained_cost;
    if (!m.mas) {
      row.skipped = true;
      ++rep.skipped;
      rep.rows.push_back(row);
      if (progress) progress(row);
      continue;
    }
    row.constrained_cost = m.constrained_cost;
    row.mas = std::max(0.0, *m.mas);
    row.zero_mas = row.mas <= 1e-6 * std::max(1.0, m.constrained_cost);
    if (row.zero_mas) ++rep.zero_mas;

    auto outcome = [&](const SwitchingPlan& p) {
      HeuristicOutcome h;
      h.saving = p.saving();
      h.saving_over_mas = row.zero_mas ? 1.0 : h.saving / row.mas;
      h.lines_removed = static_cast<int>(p.outages.size());
      h.solves = p.total_solves;
      h.outages = p.outages;
      return h;
    };
    if (cfg.run_standard) row.standard = outcome(standard_greedy(sample, gopt));
    if (cfg.run_local) row.local = outcome(local_greedy(sample, gopt));
    if (row.standard && row.local)
      row.local->effort = static_cast<double>(row.local->solves) / static_cast<double>(row.standard->solves);
    rep.rows.push_back(row);
    if (progress) progress(row);
  }
  if (cfg.run_standard) rep.standard = summarize(rep.rows, false);
  if (cfg.run_local) rep.local = summarize(rep.rows, true);
  return rep;
}

inline nlohmann::json to_json(const BenchReport& rep) {
  using nlohmann::json;
  auto agg = [](const Aggregate& a) { return json{{"mean", a.mean}, {"std", a.std}, {"count", a.count}}; };
  auto heur = [&](const HeuristicOutcome& h) {
    return json{{"saving", h.saving}, {"saving_over_mas", h.saving_over_mas}, {"lines_removed", h.lines_removed},
                {"solves", h.solves}, {"effort", h.effort}, {"outages", h.outages}};
  };
  json j;
  j["config"] = {{"case", rep.config.case_path}, {"samples", rep.config.samples}, {"spread", rep.config.spread},
                 {"seed", rep.config.seed}, {"threshold_frac", rep.config.threshold_frac},
                 {"standard", rep.config.run_standard}, {"local", rep.config.run_local}};
  j["skipped_infeasible"] = rep.skipped;
  j["zero_mas_samples"] = rep.zero_mas;
  j["samples"] = json::array();
  for (const auto& r : rep.rows) {
    json jr = {{"index", r.index}, {"seed", r.seed}, {"skipped", r.skipped}, {"zero_mas", r.zero_mas},
               {"constrained_cost", r.constrained_cost}, {"unconstrained_cost", r.unconstrained_cost}, {"mas", r.mas}};
    if (r.standard) jr["standard"] = heur(*r.standard);
    if (r.local) jr["local"] = heur(*r.local);
    j["samples"].push_back(std::move(jr));
  }
  j["summary"] = json::object();
  for (auto [name, s] : {std::pair{"standard", &rep.standard}, std::pair{"local", &rep.local}}) {
    if (!*s) continue;
    j["summary"][name] = {{"saving_over_mas", agg((*s)->saving_over_mas)},
                          {"lines_removed", agg((*s)->lines_removed)},
                          {"mean_effort", (*s)->mean_effort}};
  }
  return j;
}

// One CSV row per sample and heuristic.
inline void write_csv(std::ostream& os, const BenchReport& rep) {
  os << "sample,seed,heuristic,mas,saving,saving_over_mas,lines_removed,solves,effort,zero_mas\n";
  os.precision(12);
  for (const auto& r : rep.rows) {
    if (r.skipped) continue;
    for (auto [name, h] : {std::pair{"standard", &r.standard}, std::pair{"local", &r.local}}) {
      if (!*h) continue;
      const auto& o = **h;
      os << r.index << ',' << r.seed << ',' << name << ',' << r.mas << ',' << o.saving << ',' << o.saving_over_mas << ','
         << o.lines_removed << ',' << o.solves << ',' << o.effort << ',' << (r.zero_mas ? 1 : 0) << '\n';
    }
  }
}

}  // namespace vcsgrid
