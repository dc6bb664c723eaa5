// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "support/properties.hpp"

using namespace vcsgrid;
namespace ts = testsupport;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GridCase case118() { return load_case_file(std::string(VCSGRID_DATA_DIR) + "/case118.m").grid; }

Outcome lmp_identity() {
  const auto t0 = Clock::now();
  ts::Rng rng(101);
  int samples = 0, skipped = 0;
  double worst = 0.0;
  auto check = [&](const GridCase& gc) {
    const auto sol = solve_dcopf(gc, true);
    if (!sol.optimal() || congested_lines(gc, sol).empty()) return;
    if (!duals_are_stable(gc, sol)) {
      ++skipped;
      return;
    }
    const auto sf = shift_factor_matrix(gc, sol.reference_index);
    const auto eq = lmp_via_shift_factors(sf, sol.signed_shadow_prices(), sol.lmp(static_cast<Eigen::Index>(sol.reference_index)));
    worst = std::max(worst, (eq - sol.lmp).cwiseAbs().maxCoeff() / sol.lmp.cwiseAbs().maxCoeff());
    ++samples;
  };
  const auto base = case118();
  for (int s = 0; s < 12; ++s) check(perturb_gencosts(base, sample_seed(1000, s), 0.3));
  for (int t = 0; t < 200 && samples < 30; ++t)
    if (auto gc = ts::congested_market_case(rng, ts::uniform_int(rng, 10, 30), ts::uniform_int(rng, 2, 15))) check(*gc);
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {samples >= 20 && worst <= 1e-6 && secs < 60,
          fmt("%d non-degenerate samples (%d degenerate skipped), max rel error %.2e, %.1f s", samples, skipped, worst, secs)};
}

Outcome lodf_equivalence() {
  const auto t0 = Clock::now();
  const auto gc = case118();
  ts::Rng rng(102);
  const double err = ts::lodf_prediction_error(gc, ts::random_balanced_injection(rng, gc.num_buses()));
  const auto lines = allowable_outages(gc).size();
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {err <= 1e-8 && secs < 120, fmt("%zu non-bridge outages, max rel error %.2e, %.1f s", lines, err, secs)};
}

Outcome cut_bound() {
  ts::Rng rng(103);
  int graphs = 0;
  double worst = 0.0;
  for (int t = 0; graphs < 200 && t < 5000; ++t)
    if (auto e = ts::cut_bound_excursion(rng)) {
      worst = std::max(worst, *e);
      ++graphs;
    }
  return {graphs == 200 && worst <= 1e-9, fmt("%d graphs, max excursion %.2e", graphs, worst)};
}

Outcome cross_ranks() {
  ts::Rng rng(104);
  int checked = 0, violations = 0, max_slack = -1000;
  for (int t = 0; checked < 100 && t < 5000; ++t)
    if (auto r = ts::cross_block_ranks(rng)) {
      ++checked;
      if (r->rank_inside > r->cut_size || r->rank_outside > r->cut_size) ++violations;
      max_slack = std::max(max_slack, std::max(r->rank_inside, r->rank_outside) - r->cut_size);
    }
  return {checked == 100 && violations == 0,
          fmt("%d decompositions, %d rank violations, max(rank - |cut|) = %d", checked, violations, max_slack)};
}

Outcome convex_combination() {
  ts::Rng rng(105);
  int cases = 0, quiet = 0;
  double lmp_err = 0.0, min_w = 0.0, sum_err = 0.0, excess = -1e300;
  for (int t = 0; cases < 50 && t < 5000; ++t)
    if (auto c = ts::convex_combination_check(rng)) {
      ++cases;
      quiet += c->quiet_buses;
      lmp_err = std::max(lmp_err, c->lmp_error);
      min_w = std::min(min_w, c->min_weight);
      sum_err = std::max(sum_err, c->sum_error);
      excess = std::max(excess, c->range_excess);
    }
  return {cases == 50 && lmp_err <= 1e-6 && min_w >= -1e-8 && sum_err <= 1e-8 && excess <= 1e-6,
          fmt("%d cases, %d quiet buses, lmp err %.2e, min weight %.2e, sum err %.2e, range excess %.2e", cases, quiet,
              lmp_err, min_w, sum_err, excess)};
}

Outcome sign_agreement() {
  ts::Rng rng(106);
  ts::SignTally tally;
  while (tally.trials < 10000) ts::line_pair_signs(rng, 50, tally);
  return {tally.disagreements == 0,
          fmt("%d trials, %d in dead zone, %d disagreements", tally.trials, tally.dead_zone, tally.disagreements)};
}

Outcome confinement() {
  ts::Rng rng(107);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) worst = std::max(worst, ts::confinement_leak(rng));
  return {worst <= 1e-9, fmt("50 composite graphs, max flow change outside the block %.2e", worst)};
}

Outcome kron() {
  ts::Rng rng(108);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) worst = std::max(worst, ts::kron_equivalence_error(rng));
  return {worst <= 1e-9, fmt("100 triples, max terminal angle difference error %.2e", worst)};
}

Outcome table2() {
  const auto t0 = Clock::now();
  BenchConfig cfg;
  cfg.case_path = std::string(VCSGRID_DATA_DIR) + "/case118.m";
  cfg.samples = 50;
  cfg.seed = 1;
  cfg.spread = 0.3;
  cfg.threshold_frac = 0.10;
  const auto rep = run_monte_carlo(case118(), cfg, [](const SampleRow& r) {
    std::fprintf(stderr, "  sample %d/50%s\n", r.index + 1, r.skipped ? " (infeasible)" : "");
  });
  const auto& s = *rep.standard;
  const auto& l = *rep.local;
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("  standard Saving/MAS %.3f +- %.3f (target 0.672 +- 0.051), lines %.2f +- %.2f (target 12.910 +- 4.312)\n",
              s.saving_over_mas.mean, s.saving_over_mas.std, s.lines_removed.mean, s.lines_removed.std);
  std::printf("  local    Saving/MAS %.3f +- %.3f (target 0.653 +- 0.055), lines %.2f +- %.2f (target 10.18 +- 3.98)\n",
              l.saving_over_mas.mean, l.saving_over_mas.std, l.lines_removed.mean, l.lines_removed.std);
  std::printf("  local effort %.4f (target 0.216), %d infeasible, %d zero-MAS samples, %.0f s\n", l.mean_effort, rep.skipped,
              rep.zero_mas, secs);
  const bool pass = l.mean_effort <= 0.5 && l.saving_over_mas.mean >= 0.85 * s.saving_over_mas.mean &&
                    s.saving_over_mas.mean >= 0.5 && secs < 1800;
  return {pass, fmt("effort %.4f <= 0.5, local/standard %.3f >= 0.85, standard %.3f >= 0.5", l.mean_effort,
                    l.saving_over_mas.mean / s.saving_over_mas.mean, s.saving_over_mas.mean)};
}

Outcome bus_pair() {
  ts::Rng rng(110);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t)
    if (!ts::bus_pair_matches(rng)) ++mismatches;
  return {mismatches == 0, fmt("1000 instances, %d mismatches", mismatches)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"LMP shift-factor identity", lmp_identity},
      {"LODF equals post-outage re-solve", lodf_equivalence},
      {"interior shift factors bounded by the cut", cut_bound},
      {"cross-block rank bounded by the cut size", cross_ranks},
      {"quiet LMPs are convex combinations of cut LMPs", convex_combination},
      {"line-pair sign agreement", sign_agreement},
      {"biconnected confinement", confinement},
      {"Kron reduction equivalence", kron},
      {"IEEE 118 Monte Carlo comparison", table2},
      {"optimal bus pair matches enumeration", bus_pair},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
