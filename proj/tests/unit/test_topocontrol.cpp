#include <gtest/gtest.h>

#include "support/properties.hpp"

using namespace vcsgrid;
namespace ts = testsupport;

namespace {

GridCase case118() { return load_case_file(std::string(VCSGRID_DATA_DIR) + "/case118.m").grid; }

// Triangle 1-2-3 with a detour 2-4-3. Line 1-3 carries 5/8 of a 1 -> 3
// transfer and is limited to 50 MW.
GridCase detour_case() {
  auto gc = ts::bare_case(4);
  ts::add_line(gc, 1, 2, 1.0);
  ts::add_line(gc, 2, 3, 1.0);
  ts::add_line(gc, 1, 3, 1.0, 50.0);
  ts::add_line(gc, 2, 4, 1.0);
  ts::add_line(gc, 4, 3, 1.0);
  gc.buses[2].load = 90;
  gc.generators.push_back({1, 1, 0.0, 200.0, 10.0, {}});
  gc.generators.push_back({2, 3, 0.0, 200.0, 50.0, {}});
  return gc;
}

void expect_plan_invariants(const GridCase& gc, const SwitchingPlan& plan, const GreedyOptions& opt) {
  ASSERT_EQ(plan.objectives.size(), plan.outages.size() + 1);
  for (std::size_t i = 1; i < plan.objectives.size(); ++i) EXPECT_GT(plan.objectives[i - 1] - plan.objectives[i], opt.min_saving);
  EXPECT_TRUE(is_connected(Graph(plan.final_case)));
  for (auto id : plan.outages) EXPECT_FALSE(plan.final_case.lines[plan.final_case.line_index(id)].in_service);
  const auto floor = solve_dcopf(gc, false).objective;
  EXPECT_GE(plan.objectives.back(), floor - 1e-6 * std::max(1.0, floor));
  long sum = 1;
  for (auto s : plan.solves_per_step) sum += s;
  EXPECT_EQ(plan.total_solves, sum);
}

}  // namespace

TEST(AllowableOutages, Examples) {
  EXPECT_EQ(allowable_outages(ts::triangle()), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_TRUE(allowable_outages(ts::path(4)).empty());
  EXPECT_EQ(allowable_outages(ts::triangle(), std::vector<std::size_t>{2}), std::vector<std::size_t>{2});
  auto gc = ts::triangle();
  gc.lines[0].in_service = false;
  EXPECT_TRUE(allowable_outages(gc).empty());
}

TEST(AllowableOutages, Ieee118RestrictedSubset) {
  const auto gc = case118();
  const auto all = allowable_outages(gc);
  const auto br = bridges(Graph(gc));
  EXPECT_EQ(all.size() + br.size(), gc.num_lines());
  const std::vector<std::size_t> some{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  for (auto k : allowable_outages(gc, some)) {
    EXPECT_TRUE(std::binary_search(all.begin(), all.end(), k));
    EXPECT_LT(k, 10u);
  }
}

TEST(Greedy, UncongestedCaseGivesEmptyPlan) {
  auto gc = detour_case();
  gc.lines[2].limit = kUnbounded;
  const auto standard = standard_greedy(gc);
  EXPECT_TRUE(standard.outages.empty());
  EXPECT_EQ(standard.stop_reason, "no_improving_switch");
  const auto local = local_greedy(gc);
  EXPECT_TRUE(local.outages.empty());
  EXPECT_EQ(local.stop_reason, "no_congestion");
  EXPECT_EQ(local.total_solves, 1);
}

TEST(Greedy, DetourCaseOpensTheCongestedLine) {
  const auto gc = detour_case();
  const auto base = solve_dcopf(gc, true);
  ASSERT_NEAR(base.objective, 1300, 1e-6);
  ASSERT_NEAR(solve_dcopf(gc, false).objective, 900, 1e-6);

  // Exhaustive single-switch oracle with full nodal re-solves.
  double best = base.objective;
  LineId best_id = 0;
  for (const auto& l : gc.lines) {
    const auto trial = with_line_status(gc, l.id, false);
    if (!is_connected(Graph(trial))) continue;
    const auto s = solve_dcopf(trial, true);
    if (s.optimal() && s.objective < best) {
      best = s.objective;
      best_id = l.id;
    }
  }
  EXPECT_EQ(best_id, 3);

  for (const auto& plan : {standard_greedy(gc), local_greedy(gc)}) {
    ASSERT_EQ(plan.outages, std::vector<LineId>{3});
    EXPECT_NEAR(plan.objectives.back(), best, 1e-6);
    EXPECT_NEAR(plan.saving(), 400, 1e-6);
    expect_plan_invariants(gc, plan, {});
  }
}

TEST(Greedy, MaxIterCapsPlan) {
  const auto plan = standard_greedy(detour_case(), {0});
  EXPECT_TRUE(plan.outages.empty());
  EXPECT_EQ(plan.stop_reason, "max_iter");
  EXPECT_EQ(plan.total_solves, 1);
}

TEST(Greedy, InfeasibleBaseThrows) {
  auto gc = detour_case();
  gc.generators[1].p_max = 5;
  EXPECT_THROW(standard_greedy(gc), SolverError);
}

TEST(Greedy, RandomPlansKeepInvariants) {
  ts::Rng rng(81);
  int checked = 0;
  for (int t = 0; t < 80 && checked < 15; ++t) {
    auto gc = ts::congested_market_case(rng, ts::uniform_int(rng, 6, 18), ts::uniform_int(rng, 3, 10));
    if (!gc) continue;
    ++checked;
    const GreedyOptions opt;
    const auto standard = standard_greedy(*gc, opt);
    const auto local = local_greedy(*gc, opt);
    expect_plan_invariants(*gc, standard, opt);
    expect_plan_invariants(*gc, local, opt);
    // Local candidates are a subset of the standard ones in the first round.
    const double s1 = standard.objectives.size() > 1 ? standard.objectives[0] - standard.objectives[1] : 0.0;
    const double l1 = local.objectives.size() > 1 ? local.objectives[0] - local.objectives[1] : 0.0;
    EXPECT_LE(l1, s1 + 1e-7 * std::max(1.0, standard.objectives[0]));
    if (!local.solves_per_step.empty() && !standard.solves_per_step.empty())
      EXPECT_LE(local.solves_per_step.front(), standard.solves_per_step.front());
  }
  EXPECT_GE(checked, 10);
}

TEST(Greedy, LocalFirstStepStaysInCongestedSubgrid) {
  const auto gc = case118();
  const auto sol = solve_dcopf(gc, true);
  const auto sub = decompose_by_lmp(gc, sol).congested_subgrid();
  GreedyOptions opt;
  opt.max_iter = 1;
  const auto plan = local_greedy(gc, opt);
  ASSERT_EQ(plan.solves_per_step.size(), 1u);
  EXPECT_EQ(static_cast<std::size_t>(plan.solves_per_step[0]), allowable_outages(gc, sub.lines).size());
  for (auto id : plan.outages) EXPECT_TRUE(std::binary_search(sub.lines.begin(), sub.lines.end(), gc.line_index(id)));
}

TEST(Greedy, FrozenScopeMatchesFirstDecomposition) {
  const auto gc = case118();
  const auto sol = solve_dcopf(gc, true);
  const auto sub = decompose_by_lmp(gc, sol).congested_subgrid();
  GreedyOptions opt;
  opt.max_iter = 3;
  opt.refresh_decomposition = false;
  const auto plan = local_greedy(gc, opt);
  for (auto id : plan.outages) EXPECT_TRUE(std::binary_search(sub.lines.begin(), sub.lines.end(), gc.line_index(id)));
  expect_plan_invariants(gc, plan, opt);
}

TEST(Greedy, PlanJson) {
  const auto j = to_json(standard_greedy(detour_case()));
  EXPECT_EQ(j["outages"], nlohmann::json::array({3}));
  EXPECT_NEAR(j["saving"].get<double>(), 400, 1e-6);
  EXPECT_EQ(j["objectives"].size(), 2u);
}
