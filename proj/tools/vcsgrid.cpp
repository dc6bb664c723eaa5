// Command-line front end: solve, sens, decompose, switch, bench.
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vcsgrid/vcsgrid.hpp"

using namespace vcsgrid;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kInfeasible = 2;

struct Common {
  std::string case_path;
  std::string out;
  std::string format = "json";
};

class Output {
public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw InputError("cannot open output file " + path);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
  std::unique_ptr<std::ofstream> file_;
};

GridCase load(const std::string& path) {
  auto loaded = load_case_file(path);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w.message << '\n';
  return std::move(loaded.grid);
}

void add_common(CLI::App* cmd, Common& c, std::initializer_list<std::string> formats) {
  cmd->add_option("--case", c.case_path, "Case file (MATPOWER .m or JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output path (default stdout)");
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember(std::vector<std::string>(formats)));
}

void write_lmp_csv(std::ostream& os, const GridCase& gc, const OpfSolution& sol) {
  os.precision(12);
  os << "bus,lmp\n";
  for (std::size_t i = 0; i < gc.num_buses(); ++i) os << gc.buses[i].id << ',' << sol.lmp(static_cast<Eigen::Index>(i)) << '\n';
}

int run_solve(const Common& c, bool unconstrained, const std::string& formulation) {
  const GridCase gc = load(c.case_path);
  const auto f = formulation == "shift_factor" ? Formulation::shift_factor : Formulation::nodal;
  const auto sol = solve_dcopf(gc, !unconstrained, f);
  Output out(c.out);
  if (c.format == "csv") {
    if (sol.optimal()) write_lmp_csv(out.stream(), gc, sol);
  } else {
    out.stream() << to_json(gc, sol).dump(2) << '\n';
  }
  if (!sol.optimal()) {
    std::cerr << "DCOPF infeasible\n";
    return kInfeasible;
  }
  return kOk;
}

int run_sens(const Common& c, const std::string& kind) {
  const GridCase gc = load(c.case_path);
  const auto sf = shift_factor_matrix(gc);
  Output out(c.out);
  if (kind == "lodf") {
    const auto lodf = lodf_matrix(gc, sf);
    if (c.format == "csv") {
      write_lodf_csv(out.stream(), lodf, sf.line_ids);
    } else {
      nlohmann::json j = {{"lines", sf.line_ids}, {"lodf", nlohmann::json::array()}};
      for (Eigen::Index r = 0; r < lodf.zeta.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < lodf.zeta.cols(); ++k)
          row.push_back(lodf.defined[static_cast<std::size_t>(k)] ? nlohmann::json(lodf.zeta(r, k)) : nlohmann::json());
        j["lodf"].push_back(std::move(row));
      }
      out.stream() << j.dump(2) << '\n';
    }
  } else if (c.format == "csv") {
    write_shift_factors_csv(out.stream(), sf);
  } else {
    nlohmann::json j = {{"reference_bus", gc.buses[sf.reference_index].id}, {"lines", sf.line_ids},
                        {"buses", sf.bus_ids}, {"psi", nlohmann::json::array()}};
    for (Eigen::Index r = 0; r < sf.psi.rows(); ++r) {
      std::vector<double> row;
      row.reserve(static_cast<std::size_t>(sf.psi.cols()));
      for (Eigen::Index k = 0; k < sf.psi.cols(); ++k) row.push_back(sf.psi(r, k));
      j["psi"].push_back(row);
    }
    out.stream() << j.dump(2) << '\n';
  }
  return kOk;
}

nlohmann::json decomposition_json(const GridCase& gc, const Decomposition& d) {
  auto bus_ids = [&](const std::vector<std::size_t>& v) {
    std::vector<BusId> out;
    for (auto i : v) out.push_back(gc.buses[i].id);
    return out;
  };
  auto line_ids = [&](const std::vector<std::size_t>& v) {
    std::vector<LineId> out;
    for (auto k : v) out.push_back(gc.lines[k].id);
    return out;
  };
  nlohmann::json j = {{"cut", bus_ids(d.cut)},
                      {"iterations", d.iterations},
                      {"threshold", d.threshold},
                      {"cut_lmp_range", d.cut_lmp_range},
                      {"components", nlohmann::json::array()}};
  for (const auto& c : d.components)
    j["components"].push_back({{"interior", bus_ids(c.interior)},
                               {"lines", line_ids(c.lines)},
                               {"congested_lines", c.congested_lines}});
  j["discretionary"] = nlohmann::json::array();
  for (auto [line, comp] : d.discretionary) j["discretionary"].push_back({{"line", gc.lines[line].id}, {"component", comp}});
  return j;
}

int run_decompose(const Common& c, double threshold, const std::string& dot_path) {
  const GridCase gc = load(c.case_path);
  const auto sol = solve_dcopf(gc, true);
  if (!sol.optimal()) {
    std::cerr << "DCOPF infeasible\n";
    return kInfeasible;
  }
  const auto d = decompose_by_lmp(gc, sol, {threshold});
  const auto congested = congested_lines(gc, sol);
  Output out(c.out);
  if (c.format == "dot") {
    write_dot(out.stream(), gc, d, congested);
  } else {
    out.stream() << decomposition_json(gc, d).dump(2) << '\n';
  }
  if (!dot_path.empty()) {
    Output dot(dot_path);
    write_dot(dot.stream(), gc, d, congested);
  }
  return kOk;
}

int run_switch(const Common& c, const std::string& heuristic, double threshold, int max_iter) {
  const GridCase gc = load(c.case_path);
  if (!solve_dcopf(gc, true).optimal()) {
    std::cerr << "base case DCOPF infeasible\n";
    return kInfeasible;
  }
  GreedyOptions opt;
  opt.threshold_frac = threshold;
  opt.max_iter = max_iter;
  const auto plan = heuristic == "local" ? local_greedy(gc, opt) : standard_greedy(gc, opt);
  Output out(c.out);
  auto j = to_json(plan);
  j["heuristic"] = heuristic;
  out.stream() << j.dump(2) << '\n';
  return kOk;
}

int run_bench(const Common& c, BenchConfig cfg, const std::string& heuristic, bool quiet) {
  const GridCase gc = load(c.case_path);
  cfg.case_path = c.case_path;
  cfg.output_path = c.out;
  cfg.run_standard = heuristic != "local";
  cfg.run_local = heuristic != "standard";
  if (!solve_dcopf(gc, true).optimal()) {
    std::cerr << "base case DCOPF infeasible\n";
    return kInfeasible;
  }
  const auto rep = run_monte_carlo(gc, cfg, [&](const SampleRow& r) {
    if (quiet) return;
    std::cerr << "sample " << r.index + 1 << '/' << cfg.samples;
    if (r.skipped) std::cerr << " skipped (infeasible)";
    else if (r.standard) std::cerr << " standard " << r.standard->saving_over_mas;
    if (r.local) std::cerr << " local " << r.local->saving_over_mas << " effort " << r.local->effort;
    std::cerr << '\n';
  });
  Output out(c.out);
  if (c.format == "csv") write_csv(out.stream(), rep);
  else out.stream() << to_json(rep).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vertex-cut grid decomposition and transmission switching"};
  app.require_subcommand(1);

  Common solve_c, sens_c, dec_c, sw_c, bench_c;
  bool unconstrained = false;
  std::string formulation = "nodal";
  auto* solve = app.add_subcommand("solve", "Solve the DCOPF and dump dispatch, flows and LMPs");
  add_common(solve, solve_c, {"json", "csv"});
  solve->add_flag("--unconstrained", unconstrained, "Ignore line limits");
  solve->add_option("--formulation", formulation)->check(CLI::IsMember({"nodal", "shift_factor"}));

  std::string kind = "psi";
  auto* sens = app.add_subcommand("sens", "Export shift factors or LODFs");
  add_common(sens, sens_c, {"json", "csv"});
  sens->add_option("--kind", kind, "psi or lodf")->check(CLI::IsMember({"psi", "lodf"}));

  double dec_threshold = 0.10;
  std::string dot_path;
  auto* dec = app.add_subcommand("decompose", "Run the LMP-driven vertex-cut decomposition");
  add_common(dec, dec_c, {"json", "dot"});
  dec->add_option("--threshold", dec_threshold, "Cut LMP range threshold as a fraction of the grid spread")
      ->check(CLI::Range(0.0, 1.0));
  dec->add_option("--dot", dot_path, "Also write a DOT rendering here");

  std::string sw_heuristic = "standard";
  double sw_threshold = 0.10;
  int sw_max_iter = 50;
  auto* sw = app.add_subcommand("switch", "Build a greedy line-switching plan");
  add_common(sw, sw_c, {"json"});
  sw->add_option("--heuristic", sw_heuristic)->check(CLI::IsMember({"standard", "local"}));
  sw->add_option("--threshold", sw_threshold)->check(CLI::Range(0.0, 1.0));
  sw->add_option("--max-iter", sw_max_iter)->check(CLI::PositiveNumber);

  BenchConfig cfg;
  std::string bench_heuristic = "both";
  bool quiet = false;
  auto* bench = app.add_subcommand("bench", "Monte Carlo comparison of the switching heuristics");
  add_common(bench, bench_c, {"json", "csv"});
  bench->add_option("--seed", cfg.seed);
  bench->add_option("--samples", cfg.samples)->check(CLI::PositiveNumber);
  bench->add_option("--spread", cfg.spread, "Multiplicative cost spread in [0, 1)");
  bench->add_option("--threshold", cfg.threshold_frac)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--heuristic", bench_heuristic)->check(CLI::IsMember({"standard", "local", "both"}));
  bench->add_flag("--quiet", quiet, "No per-sample progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*solve) return run_solve(solve_c, unconstrained, formulation);
    if (*sens) return run_sens(sens_c, kind);
    if (*dec) return run_decompose(dec_c, dec_threshold, dot_path);
    if (*sw) return run_switch(sw_c, sw_heuristic, sw_threshold, sw_max_iter);
    if (*bench) return run_bench(bench_c, cfg, bench_heuristic, quiet);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const TopologyError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const DecompositionError& e) {
    std::cerr << e.what() << '\n';
    return kInputError;
  } catch (const SolverError& e) {
    std::cerr << e.what() << '\n';
    return kInfeasible;
  }
  return kOk;
}
