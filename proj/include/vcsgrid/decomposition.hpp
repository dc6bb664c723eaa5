#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "vcsgrid/dcopf.hpp"
#include "vcsgrid/graph.hpp"

namespace vcsgrid {

class DecompositionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// One pseudo biconnected component: its exclusive buses plus the whole cut,
// and the lines assigned to it. Bus and line entries are positions.
struct SubGrid {
  std::vector<std::size_t> interior;
  std::vector<std::size_t> buses;  // interior + cut, ascending
  std::vector<std::size_t> lines;  // ascending
  std::size_t congested_lines = 0;

  bool congested() const { return congested_lines > 0; }
};

struct Decomposition {
  std::vector<std::size_t> cut;
  std::vector<SubGrid> components;
  // Lines with both endpoints in the cut and the component that received them.
  std::vector<std::pair<std::size_t, std::size_t>> discretionary;

  // Set by decompose_by_lmp.
  int iterations = 0;
  double threshold = 0.0;
  double cut_lmp_range = 0.0;

  // Union of the components holding congested lines.
  SubGrid congested_subgrid() const {
    SubGrid out;
    for (const auto& c : components) {
      if (!c.congested()) continue;
      out.interior.insert(out.interior.end(), c.interior.begin(), c.interior.end());
      out.lines.insert(out.lines.end(), c.lines.begin(), c.lines.end());
      out.congested_lines += c.congested_lines;
    }
    std::sort(out.interior.begin(), out.interior.end());
    std::sort(out.lines.begin(), out.lines.end());
    out.buses = out.interior;
    out.buses.insert(out.buses.end(), cut.begin(), cut.end());
    std::sort(out.buses.begin(), out.buses.end());
    return out;
  }

  std::vector<SubGrid> quiet_subgrids() const {
    std::vector<SubGrid> out;
    for (const auto& c : components)
      if (!c.congested()) out.push_back(c);
    return out;
  }

  // At least one congestion-free component exists.
  bool proper() const {
    return std::any_of(components.begin(), components.end(), [](const SubGrid& c) { return !c.congested(); });
  }
};

namespace detail {

inline std::vector<bool> mask_of(std::size_t n, const std::vector<std::size_t>& items) {
  std::vector<bool> m(n, false);
  for (auto i : items) m.at(i) = true;
  return m;
}

// Components are built from pre-component labels over non-cut vertices.
// `merge_label` maps every label to the component it belongs to.
inline Decomposition assemble(const Graph& g, const std::vector<std::size_t>& cut, const std::vector<int>& label,
                              const std::vector<std::size_t>& merge_label, std::size_t num_components,
                              const std::vector<bool>& congested_line) {
  Decomposition d;
  d.cut = cut;
  std::sort(d.cut.begin(), d.cut.end());
  d.components.resize(num_components);
  for (std::size_t v = 0; v < g.num_vertices(); ++v)
    if (label[v] >= 0) d.components[merge_label[static_cast<std::size_t>(label[v])]].interior.push_back(v);

  std::vector<std::size_t> cut_cut;  // ascending line positions
  for (const auto& e : g.edges()) {
    const int lu = label[e.u], lv = label[e.v];
    if (lu < 0 && lv < 0) {
      cut_cut.push_back(e.line);
      continue;
    }
    auto& comp = d.components[merge_label[static_cast<std::size_t>(lu >= 0 ? lu : lv)]];
    comp.lines.push_back(e.line);
    if (congested_line[e.line]) ++comp.congested_lines;
  }

  // Discretionary edges go to a congestion-free component when one exists,
  // otherwise to the least congested one. A congested discretionary edge
  // joins the most congested component so congestion stays in one place.
  std::stable_sort(cut_cut.begin(), cut_cut.end(), [&](std::size_t a, std::size_t b) {
    return congested_line[a] && !congested_line[b];
  });
  for (auto line : cut_cut) {
    if (d.components.empty()) break;
    std::size_t pick = 0;
    if (congested_line[line]) {
      for (std::size_t c = 1; c < d.components.size(); ++c)
        if (d.components[c].congested_lines > d.components[pick].congested_lines) pick = c;
      ++d.components[pick].congested_lines;
    } else {
      for (std::size_t c = 1; c < d.components.size(); ++c)
        if (d.components[c].congested_lines < d.components[pick].congested_lines) pick = c;
    }
    d.components[pick].lines.push_back(line);
    d.discretionary.emplace_back(line, pick);
  }
  for (auto& c : d.components) {
    std::sort(c.lines.begin(), c.lines.end());
    c.buses = c.interior;
    c.buses.insert(c.buses.end(), d.cut.begin(), d.cut.end());
    std::sort(c.buses.begin(), c.buses.end());
  }
  return d;
}

}  // namespace detail

// Two-step construction: delete the cut to get the pre components, then
// adjoin the whole cut and its incident edges to each of them.
inline Decomposition pseudo_components(const Graph& g, const std::vector<std::size_t>& cut,
                                       const std::vector<std::size_t>& congested_lines) {
  if (cut.empty() || !is_vertex_cut(g, cut)) throw DecompositionError("bus set is not a vertex cut set");
  auto [label, count] = components_without(g, detail::mask_of(g.num_vertices(), cut));
  std::vector<std::size_t> identity(static_cast<std::size_t>(count));
  std::iota(identity.begin(), identity.end(), 0);
  std::size_t max_line = 0;
  for (const auto& e : g.edges()) max_line = std::max(max_line, e.line + 1);
  for (auto l : congested_lines) max_line = std::max(max_line, l + 1);
  return detail::assemble(g, cut, label, identity, static_cast<std::size_t>(count),
                          detail::mask_of(max_line, congested_lines));
}

struct DecomposeOptions {
  double threshold_frac = 0.10;
  int max_iter = std::numeric_limits<int>::max();
};

// Decomposition with component 0 holding the `inside` buses (the congested
// side) and one quiet component per connected piece of the remainder.
inline Decomposition decomposition_from_regions(const Graph& g, const std::vector<std::size_t>& cut,
                                                const std::vector<bool>& inside, const std::vector<bool>& congested_line) {
  std::vector<bool> removed = detail::mask_of(g.num_vertices(), cut);
  std::vector<bool> blocked = removed;
  for (std::size_t v = 0; v < g.num_vertices(); ++v)
    if (inside[v]) blocked[v] = true;
  auto [outer_label, outer_count] = components_without(g, blocked);
  // Label 0 is the congested side; quiet components follow in discovery order.
  std::vector<int> label(g.num_vertices(), -1);
  for (std::size_t v = 0; v < g.num_vertices(); ++v) {
    if (inside[v] && !removed[v]) label[v] = 0;
    else if (outer_label[v] >= 0) label[v] = outer_label[v] + 1;
  }
  std::vector<std::size_t> merge(static_cast<std::size_t>(outer_count) + 1);
  std::iota(merge.begin(), merge.end(), 0);
  return detail::assemble(g, cut, label, merge, merge.size(), congested_line);
}

namespace detail {

inline double lmp_range(const Eigen::VectorXd& lmp, const std::vector<std::size_t>& buses) {
  if (buses.empty()) return 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto b : buses) {
    lo = std::min(lo, lmp(static_cast<Eigen::Index>(b)));
    hi = std::max(hi, lmp(static_cast<Eigen::Index>(b)));
  }
  return hi - lo;
}

}  // namespace detail

// LMP-driven cut expansion. Starts from the endpoints of all congested lines
// and repeatedly swaps the cut bus whose LMP deviates most from the cut mean
// into the congested side, pulling its outside neighbours into the cut, until
// the cut's LMP range drops below threshold_frac of the grid-wide LMP spread,
// every bus is absorbed, or max_iter swaps were made. LMPs come from `sol`
// and are not re-solved during expansion.
inline Decomposition decompose_by_lmp(const GridCase& gc, const Graph& g, const OpfSolution& sol,
                                      const DecomposeOptions& opt = {}) {
  if (!sol.optimal()) throw DecompositionError("decomposition needs an optimal DCOPF solution");
  const auto congested = congested_lines(gc, sol);
  if (congested.empty()) throw DecompositionError("no congested lines: decomposition is unnecessary");
  const std::size_t n = g.num_vertices();
  const Eigen::VectorXd& lmp = sol.lmp;

  enum class Region { inside, cut, outside };
  std::vector<Region> region(n, Region::outside);
  for (auto k : congested) {
    region[gc.bus_index(gc.lines[k].from_bus)] = Region::cut;
    region[gc.bus_index(gc.lines[k].to_bus)] = Region::cut;
  }
  auto cut_list = [&] {
    std::vector<std::size_t> c;
    for (std::size_t v = 0; v < n; ++v)
      if (region[v] == Region::cut) c.push_back(v);
    return c;
  };

  const double spread = lmp.maxCoeff() - lmp.minCoeff();
  const double threshold = opt.threshold_frac * spread;
  const double flat = 1e-9 * std::max(1.0, lmp.cwiseAbs().maxCoeff());
  int iterations = 0;
  std::vector<std::size_t> cut = cut_list();
  while (true) {
    if (cut.empty()) break;  // every bus absorbed
    const double range = detail::lmp_range(lmp, cut);
    if (range < threshold || spread <= flat) break;
    if (iterations >= opt.max_iter) break;

    double mean = 0.0;
    for (auto v : cut) mean += lmp(static_cast<Eigen::Index>(v));
    mean /= static_cast<double>(cut.size());
    std::size_t worst = cut.front();
    double worst_dev = -1.0;
    for (auto v : cut) {
      const double dev = std::abs(lmp(static_cast<Eigen::Index>(v)) - mean);
      if (dev > worst_dev + 1e-12) {
        worst_dev = dev;
        worst = v;
      }
    }
    region[worst] = Region::inside;
    for (auto w : g.neighbors(worst))
      if (region[w] == Region::outside) region[w] = Region::cut;
    // Cut buses without outside neighbours are no longer on the boundary.
    for (std::size_t v = 0; v < n; ++v) {
      if (region[v] != Region::cut) continue;
      const auto nb = g.neighbors(v);
      if (std::none_of(nb.begin(), nb.end(), [&](std::size_t w) { return region[w] == Region::outside; }))
        region[v] = Region::inside;
    }
    ++iterations;
    cut = cut_list();
  }

  std::vector<bool> inside(n, false);
  for (std::size_t v = 0; v < n; ++v) inside[v] = region[v] == Region::inside;
  auto d = decomposition_from_regions(g, cut, inside, detail::mask_of(gc.num_lines(), congested));
  d.iterations = iterations;
  d.threshold = threshold;
  d.cut_lmp_range = detail::lmp_range(lmp, cut);
  return d;
}

inline Decomposition decompose_by_lmp(const GridCase& gc, const OpfSolution& sol, const DecomposeOptions& opt = {}) {
  return decompose_by_lmp(gc, Graph(gc), sol, opt);
}

// Weights a (one per cut bus, same order as `cut`) such that a unit injection
// at `p` has the same effect on everything beyond the cut as injections a at
// the cut buses. Computed by grounding the cut and splitting the unit
// injection across the region around p. The weights sum to 1 and are >= 0.
inline Eigen::VectorXd convex_weights(const GridCase& gc, const std::vector<std::size_t>& cut, std::size_t p,
                                      const std::vector<std::size_t>& congested_interior) {
  const Graph g(gc);
  const auto removed = detail::mask_of(gc.num_buses(), cut);
  if (removed.at(p)) throw DecompositionError("bus is part of the cut");
  auto [label, count] = components_without(g, removed);
  for (auto b : congested_interior)
    if (label[b] == label[p]) throw DecompositionError("cut does not separate the bus from the congested sub-grid");

  std::vector<std::size_t> region;
  std::vector<Eigen::Index> local(gc.num_buses(), -1);
  for (std::size_t v = 0; v < gc.num_buses(); ++v)
    if (label[v] == label[p]) {
      local[v] = static_cast<Eigen::Index>(region.size());
      region.push_back(v);
    }
  std::vector<Eigen::Index> cut_pos(gc.num_buses(), -1);
  for (std::size_t k = 0; k < cut.size(); ++k) cut_pos[cut[k]] = static_cast<Eigen::Index>(k);

  const auto r = static_cast<Eigen::Index>(region.size());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(r, r);
  for (const auto& e : g.edges()) {
    const double s = gc.lines[e.line].susceptance;
    const Eigen::Index lu = local[e.u], lv = local[e.v];
    if (lu >= 0) b(lu, lu) += s;
    if (lv >= 0) b(lv, lv) += s;
    if (lu >= 0 && lv >= 0) {
      b(lu, lv) -= s;
      b(lv, lu) -= s;
    }
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(r);
  rhs(local[p]) = 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(b);
  if (llt.info() != Eigen::Success) throw DecompositionError("region around the bus does not reach the cut");
  const Eigen::VectorXd theta = llt.solve(rhs);

  Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cut.size()));
  for (const auto& e : g.edges()) {
    const double s = gc.lines[e.line].susceptance;
    if (local[e.u] >= 0 && cut_pos[e.v] >= 0) a(cut_pos[e.v]) += s * theta(local[e.u]);
    if (local[e.v] >= 0 && cut_pos[e.u] >= 0) a(cut_pos[e.u]) += s * theta(local[e.v]);
  }
  return a;
}

struct QuietRangeReport {
  double lmp_min = 0.0, lmp_max = 0.0;          // over the component's buses incl. adjacent cut buses
  double cut_min = 0.0, cut_max = 0.0;          // over the adjacent cut buses
  std::pair<std::size_t, std::size_t> extremal;  // (argmin, argmax) bus positions, cut buses preferred
  bool extremal_in_cut = false;
  bool dominated = false;
};

struct DominanceReport {
  double cut_min = 0.0, cut_max = 0.0;
  std::vector<QuietRangeReport> quiet;
  bool dominant = true;
  std::vector<std::string> warnings;
};

// Checks that the LMP range of the cut buses bounding each quiet component
// covers every LMP inside it.
inline DominanceReport lmp_range_dominance(const GridCase& gc, const OpfSolution& sol, const Decomposition& d,
                                           double tol = 1e-6) {
  const auto congested = congested_lines(gc, sol);
  const auto quiet = d.quiet_subgrids();
  for (const auto& q : quiet)
    for (auto k : congested)
      if (std::binary_search(q.lines.begin(), q.lines.end(), k))
        throw DecompositionError("congested line " + std::to_string(gc.lines[k].id) + " lies in a quiet sub-grid");

  const Graph g(gc);
  auto at = [&](std::size_t b) { return sol.lmp(static_cast<Eigen::Index>(b)); };
  DominanceReport rep;
  if (!d.cut.empty()) {
    rep.cut_min = rep.cut_max = at(d.cut.front());
    for (auto b : d.cut) {
      rep.cut_min = std::min(rep.cut_min, at(b));
      rep.cut_max = std::max(rep.cut_max, at(b));
    }
  }
  const auto in_cut = detail::mask_of(gc.num_buses(), d.cut);
  for (const auto& q : quiet) {
    std::vector<std::size_t> adjacent;
    for (auto v : q.interior)
      for (auto w : g.neighbors(v))
        if (in_cut[w]) adjacent.push_back(w);
    std::sort(adjacent.begin(), adjacent.end());
    adjacent.erase(std::unique(adjacent.begin(), adjacent.end()), adjacent.end());

    QuietRangeReport r;
    std::vector<std::size_t> all = adjacent;
    all.insert(all.end(), q.interior.begin(), q.interior.end());
    if (all.empty()) continue;
    // Cut buses come first, so strict comparisons keep them on ties.
    std::size_t lo = all.front(), hi = all.front();
    for (auto b : all) {
      if (at(b) < at(lo) - 1e-9) lo = b;
      if (at(b) > at(hi) + 1e-9) hi = b;
    }
    r.lmp_min = at(lo);
    r.lmp_max = at(hi);
    r.extremal = {lo, hi};
    r.extremal_in_cut = in_cut[lo] && in_cut[hi];
    if (!adjacent.empty()) {
      r.cut_min = at(adjacent.front());
      r.cut_max = r.cut_min;
      for (auto b : adjacent) {
        r.cut_min = std::min(r.cut_min, at(b));
        r.cut_max = std::max(r.cut_max, at(b));
      }
    }
    r.dominated = !adjacent.empty() && r.lmp_min >= r.cut_min - tol && r.lmp_max <= r.cut_max + tol;
    if (!r.dominated) {
      rep.dominant = false;
      rep.warnings.push_back("quiet sub-grid LMPs escape the cut range; the DCOPF duals are likely degenerate");
    }
    rep.quiet.push_back(r);
  }
  return rep;
}

// Decomposition defined by a cut alone: components reached by a congested
// line form the congested side.
inline Decomposition decomposition_for_cut(const GridCase& gc, const OpfSolution& sol, const std::vector<std::size_t>& cut) {
  const Graph g(gc);
  const auto congested = congested_lines(gc, sol);
  const auto removed = detail::mask_of(gc.num_buses(), cut);
  auto [label, count] = components_without(g, removed);
  std::vector<bool> hot(static_cast<std::size_t>(count), false);
  for (auto k : congested)
    for (BusId end : {gc.lines[k].from_bus, gc.lines[k].to_bus}) {
      const int l = label[gc.bus_index(end)];
      if (l >= 0) hot[static_cast<std::size_t>(l)] = true;
    }
  std::vector<bool> inside(gc.num_buses(), false);
  for (std::size_t v = 0; v < gc.num_buses(); ++v) inside[v] = label[v] >= 0 && hot[static_cast<std::size_t>(label[v])];
  return decomposition_from_regions(g, cut, inside, detail::mask_of(gc.num_lines(), congested));
}

inline DominanceReport lmp_range_dominance(const GridCase& gc, const OpfSolution& sol, const std::vector<std::size_t>& cut,
                                           double tol = 1e-6) {
  return lmp_range_dominance(gc, sol, decomposition_for_cut(gc, sol, cut), tol);
}

// Graphviz rendering: cut buses red, congested side orange, quiet side blue;
// congested lines drawn bold.
inline void write_dot(std::ostream& os, const GridCase& gc, const Decomposition& d, const std::vector<std::size_t>& congested = {}) {
  static const char* palette[] = {"steelblue", "seagreen", "purple", "goldenrod", "slategray"};
  std::vector<int> bus_comp(gc.num_buses(), -1), line_comp(gc.num_lines(), -1);
  for (std::size_t c = 0; c < d.components.size(); ++c) {
    for (auto b : d.components[c].interior) bus_comp[b] = static_cast<int>(c);
    for (auto l : d.components[c].lines) line_comp[l] = static_cast<int>(c);
  }
  const auto in_cut = detail::mask_of(gc.num_buses(), d.cut);
  const auto hot = detail::mask_of(gc.num_lines(), congested);
  auto color = [&](const SubGrid& s, int idx) {
    if (s.congested()) return "darkorange";
    return palette[idx % 5];
  };
  os << "graph decomposition {\n  node [shape=circle, style=filled, fontsize=10];\n";
  for (std::size_t i = 0; i < gc.num_buses(); ++i) {
    os << "  b" << gc.buses[i].id << " [label=\"" << gc.buses[i].id << "\", fillcolor=";
    if (in_cut[i]) os << "red";
    else if (bus_comp[i] >= 0) os << color(d.components[static_cast<std::size_t>(bus_comp[i])], bus_comp[i]);
    else os << "white";
    os << "];\n";
  }
  for (std::size_t k = 0; k < gc.num_lines(); ++k) {
    const auto& l = gc.lines[k];
    if (!l.in_service) continue;
    os << "  b" << l.from_bus << " -- b" << l.to_bus << " [color=";
    if (line_comp[k] >= 0) os << color(d.components[static_cast<std::size_t>(line_comp[k])], line_comp[k]);
    else os << "black";
    if (hot[k]) os << ", penwidth=3";
    os << ", tooltip=\"line " << l.id << "\"];\n";
  }
  os << "}\n";
}

}  // namespace vcsgrid
