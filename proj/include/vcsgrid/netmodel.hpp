#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace vcsgrid {

using BusId = int;
using LineId = int;
using GenId = int;

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public InputError {
public:
  using InputError::InputError;
};

struct Bus {
  BusId id = 0;
  double load = 0.0;  // MW
  bool is_reference = false;

  friend bool operator==(const Bus&, const Bus&) = default;
};

struct Line {
  LineId id = 0;
  BusId from_bus = 0;
  BusId to_bus = 0;
  double susceptance = 0.0;  // per unit, 1/x
  double limit = kUnbounded;  // MW
  bool in_service = true;

  bool has_limit() const { return std::isfinite(limit); }

  friend bool operator==(const Line&, const Line&) = default;
};

// One block of a convex piecewise-linear cost curve: `width` MW above the
// previous block at `marginal_cost` $/MWh.
struct CostSegment {
  double width = 0.0;
  double marginal_cost = 0.0;

  friend bool operator==(const CostSegment&, const CostSegment&) = default;
};

struct Generator {
  GenId id = 0;
  BusId at_bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost = 0.0;  // $/MWh, used when `segments` is empty
  std::vector<CostSegment> segments;

  friend bool operator==(const Generator&, const Generator&) = default;
};

// A scenario: buses, lines and generators. Treated as an immutable value;
// every modifying operation returns a copy.
class GridCase {
public:
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;

  std::size_t num_buses() const { return buses.size(); }
  std::size_t num_lines() const { return lines.size(); }

  // Position of a bus in `buses`; throws InputError for unknown ids.
  std::size_t bus_index(BusId id) const {
    auto it = std::find_if(buses.begin(), buses.end(), [id](const Bus& b) { return b.id == id; });
    if (it == buses.end()) throw InputError("unknown bus id " + std::to_string(id));
    return static_cast<std::size_t>(it - buses.begin());
  }

  std::size_t line_index(LineId id) const {
    auto it = std::find_if(lines.begin(), lines.end(), [id](const Line& l) { return l.id == id; });
    if (it == lines.end()) throw InputError("unknown line id " + std::to_string(id));
    return static_cast<std::size_t>(it - lines.begin());
  }

  std::size_t reference_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].is_reference) return i;
    throw InputError("case has no reference bus");
  }

  std::size_t in_service_count() const {
    return static_cast<std::size_t>(
        std::count_if(lines.begin(), lines.end(), [](const Line& l) { return l.in_service; }));
  }

  double total_load() const {
    double s = 0.0;
    for (const auto& b : buses) s += b.load;
    return s;
  }

  friend bool operator==(const GridCase&, const GridCase&) = default;
};

enum class DiagnosticCode {
  duplicate_bus,
  duplicate_line,
  reference_bus_count,
  nonfinite_load,
  self_loop,
  dangling_bus,
  nonpositive_susceptance,
  negative_limit,
  generator_bounds,
  nonconvex_cost,
  insufficient_capacity,
  disconnected,
  linearized_cost,
};

struct Diagnostic {
  DiagnosticCode code;
  std::string message;
};

inline const char* to_string(DiagnosticCode code) {
  switch (code) {
    case DiagnosticCode::duplicate_bus: return "duplicate-bus";
    case DiagnosticCode::duplicate_line: return "duplicate-line";
    case DiagnosticCode::reference_bus_count: return "reference-bus-count";
    case DiagnosticCode::nonfinite_load: return "nonfinite-load";
    case DiagnosticCode::self_loop: return "self-loop";
    case DiagnosticCode::dangling_bus: return "dangling-bus";
    case DiagnosticCode::nonpositive_susceptance: return "nonpositive-susceptance";
    case DiagnosticCode::negative_limit: return "negative-limit";
    case DiagnosticCode::generator_bounds: return "generator-bounds";
    case DiagnosticCode::nonconvex_cost: return "nonconvex-cost";
    case DiagnosticCode::insufficient_capacity: return "insufficient-capacity";
    case DiagnosticCode::disconnected: return "disconnected";
    case DiagnosticCode::linearized_cost: return "linearized-cost";
  }
  return "unknown";
}

namespace detail {

// Number of connected components over in-service lines whose endpoints exist.
inline std::size_t count_islands(const GridCase& gc) {
  const std::size_t n = gc.buses.size();
  std::unordered_map<BusId, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) pos.emplace(gc.buses[i].id, i);
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t islands = n;
  for (const auto& l : gc.lines) {
    if (!l.in_service) continue;
    auto a = pos.find(l.from_bus), b = pos.find(l.to_bus);
    if (a == pos.end() || b == pos.end()) continue;
    auto ra = find(a->second), rb = find(b->second);
    if (ra != rb) {
      parent[ra] = rb;
      --islands;
    }
  }
  return islands;
}

}  // namespace detail

// Checks every type invariant. Returns an empty list iff the case is valid
// and connected over its in-service lines.
inline std::vector<Diagnostic> validate(const GridCase& gc) {
  std::vector<Diagnostic> out;
  auto add = [&](DiagnosticCode c, std::string msg) { out.push_back({c, std::move(msg)}); };

  std::map<BusId, int> bus_seen;
  int refs = 0;
  for (const auto& b : gc.buses) {
    if (++bus_seen[b.id] == 2) add(DiagnosticCode::duplicate_bus, "bus " + std::to_string(b.id) + " appears more than once");
    if (!std::isfinite(b.load)) add(DiagnosticCode::nonfinite_load, "bus " + std::to_string(b.id) + " has a non-finite load");
    refs += b.is_reference ? 1 : 0;
  }
  if (refs != 1) add(DiagnosticCode::reference_bus_count, "expected exactly one reference bus, found " + std::to_string(refs));

  std::map<LineId, int> line_seen;
  for (const auto& l : gc.lines) {
    const std::string tag = "line " + std::to_string(l.id);
    if (++line_seen[l.id] == 2) add(DiagnosticCode::duplicate_line, tag + " appears more than once");
    if (l.from_bus == l.to_bus) add(DiagnosticCode::self_loop, tag + " connects bus " + std::to_string(l.from_bus) + " to itself");
    for (BusId end : {l.from_bus, l.to_bus})
      if (!bus_seen.count(end)) add(DiagnosticCode::dangling_bus, tag + " references absent bus " + std::to_string(end));
    if (!(l.susceptance > 0.0) || !std::isfinite(l.susceptance))
      add(DiagnosticCode::nonpositive_susceptance, tag + " has nonpositive susceptance");
    if (l.limit < 0.0 || std::isnan(l.limit)) add(DiagnosticCode::negative_limit, tag + " has a negative limit");
  }

  double capacity = 0.0;
  for (const auto& g : gc.generators) {
    const std::string tag = "generator " + std::to_string(g.id);
    if (!bus_seen.count(g.at_bus)) add(DiagnosticCode::dangling_bus, tag + " references absent bus " + std::to_string(g.at_bus));
    if (!(g.p_min <= g.p_max)) add(DiagnosticCode::generator_bounds, tag + " has p_min > p_max");
    for (std::size_t k = 1; k < g.segments.size(); ++k)
      if (g.segments[k].marginal_cost < g.segments[k - 1].marginal_cost)
        add(DiagnosticCode::nonconvex_cost, tag + " has decreasing marginal cost segments");
    capacity += g.p_max;
  }
  if (capacity < gc.total_load())
    add(DiagnosticCode::insufficient_capacity, "total p_max is below total load");

  if (!gc.buses.empty() && detail::count_islands(gc) > 1)
    add(DiagnosticCode::disconnected, "in-service network has " + std::to_string(detail::count_islands(gc)) + " islands");
  return out;
}

inline bool is_valid(const GridCase& gc) { return validate(gc).empty(); }

// Copy of `gc` with one line's status set.
inline GridCase with_line_status(const GridCase& gc, LineId line, bool in_service) {
  GridCase out = gc;
  out.lines[gc.line_index(line)].in_service = in_service;
  return out;
}

// Scales every generator's cost coefficients by an independent factor drawn
// uniformly from [1 - spread, 1 + spread]. Loads and topology are untouched.
inline GridCase perturb_gencosts(const GridCase& gc, std::uint64_t seed, double spread) {
  if (!(spread >= 0.0 && spread < 1.0)) throw InputError("cost spread must lie in [0, 1)");
  GridCase out = gc;
  if (spread == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> factor(1.0 - spread, 1.0 + spread);
  for (auto& g : out.generators) {
    const double f = factor(rng);
    g.cost *= f;
    for (auto& s : g.segments) s.marginal_cost *= f;
  }
  return out;
}

}  // namespace vcsgrid
