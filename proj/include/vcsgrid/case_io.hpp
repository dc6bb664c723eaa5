#pragma once

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcsgrid/netmodel.hpp"

namespace vcsgrid {

class ParseError : public InputError {
public:
  ParseError(const std::string& what, int line)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

struct LoadedCase {
  GridCase grid;
  std::vector<Diagnostic> warnings;
};

namespace detail {

struct MatrixRow {
  std::vector<double> values;
  int line = 0;
};

struct MatpowerTables {
  double base_mva = 100.0;
  std::string name;
  std::map<std::string, std::vector<MatrixRow>> matrices;
};

inline std::string_view strip_comment(std::string_view s) {
  auto pos = s.find('%');
  return pos == std::string_view::npos ? s : s.substr(0, pos);
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<double> parse_numbers(const std::string& text, int line) {
  std::vector<double> out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    try {
      std::size_t used = 0;
      double v;
      if (token == "Inf" || token == "inf") v = kUnbounded;
      else if (token == "-Inf" || token == "-inf") v = -kUnbounded;
      else {
        v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
      }
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("malformed number '" + token + "'", line);
    }
    token.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') flush();
    else token.push_back(ch);
  }
  flush();
  return out;
}

inline MatpowerTables read_matpower_tables(std::string_view text) {
  MatpowerTables t;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  std::string open_matrix;
  int open_line = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (open_matrix.empty()) {
      if (line.rfind("function", 0) == 0) {
        auto eq = line.find('=');
        if (eq != std::string::npos) t.name = trim(std::string_view(line).substr(eq + 1));
        continue;
      }
      if (line.rfind("mpc.", 0) != 0) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("expected '=' in assignment", lineno);
      std::string key = trim(std::string_view(line).substr(4, eq - 4));
      std::string rhs = trim(std::string_view(line).substr(eq + 1));
      if (key == "baseMVA") {
        if (!rhs.empty() && rhs.back() == ';') rhs.pop_back();
        auto v = parse_numbers(rhs, lineno);
        if (v.size() != 1) throw ParseError("baseMVA must be a scalar", lineno);
        t.base_mva = v[0];
        continue;
      }
      if (rhs.empty() || rhs.front() != '[') continue;  // version strings, bus_name cells
      open_matrix = key;
      open_line = lineno;
      t.matrices[key];
      line = trim(std::string_view(rhs).substr(1));
      if (line.empty()) continue;
    }
    bool closes = false;
    auto close = line.find(']');
    if (close != std::string::npos) {
      closes = true;
      line = line.substr(0, close);
    }
    std::size_t start = 0;
    while (start <= line.size()) {
      auto semi = line.find(';', start);
      std::string cell = line.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
      auto nums = parse_numbers(cell, lineno);
      if (!nums.empty()) {
        auto& rows = t.matrices[open_matrix];
        if (!rows.empty() && rows.front().values.size() != nums.size())
          throw ParseError("row of mpc." + open_matrix + " has " + std::to_string(nums.size()) +
                               " columns, expected " + std::to_string(rows.front().values.size()),
                           lineno);
        rows.push_back({std::move(nums), lineno});
      }
      if (semi == std::string::npos) break;
      start = semi + 1;
    }
    if (closes) open_matrix.clear();
  }
  if (!open_matrix.empty()) throw ParseError("unterminated matrix mpc." + open_matrix, open_line);
  return t;
}

inline const std::vector<MatrixRow>& require(const MatpowerTables& t, const std::string& key, std::size_t min_cols) {
  auto it = t.matrices.find(key);
  if (it == t.matrices.end() || it->second.empty()) throw ParseError("missing section mpc." + key, 0);
  for (const auto& r : it->second)
    if (r.values.size() < min_cols)
      throw ParseError("mpc." + key + " needs at least " + std::to_string(min_cols) + " columns", r.line);
  return it->second;
}

// Slope of a MATPOWER polynomial cost at `p`. Coefficients are highest order first.
inline double polynomial_slope(const std::vector<double>& coeffs, double p) {
  double slope = 0.0;
  const std::size_t n = coeffs.size();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double power = static_cast<double>(n - 1 - k);
    slope += power * coeffs[k] * std::pow(p, power - 1.0);
  }
  return slope;
}

inline void normalize_reference(GridCase& gc, std::vector<Diagnostic>& warnings) {
  int refs = 0;
  for (auto& b : gc.buses) {
    if (b.is_reference && ++refs > 1) b.is_reference = false;
  }
  if (refs > 1)
    warnings.push_back({DiagnosticCode::reference_bus_count, "multiple reference buses; keeping the first"});
  if (refs == 0 && !gc.buses.empty()) {
    gc.buses.front().is_reference = true;
    warnings.push_back({DiagnosticCode::reference_bus_count,
                        "no reference bus; using bus " + std::to_string(gc.buses.front().id)});
  }
}

inline void check_references(const GridCase& gc) {
  std::set<BusId> ids;
  for (const auto& b : gc.buses) ids.insert(b.id);
  for (const auto& l : gc.lines)
    for (BusId end : {l.from_bus, l.to_bus})
      if (!ids.count(end))
        throw ValidationError("line " + std::to_string(l.id) + " references absent bus " + std::to_string(end));
  for (const auto& g : gc.generators)
    if (!ids.count(g.at_bus))
      throw ValidationError("generator " + std::to_string(g.id) + " references absent bus " + std::to_string(g.at_bus));
}

}  // namespace detail

// MATPOWER case text (mpc.bus / mpc.branch / mpc.gen / mpc.gencost).
// AC-only columns are read and ignored.
inline LoadedCase parse_matpower(std::string_view text) {
  using detail::MatrixRow;
  auto tables = detail::read_matpower_tables(text);
  LoadedCase out;
  GridCase& gc = out.grid;
  gc.name = tables.name.empty() ? "case" : tables.name;
  gc.base_mva = tables.base_mva > 0 ? tables.base_mva : 100.0;

  for (const auto& row : detail::require(tables, "bus", 3)) {
    const auto& v = row.values;
    gc.buses.push_back({static_cast<BusId>(v[0]), v[2], static_cast<int>(v[1]) == 3});
  }

  int line_id = 0;
  for (const auto& row : detail::require(tables, "branch", 4)) {
    const auto& v = row.values;
    Line l;
    l.id = ++line_id;
    l.from_bus = static_cast<BusId>(v[0]);
    l.to_bus = static_cast<BusId>(v[1]);
    l.susceptance = v[3] != 0.0 ? 1.0 / v[3] : kUnbounded;
    if (v.size() > 5 && v[5] > 0.0) l.limit = v[5];
    l.in_service = v.size() <= 10 || v[10] > 0.0;
    gc.lines.push_back(l);
  }

  const auto& gens = detail::require(tables, "gen", 10);
  std::vector<MatrixRow> costs;
  if (auto it = tables.matrices.find("gencost"); it != tables.matrices.end()) costs = it->second;
  else out.warnings.push_back({DiagnosticCode::linearized_cost, "no gencost section; generator costs set to 0"});

  int linearized = 0;
  for (std::size_t k = 0; k < gens.size(); ++k) {
    const auto& v = gens[k].values;
    if (v[7] <= 0.0) continue;
    Generator g;
    g.id = static_cast<GenId>(k + 1);
    g.at_bus = static_cast<BusId>(v[0]);
    g.p_max = v[8];
    g.p_min = v[9];
    if (k < costs.size()) {
      const auto& c = costs[k].values;
      if (c.size() < 4) throw ParseError("gencost row too short", costs[k].line);
      const int model = static_cast<int>(c[0]);
      const auto n = static_cast<std::size_t>(c[3]);
      if (model == 2) {
        if (c.size() < 4 + n) throw ParseError("gencost row has fewer coefficients than n", costs[k].line);
        std::vector<double> coeffs(c.begin() + 4, c.begin() + 4 + static_cast<long>(n));
        if (n >= 3) {
          bool nonlinear = false;
          for (std::size_t j = 0; j + 2 < n; ++j) nonlinear |= coeffs[j] != 0.0;
          linearized += nonlinear ? 1 : 0;
        }
        g.cost = detail::polynomial_slope(coeffs, g.p_max / 2.0);
      } else if (model == 1) {
        if (n < 2 || c.size() < 4 + 2 * n) throw ParseError("piecewise gencost needs at least two points", costs[k].line);
        for (std::size_t j = 0; j + 1 < n; ++j) {
          const double x0 = c[4 + 2 * j], y0 = c[5 + 2 * j];
          const double x1 = c[6 + 2 * j], y1 = c[7 + 2 * j];
          if (x1 <= x0) throw ParseError("piecewise gencost breakpoints must increase", costs[k].line);
          g.segments.push_back({x1 - x0, (y1 - y0) / (x1 - x0)});
        }
        g.cost = g.segments.front().marginal_cost;
        // Segments cover [p_min, p_max]; the first breakpoint is taken as p_min.
        double covered = 0.0;
        for (const auto& s : g.segments) covered += s.width;
        if (std::abs(covered - (g.p_max - g.p_min)) > 1e-6) {
          g.segments.back().width += (g.p_max - g.p_min) - covered;
          if (g.segments.back().width < 0) throw ParseError("piecewise gencost exceeds p_max", costs[k].line);
        }
      } else {
        throw ParseError("unknown gencost model " + std::to_string(model), costs[k].line);
      }
    }
    gc.generators.push_back(std::move(g));
  }
  if (linearized > 0)
    out.warnings.push_back({DiagnosticCode::linearized_cost,
                            std::to_string(linearized) + " polynomial cost rows linearized at p_max/2"});

  detail::check_references(gc);
  detail::normalize_reference(gc, out.warnings);
  return out;
}

// --- JSON case schema -------------------------------------------------------

inline nlohmann::json to_json(const GridCase& gc) {
  using nlohmann::json;
  json j;
  j["name"] = gc.name;
  j["base_mva"] = gc.base_mva;
  j["buses"] = json::array();
  for (const auto& b : gc.buses) j["buses"].push_back({{"id", b.id}, {"load", b.load}, {"is_reference", b.is_reference}});
  j["lines"] = json::array();
  for (const auto& l : gc.lines) {
    json jl = {{"id", l.id}, {"from", l.from_bus}, {"to", l.to_bus}, {"susceptance", l.susceptance},
               {"in_service", l.in_service}};
    jl["limit"] = l.has_limit() ? json(l.limit) : json(nullptr);
    j["lines"].push_back(std::move(jl));
  }
  j["generators"] = json::array();
  for (const auto& g : gc.generators) {
    json jg = {{"id", g.id}, {"bus", g.at_bus}, {"p_min", g.p_min}, {"p_max", g.p_max}, {"cost", g.cost}};
    if (!g.segments.empty()) {
      jg["segments"] = json::array();
      for (const auto& s : g.segments) jg["segments"].push_back({{"width", s.width}, {"cost", s.marginal_cost}});
    }
    j["generators"].push_back(std::move(jg));
  }
  return j;
}

inline LoadedCase case_from_json(const nlohmann::json& j) {
  LoadedCase out;
  GridCase& gc = out.grid;
  try {
    gc.name = j.value("name", std::string("case"));
    gc.base_mva = j.value("base_mva", 100.0);
    for (const auto& b : j.at("buses")) gc.buses.push_back({b.at("id").get<BusId>(), b.value("load", 0.0), b.value("is_reference", false)});
    for (const auto& l : j.at("lines")) {
      Line line;
      line.id = l.at("id").get<LineId>();
      line.from_bus = l.at("from").get<BusId>();
      line.to_bus = l.at("to").get<BusId>();
      line.susceptance = l.at("susceptance").get<double>();
      line.in_service = l.value("in_service", true);
      if (l.contains("limit") && !l.at("limit").is_null()) line.limit = l.at("limit").get<double>();
      gc.lines.push_back(line);
    }
    for (const auto& g : j.at("generators")) {
      Generator gen;
      gen.id = g.at("id").get<GenId>();
      gen.at_bus = g.at("bus").get<BusId>();
      gen.p_min = g.value("p_min", 0.0);
      gen.p_max = g.at("p_max").get<double>();
      gen.cost = g.value("cost", 0.0);
      if (g.contains("segments"))
        for (const auto& s : g.at("segments")) gen.segments.push_back({s.at("width").get<double>(), s.at("cost").get<double>()});
      gc.generators.push_back(std::move(gen));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid case JSON: ") + e.what(), 0);
  }
  detail::check_references(gc);
  detail::normalize_reference(gc, out.warnings);
  return out;
}

// Accepts either format; JSON is detected by a leading '{'.
inline LoadedCase load_case(std::string_view source) {
  auto first = source.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && source[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(source);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), 0);
    }
    return case_from_json(j);
  }
  return parse_matpower(source);
}

inline LoadedCase load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open case file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_case(ss.str());
}

inline std::string serialize_case(const GridCase& gc) { return to_json(gc).dump(2); }

}  // namespace vcsgrid
