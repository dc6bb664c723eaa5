#pragma once

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include "vcsgrid/netmodel.hpp"

namespace vcsgrid {

// Undirected multigraph over the in-service lines of a GridCase. Vertices are
// bus positions, edges carry the position of the line in GridCase::lines.
class Graph {
public:
  struct Edge {
    std::size_t u, v;
    std::size_t line;
  };
  struct Incidence {
    std::size_t neighbor;
    std::size_t edge;
  };

  Graph() = default;
  explicit Graph(std::size_t n) : adj_(n) {}

  explicit Graph(const GridCase& gc) : adj_(gc.num_buses()) {
    std::unordered_map<BusId, std::size_t> pos;
    for (std::size_t i = 0; i < gc.buses.size(); ++i) pos.emplace(gc.buses[i].id, i);
    for (std::size_t k = 0; k < gc.lines.size(); ++k) {
      const auto& l = gc.lines[k];
      if (l.in_service) add_edge(pos.at(l.from_bus), pos.at(l.to_bus), k);
    }
  }

  void add_edge(std::size_t u, std::size_t v, std::size_t line) {
    const std::size_t e = edges_.size();
    edges_.push_back({u, v, line});
    adj_[u].push_back({v, e});
    adj_[v].push_back({u, e});
  }

  std::size_t num_vertices() const { return adj_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Incidence>& incident(std::size_t v) const { return adj_[v]; }

  // Distinct neighbours of `v` in ascending order (parallel edges collapsed).
  std::vector<std::size_t> neighbors(std::size_t v) const {
    std::vector<std::size_t> out;
    for (const auto& inc : adj_[v]) out.push_back(inc.neighbor);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

private:
  std::vector<std::vector<Incidence>> adj_;
  std::vector<Edge> edges_;
};

// Articulation points, biconnected components and bridges from one DFS.
struct BiconnectedStructure {
  std::vector<std::size_t> cut_vertices;               // ascending
  std::vector<std::vector<std::size_t>> components;    // line positions per block
  std::vector<std::size_t> bridges;                    // line positions, ascending
};

inline BiconnectedStructure analyze_biconnected(const Graph& g) {
  const std::size_t n = g.num_vertices();
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> disc(n, none), low(n, 0), parent_edge(n, none);
  std::vector<bool> is_cut(n, false);
  std::vector<std::size_t> edge_stack;
  BiconnectedStructure out;
  std::size_t timer = 0;

  struct Frame {
    std::size_t v;
    std::size_t next;  // index into incident(v)
    std::size_t children;
  };

  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] != none) continue;
    std::vector<Frame> stack{{root, 0, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto& inc = g.incident(f.v);
      if (f.next < inc.size()) {
        const auto [w, e] = inc[f.next++];
        if (e == parent_edge[f.v]) continue;
        if (disc[w] == none) {
          edge_stack.push_back(e);
          parent_edge[w] = e;
          disc[w] = low[w] = timer++;
          ++f.children;
          stack.push_back({w, 0, 0});
        } else if (disc[w] < disc[f.v]) {
          edge_stack.push_back(e);
          low[f.v] = std::min(low[f.v], disc[w]);
        }
        continue;
      }
      const std::size_t v = f.v;
      const std::size_t children = f.children;
      stack.pop_back();
      if (stack.empty()) {
        if (children > 1) is_cut[v] = true;
        continue;
      }
      const std::size_t u = stack.back().v;
      low[u] = std::min(low[u], low[v]);
      if (low[v] >= disc[u]) {
        if (stack.size() > 1) is_cut[u] = true;  // the root is handled on its own pop
        std::vector<std::size_t> block;
        const std::size_t tree_edge = parent_edge[v];
        while (!edge_stack.empty()) {
          const std::size_t e = edge_stack.back();
          edge_stack.pop_back();
          block.push_back(g.edges()[e].line);
          if (e == tree_edge) break;
        }
        if (low[v] > disc[u]) out.bridges.push_back(g.edges()[tree_edge].line);
        std::sort(block.begin(), block.end());
        out.components.push_back(std::move(block));
      }
    }
  }
  for (std::size_t v = 0; v < n; ++v)
    if (is_cut[v]) out.cut_vertices.push_back(v);
  std::sort(out.bridges.begin(), out.bridges.end());
  return out;
}

inline std::vector<std::size_t> cut_vertices(const Graph& g) { return analyze_biconnected(g).cut_vertices; }

inline std::vector<std::vector<std::size_t>> biconnected_components(const Graph& g) {
  return analyze_biconnected(g).components;
}

inline std::vector<std::size_t> bridges(const Graph& g) { return analyze_biconnected(g).bridges; }

// Connected components of the graph with the vertices in `removed` deleted.
// Returns a label per vertex (-1 for removed vertices) and the label count.
inline std::pair<std::vector<int>, int> components_without(const Graph& g, const std::vector<bool>& removed) {
  const std::size_t n = g.num_vertices();
  std::vector<int> label(n, -1);
  int count = 0;
  std::vector<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    if (removed[s] || label[s] >= 0) continue;
    label[s] = count;
    queue.assign(1, s);
    while (!queue.empty()) {
      const std::size_t v = queue.back();
      queue.pop_back();
      for (const auto& inc : g.incident(v)) {
        if (removed[inc.neighbor] || label[inc.neighbor] >= 0) continue;
        label[inc.neighbor] = count;
        queue.push_back(inc.neighbor);
      }
    }
    ++count;
  }
  return {std::move(label), count};
}

inline bool is_connected(const Graph& g) {
  if (g.num_vertices() == 0) return true;
  return components_without(g, std::vector<bool>(g.num_vertices(), false)).second == 1;
}

// True iff deleting `cut` (with incident edges) leaves more than one component.
inline bool is_vertex_cut(const Graph& g, const std::vector<std::size_t>& cut) {
  std::vector<bool> removed(g.num_vertices(), false);
  for (auto v : cut) removed.at(v) = true;
  return components_without(g, removed).second > 1;
}

}  // namespace vcsgrid
