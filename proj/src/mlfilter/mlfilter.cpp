#include <deque>
#include <json.hpp>
#include <stdexcept>

#include "turtleflow/mlfilter.hpp"

namespace turtleflow {

bool path_has_root(const std::string& path, const std::set<std::string>& roots) {
  for (const auto& r : roots) {
    if (path == r || (path.size() > r.size() && path.compare(0, r.size(), r) == 0 && path[r.size()] == '.')) {
      return true;
    }
  }
  return false;
}

bool is_ml_node(const DfNode& node, const MlFilterConfig& cfg) {
  if (node.kind != DfKind::TurtleResult) return false;
  for (const auto& p : node.turtle_paths)
    if (path_has_root(p, cfg.target_roots)) return true;
  return false;
}

namespace {

std::vector<bool> reach(std::size_t n, const std::vector<std::vector<int>>& adj, const std::vector<bool>& seeds) {
  std::vector<bool> seen(n, false);
  std::deque<int> work;
  for (std::size_t i = 0; i < n; ++i) {
    if (seeds[i]) work.push_back(static_cast<int>(i));
  }
  while (!work.empty()) {
    int v = work.front();
    work.pop_front();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        work.push_back(w);
      }
    }
  }
  return seen;
}

}  // namespace

FilteredGraph filter_graph(const DataflowGraph& g, const MlFilterConfig& cfg) {
  if (cfg.target_roots.empty()) throw std::invalid_argument("at least one ML library root is required");
  for (const auto& r : cfg.target_roots)
    if (r.empty()) throw std::invalid_argument("empty ML library root");

  std::size_t n = g.nodes.size();
  std::vector<bool> ml(n, false);
  for (const auto& node : g.nodes) ml[node.id] = is_ml_node(node, cfg);
  std::vector<std::vector<int>> succ(n), pred(n);
  for (const auto& e : g.edges) {
    if (!cfg.keep_argument_edges && e.kind == EdgeKind::ArgumentFlow) continue;
    succ[e.src].push_back(e.dst);
    pred[e.dst].push_back(e.src);
  }
  auto below = reach(n, succ, ml);
  auto above = reach(n, pred, ml);

  FilteredGraph f;
  f.graph.entry = g.entry;
  f.graph.digest = g.digest;
  f.graph.sources = g.sources;
  std::vector<int> renumber(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!ml[i] && !(below[i] && above[i])) continue;
    renumber[i] = static_cast<int>(f.provenance.size());
    f.provenance.push_back(static_cast<int>(i));
    f.graph.nodes.push_back(g.nodes[i]);
    f.graph.nodes.back().id = renumber[i];
  }
  for (const auto& e : g.edges) {
    if (!cfg.keep_argument_edges && e.kind == EdgeKind::ArgumentFlow) continue;
    if (renumber[e.src] >= 0 && renumber[e.dst] >= 0) f.graph.edges.push_back({renumber[e.src], renumber[e.dst], e.kind});
  }
  return f;
}

std::string export_filtered_json(const FilteredGraph& f) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : f.graph.nodes) {
    nlohmann::json j{{"id", n.id}, {"kind", df_kind_name(n.kind)}, {"label", n.label}};
    if (!n.turtle_paths.empty()) j["paths"] = n.turtle_paths;
    nodes.push_back(std::move(j));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : f.graph.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", edge_kind_name(e.kind)}});
  }
  nlohmann::json out{{"nodes", nodes}, {"edges", edges}};
  if (!f.graph.entry.empty()) out["entry"] = f.graph.entry;
  return out.dump() + "\n";
}

}  // namespace turtleflow
