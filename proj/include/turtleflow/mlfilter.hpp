#pragma once

#include <set>
#include <string>
#include <vector>

#include "turtleflow/dfg.hpp"

namespace turtleflow {

struct MlFilterConfig {
  std::set<std::string> target_roots{"sklearn", "xgboost", "lightgbm"};
  bool keep_argument_edges = true;
};

struct FilteredGraph {
  DataflowGraph graph;          // ids renumbered densely, spans kept for internal use
  std::vector<int> provenance;  // filtered id -> original id
};

/// True when `path` equals a root or extends it with further segments.
bool path_has_root(const std::string& path, const std::set<std::string>& roots);

bool is_ml_node(const DfNode& node, const MlFilterConfig& cfg);

/// Keeps ML turtle results plus nodes on directed paths between two of them.
/// Throws std::invalid_argument when no roots are configured.
FilteredGraph filter_graph(const DataflowGraph& g, const MlFilterConfig& cfg = {});

/// JSON without source locations: nodes carry id, kind, label and paths.
std::string export_filtered_json(const FilteredGraph& f);

}  // namespace turtleflow
