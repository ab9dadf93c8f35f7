#pragma once

#include <map>
#include <string>
#include <vector>

#include "turtleflow/callgraph.hpp"
#include "turtleflow/source.hpp"

namespace turtleflow {

enum class DfKind { TurtleResult, CallResult, FieldRead, LocalExpr };

std::string_view df_kind_name(DfKind k);
DfKind parse_df_kind(std::string_view s);
EdgeKind parse_edge_kind(std::string_view s);

struct DfNode {
  int id = 0;
  DfKind kind = DfKind::LocalExpr;
  std::string label;
  SourceSpan span;
  SourceSpan name_span;  // callee or attribute identifier
  SourceSpan stmt_span;
  std::string proc;      // enclosing procedure, qualified
  std::string context;   // empty for the default context
  std::string assigned_name;
  std::vector<std::string> turtle_paths;  // full dotted paths of turtles produced here
  std::vector<SourceSpan> imports;        // import statements the consumed library values came from
};

struct DfEdge {
  int src = 0;
  int dst = 0;
  EdgeKind kind = EdgeKind::ReceiverFlow;
  friend auto operator<=>(const DfEdge&, const DfEdge&) = default;
};

struct DataflowGraph {
  std::vector<DfNode> nodes;
  std::vector<DfEdge> edges;  // sorted, no duplicates
  std::string entry;
  std::string digest;
  std::map<std::string, SourceFilePtr> sources;  // by path; not exported

  [[nodiscard]] std::vector<std::vector<int>> predecessors() const;
  [[nodiscard]] std::vector<int> out_degree() const;
  [[nodiscard]] std::vector<int> in_degree() const;
};

/// One node per flow node of the analysis, ids ordered by source position.
DataflowGraph build_dataflow_graph(const AnalysisResult& result);

std::string export_json(const DataflowGraph& g);
std::string export_dot(const DataflowGraph& g);

/// Parses export_json output; sources and name/statement spans are not restored.
DataflowGraph parse_json_graph(const std::string& text);

/// Nodes (id, label, kind) and edges recovered from export_dot output.
struct DotGraph {
  std::map<int, std::pair<std::string, std::string>> nodes;
  std::vector<DfEdge> edges;
};
DotGraph parse_dot(const std::string& text);

}  // namespace turtleflow
