#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "turtleflow/dfg.hpp"

namespace turtleflow {

std::string_view df_kind_name(DfKind k) {
  switch (k) {
    case DfKind::TurtleResult: return "TurtleResult";
    case DfKind::CallResult: return "CallResult";
    case DfKind::FieldRead: return "FieldRead";
    case DfKind::LocalExpr: return "LocalExpr";
  }
  return "?";
}

DfKind parse_df_kind(std::string_view s) {
  if (s == "TurtleResult") return DfKind::TurtleResult;
  if (s == "CallResult") return DfKind::CallResult;
  if (s == "FieldRead") return DfKind::FieldRead;
  if (s == "LocalExpr") return DfKind::LocalExpr;
  throw std::invalid_argument("unknown node kind: " + std::string(s));
}

EdgeKind parse_edge_kind(std::string_view s) {
  if (s == "ReceiverFlow") return EdgeKind::ReceiverFlow;
  if (s == "ArgumentFlow") return EdgeKind::ArgumentFlow;
  throw std::invalid_argument("unknown edge kind: " + std::string(s));
}

std::vector<std::vector<int>> DataflowGraph::predecessors() const {
  std::vector<std::vector<int>> preds(nodes.size());
  for (const auto& e : edges) preds[e.dst].push_back(e.src);
  return preds;
}

std::vector<int> DataflowGraph::out_degree() const {
  std::vector<int> d(nodes.size(), 0);
  for (const auto& e : edges) ++d[e.src];
  return d;
}

std::vector<int> DataflowGraph::in_degree() const {
  std::vector<int> d(nodes.size(), 0);
  for (const auto& e : edges) ++d[e.dst];
  return d;
}

namespace {

std::string context_name(const AnalysisResult& r, const CgNode& n) {
  if (n.context.is_default()) return {};
  const auto& span = r.instr(n.context.site).span;
  return "site " + span.file + ":" + std::to_string(span.start_line) + ":" + std::to_string(span.start_col);
}

}  // namespace

DataflowGraph build_dataflow_graph(const AnalysisResult& r) {
  const ir::Program& prog = *r.program;
  DataflowGraph g;
  const auto& entry = prog.modules[prog.entry];
  g.entry = entry.path;
  g.digest = fnv1a_hex(entry.source->text());
  for (const auto& m : prog.modules) g.sources[m.path] = m.source;

  std::vector<DfNode> raw;
  raw.reserve(r.flow_nodes.size());
  for (const auto& f : r.flow_nodes) {
    const ir::Instr& in = r.instr(f.site);
    const CgNode& cg = r.nodes[f.cg_node];
    const auto& mod = prog.modules[cg.module];
    DfNode n;
    switch (f.kind) {
      case FlowKind::Call: n.kind = f.turtle ? DfKind::TurtleResult : DfKind::CallResult; break;
      case FlowKind::FieldRead: n.kind = DfKind::FieldRead; break;
      case FlowKind::LocalExpr: n.kind = DfKind::LocalExpr; break;
    }
    n.label = in.label.empty() ? (in.name.empty() ? "__call__" : in.name) : in.label;
    n.span = in.span;
    n.name_span = in.name_span;
    n.stmt_span = in.stmt_span;
    n.proc = mod.name + "." + mod.procs[cg.proc].name;
    n.context = context_name(r, cg);
    n.assigned_name = in.assigned_name;
    n.turtle_paths.assign(f.turtle_paths.begin(), f.turtle_paths.end());
    for (const auto& origin : f.import_origins) n.imports.push_back(r.instr(origin).stmt_span);
    std::sort(n.imports.begin(), n.imports.end());
    n.imports.erase(std::unique(n.imports.begin(), n.imports.end()), n.imports.end());
    raw.push_back(std::move(n));
  }

  std::vector<int> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](int i) {
    const DfNode& n = raw[i];
    return std::tie(n.span, n.proc, n.context, n.kind);
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
  std::vector<int> renumber(raw.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    renumber[order[i]] = static_cast<int>(i);
    g.nodes.push_back(std::move(raw[order[i]]));
    g.nodes.back().id = static_cast<int>(i);
  }
  for (const auto& e : r.flow_edges) g.edges.push_back(DfEdge{renumber[e.src], renumber[e.dst], e.kind});
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

}  // namespace turtleflow
