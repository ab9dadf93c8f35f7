#pragma once

#include <map>
#include <tuple>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "turtleflow/ir.hpp"

namespace turtleflow {

struct AnalysisOptions {
  int max_restarts = 10;
  int turtle_depth = 8;
  double budget_secs = 30.0;
  bool user_site_context = false;  // analyze user procedures per call site
};

/// A resource cap was exceeded; `file` names the entry script.
struct AnalysisBudgetError : std::runtime_error {
  AnalysisBudgetError(const std::string& file, const std::string& what)
      : std::runtime_error(file + ": " + what), file(file) {}
  std::string file;
};

enum class ObjKind { ClassObject, Instance, Module, Script, Function, BoundMethod, Turtle, Container, Tag };

std::string_view obj_kind_name(ObjKind k);

/// An abstract value. Which fields are meaningful depends on `kind`.
struct AbstractObject {
  ObjKind kind = ObjKind::Tag;
  int module = -1;
  int id = -1;        // class id, proc id, container site, or flow node id for tags
  int site = -1;      // allocation or turtle-call site (module-local), -1 if none
  int context = -1;   // call graph node that created a turtle
  int receiver = -1;  // bound receiver object
  std::string path;   // turtle path
  bool ref = false;   // turtle names a library entity rather than a call result
  int origin_module = -1;  // import statement a turtle derives from
  int origin_site = -1;
};

struct SiteRef {
  int module = -1;
  int site = -1;
  friend auto operator<=>(const SiteRef&, const SiteRef&) = default;
};

/// Default context when `site.site < 0`; a turtle method node also keeps
/// the caller node that reached it.
struct ContextKey {
  SiteRef site;
  int caller = -1;
  friend auto operator<=>(const ContextKey&, const ContextKey&) = default;
  [[nodiscard]] bool is_default() const { return site.site < 0; }
};

struct CgNode {
  int module = -1;
  int proc = -1;  // -1 for the root stub and synthetic turtle methods
  ContextKey context;
  std::string turtle_path;  // synthetic turtle methods only
};

enum class DispatchRule { Creation, NewOverride, Function, BoundMethod, ModuleCall, InstanceCall, Turtle, Callback };

std::string_view dispatch_rule_name(DispatchRule r);

struct DispatchRecord {
  SiteRef site;
  int caller = -1;
  int receiver = -1;  // abstract object dispatched on
  DispatchRule rule = DispatchRule::Function;
  int callee = -1;    // call graph node, -1 when nothing is invoked (plain creation)
};

enum class FlowKind { Call, FieldRead, LocalExpr };
enum class EdgeKind { ReceiverFlow, ArgumentFlow };

std::string_view edge_kind_name(EdgeKind k);

/// A value-producing instruction under one call graph node.
struct FlowNode {
  SiteRef site;
  int cg_node = -1;
  FlowKind kind = FlowKind::LocalExpr;
  bool turtle = false;                 // a turtle was called at this site
  std::set<std::string> turtle_paths;  // paths of results produced here
  std::set<SiteRef> import_origins;    // imports the consumed library values came from
};

struct FlowEdge {
  int src = -1;
  int dst = -1;
  EdgeKind kind = EdgeKind::ReceiverFlow;
  friend auto operator<=>(const FlowEdge&, const FlowEdge&) = default;
};

struct PendingTurtleRead {
  SiteRef site;
  int cg_node = -1;
  int receiver = -1;
  int class_object = -1;
  std::string field;
  int result_var = -1;
  bool converted = false;
};


struct AnalysisResult {
  const ir::Program* program = nullptr;
  std::vector<AbstractObject> objects;
  std::vector<CgNode> nodes;  // nodes[0] is the root stub
  std::set<std::tuple<int, SiteRef, int>> edges;  // (caller, site, callee)
  std::vector<DispatchRecord> dispatches;
  std::vector<FlowNode> flow_nodes;
  std::set<FlowEdge> flow_edges;
  std::vector<PendingTurtleRead> pending_reads;
  std::set<SiteRef> reached_sites;   // call sites processed under some node
  std::set<SiteRef> resolved_sites;  // call sites with at least one interpretation
  std::vector<std::pair<int, int>> entrypoints;  // (module, proc) added beyond the root
  int restarts = 0;

  // points-to queries, non-tag objects only
  std::map<std::pair<int, int>, std::vector<int>> local_pts;  // (node, reg)
  std::map<std::pair<int, std::string>, std::vector<int>> field_pts;

  [[nodiscard]] std::vector<int> points_to(int node, ir::Reg reg) const;
  [[nodiscard]] std::vector<int> field_points_to(int object, const std::string& field) const;
  [[nodiscard]] bool proc_reachable(int module, int proc) const;
  [[nodiscard]] std::vector<int> nodes_of(int module, int proc) const;
  [[nodiscard]] std::string describe(int object) const;
  [[nodiscard]] std::string node_name(int node) const;
  [[nodiscard]] const ir::Instr& instr(SiteRef s) const;

  // index from (module, site) to the instruction
  std::map<SiteRef, const ir::Instr*> instr_index;
  std::map<SiteRef, int> instr_proc;
};

/// Runs propagation from a root stub invoking the entry module's script,
/// then the entrypoint and turtle-inheritance rounds until nothing changes.
AnalysisResult build_callgraph(const ir::Program& program, const AnalysisOptions& options = {});

/// Stable text listing of call graph nodes and edges for `--dump-callgraph`.
std::string dump_callgraph(const AnalysisResult& result);

}  // namespace turtleflow
