#include <sstream>

#include "turtleflow/callgraph.hpp"

namespace turtleflow {

std::string_view obj_kind_name(ObjKind k) {
  switch (k) {
    case ObjKind::ClassObject: return "class";
    case ObjKind::Instance: return "instance";
    case ObjKind::Module: return "module";
    case ObjKind::Script: return "script";
    case ObjKind::Function: return "function";
    case ObjKind::BoundMethod: return "bound";
    case ObjKind::Turtle: return "turtle";
    case ObjKind::Container: return "container";
    case ObjKind::Tag: return "tag";
  }
  return "?";
}

std::string_view dispatch_rule_name(DispatchRule r) {
  switch (r) {
    case DispatchRule::Creation: return "creation";
    case DispatchRule::NewOverride: return "new";
    case DispatchRule::Function: return "function";
    case DispatchRule::BoundMethod: return "bound-method";
    case DispatchRule::ModuleCall: return "module-call";
    case DispatchRule::InstanceCall: return "instance-call";
    case DispatchRule::Turtle: return "turtle";
    case DispatchRule::Callback: return "callback";
  }
  return "?";
}

std::string_view edge_kind_name(EdgeKind k) {
  return k == EdgeKind::ReceiverFlow ? "ReceiverFlow" : "ArgumentFlow";
}

std::vector<int> AnalysisResult::points_to(int node, ir::Reg reg) const {
  auto it = local_pts.find({node, reg});
  return it == local_pts.end() ? std::vector<int>{} : it->second;
}

std::vector<int> AnalysisResult::field_points_to(int object, const std::string& field) const {
  auto it = field_pts.find({object, field});
  return it == field_pts.end() ? std::vector<int>{} : it->second;
}

bool AnalysisResult::proc_reachable(int module, int proc) const {
  for (const auto& n : nodes)
    if (n.module == module && n.proc == proc) return true;
  return false;
}

std::vector<int> AnalysisResult::nodes_of(int module, int proc) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].module == module && nodes[i].proc == proc) out.push_back(static_cast<int>(i));
  return out;
}

const ir::Instr& AnalysisResult::instr(SiteRef s) const { return *instr_index.at(s); }

std::string AnalysisResult::describe(int object) const {
  const AbstractObject& o = objects[object];
  std::string kind(obj_kind_name(o.kind));
  auto mod = [&](int m) { return m >= 0 ? program->modules[m].name : std::string("?"); };
  switch (o.kind) {
    case ObjKind::ClassObject:
      return kind + " " + mod(o.module) + "." + program->modules[o.module].classes[o.id].name;
    case ObjKind::Instance: {
      std::string s = kind + " " + program->modules[o.module].classes[o.id].name;
      return o.site < 0 ? s + "@entry" : s + "@" + mod(o.context) + ":" + std::to_string(o.site);
    }
    case ObjKind::Module:
    case ObjKind::Script:
      return kind + " " + mod(o.module);
    case ObjKind::Function:
      return kind + " " + mod(o.module) + "." + program->modules[o.module].procs[o.id].name;
    case ObjKind::BoundMethod:
      return kind + " " + program->modules[o.module].procs[o.id].name + " of (" + describe(o.receiver) + ")";
    case ObjKind::Turtle:
      return kind + (o.ref ? " ref " : " ") + o.path;
    case ObjKind::Container:
      return kind + " " + mod(o.module) + ":" + std::to_string(o.id);
    case ObjKind::Tag:
      return kind + " " + std::to_string(o.id);
  }
  return kind;
}

std::string AnalysisResult::node_name(int node) const {
  const CgNode& n = nodes[node];
  if (node == 0) return "<root>";
  if (n.proc < 0) return "turtle " + n.turtle_path;
  const auto& m = program->modules[n.module];
  std::string s = m.name + "." + m.procs[n.proc].name;
  if (!n.context.is_default()) {
    s += "@" + std::to_string(n.context.site.module) + ":" + std::to_string(n.context.site.site);
  }
  return s;
}

std::string dump_callgraph(const AnalysisResult& r) {
  std::ostringstream out;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) out << "node " << i << " " << r.node_name(static_cast<int>(i)) << "\n";
  for (const auto& [caller, site, callee] : r.edges) {
    out << "edge " << r.node_name(caller) << " -> " << r.node_name(callee);
    if (site.site >= 0) {
      const auto& in = r.instr(site);
      out << " at " << r.program->modules[site.module].name << ":" << in.span.start_line << ":" << in.span.start_col;
    }
    out << "\n";
  }
  for (const auto& [m, p] : r.entrypoints) {
    out << "entrypoint " << r.program->modules[m].name << "." << r.program->modules[m].procs[p].name << "\n";
  }
  out << "restarts " << r.restarts << "\n";
  return out.str();
}

}  // namespace turtleflow
