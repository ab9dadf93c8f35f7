#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "turtleflow/callgraph.hpp"
#include "turtleflow/cli.hpp"
#include "turtleflow/dfg.hpp"
#include "turtleflow/frontend.hpp"
#include "turtleflow/mlfilter.hpp"
#include "turtleflow/slicer.hpp"

namespace tf_test {

using namespace turtleflow;

inline std::string fixture(const std::string& rel) { return std::string(TURTLEFLOW_FIXTURES) + "/" + rel; }

inline std::string golden(const std::string& name) {
  return read_file(std::filesystem::path(TURTLEFLOW_FIXTURES).parent_path() / "golden" / name);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("turtleflow_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Runs the command-line tool through the shell and returns its exit status.
inline int run_cli(const std::string& args) {
  std::string cmd = std::string("\"") + TURTLEFLOW_CLI + "\" " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Analyzed {
  ir::Program program;
  AnalysisResult result;
  DataflowGraph graph;
};

/// The program must outlive the analysis result, so both live in one heap object.
inline std::unique_ptr<Analyzed> analyze_file(const std::string& path, AnalysisOptions opt = {}) {
  auto a = std::make_unique<Analyzed>();
  a->program = load_program(path);
  a->result = build_callgraph(a->program, opt);
  a->graph = build_dataflow_graph(a->result);
  return a;
}

inline std::unique_ptr<Analyzed> analyze_text(const std::string& text, AnalysisOptions opt = {}) {
  auto a = std::make_unique<Analyzed>();
  a->program = load_program_text(text, "snippet.py");
  a->result = build_callgraph(a->program, opt);
  a->graph = build_dataflow_graph(a->result);
  return a;
}

inline int proc_id(const ir::Module& m, const std::string& name) {
  for (const auto& p : m.procs)
    if (p.name == name) return p.id;
  return -1;
}

/// Procedures with the given name reachable under some context.
inline bool reachable(const Analyzed& a, int module, const std::string& proc) {
  for (const auto& p : a.program.modules[module].procs)
    if (p.name == proc && a.result.proc_reachable(module, p.id)) return true;
  return false;
}

inline int script_object(const AnalysisResult& r, int module = 0) {
  for (std::size_t i = 0; i < r.objects.size(); ++i) {
    const auto& o = r.objects[i];
    if ((o.kind == ObjKind::Script || o.kind == ObjKind::Module) && o.module == module) return static_cast<int>(i);
  }
  return -1;
}

/// Points-to set of a module-level variable.
inline std::vector<int> global_pts(const Analyzed& a, const std::string& name, int module = 0) {
  return a.result.field_points_to(script_object(a.result, module), name);
}

inline std::set<std::string> turtle_paths(const Analyzed& a, const std::vector<int>& objs) {
  std::set<std::string> out;
  for (int o : objs)
    if (a.result.objects[o].kind == ObjKind::Turtle) out.insert(a.result.objects[o].path);
  return out;
}

inline std::string node_key(const DfNode& n) {
  std::string proc = n.proc.substr(n.proc.find('.') + 1);
  return std::string(df_kind_name(n.kind)) + " " + n.label + " @" + std::to_string(n.span.start_line) + ":" +
         std::to_string(n.span.start_col) + " in " + proc;
}

/// Structure of a graph as sorted text lines: nodes by kind, label, position
/// and procedure; edges by their endpoint keys and kind. Ids do not appear.
inline std::vector<std::string> canonical_lines(const DataflowGraph& g) {
  std::vector<std::string> lines;
  for (const auto& n : g.nodes) lines.push_back("node " + node_key(n));
  for (const auto& e : g.edges) {
    lines.push_back("edge " + node_key(g.nodes[e.src]) + " -> " + node_key(g.nodes[e.dst]) + " " +
                    std::string(edge_kind_name(e.kind)));
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

inline std::string squash(const std::string& s) { return collapse_whitespace(s); }

/// Nodes with the given label.
inline std::vector<int> nodes_labeled(const DataflowGraph& g, const std::string& label) {
  std::vector<int> out;
  for (const auto& n : g.nodes)
    if (n.label == label) out.push_back(n.id);
  return out;
}

inline bool has_edge(const DataflowGraph& g, int src, int dst, EdgeKind kind) {
  return std::binary_search(g.edges.begin(), g.edges.end(), DfEdge{src, dst, kind});
}

/// Random DAG over n nodes: edges only go from lower to higher ids.
inline DataflowGraph random_dag(std::mt19937& rng, int n, double density) {
  DataflowGraph g;
  std::bernoulli_distribution edge(density), arg(0.5);
  for (int i = 0; i < n; ++i) {
    DfNode node;
    node.id = i;
    node.kind = DfKind::CallResult;
    node.label = "n" + std::to_string(i);
    g.nodes.push_back(node);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (edge(rng)) g.edges.push_back({i, j, arg(rng) ? EdgeKind::ArgumentFlow : EdgeKind::ReceiverFlow});
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

/// Reversed reachability by recursive DFS over the raw edge list.
inline void reverse_dfs(const DataflowGraph& g, int v, std::set<int>& seen) {
  if (!seen.insert(v).second) return;
  for (const auto& e : g.edges)
    if (e.dst == v) reverse_dfs(g, e.src, seen);
}

inline std::set<int> brute_force_slice(const DataflowGraph& g, int target) {
  std::set<int> seen;
  reverse_dfs(g, target, seen);
  return seen;
}

/// A randomly generated chained-call script and the paths it must produce.
struct ChainCase {
  std::string source;
  std::string base;                  // imported module
  std::vector<std::string> vars;     // variable holding each chain's result
  std::vector<std::string> paths;    // expected path per chain
  std::vector<std::string> fields;   // attribute names read from the first result
  std::string callback;              // function passed to a library call, empty if none
  std::string callback_path;         // path of that library call
};

inline ChainCase random_chain_case(std::mt19937& rng) {
  static const std::vector<std::string> names{"fit", "transform", "predict", "load", "get", "values", "mean",
                                              "reshape", "apply", "copy", "filter", "sum"};
  static const std::vector<std::string> modules{"numpy", "pandas", "sklearn", "torch", "scipy"};
  auto pick = [&](const std::vector<std::string>& v) { return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)]; };
  ChainCase c;
  c.base = pick(modules);
  std::ostringstream src;
  src << "import " << c.base << "\n\n";
  int chains = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int k = 0; k < chains; ++k) {
    int len = std::uniform_int_distribution<int>(1, 5)(rng);
    std::string expr = c.base;
    std::string path = c.base;
    for (int i = 0; i < len; ++i) {
      std::string n = pick(names);
      expr += "." + n + "()";
      path += "." + n;
    }
    std::string var = "r" + std::to_string(k);
    src << var << " = " << expr << "\n";
    c.vars.push_back(var);
    c.paths.push_back(path);
  }
  int reads = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int i = 0; i < reads; ++i) {
    std::string f = pick(names) + std::to_string(i);
    src << "a" << i << " = r0." << f << "\n";
    c.fields.push_back(f);
  }
  if (std::bernoulli_distribution(0.7)(rng)) {
    c.callback = "cb" + std::to_string(std::uniform_int_distribution<int>(0, 99)(rng));
    src << "\n\ndef " << c.callback << "(item, extra=None):\n    return item\n\n\n";
    std::string site = pick(names);
    c.callback_path = c.paths[0] + "." + site;
    src << "r0." << site << "(" << c.callback << ")\n";
  }
  c.source = src.str();
  return c;
}

}  // namespace tf_test
