#include <algorithm>
#include <json.hpp>
#include <regex>
#include <sstream>

#include "turtleflow/dfg.hpp"

namespace turtleflow {

using nlohmann::json;

std::string export_json(const DataflowGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json j;
    j["id"] = n.id;
    j["kind"] = df_kind_name(n.kind);
    j["label"] = n.label;
    j["file"] = n.span.file;
    j["line"] = n.span.start_line;
    j["col"] = n.span.start_col;
    j["end_line"] = n.span.end_line;
    j["end_col"] = n.span.end_col;
    j["proc"] = n.proc;
    j["context"] = n.context;
    if (!n.turtle_paths.empty()) j["paths"] = n.turtle_paths;
    nodes.push_back(std::move(j));
  }
  json edges = json::array();
  for (const auto& e : g.edges) edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", edge_kind_name(e.kind)}});
  json out;
  out["nodes"] = std::move(nodes);
  out["edges"] = std::move(edges);
  if (!g.entry.empty()) out["entry"] = g.entry;
  if (!g.digest.empty()) out["digest"] = g.digest;
  return out.dump() + "\n";
}

DataflowGraph parse_json_graph(const std::string& text) {
  json in = json::parse(text);
  DataflowGraph g;
  g.entry = in.value("entry", "");
  g.digest = in.value("digest", "");
  for (const auto& j : in.at("nodes")) {
    DfNode n;
    n.id = j.at("id").get<int>();
    n.kind = parse_df_kind(j.at("kind").get<std::string>());
    n.label = j.at("label").get<std::string>();
    n.span.file = j.at("file").get<std::string>();
    n.span.start_line = j.at("line").get<int>();
    n.span.start_col = j.at("col").get<int>();
    n.span.end_line = j.value("end_line", n.span.start_line);
    n.span.end_col = j.value("end_col", n.span.start_col);
    n.proc = j.at("proc").get<std::string>();
    n.context = j.value("context", "");
    if (j.contains("paths")) n.turtle_paths = j.at("paths").get<std::vector<std::string>>();
    if (n.id != static_cast<int>(g.nodes.size())) throw std::invalid_argument("node ids must be dense");
    g.nodes.push_back(std::move(n));
  }
  int count = static_cast<int>(g.nodes.size());
  for (const auto& j : in.at("edges")) {
    DfEdge e{j.at("src").get<int>(), j.at("dst").get<int>(), parse_edge_kind(j.at("kind").get<std::string>())};
    if (e.src < 0 || e.dst < 0 || e.src >= count || e.dst >= count) throw std::invalid_argument("dangling edge");
    g.edges.push_back(e);
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

std::string dot_unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      out += s[i] == 'n' ? '\n' : s[i];
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string_view node_color(DfKind k) {
  switch (k) {
    case DfKind::TurtleResult: return "green";
    case DfKind::CallResult: return "gray";
    default: return "blue";
  }
}

}  // namespace

std::string export_dot(const DataflowGraph& g) {
  std::ostringstream out;
  out << "digraph dataflow {\n";
  for (const auto& n : g.nodes) {
    out << "  n" << n.id << " [label=\"" << dot_escape(n.label) << "\" kind=\"" << df_kind_name(n.kind)
        << "\" color=\"" << node_color(n.kind) << "\" proc=\"" << dot_escape(n.proc) << "\"];\n";
  }
  for (const auto& e : g.edges) {
    out << "  n" << e.src << " -> n" << e.dst << " [kind=\"" << edge_kind_name(e.kind) << "\" color=\""
        << (e.kind == EdgeKind::ReceiverFlow ? "black" : "red") << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

DotGraph parse_dot(const std::string& text) {
  static const std::regex node_re(R"re(^\s*n(\d+) \[label="((?:[^"\\]|\\.)*)" kind="(\w+)")re");
  static const std::regex edge_re(R"re(^\s*n(\d+) -> n(\d+) \[kind="(\w+)")re");
  DotGraph g;
  std::istringstream in(text);
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_search(line, m, edge_re)) {
      g.edges.push_back(DfEdge{std::stoi(m[1]), std::stoi(m[2]), parse_edge_kind(m[3].str())});
    } else if (std::regex_search(line, m, node_re)) {
      g.nodes[std::stoi(m[1])] = {dot_unescape(m[2]), m[3]};
    }
  }
  return g;
}

}  // namespace turtleflow
