#include <doctest.h>

#include <json.hpp>

#include "support.hpp"

using namespace tf_test;

namespace {

std::vector<std::string> graph_fixtures() {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(TURTLEFLOW_FIXTURES)) {
    if (e.path().extension() == ".py" && e.path().filename() != "legacy.py" && e.path().filename() != "X.py")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

TEST_CASE("dfg: argument flow between two library calls") {
  auto a = analyze_text("import m\na = m.g()\nb = m.h(a)\n");
  const auto& g = a->graph;
  REQUIRE(g.nodes.size() == 2);
  CHECK(g.nodes[0].label == "g");
  CHECK(g.nodes[1].label == "h");
  CHECK(g.nodes[0].kind == DfKind::TurtleResult);
  CHECK(g.nodes[1].kind == DfKind::TurtleResult);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0] == DfEdge{0, 1, EdgeKind::ArgumentFlow});
}

TEST_CASE("dfg: a single opaque call") {
  auto a = analyze_text("import m\nm.f()\n");
  REQUIRE(a->graph.nodes.size() == 1);
  CHECK(a->graph.nodes[0].label == "f");
  CHECK(a->graph.nodes[0].kind == DfKind::TurtleResult);
  CHECK(a->graph.edges.empty());
}

TEST_CASE("dfg: values flow through user functions") {
  auto a = analyze_text(
      "import pandas as pd\n"
      "def clean(frame):\n"
      "    return frame.dropna()\n"
      "df = pd.read_csv('x.csv')\n"
      "out = clean(df)\n"
      "n = out.shape\n");
  const auto& g = a->graph;
  auto read = nodes_labeled(g, "read_csv");
  auto drop = nodes_labeled(g, "dropna");
  auto shape = nodes_labeled(g, "shape");
  REQUIRE(read.size() == 1);
  REQUIRE(drop.size() == 1);
  CHECK(nodes_labeled(g, "clean").empty());
  REQUIRE(shape.size() == 1);
  CHECK(g.nodes[drop[0]].proc == "snippet.clean");
  CHECK(g.nodes[shape[0]].kind == DfKind::FieldRead);
  CHECK(has_edge(g, read[0], drop[0], EdgeKind::ReceiverFlow));
  CHECK(has_edge(g, drop[0], shape[0], EdgeKind::ReceiverFlow));
}

TEST_CASE("dfg: running example matches the golden graph") {
  auto a = analyze_file(fixture("running/multi_class_svm.py"));
  auto expected = split_lines(golden("running_graph.txt"));
  auto actual = canonical_lines(a->graph);
  CHECK(actual == expected);

  const auto& g = a->graph;
  auto lsvc = nodes_labeled(g, "LinearSVC");
  auto fw = nodes_labeled(g, "FrankWolfeSSVM");
  auto fits = nodes_labeled(g, "fit");
  REQUIRE(lsvc.size() == 1);
  REQUIRE(fw.size() == 1);
  REQUIRE(fits.size() == 2);
  std::set<std::string> procs;
  for (int f : fits) {
    procs.insert(g.nodes[f].proc);
    CHECK(has_edge(g, lsvc[0], f, EdgeKind::ReceiverFlow));
    CHECK(has_edge(g, fw[0], f, EdgeKind::ReceiverFlow));
  }
  CHECK(procs == std::set<std::string>{"multi_class_svm.fd", "multi_class_svm.<lambda>"});
}

TEST_CASE("dfg: invariants on all fixtures") {
  for (const auto& file : graph_fixtures()) {
    CAPTURE(file);
    auto a = analyze_file(file);
    const auto& g = a->graph;
    std::set<std::tuple<int, SourceSpan, std::string, std::string>> keys;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto& n = g.nodes[i];
      CHECK(n.id == static_cast<int>(i));
      CHECK(keys.insert({static_cast<int>(n.kind), n.span, n.proc, n.context}).second);
      if (n.kind == DfKind::TurtleResult) CHECK_FALSE(n.turtle_paths.empty());
    }
    CHECK(std::is_sorted(g.edges.begin(), g.edges.end()));
    CHECK(std::adjacent_find(g.edges.begin(), g.edges.end()) == g.edges.end());
    for (const auto& e : g.edges) {
      CHECK(e.src >= 0);
      CHECK(e.dst >= 0);
      CHECK(e.src < static_cast<int>(g.nodes.size()));
      CHECK(e.dst < static_cast<int>(g.nodes.size()));
    }
  }
}

TEST_CASE("dfg: json and dot exports round-trip") {
  for (const auto& file : graph_fixtures()) {
    CAPTURE(file);
    auto a = analyze_file(file);
    const auto& g = a->graph;
    std::string json = export_json(g);
    DataflowGraph back = parse_json_graph(json);
    CHECK(export_json(back) == json);
    REQUIRE(back.nodes.size() == g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      CHECK(back.nodes[i].kind == g.nodes[i].kind);
      CHECK(back.nodes[i].label == g.nodes[i].label);
      CHECK(back.nodes[i].span == g.nodes[i].span);
      CHECK(back.nodes[i].proc == g.nodes[i].proc);
    }
    CHECK(back.edges == g.edges);

    DotGraph dot = parse_dot(export_dot(g));
    CHECK(dot.edges == g.edges);
    REQUIRE(dot.nodes.size() == g.nodes.size());
    for (const auto& n : g.nodes) {
      CHECK(dot.nodes[n.id].first == n.label);
      CHECK(dot.nodes[n.id].second == df_kind_name(n.kind));
    }
  }
}

TEST_CASE("dfg: dot styling") {
  auto a = analyze_text("import m\na = m.g()\nb = m.h(a)\nc = b.k\n");
  std::string dot = export_dot(a->graph);
  int edge_lines = 0;
  for (const auto& line : split_lines(dot)) edge_lines += line.find("->") != std::string::npos;
  CHECK(edge_lines == 2);
  CHECK(dot.find("color=\"red\"") != std::string::npos);
  CHECK(dot.find("color=\"black\"") != std::string::npos);
  CHECK(dot.find("color=\"green\"") != std::string::npos);
}

TEST_CASE("dfg: empty graph exports") {
  DataflowGraph g;
  CHECK(export_json(g) == "{\"edges\":[],\"nodes\":[]}\n");
  CHECK(export_dot(g) == "digraph dataflow {\n}\n");
  CHECK(parse_dot(export_dot(g)).nodes.empty());
  CHECK(parse_json_graph(export_json(g)).nodes.empty());
}

TEST_CASE("dfg: json schema") {
  auto a = analyze_text("import m\na = m.g()\nb = m.h(a)\n");
  auto j = nlohmann::json::parse(export_json(a->graph));
  for (const char* k : {"id", "kind", "label", "file", "line", "col", "proc"}) CHECK(j["nodes"][0].contains(k));
  for (const char* k : {"src", "dst", "kind"}) CHECK(j["edges"][0].contains(k));
}

TEST_CASE("dfg: construction is deterministic") {
  for (const auto& file : graph_fixtures()) {
    auto a = analyze_file(file);
    auto b = analyze_file(file);
    CHECK(export_json(a->graph) == export_json(b->graph));
    CHECK(export_dot(a->graph) == export_dot(b->graph));
  }
}

TEST_CASE("dfg: malformed json is rejected") {
  CHECK_THROWS(parse_json_graph("{\"nodes\": [{\"id\": 0}]"));
  CHECK_THROWS(parse_json_graph("{\"nodes\": [], \"edges\": [{\"src\": 0, \"dst\": 3, \"kind\": \"ArgumentFlow\"}]}"));
}
