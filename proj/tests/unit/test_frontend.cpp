#include <doctest.h>

#include <json.hpp>

#include "support.hpp"

using namespace tf_test;
namespace fs = std::filesystem;

namespace {

std::vector<const ir::Instr*> instrs(const ir::Module& m, ir::Opcode op) {
  std::vector<const ir::Instr*> out;
  for (const auto& p : m.procs)
    for (const auto& b : p.blocks)
      for (const auto& in : b.instrs)
        if (in.op == op) out.push_back(&in);
  return out;
}

std::vector<std::string> parseable_fixtures() {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(TURTLEFLOW_FIXTURES)) {
    if (e.path().extension() != ".py") continue;
    if (e.path().filename() == "legacy.py") continue;
    files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void check_nested(const ast::Expr& e, int& checked) {
  for (const auto& c : e.children) {
    if (!c) continue;
    CHECK_MESSAGE(e.span.contains(c->span), e.text);
    ++checked;
    check_nested(*c, checked);
  }
  for (const auto& k : e.keywords) {
    CHECK(e.span.contains(k.value->span));
    ++checked;
  }
}

}  // namespace

TEST_CASE("parser: empty input is an empty module") {
  auto r = parse_module("", "empty.py");
  REQUIRE(r.ok());
  CHECK(r.module->body.empty());
  auto p = load_program_text("", "empty.py");
  REQUIRE(p.modules.size() == 1);
  CHECK(ir::dump(p.modules[0]).size() > 0);
}

TEST_CASE("parser: syntax error reports its line") {
  auto r = parse_module("def f(:\n    pass\n", "bad.py");
  CHECK_FALSE(r.ok());
  REQUIRE_FALSE(r.diagnostics.empty());
  CHECK(r.diagnostics[0].line == 1);
  CHECK_THROWS_AS(load_program_text("def f(:\n", "bad.py"), SyntaxFailure);
}

TEST_CASE("parser: python 2 print statement") {
  auto r = parse_module("x = 1\nprint \"x\"\n", "p2.py");
  CHECK_FALSE(r.ok());
  REQUIRE_FALSE(r.diagnostics.empty());
  CHECK(r.diagnostics[0].line == 2);
  CHECK(r.diagnostics[0].message.find("Missing parentheses") != std::string::npos);
}

TEST_CASE("parser: invalid utf-8 is an encoding error") {
  CHECK_THROWS_AS(parse_module("x = '\xff'\n", "enc.py"), EncodingError);
}

TEST_CASE("parser: child spans lie inside parent spans") {
  int checked = 0;
  for (const auto& file : parseable_fixtures()) {
    CAPTURE(file);
    auto r = parse_module(read_file(file), file);
    REQUIRE(r.ok());
    ast::walk_exprs(*r.module, [&](const ast::Expr& e) {
      for (const auto& c : e.children) {
        if (c) {
          CHECK(e.span.contains(c->span));
          ++checked;
        }
      }
    });
    ast::walk_stmts(*r.module, [&](const ast::Stmt& s, int) {
      if (s.value) CHECK(s.span.contains(s.value->span));
      for (const auto& t : s.targets) CHECK(s.span.contains(t->span));
      for (const auto& b : s.body) CHECK(s.span.contains(b->span));
    });
    for (const auto& s : r.module->body) {
      if (s->value) check_nested(*s->value, checked);
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("parser: call counts match the python ast oracle") {
  auto expected = nlohmann::json::parse(read_file(fixture("corpus_expected.json")))["ast_calls"];
  long total = 0;
  for (const auto& [name, count] : expected.items()) {
    CAPTURE(name);
    std::string path = fixture("corpus/" + name);
    auto r = parse_module(read_file(path), path);
    REQUIRE(r.ok());
    SourceFile src(path, read_file(path));
    CHECK(static_cast<int>(collect_ast_calls(*r.module, src).size()) == count.get<int>());
    total += count.get<int>();
  }
  CHECK(total == 150);

  std::string running = fixture("running/multi_class_svm.py");
  auto r = parse_module(read_file(running), running);
  REQUIRE(r.ok());
  CHECK(collect_ast_calls(*r.module, SourceFile(running, read_file(running))).size() == 16);
}

TEST_CASE("parser: nested calls are listed outer first") {
  std::string text = "f(g(x))\n";
  auto r = parse_module(text, "n.py");
  REQUIRE(r.ok());
  auto calls = collect_ast_calls(*r.module, SourceFile("n.py", text));
  REQUIRE(calls.size() == 2);
  CHECK(calls[0].simple_name == "f");
  CHECK(calls[1].simple_name == "g");
  CHECK(calls[0].span.contains(calls[1].span));
}

TEST_CASE("parser: slices with empty bounds") {
  auto r = parse_module("y = data[:, :-1]\nz = data[::2, 1:]\n", "s.py");
  CHECK(r.ok());
}

TEST_CASE("lowering: inner call is evaluated before the outer call") {
  auto p = load_program_text("f(g(x))\n", "n.py");
  auto calls = instrs(p.modules[0], ir::Opcode::CallOrNew);
  REQUIRE(calls.size() == 2);
  CHECK(calls[0]->name == "g");
  CHECK(calls[1]->name == "f");
  CHECK(calls[0]->site < calls[1]->site);
}

TEST_CASE("lowering: lambda becomes MakeFunction of a lambda procedure") {
  auto p = load_program_text("f = lambda x: x + 1\n", "l.py");
  auto made = instrs(p.modules[0], ir::Opcode::MakeFunction);
  REQUIRE(made.size() == 1);
  const auto& proc = p.modules[0].procs.at(made[0]->target);
  CHECK(proc.kind == ir::ProcKind::Lambda);
  REQUIRE(proc.params.size() == 1);
  CHECK(proc.params[0].name == "x");
  CHECK(instrs(p.modules[0], ir::Opcode::LocalExpr).size() == 1);
}

TEST_CASE("lowering: attribute store and load") {
  auto p = load_program_text("x = object()\nx.f = 1\ny = x.f\n", "a.py");
  auto writes = instrs(p.modules[0], ir::Opcode::FieldWrite);
  auto reads = instrs(p.modules[0], ir::Opcode::FieldRead);
  REQUIRE(writes.size() == 1);
  REQUIRE(reads.size() == 1);
  CHECK(writes[0]->name == "f");
  CHECK(reads[0]->name == "f");
  CHECK(reads[0]->assigned_name == "y");
}

TEST_CASE("lowering: method call keeps receiver and name") {
  auto p = load_program_text("import a\na.b(x)\n", "m.py");
  auto calls = instrs(p.modules[0], ir::Opcode::CallOrNew);
  REQUIRE(calls.size() == 1);
  CHECK(calls[0]->has_receiver);
  CHECK(calls[0]->name == "b");
  CHECK(calls[0]->operands.size() == 1);
  CHECK(calls[0]->explicit_);
  CHECK(p.modules[0].source->slice(calls[0]->name_span) == "b");
}

TEST_CASE("lowering: from-import") {
  auto p = load_program_text("from M import N\nfrom .pkg import Q as R\n", "i.py");
  auto imports = instrs(p.modules[0], ir::Opcode::Import);
  REQUIRE(imports.size() == 2);
  CHECK(imports[0]->from_module == "M");
  CHECK(imports[0]->name == "M.N");
  CHECK(imports[0]->label == "N");
  CHECK(imports[1]->from_module == ".pkg");
  CHECK(imports[1]->name == "pkg.Q");
}

TEST_CASE("lowering: every source call becomes one explicit call site") {
  for (const auto& file : parseable_fixtures()) {
    CAPTURE(file);
    auto p = load_program(file);
    const auto& m = p.modules[p.entry];
    auto r = parse_module(m.source->text(), m.path);
    auto calls = collect_ast_calls(*r.module, *m.source);
    std::set<SourceSpan> ast_spans;
    for (const auto& c : calls) ast_spans.insert(c.span);
    std::set<SourceSpan> ir_spans;
    for (const auto* in : instrs(m, ir::Opcode::CallOrNew))
      if (in->explicit_) ir_spans.insert(in->span);
    CHECK(ir_spans == ast_spans);
  }
}

TEST_CASE("lowering: output is deterministic") {
  for (const auto& file : parseable_fixtures()) {
    auto a = load_program(file);
    auto b = load_program(file);
    REQUIRE(a.modules.size() == b.modules.size());
    for (std::size_t i = 0; i < a.modules.size(); ++i) CHECK(ir::dump(a.modules[i]) == ir::dump(b.modules[i]));
  }
}

TEST_CASE("lowering: eval is unsupported and not a call") {
  auto p = load_program_text("x = eval('1 + 2')\n", "e.py");
  auto unsupported = instrs(p.modules[0], ir::Opcode::Unsupported);
  REQUIRE(unsupported.size() == 1);
  CHECK(unsupported[0]->name == "eval");
  CHECK(instrs(p.modules[0], ir::Opcode::CallOrNew).empty());
}

TEST_CASE("frontend: sibling modules are loaded") {
  auto p = load_program(fixture("dispatch/dynamic.py"));
  CHECK(p.modules.size() == 2);
  CHECK(p.find_module("X") >= 0);
}
