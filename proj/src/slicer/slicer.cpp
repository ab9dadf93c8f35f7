#include <algorithm>
#include <deque>
#include <json.hpp>
#include <tuple>

#include "turtleflow/lexer.hpp"
#include "turtleflow/slicer.hpp"

namespace turtleflow {

namespace {

bool call_like(DfKind k) { return k == DfKind::TurtleResult || k == DfKind::CallResult; }

const SourceFile& source_of(const DataflowGraph& g, const SourceSpan& span) {
  auto it = g.sources.find(span.file);
  if (it == g.sources.end() || !it->second) throw IntegrityError("no source for " + span.file);
  return *it->second;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool counted(const Token& t) {
  return t.kind != TokenKind::EndMarker && t.kind != TokenKind::Dedent && t.end_offset > t.offset;
}

}  // namespace

std::vector<int> enumerate_candidate_leaves(const DataflowGraph& g) {
  auto out = g.out_degree();
  auto in = g.in_degree();
  std::vector<int> leaves;
  for (const auto& n : g.nodes) {
    if (call_like(n.kind) && out[n.id] == 0 && in[n.id] > 0 && n.name_span.valid()) leaves.push_back(n.id);
  }
  return leaves;
}

std::set<int> backward_slice(const DataflowGraph& g, int target) {
  if (target < 0 || target >= static_cast<int>(g.nodes.size())) {
    throw std::out_of_range("no dataflow node " + std::to_string(target));
  }
  auto preds = g.predecessors();
  std::set<int> seen{target};
  std::deque<int> work{target};
  while (!work.empty()) {
    int n = work.front();
    work.pop_front();
    for (int p : preds[n]) {
      if (seen.insert(p).second) work.push_back(p);
    }
  }
  return seen;
}

std::string render_slice(const DataflowGraph& g, const std::set<int>& slice_nodes, int target) {
  const DfNode& t = g.nodes.at(target);
  std::vector<SourceSpan> spans;
  for (int id : slice_nodes) spans.push_back(g.nodes.at(id).span);

  using Line = std::tuple<std::string, int, int, std::string>;
  std::vector<Line> lines;
  std::set<SourceSpan> emitted;
  std::set<SourceSpan> imports;
  for (int id : slice_nodes) {
    const DfNode& n = g.nodes.at(id);
    for (const auto& imp : n.imports) imports.insert(imp);
    if (id == target || !emitted.insert(n.span).second) continue;
    bool nested = false;
    for (const auto& other : spans) {
      if (other.strictly_contains(n.span) || (n.span.strictly_contains(t.span))) {
        nested = true;
        break;
      }
    }
    if (nested) continue;
    std::string text = collapse_whitespace(source_of(g, n.span).slice(n.span));
    if (!n.assigned_name.empty()) text = n.assigned_name + " = " + text;
    lines.emplace_back(n.span.file, n.span.start_line, n.span.start_col, std::move(text));
  }
  for (const auto& imp : imports) {
    lines.emplace_back(imp.file, imp.start_line, imp.start_col, trim(source_of(g, imp).line_text(imp.start_line)));
  }
  std::sort(lines.begin(), lines.end());

  std::string out;
  for (const auto& l : lines) out += std::get<3>(l) + "\n";
  const SourceFile& src = source_of(g, t.stmt_span);
  std::size_t from = src.offset(t.stmt_span.start_line, t.stmt_span.start_col);
  std::size_t to = src.offset(t.name_span.start_line, t.name_span.start_col);
  out += collapse_whitespace(std::string_view(src.text()).substr(from, to - from)) + "?\n";
  return out;
}

int count_tokens(std::string_view text) {
  auto lexed = tokenize(text, true);
  return static_cast<int>(std::count_if(lexed.tokens.begin(), lexed.tokens.end(), counted));
}

CompletionExample make_example(const DataflowGraph& g, int target, int n_tokens) {
  const DfNode& t = g.nodes.at(target);
  if (!t.name_span.valid()) throw ExampleSkipped("target has no callee name");
  const SourceFile& src = source_of(g, t.span);
  CompletionExample e;
  e.file = t.span.file;
  e.target_span = t.span;
  e.n_tokens = n_tokens;
  e.label = std::string(src.slice(t.name_span));

  std::size_t cut = src.offset(t.name_span.start_line, t.name_span.start_col);
  std::string_view prefix = std::string_view(src.text()).substr(0, cut);
  auto lexed = tokenize(prefix, true);
  if (lexed.error) {
    throw ExampleSkipped(e.file + ":" + std::to_string(lexed.error->line) + ": " + lexed.error->message);
  }
  std::vector<std::size_t> starts;
  for (const auto& tok : lexed.tokens)
    if (counted(tok)) starts.push_back(tok.offset);
  std::size_t first = starts.size() > static_cast<std::size_t>(n_tokens) ? starts.size() - n_tokens : 0;
  std::size_t begin = starts.empty() ? cut : starts[first];
  // Starting mid-file can change indentation tokens; shrink until the window fits.
  while (first < starts.size() && count_tokens(prefix.substr(begin)) > n_tokens) {
    ++first;
    begin = first < starts.size() ? starts[first] : cut;
  }
  e.complete = std::string(prefix.substr(begin));
  e.slice = render_slice(g, backward_slice(g, target), target);
  e.combined = e.complete + "\n" + std::string(kSliceSeparator) + "\n" + e.slice;
  return e;
}

std::string example_json_line(const CompletionExample& e) {
  nlohmann::json j;
  j["file"] = e.file;
  j["line"] = e.target_span.start_line;
  j["col"] = e.target_span.start_col;
  j["label"] = e.label;
  j["complete"] = e.complete;
  j["slice"] = e.slice;
  j["combined"] = e.combined;
  return j.dump() + "\n";
}

}  // namespace turtleflow
