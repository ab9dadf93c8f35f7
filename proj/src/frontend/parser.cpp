#include "turtleflow/parser.hpp"

#include <array>
#include <algorithm>

#include "turtleflow/lexer.hpp"

namespace turtleflow {

using namespace ast;

namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",     "assert", "async",
    "await", "break",  "class",   "continue", "def",    "del",    "elif",
    "else",  "except", "finally", "for",      "from",   "global", "if",
    "import", "in",    "is",      "lambda",   "nonlocal", "not",  "or",
    "pass",  "raise",  "return",  "try",      "while",  "with",   "yield"};

bool is_keyword(std::string_view name) {
  return std::find(kKeywords.begin(), kKeywords.end(), name) != kKeywords.end();
}

struct SyntaxError {
  Diagnostic diag;
};

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::string path, std::string_view text)
      : path_(std::move(path)), text_(text) {
    for (auto& t : tokens) {
      if (t.kind == TokenKind::Comment || t.kind == TokenKind::NL) continue;
      toks_.push_back(std::move(t));
    }
  }

  Module parse_file() {
    Module m;
    m.path = path_;
    while (!at(TokenKind::EndMarker)) {
      if (at(TokenKind::Newline)) {
        ++pos_;
        continue;
      }
      parse_statement(m.body);
    }
    m.span = SourceSpan{path_, 1, 1, cur().end_line, cur().end_col};
    return m;
  }

  ExprPtr parse_standalone_expression() {
    ExprPtr e = parse_testlist_star();
    while (at(TokenKind::Newline)) ++pos_;
    if (!at(TokenKind::EndMarker)) error("invalid syntax in f-string expression");
    return e;
  }

 private:
  // --- token helpers -------------------------------------------------------

  const Token& cur() const { return toks_[std::min(pos_, toks_.size() - 1)]; }
  const Token& peek_tok(std::size_t ahead) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& prev() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }
  bool at(TokenKind k) const { return cur().kind == k; }
  bool at_op(std::string_view op) const { return cur().is_op(op); }
  bool at_kw(std::string_view kw) const { return cur().is_name(kw); }

  [[noreturn]] void error(const std::string& msg) const {
    throw SyntaxError{Diagnostic{cur().line, cur().col, msg}};
  }

  const Token& take() { return toks_[pos_++]; }

  const Token& expect_op(std::string_view op) {
    if (!at_op(op)) error("expected '" + std::string(op) + "'");
    return take();
  }
  const Token& expect_kw(std::string_view kw) {
    if (!at_kw(kw)) error("expected '" + std::string(kw) + "'");
    return take();
  }
  std::string expect_identifier() {
    if (!at(TokenKind::Name) || is_keyword(cur().text)) error("expected identifier");
    return take().text;
  }
  bool accept_op(std::string_view op) {
    if (at_op(op)) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_kw(std::string_view kw) {
    if (at_kw(kw)) {
      ++pos_;
      return true;
    }
    return false;
  }

  SourceSpan span_of(const Token& t) const {
    return SourceSpan{path_, t.line, t.col, t.end_line, t.end_col};
  }
  SourceSpan span_from(const Token& first) const {
    const Token& last = prev();
    return SourceSpan{path_, first.line, first.col, last.end_line, last.end_col};
  }
  SourceSpan span_between(const SourceSpan& a, const Token& last) const {
    return SourceSpan{path_, a.start_line, a.start_col, last.end_line, last.end_col};
  }

  static ExprPtr make(ExprKind k, SourceSpan s) { return std::make_unique<Expr>(k, std::move(s)); }

  // --- statements ----------------------------------------------------------

  void parse_statement(Body& out) {
    const Token& t = cur();
    if (t.kind == TokenKind::Indent) error("unexpected indent");
    if (t.kind == TokenKind::Name) {
      if (t.text == "if") return out.push_back(parse_if());
      if (t.text == "while") return out.push_back(parse_while());
      if (t.text == "for") return out.push_back(parse_for(false));
      if (t.text == "try") return out.push_back(parse_try());
      if (t.text == "with") return out.push_back(parse_with(false));
      if (t.text == "def") return out.push_back(parse_funcdef({}, false, t));
      if (t.text == "class") return out.push_back(parse_classdef({}, t));
      if (t.text == "async" && peek_tok(1).kind == TokenKind::Name) {
        const Token& first = t;
        ++pos_;
        if (at_kw("def")) return out.push_back(parse_funcdef({}, true, first));
        if (at_kw("for")) return out.push_back(parse_for(true));
        if (at_kw("with")) return out.push_back(parse_with(true));
        error("invalid syntax after 'async'");
      }
    }
    if (t.is_op("@")) return out.push_back(parse_decorated());
    parse_simple_statements(out);
  }

  void parse_simple_statements(Body& out) {
    while (true) {
      out.push_back(parse_small_statement());
      if (accept_op(";")) {
        if (at(TokenKind::Newline)) break;
        continue;
      }
      break;
    }
    if (!at(TokenKind::Newline)) {
      if (out.back()->kind == StmtKind::Expr && out.back()->value->kind == ExprKind::Name &&
          (out.back()->value->text == "print" || out.back()->value->text == "exec")) {
        error("Missing parentheses in call to '" + out.back()->value->text + "'");
      }
      error("invalid syntax");
    }
    ++pos_;
  }

  Body parse_suite() {
    expect_op(":");
    Body body;
    if (!at(TokenKind::Newline)) {
      parse_simple_statements(body);
      return body;
    }
    ++pos_;
    if (!at(TokenKind::Indent)) error("expected an indented block");
    ++pos_;
    while (!at(TokenKind::Dedent) && !at(TokenKind::EndMarker)) {
      if (at(TokenKind::Newline)) {
        ++pos_;
        continue;
      }
      parse_statement(body);
    }
    if (at(TokenKind::Dedent)) ++pos_;
    return body;
  }

  static SourceSpan body_end(const SourceSpan& start, const Body& body) {
    if (body.empty()) return start;
    return cover(start, body.back()->span);
  }

  StmtPtr parse_if() {
    const Token& first = take();  // if / elif
    auto s = std::make_unique<Stmt>(StmtKind::If, span_of(first));
    s->value = parse_namedexpr_test();
    s->body = parse_suite();
    s->span = body_end(s->span, s->body);
    if (at_kw("elif")) {
      s->orelse.push_back(parse_if());
      s->span = cover(s->span, s->orelse.back()->span);
    } else if (accept_kw("else")) {
      s->orelse = parse_suite();
      s->span = body_end(s->span, s->orelse);
    }
    return s;
  }

  StmtPtr parse_while() {
    const Token& first = take();
    auto s = std::make_unique<Stmt>(StmtKind::While, span_of(first));
    s->value = parse_namedexpr_test();
    s->body = parse_suite();
    s->span = body_end(s->span, s->body);
    if (accept_kw("else")) {
      s->orelse = parse_suite();
      s->span = body_end(s->span, s->orelse);
    }
    return s;
  }

  StmtPtr parse_for(bool is_async) {
    const Token& first = is_async ? prev() : cur();
    expect_kw("for");
    auto s = std::make_unique<Stmt>(StmtKind::For, span_of(first));
    s->is_async = is_async;
    s->targets.push_back(parse_exprlist());
    expect_kw("in");
    s->value = parse_testlist();
    s->body = parse_suite();
    s->span = body_end(s->span, s->body);
    if (accept_kw("else")) {
      s->orelse = parse_suite();
      s->span = body_end(s->span, s->orelse);
    }
    return s;
  }

  StmtPtr parse_try() {
    const Token& first = take();
    auto s = std::make_unique<Stmt>(StmtKind::Try, span_of(first));
    s->body = parse_suite();
    s->span = body_end(s->span, s->body);
    while (at_kw("except")) {
      const Token& ex = take();
      Handler h;
      h.span = span_of(ex);
      if (!at_op(":")) {
        h.type = parse_test();
        if (accept_kw("as")) h.name = expect_identifier();
        else if (accept_op(",")) error("multiple exception types must be parenthesized");
      }
      h.body = parse_suite();
      h.span = body_end(h.span, h.body);
      s->span = cover(s->span, h.span);
      s->handlers.push_back(std::move(h));
    }
    if (accept_kw("else")) {
      s->orelse = parse_suite();
      s->span = body_end(s->span, s->orelse);
    }
    if (accept_kw("finally")) {
      s->finalbody = parse_suite();
      s->span = body_end(s->span, s->finalbody);
    }
    if (s->handlers.empty() && s->finalbody.empty()) error("expected 'except' or 'finally' block");
    return s;
  }

  StmtPtr parse_with(bool is_async) {
    const Token& first = is_async ? prev() : cur();
    expect_kw("with");
    auto s = std::make_unique<Stmt>(StmtKind::With, span_of(first));
    s->is_async = is_async;
    do {
      WithItem item;
      item.context = parse_test();
      if (accept_kw("as")) item.target = parse_expr();
      s->items.push_back(std::move(item));
    } while (accept_op(","));
    s->body = parse_suite();
    s->span = body_end(s->span, s->body);
    return s;
  }

  StmtPtr parse_decorated() {
    const Token& first = cur();
    std::vector<ExprPtr> decorators;
    while (accept_op("@")) {
      decorators.push_back(parse_namedexpr_test());
      if (!at(TokenKind::Newline)) error("invalid syntax");
      ++pos_;
    }
    if (at_kw("def")) return parse_funcdef(std::move(decorators), false, first);
    if (at_kw("class")) return parse_classdef(std::move(decorators), first);
    if (at_kw("async") && peek_tok(1).is_name("def")) {
      ++pos_;
      return parse_funcdef(std::move(decorators), true, first);
    }
    error("expected function or class after decorator");
  }

  StmtPtr parse_funcdef(std::vector<ExprPtr> decorators, bool is_async, const Token& first) {
    expect_kw("def");
    auto s = std::make_unique<Stmt>(StmtKind::FunctionDef, span_of(first));
    s->is_async = is_async;
    s->decorators = std::move(decorators);
    s->name = expect_identifier();
    expect_op("(");
    s->params = parse_params(")", true);
    expect_op(")");
    if (accept_op("->")) s->extra = parse_test();
    s->body = parse_suite();
    s->span = body_end(s->span, s->body);
    return s;
  }

  StmtPtr parse_classdef(std::vector<ExprPtr> decorators, const Token& first) {
    expect_kw("class");
    auto s = std::make_unique<Stmt>(StmtKind::ClassDef, span_of(first));
    s->decorators = std::move(decorators);
    s->name = expect_identifier();
    if (accept_op("(")) {
      std::vector<ExprPtr> args;
      std::vector<Keyword> kws;
      parse_arglist(args, kws);
      expect_op(")");
      s->bases = std::move(args);
      s->class_keywords = std::move(kws);
    }
    s->body = parse_suite();
    s->span = body_end(s->span, s->body);
    return s;
  }

  /// Parameter list for `def` (annotations allowed) or `lambda`.
  std::vector<Param> parse_params(std::string_view closer, bool annotations) {
    std::vector<Param> params;
    bool seen_star = false;
    while (!at_op(closer)) {
      if (accept_op("/")) {
        if (!accept_op(",")) break;
        continue;
      }
      Param p;
      const Token& first = cur();
      if (accept_op("**")) {
        p.kind = Param::Kind::VarKeywords;
      } else if (accept_op("*")) {
        seen_star = true;
        if (at_op(",") || at_op(closer)) {
          // bare `*`: keyword-only marker
          if (!accept_op(",")) break;
          continue;
        }
        p.kind = Param::Kind::VarArgs;
      } else if (seen_star) {
        p.kind = Param::Kind::KeywordOnly;
      }
      p.name = expect_identifier();
      if (annotations && accept_op(":")) p.annotation = parse_test();
      if (accept_op("=")) p.default_value = parse_test();
      p.span = span_from(first);
      params.push_back(std::move(p));
      if (!accept_op(",")) break;
    }
    return params;
  }

  StmtPtr parse_small_statement() {
    const Token& first = cur();
    if (first.kind == TokenKind::Name) {
      const std::string& w = first.text;
      if (w == "pass" || w == "break" || w == "continue") {
        ++pos_;
        auto kind = w == "pass" ? StmtKind::Pass : w == "break" ? StmtKind::Break : StmtKind::Continue;
        return std::make_unique<Stmt>(kind, span_of(first));
      }
      if (w == "return") {
        ++pos_;
        auto s = std::make_unique<Stmt>(StmtKind::Return, span_of(first));
        if (!at(TokenKind::Newline) && !at_op(";")) s->value = parse_testlist_star();
        s->span = span_from(first);
        return s;
      }
      if (w == "raise") {
        ++pos_;
        auto s = std::make_unique<Stmt>(StmtKind::Raise, span_of(first));
        if (!at(TokenKind::Newline) && !at_op(";")) {
          s->value = parse_test();
          if (accept_kw("from")) s->extra = parse_test();
          else if (at_op(",")) error("invalid syntax");  // Python 2 raise E, msg
        }
        s->span = span_from(first);
        return s;
      }
      if (w == "global" || w == "nonlocal") {
        ++pos_;
        auto s = std::make_unique<Stmt>(w == "global" ? StmtKind::Global : StmtKind::Nonlocal,
                                        span_of(first));
        do {
          const Token& nt = cur();
          Alias a;
          a.name = expect_identifier();
          a.span = span_of(nt);
          s->names.push_back(std::move(a));
        } while (accept_op(","));
        s->span = span_from(first);
        return s;
      }
      if (w == "del") {
        ++pos_;
        auto s = std::make_unique<Stmt>(StmtKind::Delete, span_of(first));
        s->targets.push_back(parse_exprlist());
        s->span = span_from(first);
        return s;
      }
      if (w == "assert") {
        ++pos_;
        auto s = std::make_unique<Stmt>(StmtKind::Assert, span_of(first));
        s->value = parse_test();
        if (accept_op(",")) s->extra = parse_test();
        s->span = span_from(first);
        return s;
      }
      if (w == "import") return parse_import();
      if (w == "from") return parse_from_import();
    }
    return parse_expr_statement();
  }

  std::string parse_dotted_name() {
    std::string name = expect_identifier();
    while (accept_op(".")) name += "." + expect_identifier();
    return name;
  }

  StmtPtr parse_import() {
    const Token& first = take();
    auto s = std::make_unique<Stmt>(StmtKind::Import, span_of(first));
    do {
      const Token& nt = cur();
      Alias a;
      a.name = parse_dotted_name();
      if (accept_kw("as")) a.asname = expect_identifier();
      a.span = span_from(nt);
      s->names.push_back(std::move(a));
    } while (accept_op(","));
    s->span = span_from(first);
    return s;
  }

  StmtPtr parse_from_import() {
    const Token& first = take();
    auto s = std::make_unique<Stmt>(StmtKind::ImportFrom, span_of(first));
    while (at_op(".") || at_op("...")) s->level += static_cast<int>(take().text.size());
    if (!at_kw("import")) s->name = parse_dotted_name();
    else if (s->level == 0) error("invalid syntax");
    expect_kw("import");
    if (accept_op("*")) {
      s->star_import = true;
    } else {
      bool paren = accept_op("(");
      do {
        if (paren && at_op(")")) break;
        const Token& nt = cur();
        Alias a;
        a.name = expect_identifier();
        if (accept_kw("as")) a.asname = expect_identifier();
        a.span = span_from(nt);
        s->names.push_back(std::move(a));
      } while (accept_op(","));
      if (paren) expect_op(")");
    }
    s->span = span_from(first);
    return s;
  }

  StmtPtr parse_expr_statement() {
    const Token& first = cur();
    ExprPtr lhs = parse_testlist_star();
    static constexpr std::array<std::string_view, 13> kAug = {
        "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@="};
    for (auto op : kAug) {
      if (at_op(op)) {
        ++pos_;
        auto s = std::make_unique<Stmt>(StmtKind::AugAssign, span_of(first));
        s->op = std::string(op.substr(0, op.size() - 1));
        s->targets.push_back(std::move(lhs));
        s->value = at_kw("yield") ? parse_yield() : parse_testlist();
        s->span = span_from(first);
        return s;
      }
    }
    if (at_op(":") ) {
      ++pos_;
      auto s = std::make_unique<Stmt>(StmtKind::AnnAssign, span_of(first));
      s->targets.push_back(std::move(lhs));
      s->extra = parse_test();
      if (accept_op("=")) s->value = at_kw("yield") ? parse_yield() : parse_testlist_star();
      s->span = span_from(first);
      return s;
    }
    if (at_op("=")) {
      auto s = std::make_unique<Stmt>(StmtKind::Assign, span_of(first));
      std::vector<ExprPtr> chain;
      chain.push_back(std::move(lhs));
      while (accept_op("=")) {
        chain.push_back(at_kw("yield") ? parse_yield() : parse_testlist_star());
      }
      s->value = std::move(chain.back());
      chain.pop_back();
      for (auto& t : chain) {
        check_target(*t);
        s->targets.push_back(std::move(t));
      }
      s->span = span_from(first);
      return s;
    }
    auto s = std::make_unique<Stmt>(StmtKind::Expr, span_of(first));
    s->value = std::move(lhs);
    s->span = span_from(first);
    return s;
  }

  void check_target(const Expr& e) const {
    switch (e.kind) {
      case ExprKind::Name:
      case ExprKind::Attribute:
      case ExprKind::Subscript:
        return;
      case ExprKind::Tuple:
      case ExprKind::List:
        for (const auto& c : e.children) check_target(*c);
        return;
      case ExprKind::Starred:
        check_target(*e.children[0]);
        return;
      default:
        throw SyntaxError{Diagnostic{e.span.start_line, e.span.start_col, "cannot assign to expression"}};
    }
  }

  // --- expressions ---------------------------------------------------------

  ExprPtr parse_yield() {
    const Token& first = take();
    if (accept_kw("from")) {
      auto e = make(ExprKind::YieldFrom, span_of(first));
      e->children.push_back(parse_test());
      e->span = span_from(first);
      return e;
    }
    auto e = make(ExprKind::Yield, span_of(first));
    if (!at_op(")") && !at(TokenKind::Newline) && !at_op(";") && !at_op("=") && !at_op("]") &&
        !at_op("}")) {
      e->children.push_back(parse_testlist_star());
    }
    e->span = span_from(first);
    return e;
  }

  bool at_expression_end() const {
    if (at(TokenKind::Newline) || at(TokenKind::EndMarker)) return true;
    static constexpr std::array<std::string_view, 10> kEnders = {")", "]", "}", "=", ":", ";",
                                                                 "+=", "-=", "*=", "/="};
    for (auto op : kEnders)
      if (at_op(op)) return true;
    if (at_kw("in") || at_kw("for") || at_kw("if") || at_kw("async")) return true;
    return at(TokenKind::Op) && cur().text.size() >= 2 && cur().text.back() == '=' &&
           cur().text != "==" && cur().text != "<=" && cur().text != ">=" && cur().text != "!=";
  }

  /// A comma-separated sequence; a single element without trailing comma is
  /// returned as itself.
  template <typename ElementFn>
  ExprPtr parse_sequence(ElementFn element) {
    const Token& first = cur();
    ExprPtr e = element();
    if (!at_op(",")) return e;
    auto tuple = make(ExprKind::Tuple, e->span);
    tuple->children.push_back(std::move(e));
    while (accept_op(",")) {
      if (at_expression_end()) break;
      tuple->children.push_back(element());
    }
    tuple->span = span_from(first);
    return tuple;
  }

  ExprPtr parse_star_or(bool named) {
    if (at_op("*")) {
      const Token& first = take();
      auto e = make(ExprKind::Starred, span_of(first));
      e->children.push_back(parse_expr());
      e->span = span_from(first);
      return e;
    }
    return named ? parse_namedexpr_test() : parse_test();
  }

  ExprPtr parse_testlist_star() {
    return parse_sequence([this] { return parse_star_or(false); });
  }
  ExprPtr parse_testlist() {
    return parse_sequence([this] { return parse_test(); });
  }
  ExprPtr parse_exprlist() {
    return parse_sequence([this] {
      if (at_op("*")) return parse_star_or(false);
      return parse_expr();
    });
  }

  ExprPtr parse_namedexpr_test() {
    ExprPtr e = parse_test();
    if (at_op(":=")) {
      if (e->kind != ExprKind::Name) error("cannot use assignment expressions with this target");
      ++pos_;
      auto n = make(ExprKind::NamedExpr, e->span);
      n->children.push_back(std::move(e));
      n->children.push_back(parse_test());
      n->span = cover(n->span, n->children[1]->span);
      return n;
    }
    return e;
  }

  ExprPtr parse_test() {
    if (at_kw("lambda")) return parse_lambda(true);
    ExprPtr body = parse_or_test();
    if (at_kw("if")) {
      // conditional expression; `if` inside comprehensions is handled by callers
      std::size_t save = pos_;
      ++pos_;
      ExprPtr test = parse_or_test();
      if (!at_kw("else")) {
        pos_ = save;
        return body;
      }
      ++pos_;
      ExprPtr orelse = parse_test();
      auto e = make(ExprKind::IfExp, cover(body->span, orelse->span));
      e->children.push_back(std::move(body));
      e->children.push_back(std::move(test));
      e->children.push_back(std::move(orelse));
      return e;
    }
    return body;
  }

  ExprPtr parse_test_nocond() {
    if (at_kw("lambda")) return parse_lambda(false);
    return parse_or_test();
  }

  ExprPtr parse_lambda(bool allow_cond) {
    const Token& first = take();
    auto e = make(ExprKind::Lambda, span_of(first));
    e->params = parse_params(":", false);
    expect_op(":");
    e->children.push_back(allow_cond ? parse_test() : parse_test_nocond());
    e->span = span_from(first);
    return e;
  }

  ExprPtr parse_or_test() {
    ExprPtr lhs = parse_and_test();
    if (!at_kw("or")) return lhs;
    auto e = make(ExprKind::BoolOp, lhs->span);
    e->text = "or";
    e->children.push_back(std::move(lhs));
    while (accept_kw("or")) e->children.push_back(parse_and_test());
    e->span = cover(e->span, e->children.back()->span);
    return e;
  }

  ExprPtr parse_and_test() {
    ExprPtr lhs = parse_not_test();
    if (!at_kw("and")) return lhs;
    auto e = make(ExprKind::BoolOp, lhs->span);
    e->text = "and";
    e->children.push_back(std::move(lhs));
    while (accept_kw("and")) e->children.push_back(parse_not_test());
    e->span = cover(e->span, e->children.back()->span);
    return e;
  }

  ExprPtr parse_not_test() {
    if (at_kw("not")) {
      const Token& first = take();
      auto e = make(ExprKind::UnaryOp, span_of(first));
      e->text = "not";
      e->children.push_back(parse_not_test());
      e->span = cover(e->span, e->children[0]->span);
      return e;
    }
    return parse_comparison();
  }

  bool take_comp_op(std::string& op) {
    static constexpr std::array<std::string_view, 6> kOps = {"<", ">", "==", ">=", "<=", "!="};
    for (auto o : kOps) {
      if (at_op(o)) {
        op = std::string(o);
        ++pos_;
        return true;
      }
    }
    if (at_kw("in")) {
      op = "in";
      ++pos_;
      return true;
    }
    if (at_kw("not") && peek_tok(1).is_name("in")) {
      op = "not in";
      pos_ += 2;
      return true;
    }
    if (at_kw("is")) {
      ++pos_;
      op = accept_kw("not") ? "is not" : "is";
      return true;
    }
    return false;
  }

  ExprPtr parse_comparison() {
    ExprPtr lhs = parse_expr();
    std::string op;
    if (!take_comp_op(op)) return lhs;
    auto e = make(ExprKind::Compare, lhs->span);
    e->children.push_back(std::move(lhs));
    do {
      e->ops.push_back(op);
      e->children.push_back(parse_expr());
    } while (take_comp_op(op));
    e->span = cover(e->span, e->children.back()->span);
    return e;
  }

  template <typename Next>
  ExprPtr parse_binary(std::initializer_list<std::string_view> ops, Next next) {
    ExprPtr lhs = next();
    while (true) {
      std::string_view found;
      for (auto op : ops) {
        if (at_op(op)) {
          found = op;
          break;
        }
      }
      if (found.empty()) return lhs;
      ++pos_;
      ExprPtr rhs = next();
      auto e = make(ExprKind::BinOp, cover(lhs->span, rhs->span));
      e->text = std::string(found);
      e->children.push_back(std::move(lhs));
      e->children.push_back(std::move(rhs));
      lhs = std::move(e);
    }
  }

  ExprPtr parse_expr() {
    return parse_binary({"|"}, [this] { return parse_xor(); });
  }
  ExprPtr parse_xor() {
    return parse_binary({"^"}, [this] { return parse_and(); });
  }
  ExprPtr parse_and() {
    return parse_binary({"&"}, [this] { return parse_shift(); });
  }
  ExprPtr parse_shift() {
    return parse_binary({"<<", ">>"}, [this] { return parse_arith(); });
  }
  ExprPtr parse_arith() {
    return parse_binary({"+", "-"}, [this] { return parse_term(); });
  }
  ExprPtr parse_term() {
    return parse_binary({"*", "@", "/", "%", "//"}, [this] { return parse_factor(); });
  }

  ExprPtr parse_factor() {
    if (at_op("+") || at_op("-") || at_op("~")) {
      const Token& first = take();
      auto e = make(ExprKind::UnaryOp, span_of(first));
      e->text = first.text;
      e->children.push_back(parse_factor());
      e->span = cover(e->span, e->children[0]->span);
      return e;
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base;
    if (at_kw("await")) {
      const Token& first = take();
      base = make(ExprKind::Await, span_of(first));
      base->children.push_back(parse_atom_expr());
      base->span = cover(base->span, base->children[0]->span);
    } else {
      base = parse_atom_expr();
    }
    if (at_op("**")) {
      ++pos_;
      ExprPtr rhs = parse_factor();
      auto e = make(ExprKind::BinOp, cover(base->span, rhs->span));
      e->text = "**";
      e->children.push_back(std::move(base));
      e->children.push_back(std::move(rhs));
      return e;
    }
    return base;
  }

  ExprPtr parse_atom_expr() {
    ExprPtr e = parse_atom();
    while (true) {
      if (at_op("(")) {
        ++pos_;
        auto call = make(ExprKind::Call, e->span);
        call->children.push_back(std::move(e));
        std::vector<ExprPtr> args;
        parse_arglist(args, call->keywords);
        for (auto& a : args) call->children.push_back(std::move(a));
        const Token& close = expect_op(")");
        call->span = span_between(call->span, close);
        e = std::move(call);
      } else if (at_op("[")) {
        ++pos_;
        auto sub = make(ExprKind::Subscript, e->span);
        sub->children.push_back(std::move(e));
        sub->children.push_back(parse_subscript_list());
        const Token& close = expect_op("]");
        sub->span = span_between(sub->span, close);
        e = std::move(sub);
      } else if (at_op(".")) {
        ++pos_;
        auto attr = make(ExprKind::Attribute, e->span);
        attr->text = expect_identifier();
        attr->span = span_between(attr->span, prev());
        attr->children.push_back(std::move(e));
        e = std::move(attr);
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_subscript() {
    const Token& first = cur();
    ExprPtr lower;
    if (!at_op(":")) {
      lower = parse_namedexpr_test();
      if (!at_op(":")) return lower;
    }
    ++pos_;  // ':'
    auto slice = make(ExprKind::Slice, span_of(first));
    slice->children.push_back(std::move(lower));
    ExprPtr upper;
    if (!at_op("]") && !at_op(",") && !at_op(":")) upper = parse_test();
    slice->children.push_back(std::move(upper));
    ExprPtr step;
    if (accept_op(":")) {
      if (!at_op("]") && !at_op(",")) step = parse_test();
    }
    slice->children.push_back(std::move(step));
    slice->span = span_from(first);
    return slice;
  }

  ExprPtr parse_subscript_list() {
    const Token& first = cur();
    ExprPtr e = parse_subscript();
    if (!at_op(",")) return e;
    auto tuple = make(ExprKind::Tuple, e->span);
    tuple->children.push_back(std::move(e));
    while (accept_op(",")) {
      if (at_op("]")) break;
      tuple->children.push_back(parse_subscript());
    }
    tuple->span = span_from(first);
    return tuple;
  }

  void parse_arglist(std::vector<ExprPtr>& args, std::vector<Keyword>& keywords) {
    while (!at_op(")")) {
      const Token& first = cur();
      if (accept_op("**")) {
        Keyword k;
        k.value = parse_test();
        k.span = span_from(first);
        keywords.push_back(std::move(k));
      } else if (at_op("*")) {
        args.push_back(parse_star_or(false));
      } else if (at(TokenKind::Name) && peek_tok(1).is_op("=") && !is_keyword(cur().text)) {
        Keyword k;
        k.name = take().text;
        ++pos_;
        k.value = parse_test();
        k.span = span_from(first);
        keywords.push_back(std::move(k));
      } else {
        ExprPtr value = parse_namedexpr_test();
        if (at_kw("for") || at_kw("async")) {
          value = parse_comprehension(ExprKind::GeneratorExp, std::move(value), nullptr, first);
        }
        args.push_back(std::move(value));
      }
      if (!accept_op(",")) break;
    }
  }

  ExprPtr parse_comprehension(ExprKind kind, ExprPtr elt, ExprPtr value, const Token& first) {
    auto e = make(kind, elt->span);
    e->children.push_back(std::move(elt));
    if (value) e->children.push_back(std::move(value));
    while (at_kw("for") || at_kw("async")) {
      accept_kw("async");
      expect_kw("for");
      Comprehension c;
      c.target = parse_exprlist();
      expect_kw("in");
      c.iter = parse_or_test();
      while (at_kw("if")) {
        ++pos_;
        c.ifs.push_back(parse_test_nocond());
      }
      e->generators.push_back(std::move(c));
    }
    e->span = span_from(first);
    return e;
  }

  ExprPtr parse_atom() {
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::Number: {
        ++pos_;
        auto e = make(ExprKind::Constant, span_of(t));
        e->text = t.text;
        return e;
      }
      case TokenKind::String:
        return parse_strings();
      case TokenKind::Name: {
        if (t.text == "None" || t.text == "True" || t.text == "False") {
          ++pos_;
          auto e = make(ExprKind::Constant, span_of(t));
          e->text = t.text;
          return e;
        }
        if (t.text == "yield") error("'yield' outside parentheses");
        if (is_keyword(t.text)) error("invalid syntax");
        ++pos_;
        auto e = make(ExprKind::Name, span_of(t));
        e->text = t.text;
        return e;
      }
      case TokenKind::Op:
        break;
      default:
        error("invalid syntax");
    }
    if (t.text == "...") {
      ++pos_;
      auto e = make(ExprKind::Constant, span_of(t));
      e->text = "...";
      return e;
    }
    if (t.text == "(") {
      const Token& open = take();
      if (at_op(")")) {
        ++pos_;
        return make(ExprKind::Tuple, span_from(open));
      }
      if (at_kw("yield")) {
        ExprPtr y = parse_yield();
        expect_op(")");
        return y;
      }
      ExprPtr first = parse_star_or(true);
      if (at_kw("for") || at_kw("async")) {
        ExprPtr gen = parse_comprehension(ExprKind::GeneratorExp, std::move(first), nullptr, open);
        expect_op(")");
        gen->span = span_from(open);
        return gen;
      }
      if (at_op(",")) {
        auto tuple = make(ExprKind::Tuple, span_of(open));
        tuple->children.push_back(std::move(first));
        while (accept_op(",")) {
          if (at_op(")")) break;
          tuple->children.push_back(parse_star_or(true));
        }
        expect_op(")");
        tuple->span = span_from(open);
        return tuple;
      }
      expect_op(")");
      return first;
    }
    if (t.text == "[") {
      const Token& open = take();
      auto list = make(ExprKind::List, span_of(open));
      if (!at_op("]")) {
        ExprPtr first = parse_star_or(true);
        if (at_kw("for") || at_kw("async")) {
          ExprPtr comp = parse_comprehension(ExprKind::ListComp, std::move(first), nullptr, open);
          expect_op("]");
          comp->span = span_from(open);
          return comp;
        }
        list->children.push_back(std::move(first));
        while (accept_op(",")) {
          if (at_op("]")) break;
          list->children.push_back(parse_star_or(true));
        }
      }
      expect_op("]");
      list->span = span_from(open);
      return list;
    }
    if (t.text == "{") {
      const Token& open = take();
      if (accept_op("}")) return make(ExprKind::Dict, span_from(open));
      ExprPtr key;
      ExprPtr value;
      bool is_dict = false;
      if (accept_op("**")) {
        is_dict = true;
        value = parse_expr();
      } else {
        key = parse_star_or(true);
        if (accept_op(":")) {
          is_dict = true;
          value = parse_test();
        }
      }
      if (is_dict) {
        if (key && (at_kw("for") || at_kw("async"))) {
          ExprPtr comp = parse_comprehension(ExprKind::DictComp, std::move(key), std::move(value), open);
          expect_op("}");
          comp->span = span_from(open);
          return comp;
        }
        auto dict = make(ExprKind::Dict, span_of(open));
        dict->children.push_back(std::move(key));
        dict->children.push_back(std::move(value));
        while (accept_op(",")) {
          if (at_op("}")) break;
          if (accept_op("**")) {
            dict->children.push_back(nullptr);
            dict->children.push_back(parse_expr());
          } else {
            dict->children.push_back(parse_test());
            expect_op(":");
            dict->children.push_back(parse_test());
          }
        }
        expect_op("}");
        dict->span = span_from(open);
        return dict;
      }
      if (at_kw("for") || at_kw("async")) {
        ExprPtr comp = parse_comprehension(ExprKind::SetComp, std::move(key), nullptr, open);
        expect_op("}");
        comp->span = span_from(open);
        return comp;
      }
      auto set = make(ExprKind::Set, span_of(open));
      set->children.push_back(std::move(key));
      while (accept_op(",")) {
        if (at_op("}")) break;
        set->children.push_back(parse_star_or(true));
      }
      expect_op("}");
      set->span = span_from(open);
      return set;
    }
    error("invalid syntax");
  }

  /// Adjacent string literals concatenate; any f-string part makes the
  /// result an FString whose children are the embedded expressions.
  ExprPtr parse_strings() {
    const Token& first = cur();
    std::vector<const Token*> parts;
    while (at(TokenKind::String)) parts.push_back(&take());
    bool any_f = false;
    for (const Token* p : parts) {
      std::size_t i = 0;
      while (i < p->text.size() && p->text[i] != '\'' && p->text[i] != '"') {
        if (p->text[i] == 'f' || p->text[i] == 'F') any_f = true;
        ++i;
      }
    }
    auto e = make(any_f ? ExprKind::FString : ExprKind::Constant, span_from(first));
    e->text = std::string(text_.substr(first.offset, prev().end_offset - first.offset));
    if (any_f) {
      for (const Token* p : parts) parse_fstring_part(*p, *e);
    }
    return e;
  }

  void parse_fstring_part(const Token& tok, Expr& out);

  std::string path_;
  std::string_view text_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

/// Finds `{expr}` fields of an f-string token and parses each expression
/// with positions mapped back into the enclosing file.
void Parser::parse_fstring_part(const Token& tok, Expr& out) {
  const std::string& s = tok.text;
  std::size_t i = 0;
  bool is_f = false;
  while (i < s.size() && s[i] != '\'' && s[i] != '"') {
    if (s[i] == 'f' || s[i] == 'F') is_f = true;
    ++i;
  }
  if (!is_f) return;
  char quote = s[i];
  std::size_t qlen = (i + 2 < s.size() && s[i + 1] == quote && s[i + 2] == quote) ? 3 : 1;
  std::size_t body_begin = i + qlen;
  std::size_t body_end = s.size() >= qlen ? s.size() - qlen : s.size();

  auto position_of = [&](std::size_t index) {
    int line = tok.line;
    int col = tok.col;
    for (std::size_t k = 0; k < index; ++k) {
      if (s[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    return std::pair<int, int>{line, col};
  };

  std::size_t k = body_begin;
  while (k < body_end) {
    if (s[k] == '{') {
      if (k + 1 < body_end && s[k + 1] == '{') {
        k += 2;
        continue;
      }
      std::size_t start = k + 1;
      int depth = 0;
      std::size_t j = start;
      std::size_t expr_end = std::string::npos;
      char in_quote = 0;
      for (; j < body_end; ++j) {
        char c = s[j];
        if (in_quote) {
          if (c == in_quote) in_quote = 0;
          continue;
        }
        if (c == '\'' || c == '"') in_quote = c;
        else if (c == '(' || c == '[' || c == '{') ++depth;
        else if ((c == ')' || c == ']' || c == '}') && depth > 0) --depth;
        else if (depth == 0 && expr_end == std::string::npos &&
                 ((c == '!' && j + 1 < body_end && s[j + 1] != '=') || c == ':' || c == '=' )) {
          if (c == '=' && j + 1 < body_end && s[j + 1] == '=') {
            ++j;
            continue;
          }
          expr_end = j;
        } else if (depth == 0 && c == '}') {
          break;
        }
      }
      if (j >= body_end) throw SyntaxError{Diagnostic{tok.line, tok.col, "f-string: expecting '}'"}};
      if (expr_end == std::string::npos) expr_end = j;
      std::string expr_text = s.substr(start, expr_end - start);
      auto [line, col] = position_of(start);
      LexResult lexed = tokenize(expr_text, false);
      if (lexed.error) {
        throw SyntaxError{Diagnostic{line, col, "f-string: " + lexed.error->message}};
      }
      for (Token& t : lexed.tokens) {
        if (t.line == 1) {
          t.col += col - 1;
          t.end_col += t.end_line == 1 ? col - 1 : 0;
        } else if (t.end_line == 1) {
          t.end_col += col - 1;
        }
        t.line += line - 1;
        t.end_line += line - 1;
        t.offset += tok.offset + start;
        t.end_offset += tok.offset + start;
      }
      bool only_ws = std::all_of(expr_text.begin(), expr_text.end(),
                                 [](char c) { return c == ' ' || c == '\t' || c == '\n'; });
      if (only_ws) throw SyntaxError{Diagnostic{line, col, "f-string: empty expression not allowed"}};
      Parser sub(std::move(lexed.tokens), path_, text_);
      out.children.push_back(sub.parse_standalone_expression());
      // skip the format spec, which may itself contain fields
      std::size_t spec = expr_end;
      int brace = 0;
      while (spec < body_end) {
        if (s[spec] == '{') ++brace;
        if (s[spec] == '}') {
          if (brace == 0) break;
          --brace;
        }
        ++spec;
      }
      k = spec + 1;
      continue;
    }
    ++k;
  }
}

}  // namespace

ParseResult parse_module(std::string_view text, const std::string& path) {
  std::size_t bad = find_invalid_utf8(text);
  if (bad != std::string_view::npos) {
    throw EncodingError(path + ": invalid UTF-8 at byte " + std::to_string(bad));
  }
  // A UTF-8 byte order mark is not part of the program text.
  std::string_view body = text;
  ParseResult result;
  LexResult lexed = tokenize(body, false);
  if (lexed.error) {
    // An earlier grammar error wins over an unterminated bracket at EOF.
    Diagnostic first = *lexed.error;
    try {
      Parser parser(tokenize(body, true).tokens, path, body);
      parser.parse_file();
    } catch (const SyntaxError& e) {
      if (std::pair(e.diag.line, e.diag.col) < std::pair(first.line, first.col)) first = e.diag;
    }
    result.diagnostics.push_back(first);
    return result;
  }
  try {
    Parser parser(std::move(lexed.tokens), path, body);
    result.module = parser.parse_file();
  } catch (const SyntaxError& e) {
    result.diagnostics.push_back(e.diag);
  }
  return result;
}

}  // namespace turtleflow
