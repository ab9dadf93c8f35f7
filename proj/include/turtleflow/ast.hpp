#pragma once

#include <memory>
#include <string>
#include <vector>

#include "turtleflow/source.hpp"

namespace turtleflow::ast {

enum class ExprKind {
  Name,
  Constant,   // numbers, strings, None/True/False, ellipsis; `text` holds the literal
  Attribute,  // children[0] . text
  Subscript,  // children[0] [ children[1] ]
  Slice,      // lower:upper:step, absent parts are null children
  Call,       // children[0] ( args..., keywords... )
  BinOp,      // children[0] text children[1]
  UnaryOp,    // text children[0]
  BoolOp,     // children joined by `text` (and/or)
  Compare,    // children[0] ops[0] children[1] ops[1] ...
  IfExp,      // children: body, test, orelse
  Lambda,
  NamedExpr,  // children[0] := children[1]
  List,
  Tuple,
  Set,
  Dict,       // children alternate key, value; a null key is `**mapping`
  ListComp,
  SetComp,
  GeneratorExp,
  DictComp,   // children[0] key, children[1] value
  Starred,
  Yield,      // children[0] may be null
  YieldFrom,
  Await,
  FString,    // children are the embedded expressions
};

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;
using Body = std::vector<StmtPtr>;

struct Keyword {
  std::string name;  // empty for `**kwargs`
  ExprPtr value;
  SourceSpan span;
};

struct Comprehension {
  ExprPtr target;
  ExprPtr iter;
  std::vector<ExprPtr> ifs;
};

struct Param {
  enum class Kind { Positional, VarArgs, KeywordOnly, VarKeywords };
  std::string name;
  Kind kind = Kind::Positional;
  ExprPtr default_value;
  ExprPtr annotation;
  SourceSpan span;
};

struct Expr {
  ExprKind kind;
  SourceSpan span;
  std::string text;
  std::vector<ExprPtr> children;
  std::vector<std::string> ops;        // Compare operators
  std::vector<Keyword> keywords;       // Call
  std::vector<Comprehension> generators;
  std::vector<Param> params;           // Lambda

  Expr(ExprKind k, SourceSpan s) : kind(k), span(std::move(s)) {}
};

enum class StmtKind {
  Expr,
  Assign,     // targets = value (chained targets allowed)
  AugAssign,
  AnnAssign,
  Return,
  If,
  While,
  For,
  Break,
  Continue,
  Pass,
  FunctionDef,
  ClassDef,
  Import,
  ImportFrom,
  Assert,
  With,
  Try,
  Raise,
  Global,
  Nonlocal,
  Delete,
};

struct Alias {
  std::string name;    // dotted name being imported
  std::string asname;  // empty when absent
  SourceSpan span;
};

struct WithItem {
  ExprPtr context;
  ExprPtr target;  // may be null
};

struct Handler {
  ExprPtr type;  // may be null
  std::string name;
  Body body;
  SourceSpan span;
};

struct Stmt {
  StmtKind kind;
  SourceSpan span;
  std::vector<ExprPtr> targets;  // Assign targets, For target, Delete targets
  ExprPtr value;                 // Assign/AugAssign/Return/Expr value, If/While test, For iter
  ExprPtr extra;                 // Assert msg, AnnAssign annotation, Raise cause
  std::string op;                // AugAssign operator
  Body body;
  Body orelse;
  Body finalbody;
  std::vector<Handler> handlers;
  std::vector<WithItem> items;
  std::string name;              // def/class name, ImportFrom module
  int level = 0;                 // relative import dots
  std::vector<Param> params;
  std::vector<ExprPtr> decorators;
  std::vector<ExprPtr> bases;    // ClassDef positional bases
  std::vector<Keyword> class_keywords;
  std::vector<Alias> names;      // Import/ImportFrom aliases, Global/Nonlocal names
  bool star_import = false;
  bool is_async = false;

  Stmt(StmtKind k, SourceSpan s) : kind(k), span(std::move(s)) {}
};

struct Module {
  std::string path;
  SourceSpan span;
  Body body;
};

/// Calls `visit` for every expression in `module`, parents before children,
/// in source order.
template <typename Visitor>
void walk_exprs(const Module& module, Visitor&& visit);

/// Calls `visit(stmt, depth)` for every statement, parents first.
template <typename Visitor>
void walk_stmts(const Module& module, Visitor&& visit);

namespace detail {

template <typename V>
void walk_expr(const Expr* e, V& visit);

template <typename V>
void walk_param(const Param& p, V& visit) {
  if (p.annotation) walk_expr(p.annotation.get(), visit);
  if (p.default_value) walk_expr(p.default_value.get(), visit);
}

template <typename V>
void walk_expr(const Expr* e, V& visit) {
  if (e == nullptr) return;
  visit(*e);
  switch (e->kind) {
    case ExprKind::Lambda:
      for (const auto& p : e->params) walk_param(p, visit);
      for (const auto& c : e->children) walk_expr(c.get(), visit);
      return;
    case ExprKind::ListComp:
    case ExprKind::SetComp:
    case ExprKind::GeneratorExp:
    case ExprKind::DictComp:
      // Source order: element first, then generators.
      for (const auto& c : e->children) walk_expr(c.get(), visit);
      for (const auto& g : e->generators) {
        walk_expr(g.target.get(), visit);
        walk_expr(g.iter.get(), visit);
        for (const auto& i : g.ifs) walk_expr(i.get(), visit);
      }
      return;
    case ExprKind::Call:
      for (const auto& c : e->children) walk_expr(c.get(), visit);
      for (const auto& k : e->keywords) walk_expr(k.value.get(), visit);
      return;
    default:
      for (const auto& c : e->children) walk_expr(c.get(), visit);
      return;
  }
}

template <typename V>
void walk_body_exprs(const Body& body, V& visit);

template <typename V>
void walk_stmt_exprs(const Stmt& s, V& visit) {
  for (const auto& d : s.decorators) walk_expr(d.get(), visit);
  for (const auto& p : s.params) walk_param(p, visit);
  for (const auto& b : s.bases) walk_expr(b.get(), visit);
  for (const auto& k : s.class_keywords) walk_expr(k.value.get(), visit);
  switch (s.kind) {
    case StmtKind::For:
      for (const auto& t : s.targets) walk_expr(t.get(), visit);
      walk_expr(s.value.get(), visit);
      break;
    case StmtKind::Assign:
      for (const auto& t : s.targets) walk_expr(t.get(), visit);
      walk_expr(s.value.get(), visit);
      break;
    case StmtKind::AnnAssign:
      for (const auto& t : s.targets) walk_expr(t.get(), visit);
      walk_expr(s.extra.get(), visit);
      walk_expr(s.value.get(), visit);
      break;
    default:
      for (const auto& t : s.targets) walk_expr(t.get(), visit);
      walk_expr(s.value.get(), visit);
      walk_expr(s.extra.get(), visit);
      break;
  }
  for (const auto& item : s.items) {
    walk_expr(item.context.get(), visit);
    walk_expr(item.target.get(), visit);
  }
  walk_body_exprs(s.body, visit);
  for (const auto& h : s.handlers) {
    walk_expr(h.type.get(), visit);
    walk_body_exprs(h.body, visit);
  }
  walk_body_exprs(s.orelse, visit);
  walk_body_exprs(s.finalbody, visit);
}

template <typename V>
void walk_body_exprs(const Body& body, V& visit) {
  for (const auto& s : body) walk_stmt_exprs(*s, visit);
}

template <typename V>
void walk_body_stmts(const Body& body, V& visit, int depth) {
  for (const auto& s : body) {
    visit(*s, depth);
    walk_body_stmts(s->body, visit, depth + 1);
    for (const auto& h : s->handlers) walk_body_stmts(h.body, visit, depth + 1);
    walk_body_stmts(s->orelse, visit, depth + 1);
    walk_body_stmts(s->finalbody, visit, depth + 1);
  }
}

}  // namespace detail

template <typename Visitor>
void walk_exprs(const Module& module, Visitor&& visit) {
  detail::walk_body_exprs(module.body, visit);
}

template <typename Visitor>
void walk_stmts(const Module& module, Visitor&& visit) {
  detail::walk_body_stmts(module.body, visit, 0);
}

}  // namespace turtleflow::ast
