#include <algorithm>
#include <array>
#include <map>
#include <set>

#include "turtleflow/frontend.hpp"

namespace turtleflow {

using namespace ast;
using ir::Instr;
using ir::kNoReg;
using ir::Opcode;
using ir::Reg;

namespace {

constexpr std::array<std::string_view, 15> kIdentityBuiltins = {
    "repr", "len", "print", "isinstance", "Warning", "UserWarning", "DeprecationWarning",
    "PendingDeprecationWarning", "SyntaxWarning", "RuntimeWarning", "FutureWarning",
    "ImportWarning", "UnicodeWarning", "BytesWarning", "ResourceWarning"};

// Names that evaluate to nothing interesting for the analysis.
constexpr std::array<std::string_view, 5> kOpaqueBuiltins = {"object", "__name__", "__file__",
                                                             "__doc__", "NotImplemented"};

struct Scope {
  enum class Kind { Module, Function, Class };
  Kind kind = Kind::Module;
  Scope* parent = nullptr;
  std::set<std::string> locals;
  std::set<std::string> globals;
  std::set<std::string> nonlocals;
  std::set<std::string> used;
  std::set<std::string> captured;
  std::vector<Scope*> children;
  int proc = -1;
};

/// First pass: which names each scope binds and uses.
class ScopeBuilder {
 public:
  std::map<const void*, std::unique_ptr<Scope>> scopes;
  std::set<std::string> module_globals;

  Scope* build(const Module& m) {
    Scope* root = make(nullptr, Scope::Kind::Module, nullptr);
    body(m.body, root);
    for (const auto& [key, scope] : scopes) {
      for (const auto& g : scope->globals) module_globals.insert(g);
    }
    for (const auto& l : root->locals) module_globals.insert(l);
    resolve_captures(root);
    return root;
  }

 private:
  Scope* make(const void* key, Scope::Kind kind, Scope* parent) {
    auto s = std::make_unique<Scope>();
    s->kind = kind;
    s->parent = parent;
    Scope* raw = s.get();
    if (parent) parent->children.push_back(raw);
    scopes[key] = std::move(s);
    return raw;
  }

  static void bind(Scope* s, const std::string& name) {
    if (s->kind == Scope::Kind::Module || !s->globals.count(name)) s->locals.insert(name);
  }

  void bind_target(const Expr& t, Scope* s) {
    switch (t.kind) {
      case ExprKind::Name:
        bind(s, t.text);
        return;
      case ExprKind::Tuple:
      case ExprKind::List:
        for (const auto& c : t.children) bind_target(*c, s);
        return;
      case ExprKind::Starred:
        bind_target(*t.children[0], s);
        return;
      default:
        expr(t, s);  // attribute/subscript targets read their base
    }
  }

  void expr(const Expr& e, Scope* s) {
    switch (e.kind) {
      case ExprKind::Name:
        s->used.insert(e.text);
        return;
      case ExprKind::Lambda: {
        for (const auto& p : e.params)
          if (p.default_value) expr(*p.default_value, s);
        Scope* inner = make(&e, Scope::Kind::Function, s);
        for (const auto& p : e.params) inner->locals.insert(p.name);
        expr(*e.children[0], inner);
        return;
      }
      case ExprKind::NamedExpr:
        bind(s, e.children[0]->text);
        expr(*e.children[1], s);
        return;
      case ExprKind::ListComp:
      case ExprKind::SetComp:
      case ExprKind::GeneratorExp:
      case ExprKind::DictComp:
        // Comprehension targets live in their own scope; the lowering maps
        // them to fresh registers, so only uses are recorded here.
        for (const auto& c : e.children) expr(*c, s);
        for (const auto& g : e.generators) {
          expr(*g.iter, s);
          for (const auto& i : g.ifs) expr(*i, s);
        }
        return;
      default:
        break;
    }
    for (const auto& c : e.children)
      if (c) expr(*c, s);
    for (const auto& k : e.keywords) expr(*k.value, s);
  }

  void body(const Body& stmts, Scope* s) {
    for (const auto& st : stmts) stmt(*st, s);
  }

  void stmt(const Stmt& st, Scope* s) {
    switch (st.kind) {
      case StmtKind::FunctionDef: {
        for (const auto& d : st.decorators) expr(*d, s);
        for (const auto& p : st.params) {
          if (p.default_value) expr(*p.default_value, s);
          if (p.annotation) expr(*p.annotation, s);
        }
        if (st.extra) expr(*st.extra, s);
        bind(s, st.name);
        Scope* inner = make(&st, Scope::Kind::Function, s);
        for (const auto& p : st.params) inner->locals.insert(p.name);
        pre_declare(st.body, inner);
        body(st.body, inner);
        return;
      }
      case StmtKind::ClassDef: {
        for (const auto& d : st.decorators) expr(*d, s);
        for (const auto& b : st.bases) expr(*b, s);
        for (const auto& k : st.class_keywords) expr(*k.value, s);
        bind(s, st.name);
        Scope* inner = make(&st, Scope::Kind::Class, s);
        pre_declare(st.body, inner);
        body(st.body, inner);
        return;
      }
      case StmtKind::Global:
        for (const auto& n : st.names) {
          s->globals.insert(n.name);
          s->locals.erase(n.name);
        }
        return;
      case StmtKind::Nonlocal:
        for (const auto& n : st.names) {
          s->nonlocals.insert(n.name);
          s->locals.erase(n.name);
        }
        return;
      case StmtKind::Import:
        for (const auto& a : st.names) {
          bind(s, a.asname.empty() ? a.name.substr(0, a.name.find('.')) : a.asname);
        }
        return;
      case StmtKind::ImportFrom:
        for (const auto& a : st.names) bind(s, a.asname.empty() ? a.name : a.asname);
        return;
      case StmtKind::Assign:
      case StmtKind::AugAssign:
      case StmtKind::AnnAssign:
      case StmtKind::For:
      case StmtKind::Delete:
        if (st.value) expr(*st.value, s);
        if (st.extra) expr(*st.extra, s);
        for (const auto& t : st.targets) {
          if (st.kind == StmtKind::Delete) expr(*t, s);
          else bind_target(*t, s);
          if (st.kind == StmtKind::AugAssign) expr(*t, s);
        }
        body(st.body, s);
        body(st.orelse, s);
        return;
      case StmtKind::With:
        for (const auto& item : st.items) {
          expr(*item.context, s);
          if (item.target) bind_target(*item.target, s);
        }
        body(st.body, s);
        return;
      case StmtKind::Try:
        body(st.body, s);
        for (const auto& h : st.handlers) {
          if (h.type) expr(*h.type, s);
          if (!h.name.empty()) bind(s, h.name);
          body(h.body, s);
        }
        body(st.orelse, s);
        body(st.finalbody, s);
        return;
      default:
        if (st.value) expr(*st.value, s);
        if (st.extra) expr(*st.extra, s);
        for (const auto& t : st.targets) expr(*t, s);
        body(st.body, s);
        body(st.orelse, s);
        return;
    }
  }

  // `global`/`nonlocal` apply to the whole scope regardless of position.
  void pre_declare(const Body& stmts, Scope* s) {
    for (const auto& st : stmts) {
      if (st->kind == StmtKind::Global)
        for (const auto& n : st->names) s->globals.insert(n.name);
      if (st->kind == StmtKind::Nonlocal)
        for (const auto& n : st->names) s->nonlocals.insert(n.name);
      if (st->kind == StmtKind::FunctionDef || st->kind == StmtKind::ClassDef) continue;
      pre_declare(st->body, s);
      pre_declare(st->orelse, s);
      pre_declare(st->finalbody, s);
      for (const auto& h : st->handlers) pre_declare(h.body, s);
    }
  }

  static Scope* defining_function(Scope* from, const std::string& name) {
    for (Scope* p = from->parent; p != nullptr; p = p->parent) {
      if (p->kind != Scope::Kind::Function) continue;
      if (p->locals.count(name)) return p;
    }
    return nullptr;
  }

  void resolve_captures(Scope* s) {
    if (s->kind != Scope::Kind::Module) {
      for (const auto& name : s->used) {
        if (s->locals.count(name) || s->globals.count(name)) continue;
        if (Scope* d = defining_function(s, name)) d->captured.insert(name);
      }
      for (const auto& name : s->nonlocals) {
        if (Scope* d = defining_function(s, name)) d->captured.insert(name);
      }
    }
    for (Scope* c : s->children) resolve_captures(c);
  }
};

class Lowerer {
 public:
  Lowerer(const Module& m, SourceFilePtr source, const std::string& module_name)
      : ast_(m), src_(std::move(source)) {
    mod_.name = module_name;
    mod_.path = m.path;
    mod_.source = src_;
  }

  ir::Module run() {
    root_ = scopes_.build(ast_);
    ProcState st;
    st.proc = new_proc(ir::ProcKind::Script, "<module>", ast_.span, -1);
    st.scope = root_;
    root_->proc = st.proc;
    run_body(st, ast_.body);
    return std::move(mod_);
  }

 private:
  struct ProcState {
    int proc = -1;
    Scope* scope = nullptr;
    int block = 0;
    Reg class_reg = kNoReg;
    int class_id = -1;
    std::map<std::string, Reg> vars;
    std::vector<std::map<std::string, Reg>> comps;
    std::vector<std::pair<int, int>> loops;  // (continue target, break target)
    std::map<Reg, std::pair<int, std::size_t>> defs;  // temp -> (block, index)
    SourceSpan stmt_span;
  };

  // --- plumbing ------------------------------------------------------------

  int new_proc(ir::ProcKind kind, const std::string& name, const SourceSpan& span, int parent) {
    ir::Procedure p;
    p.id = static_cast<int>(mod_.procs.size());
    p.kind = kind;
    p.name = name;
    p.span = span;
    p.parent = parent;
    p.blocks.emplace_back();
    mod_.procs.push_back(std::move(p));
    return mod_.procs.back().id;
  }

  ir::Procedure& proc(ProcState& st) { return mod_.procs[st.proc]; }

  Reg new_reg(ProcState& st, const std::string& name = {}) {
    proc(st).reg_names.push_back(name);
    return proc(st).num_regs() - 1;
  }

  Instr& emit(ProcState& st, Instr in) {
    in.site = mod_.num_sites++;
    if (!in.stmt_span.valid()) in.stmt_span = st.stmt_span;
    auto& block = proc(st).blocks[st.block];
    block.instrs.push_back(std::move(in));
    Instr& out = block.instrs.back();
    if (out.result != kNoReg) st.defs[out.result] = {st.block, block.instrs.size() - 1};
    return out;
  }

  Reg emit_value(ProcState& st, Instr in) {
    in.result = new_reg(st);
    return emit(st, std::move(in)).result;
  }

  int new_block(ProcState& st) {
    proc(st).blocks.emplace_back();
    return static_cast<int>(proc(st).blocks.size()) - 1;
  }

  void link(ProcState& st, int from, int to) {
    auto& succs = proc(st).blocks[from].succs;
    if (std::find(succs.begin(), succs.end(), to) == succs.end()) succs.push_back(to);
  }

  std::string text_of(const SourceSpan& span) const { return collapse_whitespace(src_->slice(span)); }

  static Instr make(Opcode op, const SourceSpan& span) {
    Instr in;
    in.op = op;
    in.span = span;
    return in;
  }

  static SourceSpan header_span(const Stmt& s, const SourceSpan& last) {
    return SourceSpan{s.span.file, s.span.start_line, s.span.start_col, last.end_line, last.end_col};
  }

  // --- names ---------------------------------------------------------------

  enum class Where { Local, Cell, Global, ClassAttr, Unresolved };

  struct Resolved {
    Where where = Where::Unresolved;
    int cell_proc = -1;
  };

  Resolved resolve(const ProcState& st, const std::string& name) const {
    Scope* s = st.scope;
    if (s->kind == Scope::Kind::Module) {
      return {scopes_.module_globals.count(name) ? Where::Global : Where::Unresolved, -1};
    }
    if (s->globals.count(name)) return {Where::Global, -1};
    if (s->kind == Scope::Kind::Class && s->locals.count(name)) return {Where::ClassAttr, -1};
    if (s->kind == Scope::Kind::Function && s->locals.count(name) && !s->nonlocals.count(name)) {
      if (s->captured.count(name)) return {Where::Cell, s->proc};
      return {Where::Local, -1};
    }
    for (Scope* p = s->parent; p != nullptr; p = p->parent) {
      if (p->kind == Scope::Kind::Function && p->locals.count(name)) return {Where::Cell, p->proc};
    }
    return {scopes_.module_globals.count(name) ? Where::Global : Where::Unresolved, -1};
  }

  Reg local_reg(ProcState& st, const std::string& name) {
    auto it = st.vars.find(name);
    if (it != st.vars.end()) return it->second;
    Reg r = new_reg(st, name);
    st.vars[name] = r;
    return r;
  }

  Reg read_name(ProcState& st, const std::string& name, const SourceSpan& span) {
    for (auto it = st.comps.rbegin(); it != st.comps.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end()) return found->second;
    }
    Resolved r = resolve(st, name);
    switch (r.where) {
      case Where::Local:
        return local_reg(st, name);
      case Where::Cell: {
        Instr in = make(Opcode::CellRead, span);
        in.name = name;
        in.target = r.cell_proc;
        in.explicit_ = false;
        return emit_value(st, std::move(in));
      }
      case Where::Global: {
        Instr in = make(Opcode::GlobalRead, span);
        in.name = name;
        in.explicit_ = false;
        return emit_value(st, std::move(in));
      }
      case Where::ClassAttr: {
        Instr in = make(Opcode::FieldRead, span);
        in.object = st.class_reg;
        in.name = name;
        in.explicit_ = false;
        return emit_value(st, std::move(in));
      }
      case Where::Unresolved:
        break;
    }
    if (std::find(kOpaqueBuiltins.begin(), kOpaqueBuiltins.end(), name) != kOpaqueBuiltins.end()) {
      Instr in = make(Opcode::Const, span);
      in.name = name;
      in.explicit_ = false;
      return emit_value(st, std::move(in));
    }
    Instr in = make(Opcode::TurtleRef, span);
    in.name = name;
    in.label = name;
    return emit_value(st, std::move(in));
  }

  void write_name(ProcState& st, const std::string& name, Reg value, const SourceSpan& span) {
    for (auto it = st.comps.rbegin(); it != st.comps.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end()) {
        Instr in = make(Opcode::Assign, span);
        in.result = found->second;
        in.value = value;
        emit(st, std::move(in));
        return;
      }
    }
    Resolved r = resolve(st, name);
    Instr in;
    in.span = span;
    in.name = name;
    in.value = value;
    switch (r.where) {
      case Where::Local:
        in.op = Opcode::Assign;
        in.result = local_reg(st, name);
        break;
      case Where::Cell:
        in.op = Opcode::CellWrite;
        in.target = r.cell_proc;
        break;
      case Where::ClassAttr:
        in.op = Opcode::FieldWrite;
        in.object = st.class_reg;
        break;
      case Where::Global:
      case Where::Unresolved:
        in.op = Opcode::GlobalWrite;
        break;
    }
    emit(st, std::move(in));
  }

  bool is_unbound_builtin(const ProcState& st, const Expr& callee) const {
    if (callee.kind != ExprKind::Name) return false;
    for (const auto& c : st.comps)
      if (c.count(callee.text)) return false;
    return resolve(st, callee.text).where == Where::Unresolved;
  }

  // --- statements ----------------------------------------------------------

  void run_body(ProcState& st, const Body& body) {
    for (const auto& s : body) stmt(st, *s);
  }

  void mark_assigned(ProcState& st, Reg value, const std::string& name) {
    auto it = st.defs.find(value);
    if (it == st.defs.end()) return;
    auto& in = proc(st).blocks[it->second.first].instrs[it->second.second];
    if (in.op == Opcode::GlobalRead || in.op == Opcode::CellRead) return;
    in.assigned_name = name;
  }

  void assign_target(ProcState& st, const Expr& t, Reg value) {
    switch (t.kind) {
      case ExprKind::Name:
        write_name(st, t.text, value, t.span);
        return;
      case ExprKind::Attribute: {
        Reg obj = expr(st, *t.children[0]);
        Instr in = make(Opcode::FieldWrite, t.span);
        in.object = obj;
        in.name = t.text;
        in.value = value;
        emit(st, std::move(in));
        return;
      }
      case ExprKind::Subscript: {
        Reg obj = expr(st, *t.children[0]);
        Instr in = make(Opcode::FieldWrite, t.span);
        in.object = obj;
        in.index = expr(st, *t.children[1]);
        in.name = "__getitem__";
        in.value = value;
        emit(st, std::move(in));
        return;
      }
      case ExprKind::Tuple:
      case ExprKind::List:
        for (const auto& c : t.children) {
          const Expr& elt = c->kind == ExprKind::Starred ? *c->children[0] : *c;
          Instr in = make(Opcode::FieldRead, elt.span);
          in.object = value;
          in.name = "__getitem__";
          in.explicit_ = false;
          assign_target(st, elt, emit_value(st, std::move(in)));
        }
        return;
      case ExprKind::Starred:
        assign_target(st, *t.children[0], value);
        return;
      default: {
        Instr in = make(Opcode::Unsupported, t.span);
        in.name = "assignment target";
        emit(st, std::move(in));
      }
    }
  }

  static bool has_starred(const Expr& e) {
    return std::any_of(e.children.begin(), e.children.end(),
                       [](const ExprPtr& c) { return c->kind == ExprKind::Starred; });
  }

  void stmt(ProcState& st, const Stmt& s) {
    st.stmt_span = s.span;
    switch (s.kind) {
      case StmtKind::Expr:
        expr(st, *s.value);
        return;
      case StmtKind::Assign: {
        const Expr& v = *s.value;
        if (s.targets.size() == 1 && (s.targets[0]->kind == ExprKind::Tuple || s.targets[0]->kind == ExprKind::List) &&
            v.kind == ExprKind::Tuple && v.children.size() == s.targets[0]->children.size() &&
            !has_starred(v) && !has_starred(*s.targets[0])) {
          std::vector<Reg> values;
          for (const auto& c : v.children) values.push_back(expr(st, *c));
          for (std::size_t i = 0; i < values.size(); ++i) {
            assign_target(st, *s.targets[0]->children[i], values[i]);
          }
          return;
        }
        Reg value = expr(st, v);
        if (s.targets.size() == 1 && s.targets[0]->kind == ExprKind::Name) {
          mark_assigned(st, value, s.targets[0]->text);
        }
        for (const auto& t : s.targets) assign_target(st, *t, value);
        return;
      }
      case StmtKind::AugAssign: {
        const Expr& t = *s.targets[0];
        Reg current = expr(st, t);
        Reg rhs = expr(st, *s.value);
        Instr in = make(Opcode::LocalExpr, s.span);
        in.name = s.op;
        in.operands = {current, rhs};
        in.passes_objects = true;
        in.label = text_of(s.span);
        Reg r = emit_value(st, std::move(in));
        if (t.kind == ExprKind::Name) mark_assigned(st, r, t.text);
        assign_target(st, t, r);
        return;
      }
      case StmtKind::AnnAssign:
        expr(st, *s.extra);
        if (s.value) {
          Reg value = expr(st, *s.value);
          if (s.targets[0]->kind == ExprKind::Name) mark_assigned(st, value, s.targets[0]->text);
          assign_target(st, *s.targets[0], value);
        }
        return;
      case StmtKind::Return: {
        Instr in = make(Opcode::Return, s.span);
        if (s.value) in.value = expr(st, *s.value);
        emit(st, std::move(in));
        st.block = new_block(st);
        return;
      }
      case StmtKind::If: {
        st.stmt_span = header_span(s, s.value->span);
        expr(st, *s.value);
        int head = st.block;
        int then_b = new_block(st);
        int join = new_block(st);
        link(st, head, then_b);
        st.block = then_b;
        run_body(st, s.body);
        link(st, st.block, join);
        if (!s.orelse.empty()) {
          int else_b = new_block(st);
          link(st, head, else_b);
          st.block = else_b;
          run_body(st, s.orelse);
          link(st, st.block, join);
        } else {
          link(st, head, join);
        }
        st.block = join;
        return;
      }
      case StmtKind::While: {
        int header = new_block(st);
        link(st, st.block, header);
        st.block = header;
        st.stmt_span = header_span(s, s.value->span);
        expr(st, *s.value);
        int cond_end = st.block;
        int body_b = new_block(st);
        int exit = new_block(st);
        link(st, cond_end, body_b);
        st.block = body_b;
        st.loops.emplace_back(header, exit);
        run_body(st, s.body);
        st.loops.pop_back();
        link(st, st.block, header);
        if (!s.orelse.empty()) {
          int else_b = new_block(st);
          link(st, cond_end, else_b);
          st.block = else_b;
          run_body(st, s.orelse);
          link(st, st.block, exit);
        } else {
          link(st, cond_end, exit);
        }
        st.block = exit;
        return;
      }
      case StmtKind::For: {
        st.stmt_span = header_span(s, s.value->span);
        Reg iter = expr(st, *s.value);
        int header = new_block(st);
        link(st, st.block, header);
        int body_b = new_block(st);
        int exit = new_block(st);
        link(st, header, body_b);
        st.block = body_b;
        st.stmt_span = header_span(s, s.value->span);
        Instr in = make(Opcode::FieldRead, s.targets[0]->span);
        in.object = iter;
        in.name = "__getitem__";
        in.explicit_ = false;
        assign_target(st, *s.targets[0], emit_value(st, std::move(in)));
        st.loops.emplace_back(header, exit);
        run_body(st, s.body);
        st.loops.pop_back();
        link(st, st.block, header);
        if (!s.orelse.empty()) {
          int else_b = new_block(st);
          link(st, header, else_b);
          st.block = else_b;
          run_body(st, s.orelse);
          link(st, st.block, exit);
        } else {
          link(st, header, exit);
        }
        st.block = exit;
        return;
      }
      case StmtKind::Break:
      case StmtKind::Continue:
        if (!st.loops.empty()) {
          link(st, st.block, s.kind == StmtKind::Break ? st.loops.back().second : st.loops.back().first);
        }
        st.block = new_block(st);
        return;
      case StmtKind::Pass:
      case StmtKind::Global:
      case StmtKind::Nonlocal:
        return;
      case StmtKind::With: {
        st.stmt_span = header_span(s, s.items.back().target ? s.items.back().target->span
                                                            : s.items.back().context->span);
        for (const auto& item : s.items) {
          Reg ctx = expr(st, *item.context);
          if (item.target) {
            if (item.target->kind == ExprKind::Name) mark_assigned(st, ctx, item.target->text);
            assign_target(st, *item.target, ctx);
          }
        }
        run_body(st, s.body);
        return;
      }
      case StmtKind::Try: {
        int pre = st.block;
        int body_b = new_block(st);
        link(st, pre, body_b);
        st.block = body_b;
        run_body(st, s.body);
        int after_body = st.block;
        int join = new_block(st);
        for (const auto& h : s.handlers) {
          int hb = new_block(st);
          link(st, body_b, hb);
          link(st, after_body, hb);
          st.block = hb;
          st.stmt_span = h.span;
          if (h.type) expr(st, *h.type);
          run_body(st, h.body);
          link(st, st.block, join);
        }
        st.block = after_body;
        run_body(st, s.orelse);
        link(st, st.block, join);
        st.block = join;
        run_body(st, s.finalbody);
        return;
      }
      case StmtKind::Raise:
        if (s.value) expr(st, *s.value);
        if (s.extra) expr(st, *s.extra);
        return;
      case StmtKind::Assert:
        expr(st, *s.value);
        if (s.extra) expr(st, *s.extra);
        return;
      case StmtKind::Delete:
        for (const auto& t : s.targets) delete_target(st, *t);
        return;
      case StmtKind::Import:
        for (const auto& a : s.names) {
          Instr in = make(Opcode::Import, a.span);
          std::string bound = a.asname;
          if (bound.empty()) {
            bound = a.name.substr(0, a.name.find('.'));
            in.name = bound;
          } else {
            in.name = a.name;
          }
          in.label = in.name.substr(in.name.rfind('.') + 1);
          in.is_import = true;
          Reg r = emit_value(st, std::move(in));
          write_name(st, bound, r, a.span);
        }
        return;
      case StmtKind::ImportFrom: {
        std::string module = std::string(static_cast<std::size_t>(s.level), '.') + s.name;
        if (s.star_import) {
          Instr in = make(Opcode::Unsupported, s.span);
          in.name = "star import";
          emit(st, std::move(in));
          return;
        }
        for (const auto& a : s.names) {
          Instr in = make(Opcode::Import, a.span);
          in.from_module = module;
          in.name = s.name.empty() ? a.name : s.name + "." + a.name;
          in.label = a.name;
          in.is_import = true;
          Reg r = emit_value(st, std::move(in));
          write_name(st, a.asname.empty() ? a.name : a.asname, r, a.span);
        }
        return;
      }
      case StmtKind::FunctionDef:
        function_def(st, s);
        return;
      case StmtKind::ClassDef:
        class_def(st, s);
        return;
    }
  }

  void delete_target(ProcState& st, const Expr& t) {
    switch (t.kind) {
      case ExprKind::Attribute:
        expr(st, *t.children[0]);
        return;
      case ExprKind::Subscript:
        expr(st, *t.children[0]);
        expr(st, *t.children[1]);
        return;
      case ExprKind::Tuple:
      case ExprKind::List:
        for (const auto& c : t.children) delete_target(st, *c);
        return;
      default:
        return;
    }
  }

  static bool is_decorator_named(const Expr& d, std::string_view name) {
    return d.kind == ExprKind::Name && d.text == name;
  }

  Reg apply_decorators(ProcState& st, const Stmt& s, Reg value, std::vector<Reg> decorators) {
    for (std::size_t i = decorators.size(); i-- > 0;) {
      if (decorators[i] == kNoReg) continue;
      Instr in = make(Opcode::CallOrNew, s.decorators[i]->span);
      in.callee = decorators[i];
      in.operands = {value};
      in.explicit_ = false;
      in.name = s.decorators[i]->kind == ExprKind::Name ? s.decorators[i]->text : "decorator";
      in.label = in.name;
      value = emit_value(st, std::move(in));
    }
    return value;
  }

  /// Lowers a function or lambda body into a new procedure.
  int lower_function(ProcState& outer, const void* key, ir::ProcKind kind, const std::string& name,
                     const SourceSpan& span, const std::vector<ast::Param>& params,
                     std::vector<Reg>& defaults, bool in_class) {
    std::vector<int> default_index(params.size(), -1);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].annotation) expr(outer, *params[i].annotation);
      if (params[i].default_value) {
        default_index[i] = static_cast<int>(defaults.size());
        defaults.push_back(expr(outer, *params[i].default_value));
      }
    }
    std::string qualified = name;
    if (outer.scope->kind != Scope::Kind::Module) qualified = proc(outer).name + "." + name;
    if (outer.scope->kind == Scope::Kind::Module) qualified = name;
    ProcState st;
    st.proc = new_proc(kind, qualified, span, outer.proc);
    st.scope = scopes_.scopes.at(key).get();
    st.scope->proc = st.proc;
    if (in_class) proc(st).class_id = outer.class_id;
    st.stmt_span = span;
    for (std::size_t i = 0; i < params.size(); ++i) {
      ir::Param p;
      p.name = params[i].name;
      p.reg = local_reg(st, p.name);
      p.default_index = default_index[i];
      p.vararg = params[i].kind == ast::Param::Kind::VarArgs || params[i].kind == ast::Param::Kind::VarKeywords;
      p.keyword_only = params[i].kind == ast::Param::Kind::KeywordOnly;
      proc(st).params.push_back(p);
      if (st.scope->captured.count(p.name)) {
        Instr in = make(Opcode::CellWrite, params[i].span);
        in.name = p.name;
        in.target = st.proc;
        in.value = p.reg;
        emit(st, std::move(in));
      }
    }
    return lower_function_body(st, key, kind);
  }

  int lower_function_body(ProcState& st, const void* key, ir::ProcKind kind) {
    if (kind == ir::ProcKind::Lambda) {
      const Expr& lambda = *static_cast<const Expr*>(key);
      Instr in = make(Opcode::Return, lambda.children[0]->span);
      st.stmt_span = lambda.span;
      in.value = expr(st, *lambda.children[0]);
      emit(st, std::move(in));
    } else {
      run_body(st, static_cast<const Stmt*>(key)->body);
    }
    return st.proc;
  }

  void function_def(ProcState& st, const Stmt& s) {
    std::vector<Reg> decorators;
    bool is_static = false;
    bool is_classmethod = false;
    bool in_class = st.scope->kind == Scope::Kind::Class;
    for (const auto& d : s.decorators) {
      if (in_class && is_decorator_named(*d, "staticmethod")) {
        is_static = true;
        decorators.push_back(kNoReg);
      } else if (in_class && is_decorator_named(*d, "classmethod")) {
        is_classmethod = true;
        decorators.push_back(kNoReg);
      } else {
        decorators.push_back(expr(st, *d));
      }
    }
    if (s.extra) expr(st, *s.extra);
    std::vector<Reg> defaults;
    SourceSpan header = st.stmt_span;
    int id = lower_function(st, &s, ir::ProcKind::Function, s.name, s.span, s.params, defaults, in_class);
    mod_.procs[id].is_static = is_static;
    mod_.procs[id].is_classmethod = is_classmethod;
    st.stmt_span = header;
    Instr in = make(Opcode::MakeFunction, s.span);
    in.target = id;
    in.operands = defaults;
    in.name = s.name;
    in.explicit_ = false;
    Reg value = emit_value(st, std::move(in));
    value = apply_decorators(st, s, value, std::move(decorators));
    write_name(st, s.name, value, s.span);
  }

  void class_def(ProcState& st, const Stmt& s) {
    std::vector<Reg> decorators;
    for (const auto& d : s.decorators) decorators.push_back(expr(st, *d));
    std::vector<Reg> bases;
    for (const auto& b : s.bases) bases.push_back(expr(st, *b));
    for (const auto& k : s.class_keywords) {
      expr(st, *k.value);
      if (k.name == "metaclass") {
        Instr in = make(Opcode::Unsupported, k.span);
        in.name = "metaclass";
        emit(st, std::move(in));
      }
    }
    ir::ClassInfo info;
    info.id = static_cast<int>(mod_.classes.size());
    info.name = s.name;
    info.span = s.span;
    for (const auto& b : s.body) {
      if (b->kind == StmtKind::FunctionDef && b->name == "__new__") info.defines_new = true;
    }
    mod_.classes.push_back(info);

    Instr make_class = make(Opcode::MakeClass, s.span);
    make_class.target = info.id;
    make_class.operands = bases;
    make_class.name = s.name;
    make_class.explicit_ = false;
    Reg cls = emit_value(st, std::move(make_class));

    std::string qualified = s.name;
    if (st.scope->kind != Scope::Kind::Module) qualified = proc(st).name + "." + s.name;
    ProcState body;
    body.proc = new_proc(ir::ProcKind::ClassBody, qualified, s.span, st.proc);
    body.scope = scopes_.scopes.at(&s).get();
    body.scope->proc = body.proc;
    body.class_id = info.id;
    proc(body).class_id = info.id;
    body.class_reg = local_reg(body, "<class>");
    ir::Param self;
    self.name = "<class>";
    self.reg = body.class_reg;
    proc(body).params.push_back(self);
    body.stmt_span = s.span;
    run_body(body, s.body);
    mod_.classes[info.id].body_proc = body.proc;

    Reg value = apply_decorators(st, s, cls, std::move(decorators));
    write_name(st, s.name, value, s.span);
  }

  // --- expressions ---------------------------------------------------------

  Reg local_expr(ProcState& st, const Expr& e, std::vector<Reg> operands, bool passes_objects) {
    Instr in = make(Opcode::LocalExpr, e.span);
    in.name = e.text.empty() ? "expr" : e.text;
    in.operands = std::move(operands);
    in.passes_objects = passes_objects;
    in.label = text_of(e.span);
    return emit_value(st, std::move(in));
  }

  Reg container(ProcState& st, const Expr& e, std::vector<Reg> elements) {
    Instr in = make(Opcode::MakeContainer, e.span);
    in.operands = std::move(elements);
    in.explicit_ = false;
    return emit_value(st, std::move(in));
  }

  Reg expr(ProcState& st, const Expr& e) {
    switch (e.kind) {
      case ExprKind::Name:
        return read_name(st, e.text, e.span);
      case ExprKind::Constant: {
        Instr in = make(Opcode::Const, e.span);
        in.name = e.text;
        in.label = text_of(e.span);
        return emit_value(st, std::move(in));
      }
      case ExprKind::Attribute: {
        Reg obj = expr(st, *e.children[0]);
        Instr in = make(Opcode::FieldRead, e.span);
        in.object = obj;
        in.name = e.text;
        in.label = e.text;
        in.name_span = attribute_name_span(e);
        return emit_value(st, std::move(in));
      }
      case ExprKind::Subscript: {
        Reg obj = expr(st, *e.children[0]);
        Reg idx = expr(st, *e.children[1]);
        Instr in = make(Opcode::FieldRead, e.span);
        in.object = obj;
        in.index = idx;
        in.name = "__getitem__";
        in.label = text_of(e.span);
        return emit_value(st, std::move(in));
      }
      case ExprKind::Slice: {
        std::vector<Reg> parts;
        for (const auto& c : e.children)
          if (c) parts.push_back(expr(st, *c));
        return local_expr(st, e, std::move(parts), false);
      }
      case ExprKind::Call:
        return call(st, e);
      case ExprKind::BinOp:
      case ExprKind::BoolOp:
      case ExprKind::IfExp: {
        std::vector<Reg> ops;
        for (const auto& c : e.children) ops.push_back(expr(st, *c));
        return local_expr(st, e, std::move(ops), true);
      }
      case ExprKind::UnaryOp: {
        Reg operand = expr(st, *e.children[0]);
        return local_expr(st, e, {operand}, e.text != "not");
      }
      case ExprKind::Compare: {
        std::vector<Reg> ops;
        for (const auto& c : e.children) ops.push_back(expr(st, *c));
        return local_expr(st, e, std::move(ops), false);
      }
      case ExprKind::FString: {
        std::vector<Reg> ops;
        for (const auto& c : e.children) ops.push_back(expr(st, *c));
        return local_expr(st, e, std::move(ops), false);
      }
      case ExprKind::Lambda: {
        std::vector<Reg> defaults;
        SourceSpan header = st.stmt_span;
        int id = lower_function(st, &e, ir::ProcKind::Lambda, "<lambda>", e.span, e.params, defaults, false);
        st.stmt_span = header;
        Instr in = make(Opcode::MakeFunction, e.span);
        in.target = id;
        in.operands = defaults;
        in.name = "<lambda>";
        in.explicit_ = false;
        return emit_value(st, std::move(in));
      }
      case ExprKind::NamedExpr: {
        Reg v = expr(st, *e.children[1]);
        write_name(st, e.children[0]->text, v, e.span);
        return v;
      }
      case ExprKind::List:
      case ExprKind::Tuple:
      case ExprKind::Set:
      case ExprKind::Dict: {
        std::vector<Reg> elements;
        for (const auto& c : e.children)
          if (c) elements.push_back(expr(st, *c));
        return container(st, e, std::move(elements));
      }
      case ExprKind::ListComp:
      case ExprKind::SetComp:
      case ExprKind::GeneratorExp:
      case ExprKind::DictComp:
        return comprehension(st, e);
      case ExprKind::Starred:
      case ExprKind::Await:
        return expr(st, *e.children[0]);
      case ExprKind::Yield:
      case ExprKind::YieldFrom: {
        Instr ret = make(Opcode::Return, e.span);
        if (!e.children.empty() && e.children[0]) ret.value = expr(st, *e.children[0]);
        emit(st, std::move(ret));
        Instr in = make(Opcode::Const, e.span);
        in.name = "yield";
        in.explicit_ = false;
        return emit_value(st, std::move(in));
      }
    }
    Instr in = make(Opcode::Unsupported, e.span);
    in.name = "expression";
    emit(st, std::move(in));
    Instr none = make(Opcode::Const, e.span);
    none.explicit_ = false;
    return emit_value(st, std::move(none));
  }

  static SourceSpan attribute_name_span(const Expr& attr) {
    SourceSpan s = attr.span;
    s.start_line = s.end_line;
    s.start_col = s.end_col - static_cast<int>(attr.text.size());
    return s;
  }

  void bind_comp_target(ProcState& st, const Expr& t, Reg value) {
    if (t.kind == ExprKind::Name) {
      Reg r = new_reg(st, t.text);
      st.comps.back()[t.text] = r;
      Instr in = make(Opcode::Assign, t.span);
      in.result = r;
      in.value = value;
      emit(st, std::move(in));
      return;
    }
    if (t.kind == ExprKind::Tuple || t.kind == ExprKind::List) {
      for (const auto& c : t.children) {
        const Expr& elt = c->kind == ExprKind::Starred ? *c->children[0] : *c;
        Instr in = make(Opcode::FieldRead, elt.span);
        in.object = value;
        in.name = "__getitem__";
        in.explicit_ = false;
        bind_comp_target(st, elt, emit_value(st, std::move(in)));
      }
      return;
    }
    assign_target(st, t, value);
  }

  Reg comprehension(ProcState& st, const Expr& e) {
    st.comps.emplace_back();
    for (const auto& g : e.generators) {
      Reg iter = expr(st, *g.iter);
      Instr in = make(Opcode::FieldRead, g.target->span);
      in.object = iter;
      in.name = "__getitem__";
      in.explicit_ = false;
      bind_comp_target(st, *g.target, emit_value(st, std::move(in)));
      for (const auto& cond : g.ifs) expr(st, *cond);
    }
    std::vector<Reg> elements;
    for (const auto& c : e.children) elements.push_back(expr(st, *c));
    st.comps.pop_back();
    return container(st, e, std::move(elements));
  }

  Reg call(ProcState& st, const Expr& e) {
    const Expr& f = *e.children[0];
    Instr in = make(Opcode::CallOrNew, e.span);
    if (is_unbound_builtin(st, f) && (f.text == "eval" || f.text == "exec")) {
      for (std::size_t i = 1; i < e.children.size(); ++i) expr(st, *e.children[i]);
      Instr u = make(Opcode::Unsupported, e.span);
      u.name = f.text;
      emit(st, std::move(u));
      Instr none = make(Opcode::Const, e.span);
      none.explicit_ = false;
      return emit_value(st, std::move(none));
    }
    if (is_unbound_builtin(st, f) && is_identity_builtin(f.text)) {
      in.identity = true;
      in.name = f.text;
      in.name_span = f.span;
    } else if (f.kind == ExprKind::Attribute) {
      Reg obj = expr(st, *f.children[0]);
      Instr read = make(Opcode::FieldRead, f.span);
      read.object = obj;
      read.name = f.text;
      read.explicit_ = false;
      in.callee = emit_value(st, std::move(read));
      in.has_receiver = true;
      in.name = f.text;
      in.name_span = attribute_name_span(f);
    } else {
      in.callee = expr(st, f);
      if (f.kind == ExprKind::Name) {
        in.name = f.text;
        in.name_span = f.span;
      }
    }
    for (std::size_t i = 1; i < e.children.size(); ++i) {
      const Expr& a = *e.children[i];
      if (a.kind == ExprKind::Starred) {
        in.kwargs.emplace_back("*", expr(st, *a.children[0]));
      } else {
        in.operands.push_back(expr(st, a));
      }
    }
    for (const auto& k : e.keywords) {
      in.kwargs.emplace_back(k.name.empty() ? "**" : k.name, expr(st, *k.value));
    }
    in.label = in.name.empty() ? text_of(f.span) : in.name;
    return emit_value(st, std::move(in));
  }

  const Module& ast_;
  SourceFilePtr src_;
  ir::Module mod_;
  ScopeBuilder scopes_;
  Scope* root_ = nullptr;
};

}  // namespace

bool is_identity_builtin(std::string_view name) {
  return std::find(kIdentityBuiltins.begin(), kIdentityBuiltins.end(), name) != kIdentityBuiltins.end();
}

ir::Module lower(const ast::Module& module, SourceFilePtr source, const std::string& module_name) {
  return Lowerer(module, std::move(source), module_name).run();
}

}  // namespace turtleflow
