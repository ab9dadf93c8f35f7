#include "turtleflow/frontend.hpp"

namespace turtleflow {

std::vector<AstCallRecord> collect_ast_calls(const ast::Module& module, const SourceFile& source) {
  std::vector<AstCallRecord> out;
  ast::walk_exprs(module, [&](const ast::Expr& e) {
    if (e.kind != ast::ExprKind::Call) return;
    const ast::Expr& f = *e.children[0];
    AstCallRecord rec;
    rec.span = e.span;
    rec.callee_text = collapse_whitespace(source.slice(f.span));
    if (f.kind == ast::ExprKind::Name) {
      rec.simple_name = f.text;
      rec.name_span = f.span;
    } else if (f.kind == ast::ExprKind::Attribute) {
      rec.simple_name = f.text;
      rec.name_span = f.span;
      rec.name_span.start_line = f.span.end_line;
      rec.name_span.start_col = f.span.end_col - static_cast<int>(f.text.size());
    }
    out.push_back(std::move(rec));
  });
  return out;
}

}  // namespace turtleflow
