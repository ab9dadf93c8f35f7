#include <sstream>

#include "turtleflow/ir.hpp"

namespace turtleflow::ir {

std::string_view opcode_name(Opcode op) {
  switch (op) {
    case Opcode::Const: return "const";
    case Opcode::Assign: return "assign";
    case Opcode::CallOrNew: return "call";
    case Opcode::FieldRead: return "getfield";
    case Opcode::FieldWrite: return "putfield";
    case Opcode::LocalExpr: return "expr";
    case Opcode::MakeFunction: return "function";
    case Opcode::MakeClass: return "class";
    case Opcode::MakeContainer: return "container";
    case Opcode::Import: return "import";
    case Opcode::Return: return "return";
    case Opcode::GlobalRead: return "getglobal";
    case Opcode::GlobalWrite: return "putglobal";
    case Opcode::CellRead: return "getcell";
    case Opcode::CellWrite: return "putcell";
    case Opcode::TurtleRef: return "unresolved";
    case Opcode::Unsupported: return "unsupported";
  }
  return "?";
}

namespace {

std::string reg(Reg r) { return r == kNoReg ? "_" : "%" + std::to_string(r); }

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string dump(const Module& module) {
  std::ostringstream out;
  out << "module " << module.name << " " << quoted(module.path) << "\n";
  for (const auto& c : module.classes) {
    out << "class " << c.id << " " << c.name << " body=" << c.body_proc
        << (c.defines_new ? " defines __new__" : "") << "\n";
  }
  for (const auto& p : module.procs) {
    out << "proc " << p.id << " " << p.name << " (";
    for (std::size_t i = 0; i < p.params.size(); ++i) {
      if (i) out << ", ";
      out << p.params[i].name << "=" << reg(p.params[i].reg);
      if (p.params[i].default_index >= 0) out << "?" << p.params[i].default_index;
    }
    out << ")";
    if (p.parent >= 0) out << " parent=" << p.parent;
    if (p.class_id >= 0) out << " class=" << p.class_id;
    if (p.is_static) out << " static";
    if (p.is_classmethod) out << " classmethod";
    out << "\n";
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
      out << "  block " << b << " ->";
      for (int s : p.blocks[b].succs) out << " " << s;
      out << "\n";
      for (const auto& in : p.blocks[b].instrs) {
        out << "    " << in.site << ": ";
        if (in.result != kNoReg) out << reg(in.result) << " = ";
        out << opcode_name(in.op);
        if (!in.name.empty()) out << " " << quoted(in.name);
        if (in.target >= 0) out << " #" << in.target;
        if (in.callee != kNoReg) out << " callee=" << reg(in.callee);
        if (in.object != kNoReg) out << " obj=" << reg(in.object);
        if (in.index != kNoReg) out << " idx=" << reg(in.index);
        if (in.value != kNoReg) out << " val=" << reg(in.value);
        if (!in.operands.empty()) {
          out << " (";
          for (std::size_t i = 0; i < in.operands.size(); ++i) out << (i ? ", " : "") << reg(in.operands[i]);
          out << ")";
        }
        for (const auto& [k, v] : in.kwargs) out << " " << k << "=" << reg(v);
        if (!in.explicit_) out << " synthetic";
        if (in.identity) out << " identity";
        if (!in.assigned_name.empty()) out << " as " << in.assigned_name;
        out << " @" << in.span.start_line << ":" << in.span.start_col << "-" << in.span.end_line << ":"
            << in.span.end_col << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace turtleflow::ir
