#pragma once

#include <string>
#include <utility>
#include <vector>

#include "turtleflow/source.hpp"

namespace turtleflow::ir {

using Reg = int;
constexpr Reg kNoReg = -1;

enum class Opcode {
  Const,          // literal; non-literal placeholders (e.g. `object`) have explicit=false
  Assign,         // result = value
  CallOrNew,      // result = callee(args, kwargs); identity builtins have callee == kNoReg
  FieldRead,      // result = object.name (subscripts use name "__getitem__")
  FieldWrite,     // object.name = value
  LocalExpr,      // result = op(operands): arithmetic, comparisons, boolean ops, f-strings
  MakeFunction,   // result = function `target` with default values in operands
  MakeClass,      // result = class `target` with base classes in operands
  MakeContainer,  // result = list/tuple/set/dict holding operands
  Import,         // result = module or library value named `name`
  Return,         // return value (kNoReg for a bare return)
  GlobalRead,     // result = module-level variable `name`
  GlobalWrite,    // module-level variable `name` = value
  CellRead,       // result = captured variable `name` of procedure `target`
  CellWrite,      // captured variable `name` of procedure `target` = value
  TurtleRef,      // result = unresolved global `name`, modeled as a library value
  Unsupported,    // construct outside the modeled subset; no effect
};

std::string_view opcode_name(Opcode op);

struct Instr {
  Opcode op = Opcode::Unsupported;
  int site = -1;  // unique within the module, assigned in lowering order
  Reg result = kNoReg;
  Reg callee = kNoReg;
  Reg object = kNoReg;
  Reg value = kNoReg;
  Reg index = kNoReg;  // subscript index for FieldRead
  std::vector<Reg> operands;
  std::vector<std::pair<std::string, Reg>> kwargs;
  std::string name;  // site name, field, dotted import, variable, operator or literal text
  std::string from_module;  // `from M import N`: "M", with leading dots when relative
  int target = -1;   // procedure or class id

  bool explicit_ = true;      // written in source (false for synthetic reads and calls)
  bool identity = false;      // builtin call passing its first argument through
  bool has_receiver = false;  // call of the form a.b(...)
  bool passes_objects = false;
  bool is_import = false;

  SourceSpan span;       // the expression
  SourceSpan stmt_span;  // the enclosing statement (or compound-statement header)
  SourceSpan name_span;  // callee or attribute identifier; invalid when absent
  std::string label;     // display text for dataflow nodes
  std::string assigned_name;  // set when this value is the whole RHS of `name = ...`
};

struct Block {
  std::vector<Instr> instrs;
  std::vector<int> succs;
};

enum class ProcKind { Script, Function, Lambda, ClassBody };

struct Param {
  std::string name;
  Reg reg = kNoReg;
  int default_index = -1;  // index into the MakeFunction operands
  bool vararg = false;     // *args or **kwargs
  bool keyword_only = false;
};

struct Procedure {
  int id = 0;
  ProcKind kind = ProcKind::Function;
  std::string name;  // qualified, e.g. "Foo.bar"
  SourceSpan span;
  int parent = -1;
  int class_id = -1;  // owning class for methods and class bodies
  bool is_static = false;
  bool is_classmethod = false;
  std::vector<Param> params;
  std::vector<Block> blocks;
  std::vector<std::string> reg_names;  // empty string for temporaries

  [[nodiscard]] int num_regs() const { return static_cast<int>(reg_names.size()); }
};

struct ClassInfo {
  int id = 0;
  std::string name;
  int body_proc = -1;
  bool defines_new = false;
  SourceSpan span;
};

struct Module {
  std::string name;  // dotted module name relative to the entry directory
  std::string path;
  SourceFilePtr source;
  std::vector<Procedure> procs;  // procs[0] is the script body
  std::vector<ClassInfo> classes;
  int num_sites = 0;
};

struct Program {
  std::vector<Module> modules;
  int entry = 0;

  [[nodiscard]] int find_module(const std::string& dotted) const;
};

/// Stable textual form used by `--dump-ir` and determinism tests.
std::string dump(const Module& module);

}  // namespace turtleflow::ir
