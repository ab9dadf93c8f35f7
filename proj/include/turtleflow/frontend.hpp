#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "turtleflow/ast.hpp"
#include "turtleflow/ir.hpp"
#include "turtleflow/parser.hpp"

namespace turtleflow {

/// Builtins whose calls are modeled as passing their first argument through.
bool is_identity_builtin(std::string_view name);

/// Lowers a parsed module. Never fails on a well-formed tree; constructs
/// outside the modeled subset become Unsupported instructions.
ir::Module lower(const ast::Module& module, SourceFilePtr source, const std::string& module_name);

struct AstCallRecord {
  SourceSpan span;
  std::string callee_text;  // e.g. "fw_bc_svm.fit"
  std::string simple_name;  // last segment, empty for computed callees
  SourceSpan name_span;
};

std::vector<AstCallRecord> collect_ast_calls(const ast::Module& module, const SourceFile& source);

struct SyntaxFailure : std::runtime_error {
  SyntaxFailure(const std::string& path, Diagnostic d)
      : std::runtime_error(path + ":" + std::to_string(d.line) + ": " + d.message), diag(std::move(d)) {}
  Diagnostic diag;
};

/// Reads, parses and lowers `entry` plus every sibling module it imports,
/// transitively. Imports that do not resolve to a file stay library imports.
/// Throws SyntaxFailure, EncodingError, or std::runtime_error for I/O.
ir::Program load_program(const std::filesystem::path& entry);

/// Same, for in-memory text (no sibling resolution).
ir::Program load_program_text(const std::string& text, const std::string& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace turtleflow
