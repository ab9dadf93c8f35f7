#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "turtleflow/ast.hpp"
#include "turtleflow/source.hpp"

namespace turtleflow {

struct ParseResult {
  std::optional<ast::Module> module;
  std::vector<Diagnostic> diagnostics;

  [[nodiscard]] bool ok() const { return module.has_value(); }
};

/// Parses a complete Python 3 file. Either the full module or diagnostics
/// are returned, never a partial tree. Throws EncodingError for bytes that
/// are not valid UTF-8.
ParseResult parse_module(std::string_view text, const std::string& path);

}  // namespace turtleflow
