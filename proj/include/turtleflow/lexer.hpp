#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "turtleflow/source.hpp"

namespace turtleflow {

/// Lexical categories of the standard Python tokenizer.
enum class TokenKind {
  Name,
  Number,
  String,
  Op,
  Newline,  // end of a logical line
  NL,       // non-logical line break (blank line, inside brackets)
  Comment,
  Indent,
  Dedent,
  EndMarker,
};

std::string_view token_kind_name(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::EndMarker;
  std::string text;
  int line = 1;
  int col = 1;
  int end_line = 1;
  int end_col = 1;
  std::size_t offset = 0;      // byte offset of the first character
  std::size_t end_offset = 0;  // one past the last character

  [[nodiscard]] bool is_op(std::string_view op) const {
    return kind == TokenKind::Op && text == op;
  }
  [[nodiscard]] bool is_name(std::string_view name) const {
    return kind == TokenKind::Name && text == name;
  }
};

struct LexResult {
  std::vector<Token> tokens;
  std::optional<Diagnostic> error;
};

/// Tokenizes Python 3 source. On a lexical error the tokens produced so far
/// are kept and `error` is set; in lenient mode unterminated brackets and
/// strings at end of input are not errors, mirroring a tokenizer that
/// "returns what has been tokenized so far" for incomplete code.
LexResult tokenize(std::string_view text, bool lenient = false);

}  // namespace turtleflow
