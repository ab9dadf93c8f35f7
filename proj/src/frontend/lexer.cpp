#include "turtleflow/lexer.hpp"

#include <array>
#include <cctype>

namespace turtleflow {

std::string_view token_kind_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::Name: return "NAME";
    case TokenKind::Number: return "NUMBER";
    case TokenKind::String: return "STRING";
    case TokenKind::Op: return "OP";
    case TokenKind::Newline: return "NEWLINE";
    case TokenKind::NL: return "NL";
    case TokenKind::Comment: return "COMMENT";
    case TokenKind::Indent: return "INDENT";
    case TokenKind::Dedent: return "DEDENT";
    case TokenKind::EndMarker: return "ENDMARKER";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 24> kMultiCharOps = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", ">>", "<<", "<=",
    ">=",  "==",  "!=",  "+=",  "-=",  "*=", "/=", "%=", "&=", "|=", "^=", "@="};

constexpr std::string_view kSingleCharOps = "+-*/%@&|^~<>()[]{},:.;=!";

bool is_name_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_name_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

class Lexer {
 public:
  Lexer(std::string_view text, bool lenient) : text_(text), lenient_(lenient) {}

  LexResult run() {
    indents_.push_back(0);
    while (!failed_ && pos_ < text_.size()) {
      if (at_line_start_ && depth_ == 0) {
        if (!handle_indentation()) continue;
      }
      if (failed_) break;
      lex_one();
    }
    if (!failed_) finish();
    return LexResult{std::move(tokens_), std::move(error_)};
  }

 private:
  [[nodiscard]] char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
      if (text_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void emit(TokenKind kind, std::size_t start, int line, int col) {
    Token t;
    t.kind = kind;
    t.text = std::string(text_.substr(start, pos_ - start));
    t.line = line;
    t.col = col;
    t.end_line = line_;
    t.end_col = col_;
    t.offset = start;
    t.end_offset = pos_;
    tokens_.push_back(std::move(t));
  }

  void emit_empty(TokenKind kind) {
    std::size_t save = pos_;
    emit(kind, save, line_, col_);
  }

  void fail(std::string message) {
    error_ = Diagnostic{line_, col_, std::move(message)};
    failed_ = true;
  }

  /// Returns false when the whole physical line was consumed (blank/comment).
  bool handle_indentation() {
    at_line_start_ = false;
    std::size_t start = pos_;
    int line = line_;
    int col = col_;
    int width = 0;
    while (peek() == ' ' || peek() == '\t' || peek() == '\f') {
      if (peek() == '\t') width = (width / 8 + 1) * 8;
      else if (peek() == ' ') ++width;
      else width = 0;
      advance();
    }
    char c = peek();
    if (c == '\0' || c == '\n' || c == '\r' || c == '#') {
      // Blank or comment-only lines do not affect indentation.
      if (c == '#') lex_comment();
      if (peek() == '\r') advance();
      if (peek() == '\n') {
        std::size_t nl = pos_;
        int nline = line_;
        int ncol = col_;
        advance();
        emit(TokenKind::NL, nl, nline, ncol);
      }
      at_line_start_ = true;
      return false;
    }
    if (c == '\\' && (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n'))) {
      // A continuation right after indentation; the logical line continues.
      return true;
    }
    if (width > indents_.back()) {
      indents_.push_back(width);
      emit(TokenKind::Indent, start, line, col);
    } else if (width < indents_.back()) {
      while (width < indents_.back()) {
        indents_.pop_back();
        emit_empty(TokenKind::Dedent);
      }
      if (width != indents_.back()) {
        if (lenient_) {
          indents_.push_back(width);
        } else {
          fail("unindent does not match any outer indentation level");
          return false;
        }
      }
    }
    return true;
  }

  void lex_comment() {
    std::size_t start = pos_;
    int line = line_;
    int col = col_;
    while (peek() != '\0' && peek() != '\n' && peek() != '\r') advance();
    emit(TokenKind::Comment, start, line, col);
  }

  void lex_one() {
    char c = peek();
    if (c == ' ' || c == '\t' || c == '\f') {
      advance();
      return;
    }
    if (c == '\\') {
      if (peek(1) == '\n') {
        advance(2);
        return;
      }
      if (peek(1) == '\r' && peek(2) == '\n') {
        advance(3);
        return;
      }
      if (peek(1) == '\0' && lenient_) {
        advance();
        return;
      }
      fail("unexpected character after line continuation character");
      return;
    }
    if (c == '\r' && peek(1) == '\n') {
      advance();
      c = '\n';
    }
    if (c == '\n') {
      std::size_t start = pos_;
      int line = line_;
      int col = col_;
      advance();
      bool logical = depth_ == 0 && line_has_content_;
      emit(logical ? TokenKind::Newline : TokenKind::NL, start, line, col);
      if (depth_ == 0) {
        at_line_start_ = true;
        line_has_content_ = false;
      }
      return;
    }
    if (c == '#') {
      lex_comment();
      return;
    }
    line_has_content_ = true;
    auto uc = static_cast<unsigned char>(c);
    if (std::isdigit(uc) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      lex_number();
      return;
    }
    if (is_name_start(uc)) {
      std::size_t start = pos_;
      int line = line_;
      int col = col_;
      std::size_t n = 0;
      while (n < 3 && std::string_view("rRbBuUfF").find(peek(n)) != std::string_view::npos) ++n;
      if (n > 0 && n <= 2 && (peek(n) == '\'' || peek(n) == '"')) {
        advance(n);
        lex_string(start, line, col);
        return;
      }
      while (is_name_char(static_cast<unsigned char>(peek()))) advance();
      emit(TokenKind::Name, start, line, col);
      return;
    }
    if (c == '\'' || c == '"') {
      lex_string(pos_, line_, col_);
      return;
    }
    for (std::string_view op : kMultiCharOps) {
      if (text_.substr(pos_, op.size()) == op) {
        std::size_t start = pos_;
        int line = line_;
        int col = col_;
        advance(op.size());
        emit(TokenKind::Op, start, line, col);
        return;
      }
    }
    if (kSingleCharOps.find(c) != std::string_view::npos) {
      std::size_t start = pos_;
      int line = line_;
      int col = col_;
      advance();
      if (c == '(' || c == '[' || c == '{') ++depth_;
      if (c == ')' || c == ']' || c == '}') {
        if (depth_ == 0 && !lenient_) {
          fail(std::string("unmatched '") + c + "'");
          return;
        }
        if (depth_ > 0) --depth_;
      }
      emit(TokenKind::Op, start, line, col);
      return;
    }
    fail(std::string("invalid character '") + c + "'");
  }

  void lex_number() {
    std::size_t start = pos_;
    int line = line_;
    int col = col_;
    auto digits = [&](auto pred) {
      while (pred(static_cast<unsigned char>(peek())) || (peek() == '_' && pred(static_cast<unsigned char>(peek(1))))) advance();
    };
    auto dec = [](unsigned char ch) { return std::isdigit(ch) != 0; };
    if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      advance(2);
      digits([](unsigned char ch) { return std::isxdigit(ch) != 0; });
    } else if (peek() == '0' && (peek(1) == 'o' || peek(1) == 'O' || peek(1) == 'b' || peek(1) == 'B')) {
      advance(2);
      digits(dec);
    } else {
      digits(dec);
      if (peek() == '.') {
        advance();
        digits(dec);
      }
      if ((peek() == 'e' || peek() == 'E') &&
          (std::isdigit(static_cast<unsigned char>(peek(1))) ||
           ((peek(1) == '+' || peek(1) == '-') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
        advance(2);
        digits(dec);
      }
      if (peek() == 'j' || peek() == 'J') advance();
    }
    if (peek() == 'l' || peek() == 'L') {
      fail("invalid decimal literal");  // Python 2 long suffix
      return;
    }
    emit(TokenKind::Number, start, line, col);
  }

  void lex_string(std::size_t start, int line, int col) {
    char quote = peek();
    bool triple = peek(1) == quote && peek(2) == quote;
    advance(triple ? 3 : 1);
    while (true) {
      char c = peek();
      if (c == '\0') {
        if (lenient_) {
          emit(TokenKind::String, start, line, col);
        } else {
          fail(triple ? "unterminated triple-quoted string literal"
                      : "unterminated string literal");
        }
        return;
      }
      if (c == '\\') {
        advance(2);
        continue;
      }
      if (!triple && (c == '\n' || c == '\r')) {
        if (lenient_) {
          emit(TokenKind::String, start, line, col);
        } else {
          fail("unterminated string literal");
        }
        return;
      }
      if (c == quote) {
        if (!triple) {
          advance();
          break;
        }
        if (peek(1) == quote && peek(2) == quote) {
          advance(3);
          break;
        }
      }
      advance();
    }
    emit(TokenKind::String, start, line, col);
  }

  void finish() {
    if (depth_ > 0 && !lenient_) {
      fail("unexpected EOF in multi-line statement");
      return;
    }
    if (line_has_content_) emit_empty(TokenKind::Newline);
    while (indents_.size() > 1) {
      indents_.pop_back();
      emit_empty(TokenKind::Dedent);
    }
    emit_empty(TokenKind::EndMarker);
  }

  std::string_view text_;
  bool lenient_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int depth_ = 0;
  bool at_line_start_ = true;
  bool line_has_content_ = false;
  bool failed_ = false;
  std::vector<int> indents_;
  std::vector<Token> tokens_;
  std::optional<Diagnostic> error_;
};

}  // namespace

LexResult tokenize(std::string_view text, bool lenient) { return Lexer(text, lenient).run(); }

}  // namespace turtleflow
