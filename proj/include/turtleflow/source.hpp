#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace turtleflow {

/// A half-open region of a source file. Lines and columns are 1-based;
/// columns count bytes. `end_col` is the column just past the last byte.
struct SourceSpan {
  std::string file;
  int start_line = 0;
  int start_col = 0;
  int end_line = 0;
  int end_col = 0;

  [[nodiscard]] bool valid() const { return start_line > 0; }

  /// True when `inner` lies within this span (inclusive of equality).
  [[nodiscard]] bool contains(const SourceSpan& inner) const;

  /// Containment without equality.
  [[nodiscard]] bool strictly_contains(const SourceSpan& inner) const {
    return contains(inner) && !(inner == *this);
  }

  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
  friend auto operator<=>(const SourceSpan&, const SourceSpan&) = default;
};

/// Smallest span covering both arguments (which must share a file).
SourceSpan cover(const SourceSpan& a, const SourceSpan& b);

struct Diagnostic {
  int line = 0;
  int col = 0;
  std::string message;
};

/// Source text with a line index, shared by everything that needs to map
/// spans back to text.
class SourceFile {
 public:
  SourceFile(std::string path, std::string text);

  [[nodiscard]] const std::string& path() const { return path_; }
  [[nodiscard]] const std::string& text() const { return text_; }
  [[nodiscard]] int line_count() const { return static_cast<int>(line_starts_.size()); }

  /// Byte offset of (line, col); throws IntegrityError when out of bounds.
  [[nodiscard]] std::size_t offset(int line, int col) const;
  [[nodiscard]] std::string_view line_text(int line) const;
  [[nodiscard]] std::string_view slice(const SourceSpan& span) const;

 private:
  std::string path_;
  std::string text_;
  std::vector<std::size_t> line_starts_;
};

using SourceFilePtr = std::shared_ptr<const SourceFile>;

struct EncodingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A span did not fit its file: always a frontend bug.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Returns the byte offset of the first invalid sequence, or npos.
std::size_t find_invalid_utf8(std::string_view bytes);

/// Collapses runs of whitespace (including newlines) into single spaces and
/// trims both ends.
std::string collapse_whitespace(std::string_view text);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace turtleflow
