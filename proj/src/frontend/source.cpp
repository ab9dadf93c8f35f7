#include "turtleflow/source.hpp"

#include <cstdio>

namespace turtleflow {

bool SourceSpan::contains(const SourceSpan& inner) const {
  if (file != inner.file) return false;
  auto before_or_eq = [](int l1, int c1, int l2, int c2) {
    return l1 < l2 || (l1 == l2 && c1 <= c2);
  };
  return before_or_eq(start_line, start_col, inner.start_line, inner.start_col) &&
         before_or_eq(inner.end_line, inner.end_col, end_line, end_col);
}

std::string SourceSpan::to_string() const {
  return file + ":" + std::to_string(start_line) + ":" + std::to_string(start_col) + "-" +
         std::to_string(end_line) + ":" + std::to_string(end_col);
}

SourceSpan cover(const SourceSpan& a, const SourceSpan& b) {
  if (!a.valid()) return b;
  if (!b.valid()) return a;
  SourceSpan out = a;
  if (b.start_line < out.start_line ||
      (b.start_line == out.start_line && b.start_col < out.start_col)) {
    out.start_line = b.start_line;
    out.start_col = b.start_col;
  }
  if (b.end_line > out.end_line || (b.end_line == out.end_line && b.end_col > out.end_col)) {
    out.end_line = b.end_line;
    out.end_col = b.end_col;
  }
  return out;
}

SourceFile::SourceFile(std::string path, std::string text)
    : path_(std::move(path)), text_(std::move(text)) {
  line_starts_.push_back(0);
  for (std::size_t i = 0; i < text_.size(); ++i) {
    if (text_[i] == '\n') line_starts_.push_back(i + 1);
  }
}

std::size_t SourceFile::offset(int line, int col) const {
  if (line < 1 || line > line_count()) {
    throw IntegrityError("line " + std::to_string(line) + " outside " + path_);
  }
  std::size_t start = line_starts_[static_cast<std::size_t>(line - 1)];
  std::size_t end = line == line_count() ? text_.size()
                                         : line_starts_[static_cast<std::size_t>(line)];
  std::size_t off = start + static_cast<std::size_t>(col - 1);
  if (col < 1 || off > end) {
    throw IntegrityError("column " + std::to_string(col) + " outside line " +
                         std::to_string(line) + " of " + path_);
  }
  return off;
}

std::string_view SourceFile::line_text(int line) const {
  std::size_t start = offset(line, 1);
  std::size_t end = line == line_count() ? text_.size()
                                         : line_starts_[static_cast<std::size_t>(line)];
  std::string_view view(text_);
  view = view.substr(start, end - start);
  while (!view.empty() && (view.back() == '\n' || view.back() == '\r')) view.remove_suffix(1);
  return view;
}

std::string_view SourceFile::slice(const SourceSpan& span) const {
  std::size_t begin = offset(span.start_line, span.start_col);
  std::size_t end = offset(span.end_line, span.end_col);
  if (end < begin) throw IntegrityError("inverted span " + span.to_string());
  return std::string_view(text_).substr(begin, end - begin);
}

std::size_t find_invalid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    auto c = static_cast<unsigned char>(bytes[i]);
    int extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return i;
    }
    if (i + static_cast<std::size_t>(extra) >= bytes.size()) return i;
    for (int k = 1; k <= extra; ++k) {
      auto cc = static_cast<unsigned char>(bytes[i + static_cast<std::size_t>(k)]);
      if ((cc & 0xC0) != 0x80) return i;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong encodings and surrogates
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && (cp < 0x10000 || cp > 0x10FFFF)) || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return i;
    }
    i += static_cast<std::size_t>(extra) + 1;
  }
  return std::string_view::npos;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    bool continuation = c == '\\' && i + 1 < text.size() &&
                        (text[i + 1] == '\n' || text[i + 1] == '\r');
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || continuation) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace turtleflow
