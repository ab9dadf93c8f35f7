#include <fstream>
#include <map>
#include <sstream>

#include "turtleflow/frontend.hpp"

namespace fs = std::filesystem;

namespace turtleflow {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int ir::Program::find_module(const std::string& dotted) const {
  for (std::size_t i = 0; i < modules.size(); ++i) {
    if (modules[i].name == dotted) return static_cast<int>(i);
  }
  return -1;
}

namespace {

ir::Module parse_and_lower(const std::string& text, const std::string& path, const std::string& name) {
  ParseResult parsed = parse_module(text, path);
  if (!parsed.ok()) throw SyntaxFailure(path, parsed.diagnostics.front());
  auto source = std::make_shared<const SourceFile>(path, text);
  return lower(*parsed.module, source, name);
}

std::string strip_dots(const std::string& dotted) {
  std::size_t i = 0;
  while (i < dotted.size() && dotted[i] == '.') ++i;
  return dotted.substr(i);
}

/// Sibling file implementing `dotted`, if any.
std::optional<fs::path> locate(const fs::path& dir, const std::string& dotted) {
  if (dotted.empty()) return std::nullopt;
  fs::path rel;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) rel /= part;
  fs::path file = dir / rel;
  file += ".py";
  if (fs::is_regular_file(file)) return file;
  fs::path package = dir / rel / "__init__.py";
  if (fs::is_regular_file(package)) return package;
  return std::nullopt;
}

std::vector<std::string> imported_names(const ir::Module& m) {
  std::vector<std::string> names;
  for (const auto& p : m.procs) {
    for (const auto& b : p.blocks) {
      for (const auto& in : b.instrs) {
        if (in.op != ir::Opcode::Import) continue;
        names.push_back(strip_dots(in.name));
        if (!in.from_module.empty()) names.push_back(strip_dots(in.from_module));
      }
    }
  }
  return names;
}

}  // namespace

ir::Program load_program(const fs::path& entry) {
  ir::Program program;
  fs::path dir = entry.parent_path();
  std::string path = entry.string();
  program.modules.push_back(parse_and_lower(read_file(entry), path, entry.stem().string()));
  program.entry = 0;
  std::map<std::string, bool> seen{{entry.stem().string(), true}};
  for (std::size_t i = 0; i < program.modules.size(); ++i) {
    for (const auto& name : imported_names(program.modules[i])) {
      if (seen.count(name)) continue;
      seen[name] = true;
      auto file = locate(dir, name);
      if (!file || fs::equivalent(*file, entry)) continue;
      try {
        program.modules.push_back(parse_and_lower(read_file(*file), file->string(), name));
      } catch (const std::exception&) {
        // An unparsable sibling stays a library import.
      }
    }
  }
  return program;
}

ir::Program load_program_text(const std::string& text, const std::string& path) {
  ir::Program program;
  program.modules.push_back(parse_and_lower(text, path, fs::path(path).stem().string()));
  return program;
}

}  // namespace turtleflow
