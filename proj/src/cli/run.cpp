#include <glob.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "turtleflow/cli.hpp"
#include "turtleflow/frontend.hpp"

namespace fs = std::filesystem;

namespace turtleflow {

void RunConfig::validate() const {
  if (n_tokens <= 0) throw ConfigError("n_tokens must be positive");
  if (workers <= 0) throw ConfigError("workers must be positive");
  if (analysis.budget_secs <= 0) throw ConfigError("budget_secs must be positive");
  if (analysis.max_restarts <= 0) throw ConfigError("max_restarts must be positive");
  if (analysis.turtle_depth <= 1) throw ConfigError("turtle_depth must be at least 2");
  if (roots.empty()) throw ConfigError("roots must name at least one library");
  for (const auto& r : roots)
    if (r.empty()) throw ConfigError("roots must not contain an empty name");
}

std::string RunConfig::digest() const {
  nlohmann::json j{{"n_tokens", n_tokens},
                   {"roots", roots},
                   {"budget_secs", analysis.budget_secs},
                   {"max_restarts", analysis.max_restarts},
                   {"turtle_depth", analysis.turtle_depth},
                   {"user_context", analysis.user_site_context ? "site" : "default"}};
  return fnv1a_hex(j.dump());
}

RunConfig load_config_file(const fs::path& path, RunConfig base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError("cannot load config " + path.string() + ": " + e.what());
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "output") base.output_dir = value.get<std::string>();
      else if (key == "n_tokens") base.n_tokens = value.get<int>();
      else if (key == "roots") base.roots = value.get<std::set<std::string>>();
      else if (key == "workers") base.workers = value.get<int>();
      else if (key == "format") base.dot = value.get<std::string>() == "dot";
      else if (key == "budget_secs") base.analysis.budget_secs = value.get<double>();
      else if (key == "max_restarts") base.analysis.max_restarts = value.get<int>();
      else if (key == "turtle_depth") base.analysis.turtle_depth = value.get<int>();
      else if (key == "user_context") base.analysis.user_site_context = value.get<std::string>() == "site";
      else throw ConfigError("unknown config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value in config " + path.string() + ": " + e.what());
  }
  return base;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (in.find_first_of("*?[") != std::string::npos) {
      glob_t g{};
      if (::glob(in.c_str(), 0, nullptr, &g) == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) files.emplace_back(g.gl_pathv[i]);
      }
      globfree(&g);
    } else if (fs::is_directory(in)) {
      for (const auto& entry : fs::recursive_directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ".py") files.push_back(entry.path().string());
      }
    } else {
      files.push_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

std::string output_stem(const std::string& path) {
  std::string p = fs::path(path).lexically_normal().string();
  while (p.rfind("../", 0) == 0) p = p.substr(3);
  if (!p.empty() && p[0] == '/') p = p.substr(1);
  if (p.size() > 3 && p.compare(p.size() - 3, 3, ".py") == 0) p.resize(p.size() - 3);
  std::string out;
  for (char c : p) {
    if (c == '/') out += "__";
    else out += c;
  }
  return out;
}

FileResult process_file(const std::string& path, const RunConfig& cfg, bool want_examples) {
  FileResult fr;
  fr.path = path;
  try {
    ir::Program program = load_program(path);
    AnalysisResult result = build_callgraph(program, cfg.analysis);
    fr.graph = build_dataflow_graph(result);

    const auto& entry = program.modules[program.entry];
    ParseResult parsed = parse_module(entry.source->text(), entry.path);
    auto calls = collect_ast_calls(*parsed.module, *entry.source);
    std::set<SourceSpan> resolved_spans;
    std::set<std::string> resolved_names;
    for (const auto& site : result.resolved_sites) {
      if (site.module != program.entry) continue;
      const ir::Instr& in = result.instr(site);
      if (in.op != ir::Opcode::CallOrNew || !in.explicit_) continue;
      resolved_spans.insert(in.span);
      resolved_names.insert(in.name);
    }
    fr.ast_calls = static_cast<int>(calls.size());
    for (const auto& c : calls) {
      bool located = resolved_spans.count(c.span) > 0;
      fr.matched_location += located;
      fr.matched_relaxed += located || (!c.simple_name.empty() && resolved_names.count(c.simple_name));
    }

    fr.candidates = enumerate_candidate_leaves(fr.graph);
    if (want_examples) {
      for (int t : fr.candidates) {
        try {
          fr.examples.push_back(make_example(fr.graph, t, cfg.n_tokens));
        } catch (const ExampleSkipped& e) {
          fr.skipped.push_back(e.what());
        }
      }
    }
    fr.ok = true;
  } catch (const std::exception& e) {
    fr.ok = false;
    fr.error = e.what();
    fr.graph = DataflowGraph{};
    fr.examples.clear();
    fr.candidates.clear();
  }
  return fr;
}

std::vector<FileResult> process_corpus(const std::vector<std::string>& files, const RunConfig& cfg,
                                       bool want_examples) {
  std::vector<FileResult> results(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) results[i] = process_file(files[i], cfg, want_examples);
  };
  int n = std::max(1, std::min<int>(cfg.workers, static_cast<int>(files.size())));
  if (n == 1) {
    worker();
    return results;
  }
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace turtleflow
