#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "turtleflow/cli.hpp"
#include "turtleflow/frontend.hpp"

using namespace turtleflow;

namespace {

struct Flags {
  std::vector<std::string> paths;
  std::string out;
  std::string config;
  std::string format = "json";
  std::string user_context = "default";
  int n_tokens = 0;
  std::string roots;
  int workers = 0;
  double budget_secs = 0;
  int max_restarts = 0;
  int turtle_depth = 0;
};

struct Options {
  CLI::Option* out;
  CLI::Option* format;
  CLI::Option* user_context;
  CLI::Option* n_tokens;
  CLI::Option* roots;
  CLI::Option* workers;
  CLI::Option* budget;
  CLI::Option* restarts;
  CLI::Option* depth;
};

Options add_common(CLI::App* cmd, Flags& f) {
  Options o{};
  cmd->add_option("paths", f.paths, "Python files, directories or globs")->required();
  o.out = cmd->add_option("-o,--out", f.out, "Output directory");
  cmd->add_option("--config", f.config, "JSON config file with the same keys");
  o.format = cmd->add_option("--format", f.format, "Graph format")->check(CLI::IsMember({"json", "dot"}));
  o.n_tokens = cmd->add_option("--n-tokens", f.n_tokens, "Completion window in tokens");
  o.roots = cmd->add_option("--roots", f.roots, "ML library roots, comma separated");
  o.workers = cmd->add_option("--workers", f.workers, "Worker threads");
  o.budget = cmd->add_option("--budget-secs", f.budget_secs, "Per-file analysis time budget");
  o.restarts = cmd->add_option("--max-restarts", f.max_restarts, "Turtle-inheritance restart cap");
  o.depth = cmd->add_option("--turtle-depth", f.turtle_depth, "Turtle path depth cap");
  o.user_context = cmd->add_option("--user-context", f.user_context, "Context for user procedures")
                       ->check(CLI::IsMember({"default", "site"}));
  return o;
}

RunConfig make_config(const Flags& f, const Options& o) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = load_config_file(f.config, cfg);
  cfg.inputs = f.paths;
  if (o.out->count()) cfg.output_dir = f.out;
  if (o.format->count()) cfg.dot = f.format == "dot";
  if (o.n_tokens->count()) cfg.n_tokens = f.n_tokens;
  if (o.roots->count()) {
    cfg.roots.clear();
    std::stringstream in(f.roots);
    for (std::string r; std::getline(in, r, ',');)
      if (!r.empty()) cfg.roots.insert(r);
  }
  if (o.workers->count()) cfg.workers = f.workers;
  if (o.budget->count()) cfg.analysis.budget_secs = f.budget_secs;
  if (o.restarts->count()) cfg.analysis.max_restarts = f.max_restarts;
  if (o.depth->count()) cfg.analysis.turtle_depth = f.turtle_depth;
  if (o.user_context->count()) cfg.analysis.user_site_context = f.user_context == "site";
  cfg.validate();
  return cfg;
}

int dump(const std::vector<std::string>& paths, bool ir, bool cg) {
  int status = 0;
  for (const auto& file : expand_inputs(paths)) {
    try {
      auto program = load_program(file);
      if (ir) {
        for (const auto& m : program.modules) std::cout << ir::dump(m);
      }
      if (cg) std::cout << dump_callgraph(build_callgraph(program));
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      status = 1;
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Call graphs, dataflow graphs and completion slices for Python scripts"};
  app.require_subcommand(0, 1);
  std::vector<std::string> dump_paths;
  bool dump_ir = false;
  bool dump_cg = false;
  app.add_flag("--dump-ir", dump_ir, "Print the lowered IR of the given files");
  app.add_flag("--dump-callgraph", dump_cg, "Print the call graph of the given files");
  app.add_option("files", dump_paths, "Files for --dump-ir / --dump-callgraph");

  Flags analyze_f, slice_f, stats_f, ml_f;
  auto* analyze = app.add_subcommand("analyze", "Write a dataflow graph per file");
  auto analyze_o = add_common(analyze, analyze_f);
  auto* slice = app.add_subcommand("slice-dataset", "Write completion examples as JSONL");
  auto slice_o = add_common(slice, slice_f);
  auto* stats = app.add_subcommand("stats", "Write call coverage and label statistics");
  auto stats_o = add_common(stats, stats_f);
  auto* ml = app.add_subcommand("mlgraph", "Write graphs filtered to ML libraries");
  auto ml_o = add_common(ml, ml_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (dump_ir || dump_cg) return dump(dump_paths, dump_ir, dump_cg);
    if (analyze->parsed()) return cmd_analyze(make_config(analyze_f, analyze_o), std::cerr);
    if (slice->parsed()) return cmd_slice_dataset(make_config(slice_f, slice_o), std::cerr);
    if (stats->parsed()) return cmd_stats(make_config(stats_f, stats_o), std::cerr);
    if (ml->parsed()) return cmd_mlgraph(make_config(ml_f, ml_o), std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << app.help();
  return 0;
}
