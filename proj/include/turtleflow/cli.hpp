#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "turtleflow/callgraph.hpp"
#include "turtleflow/dfg.hpp"
#include "turtleflow/mlfilter.hpp"
#include "turtleflow/slicer.hpp"

namespace turtleflow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::vector<std::string> inputs;
  std::filesystem::path output_dir = "turtleflow-out";
  int n_tokens = 1024;
  std::set<std::string> roots{"sklearn", "xgboost", "lightgbm"};
  int workers = 1;
  bool dot = false;
  AnalysisOptions analysis;

  /// Throws ConfigError on non-positive budgets or an empty root set.
  void validate() const;
  /// Digest over every setting that affects payloads.
  [[nodiscard]] std::string digest() const;
};

/// Merges a JSON config file into `base`. Keys: output, n_tokens, roots,
/// workers, format, budget_secs, max_restarts, turtle_depth, user_context.
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base);

/// Files named directly, `.py` files under directories, and glob matches;
/// sorted and deduplicated.
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs);

struct FileResult {
  std::string path;
  bool ok = false;
  std::string error;
  DataflowGraph graph;
  std::vector<int> candidates;
  std::vector<CompletionExample> examples;
  std::vector<std::string> skipped;  // make_example diagnostics
  int ast_calls = 0;
  int matched_location = 0;
  int matched_relaxed = 0;
};

/// Analyzes one entry file end to end. Never throws for per-file failures.
FileResult process_file(const std::string& path, const RunConfig& cfg, bool want_examples);

/// Runs process_file over `files` on `cfg.workers` threads; results keep input order.
std::vector<FileResult> process_corpus(const std::vector<std::string>& files, const RunConfig& cfg,
                                       bool want_examples);

struct CorpusStats {
  int files_total = 0;
  int files_analyzed = 0;
  long ast_calls_total = 0;
  long calls_matched_with_location = 0;
  long calls_matched_relaxed = 0;
  int programs_with_candidate_slices = 0;
  std::map<std::string, long> label_counts;
};

CorpusStats compute_stats(const std::vector<FileResult>& results);
std::string stats_json(const CorpusStats& s);
/// Rows (label, count, cumulative_fraction), most frequent first.
std::string labels_csv(const std::map<std::string, long>& label_counts);

/// Output file stem for an input path: separators become "__", ".py" dropped.
std::string output_stem(const std::string& path);

// Commands write under cfg.output_dir and log per-file errors to `log`.
// They return the process exit code: 0 unless every input failed.
int cmd_analyze(const RunConfig& cfg, std::ostream& log);
int cmd_slice_dataset(const RunConfig& cfg, std::ostream& log);
int cmd_stats(const RunConfig& cfg, std::ostream& log);
int cmd_mlgraph(const RunConfig& cfg, std::ostream& log);

}  // namespace turtleflow
