#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <ostream>

#include "turtleflow/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace turtleflow {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Logs failures, writes errors.jsonl, and returns the exit code.
int report(const RunConfig& cfg, const std::vector<FileResult>& results, std::ostream& log) {
  std::string errors;
  int ok = 0;
  for (const auto& r : results) {
    if (r.ok) {
      ++ok;
      continue;
    }
    log << "error: " << r.error << "\n";
    errors += json{{"file", r.path}, {"error", r.error}}.dump() + "\n";
  }
  write_text(cfg.output_dir / "errors.jsonl", errors);
  return !results.empty() && ok == 0 ? 1 : 0;
}

std::vector<FileResult> run(const RunConfig& cfg, bool want_examples) {
  cfg.validate();
  return process_corpus(expand_inputs(cfg.inputs), cfg, want_examples);
}

std::string fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

}  // namespace

CorpusStats compute_stats(const std::vector<FileResult>& results) {
  CorpusStats s;
  for (const auto& r : results) {
    ++s.files_total;
    if (!r.ok) continue;
    ++s.files_analyzed;
    s.ast_calls_total += r.ast_calls;
    s.calls_matched_with_location += r.matched_location;
    s.calls_matched_relaxed += r.matched_relaxed;
    if (!r.candidates.empty()) ++s.programs_with_candidate_slices;
    for (const auto& e : r.examples) ++s.label_counts[e.label];
  }
  return s;
}

std::string stats_json(const CorpusStats& s) {
  auto ratio = [](long a, long b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  json j{{"files_total", s.files_total},
         {"files_analyzed", s.files_analyzed},
         {"ast_calls_total", s.ast_calls_total},
         {"calls_matched_with_location", s.calls_matched_with_location},
         {"calls_matched_relaxed", s.calls_matched_relaxed},
         {"location_match_rate", ratio(s.calls_matched_with_location, s.ast_calls_total)},
         {"relaxed_match_rate", ratio(s.calls_matched_relaxed, s.ast_calls_total)},
         {"programs_with_candidate_slices", s.programs_with_candidate_slices},
         {"programs_with_candidate_slices_rate", ratio(s.programs_with_candidate_slices, s.files_analyzed)},
         {"relaxed_match_rule", "name-presence"},
         {"label_counts", s.label_counts}};
  return j.dump(2) + "\n";
}

std::string labels_csv(const std::map<std::string, long>& label_counts) {
  std::vector<std::pair<std::string, long>> rows(label_counts.begin(), label_counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  long total = 0;
  for (const auto& r : rows) total += r.second;
  std::string out = "label,count,cumulative_fraction\n";
  long running = 0;
  for (const auto& [label, count] : rows) {
    running += count;
    std::string cell = label;
    if (cell.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : cell) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      cell = quoted + "\"";
    }
    out += cell + "," + std::to_string(count) + "," + fraction(static_cast<double>(running) / total) + "\n";
  }
  return out;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& log) {
  auto results = run(cfg, false);
  for (const auto& r : results) {
    if (!r.ok) continue;
    std::string stem = output_stem(r.path);
    write_text(cfg.output_dir / "graphs" / (stem + ".json"), export_json(r.graph));
    if (cfg.dot) write_text(cfg.output_dir / "graphs" / (stem + ".dot"), export_dot(r.graph));
  }
  return report(cfg, results, log);
}

int cmd_slice_dataset(const RunConfig& cfg, std::ostream& log) {
  auto results = run(cfg, true);
  std::string jsonl;
  json files = json::array();
  long examples = 0;
  long skipped = 0;
  int analyzed = 0;
  for (const auto& r : results) {
    json f{{"file", r.path}, {"examples", r.examples.size()}, {"skipped", r.skipped.size()}};
    if (!r.ok) f["error"] = r.error;
    files.push_back(std::move(f));
    if (!r.ok) continue;
    ++analyzed;
    for (const auto& e : r.examples) jsonl += example_json_line(e);
    for (const auto& s : r.skipped) log << "skipped example: " << s << "\n";
    examples += static_cast<long>(r.examples.size());
    skipped += static_cast<long>(r.skipped.size());
  }
  write_text(cfg.output_dir / "dataset.jsonl", jsonl);
  json manifest{{"config_digest", cfg.digest()},
                {"n_tokens", cfg.n_tokens},
                {"files_total", results.size()},
                {"files_analyzed", analyzed},
                {"examples", examples},
                {"skipped_examples", skipped},
                {"files", files}};
  write_text(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
  auto now = std::chrono::system_clock::now().time_since_epoch();
  write_text(cfg.output_dir / "manifest.time.json",
             json{{"written_at_unix", std::chrono::duration_cast<std::chrono::seconds>(now).count()}}.dump() + "\n");
  return report(cfg, results, log);
}

int cmd_stats(const RunConfig& cfg, std::ostream& log) {
  auto results = run(cfg, true);
  CorpusStats s = compute_stats(results);
  write_text(cfg.output_dir / "stats.json", stats_json(s));
  write_text(cfg.output_dir / "labels.csv", labels_csv(s.label_counts));
  return report(cfg, results, log);
}

int cmd_mlgraph(const RunConfig& cfg, std::ostream& log) {
  MlFilterConfig mcfg;
  mcfg.target_roots = cfg.roots;
  auto results = run(cfg, false);
  for (const auto& r : results) {
    if (!r.ok) continue;
    write_text(cfg.output_dir / "mlgraphs" / (output_stem(r.path) + ".json"),
               export_filtered_json(filter_graph(r.graph, mcfg)));
  }
  return report(cfg, results, log);
}

}  // namespace turtleflow
