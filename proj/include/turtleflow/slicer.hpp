#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "turtleflow/dfg.hpp"

namespace turtleflow {

inline constexpr std::string_view kSliceSeparator = "# <SLICE>";

/// Call-like nodes with no consumers and at least one producer.
std::vector<int> enumerate_candidate_leaves(const DataflowGraph& g);

/// Nodes from which `target` is reachable, including `target`.
/// Throws std::out_of_range for an unknown id.
std::set<int> backward_slice(const DataflowGraph& g, int target);

/// Renders the slice as source lines ending with the masked target line.
std::string render_slice(const DataflowGraph& g, const std::set<int>& slice_nodes, int target);

/// Tokens counted against the completion window: every lexical token except
/// zero-width DEDENT and ENDMARKER. Comments count.
int count_tokens(std::string_view text);

struct CompletionExample {
  std::string file;
  SourceSpan target_span;
  std::string label;
  std::string complete;
  std::string slice;
  std::string combined;
  int n_tokens = 1024;
};

/// The prefix before the target could not be tokenized.
struct ExampleSkipped : std::runtime_error {
  using std::runtime_error::runtime_error;
};

CompletionExample make_example(const DataflowGraph& g, int target, int n_tokens = 1024);

/// One JSONL line (with trailing newline) with sorted keys.
std::string example_json_line(const CompletionExample& e);

}  // namespace turtleflow
