#pragma once

#include <filesystem>
#include <string>

#include "cylab/problem_spec.hpp"

namespace cylab::scenarios {

struct RunOptions {
  bool dump_mesh = false;
  std::string sections_file;  ///< classify input; empty = <out>/sections.csv
};

/// Executes one scenario (solve, capacity, wiener, classify, verify-map) and
/// writes report.json plus the scenario's CSV artifacts into `out`.  Returns
/// 0 on success and 3 on solver non-convergence (partial diagnostics are
/// still written).  Validation problems throw spec::SpecError, which the CLI
/// maps to exit code 2.  Identical spec, seed and thread count produce
/// byte-identical report.json.
int run_command(const std::string& command, const spec::ProblemSpec& ps,
                const std::filesystem::path& out, const RunOptions& opts = {});

}  // namespace cylab::scenarios
