#pragma once

#include "ifeatt/io.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ifeatt::cli {

// Keys of the JSON config file (all optional):
//   command, seed, output, threads,
//   data:      {path, kind: panel|rc|tv|multigroup},
//   schema:    {id, period, outcome, treated, group, covariates: [..]},
//   model:     {estimator: ife|did|lt|t3|t4, x_cols: [..], w_cols: [..], t_star},
//   inference: {bootstrap_reps, level, min_group_size},
//   simulate:  {cells: ["F3=1,rho=1,n=1000", ..], grid_n, reps, alpha, table_csv}.
// Command-line flags override the file.
struct RunConfig {
  std::string command;
  std::string data_path;
  std::string data_kind = "panel";
  CsvSchema schema;
  std::string estimator = "ife";
  std::vector<std::string> x_cols;
  std::vector<std::string> w_cols;
  int t_star = 3;
  int bootstrap_reps = 0;  // 0: no bootstrap
  double level = 0.95;
  Index min_group_size = 10;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string output;  // JSON result path; stdout when empty
  std::vector<std::string> cells;
  Index grid_n = 0;  // nonzero: the full 3 x 3 grid at this n
  int reps = 1000;
  double alpha = 0.0;
  std::string table_csv;
};

RunConfig parse_run_config(const std::string& json_text);

// Exit codes: 0 success, 2 invalid input or configuration, 3 estimation failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ifeatt::cli
