#pragma once

// Long-format CSV ingestion: one row per (unit, period) for panels, one row
// per observation for repeated cross sections. Header row, comma separated,
// '.' decimal point. Period labels must be integers; they are remapped to
// 1..T in increasing order.

#include "ifeatt/alt_identification.hpp"
#include "ifeatt/panel.hpp"
#include "ifeatt/rc.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ifeatt {

struct CsvSchema {
  std::string id = "id";
  std::string period = "period";
  std::string outcome = "y";
  std::string treated = "d";
  std::string group = "group";
  // Covariate columns in order. An intercept named "const" is always
  // prepended for the time-invariant loaders.
  std::vector<std::string> covariates;
};

// Rows parsed from a CSV file; every requested column is present.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  Index column(const std::string& name) const;  // throws ParseError when absent
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

// Balanced panel with time-invariant covariates and treatment. Throws
// UnbalancedPanel (listing the ids), NonConstantCovariate, BadPeriodLabels.
PanelDataset load_panel_csv(const CsvTable& table, const CsvSchema& schema, int t_star = 3);
PanelDataset load_panel_csv(const std::string& path, const CsvSchema& schema, int t_star = 3);

// No id column; throws EmptyPeriod when a period inside the label range has
// no rows.
RcDataset load_rc_csv(const CsvTable& table, const CsvSchema& schema, int t_star = 3);
RcDataset load_rc_csv(const std::string& path, const CsvSchema& schema, int t_star = 3);

// Balanced panel whose covariates vary over time (no intercept added).
TvPanelDataset load_tv_csv(const CsvTable& table, const CsvSchema& schema, int t_star = 3);
TvPanelDataset load_tv_csv(const std::string& path, const CsvSchema& schema, int t_star = 3);

// Units labeled by the period label of their first treatment; 0 or an empty
// field marks the never-treated.
struct MultiGroupDataset {
  MatrixXd y;               // n x T
  MatrixXd z;               // n x K, column 0 is the intercept
  std::vector<int> group;   // 0 for never treated, else first treated period in 1..T
  std::vector<std::string> covariate_names;
  std::vector<std::string> period_labels;

  Index n() const { return y.rows(); }
  int t_total() const { return static_cast<int>(y.cols()); }
  void validate() const;
  MultiGroupDataset subset(const std::vector<Index>& units) const;
};

MultiGroupDataset load_multigroup_csv(const CsvTable& table, const CsvSchema& schema);
MultiGroupDataset load_multigroup_csv(const std::string& path, const CsvSchema& schema);

// Writes id, period, outcome, treated and the non-intercept covariates.
void write_panel_csv(std::ostream& out, const PanelDataset& data, const CsvSchema& schema);
void write_panel_csv(const std::string& path, const PanelDataset& data, const CsvSchema& schema);

// Resolves covariate names ("const" is the intercept) to columns of z.
ModelSpec resolve_spec(const std::vector<std::string>& covariate_names,
                       const std::vector<std::string>& x_names,
                       const std::vector<std::string>& w_names);

}  // namespace ifeatt
