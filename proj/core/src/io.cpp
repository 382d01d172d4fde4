#include "ifeatt/io.hpp"

#include "ifeatt/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace ifeatt {

namespace {

std::vector<std::string> parse_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw Error(ErrorCode::ParseError, "unterminated quote on line " + std::to_string(line_no));
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

bool is_missing(const std::string& field) { return field.empty() || field == "NA" || field == "NaN"; }

double parse_number(const std::string& field, const std::string& column, std::size_t row) {
  if (is_missing(field)) {
    throw Error(ErrorCode::NonFiniteInput,
                "missing value in column '" + column + "' on data row " + std::to_string(row + 1));
  }
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::ParseError, "'" + field + "' in column '" + column + "' on data row " +
                                           std::to_string(row + 1) + " is not a number");
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonFiniteInput, "non-finite value in column '" + column + "'");
  }
  return value;
}

long long parse_period(const std::string& field, std::size_t row) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::BadPeriodLabels, "period label '" + field + "' on data row " +
                                                std::to_string(row + 1) + " is not an integer");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Sorted distinct period labels and their 1-based positions.
struct PeriodMap {
  std::vector<long long> labels;
  std::map<long long, int> index;

  int t_total() const { return static_cast<int>(labels.size()); }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (long long l : labels) out.push_back(std::to_string(l));
    return out;
  }
};

PeriodMap map_periods(const std::vector<long long>& raw, ErrorCode gap_error) {
  PeriodMap map;
  map.labels = raw;
  std::sort(map.labels.begin(), map.labels.end());
  map.labels.erase(std::unique(map.labels.begin(), map.labels.end()), map.labels.end());
  if (map.labels.empty()) throw Error(ErrorCode::InvalidArgument, "file has no data rows");
  for (std::size_t j = 1; j < map.labels.size(); ++j) {
    if (map.labels[j] != map.labels[j - 1] + 1) {
      throw Error(gap_error, "period labels are not contiguous: no rows for period " +
                                 std::to_string(map.labels[j - 1] + 1));
    }
  }
  for (std::size_t j = 0; j < map.labels.size(); ++j) {
    map.index[map.labels[j]] = static_cast<int>(j) + 1;
  }
  return map;
}

std::vector<long long> raw_periods(const CsvTable& table, Index col) {
  std::vector<long long> raw;
  raw.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    raw.push_back(parse_period(table.rows[r][static_cast<std::size_t>(col)], r));
  }
  return raw;
}

// Pivots long rows into units x periods, tracking which cells were seen.
struct Pivot {
  std::vector<std::string> ids;        // first-appearance order
  std::vector<Index> unit_of_row;
  std::vector<int> period_of_row;
  PeriodMap periods;
  int t_total = 0;
};

Pivot pivot(const CsvTable& table, const CsvSchema& schema) {
  const Index id_col = table.column(schema.id);
  const Index period_col = table.column(schema.period);
  Pivot p;
  p.periods = map_periods(raw_periods(table, period_col), ErrorCode::BadPeriodLabels);
  p.t_total = p.periods.t_total();
  std::unordered_map<std::string, Index> unit_index;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& id = table.rows[r][static_cast<std::size_t>(id_col)];
    auto [it, inserted] = unit_index.emplace(id, static_cast<Index>(p.ids.size()));
    if (inserted) p.ids.push_back(id);
    p.unit_of_row.push_back(it->second);
    p.period_of_row.push_back(
        p.periods.index.at(parse_period(table.rows[r][static_cast<std::size_t>(period_col)], r)));
  }
  // Every unit must appear exactly once in every period.
  const auto n = static_cast<Index>(p.ids.size());
  std::vector<int> seen(static_cast<std::size_t>(n * p.t_total), 0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    ++seen[static_cast<std::size_t>(p.unit_of_row[r] * p.t_total + p.period_of_row[r] - 1)];
  }
  std::string offenders;
  for (Index i = 0; i < n; ++i) {
    for (int t = 0; t < p.t_total; ++t) {
      if (seen[static_cast<std::size_t>(i * p.t_total + t)] != 1) {
        offenders += (offenders.empty() ? "" : ", ") + p.ids[static_cast<std::size_t>(i)];
        break;
      }
    }
  }
  if (!offenders.empty()) {
    throw Error(ErrorCode::UnbalancedPanel,
                "units without exactly one row per period: {" + offenders + "}");
  }
  return p;
}

// Fills column values that must be constant within a unit.
void fill_constant(const CsvTable& table, const Pivot& p, Index col, const std::string& name,
                   Eigen::Ref<VectorXd> out) {
  std::vector<bool> set(static_cast<std::size_t>(out.size()), false);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const Index i = p.unit_of_row[r];
    const double v = parse_number(table.rows[r][static_cast<std::size_t>(col)], name, r);
    if (!set[static_cast<std::size_t>(i)]) {
      out(i) = v;
      set[static_cast<std::size_t>(i)] = true;
    } else if (out(i) != v) {
      throw Error(ErrorCode::NonConstantCovariate, "column '" + name + "' changes over time for unit " +
                                                       p.ids[static_cast<std::size_t>(i)]);
    }
  }
}

void fill_varying(const CsvTable& table, const Pivot& p, Index col, const std::string& name,
                  MatrixXd& out) {
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out(p.unit_of_row[r], p.period_of_row[r] - 1) =
        parse_number(table.rows[r][static_cast<std::size_t>(col)], name, r);
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return in;
}

}  // namespace

Index CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::ParseError, "missing column '" + name + "'");
  return it - header.begin();
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = parse_line(line, line_no);
    for (auto& f : fields) f = trim(f);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + " has " +
                                             std::to_string(fields.size()) + " fields, header has " +
                                             std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw Error(ErrorCode::ParseError, "empty file");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  auto in = open_input(path);
  return read_csv(in);
}

PanelDataset load_panel_csv(const CsvTable& table, const CsvSchema& schema, int t_star) {
  const Index y_col = table.column(schema.outcome);
  const Index d_col = table.column(schema.treated);
  const Pivot p = pivot(table, schema);
  const auto n = static_cast<Index>(p.ids.size());
  const auto k = static_cast<Index>(schema.covariates.size()) + 1;
  PanelDataset data;
  data.y.resize(n, p.t_total);
  data.z.resize(n, k);
  data.d.resize(n);
  data.t_star = t_star;
  data.z.col(0).setOnes();
  fill_varying(table, p, y_col, schema.outcome, data.y);
  fill_constant(table, p, d_col, schema.treated, data.d);
  data.covariate_names.push_back("const");
  for (std::size_t c = 0; c < schema.covariates.size(); ++c) {
    const auto& name = schema.covariates[c];
    fill_constant(table, p, table.column(name), name, data.z.col(static_cast<Index>(c) + 1));
    data.covariate_names.push_back(name);
  }
  data.period_labels = p.periods.names();
  data.validate();
  return data;
}

PanelDataset load_panel_csv(const std::string& path, const CsvSchema& schema, int t_star) {
  return load_panel_csv(read_csv_file(path), schema, t_star);
}

RcDataset load_rc_csv(const CsvTable& table, const CsvSchema& schema, int t_star) {
  const Index period_col = table.column(schema.period);
  const Index y_col = table.column(schema.outcome);
  const Index d_col = table.column(schema.treated);
  const PeriodMap periods = map_periods(raw_periods(table, period_col), ErrorCode::EmptyPeriod);
  const auto rows = static_cast<Index>(table.rows.size());
  const auto k = static_cast<Index>(schema.covariates.size()) + 1;
  std::vector<Index> cov_cols;
  for (const auto& name : schema.covariates) cov_cols.push_back(table.column(name));

  RcDataset data;
  data.y.resize(rows);
  data.z.resize(rows, k);
  data.d.resize(rows);
  data.t.resize(static_cast<std::size_t>(rows));
  data.t_total = periods.t_total();
  data.t_star = t_star;
  for (Index r = 0; r < rows; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    const auto ur = static_cast<std::size_t>(r);
    data.t[ur] = periods.index.at(parse_period(row[static_cast<std::size_t>(period_col)], ur));
    data.y(r) = parse_number(row[static_cast<std::size_t>(y_col)], schema.outcome, ur);
    data.d(r) = parse_number(row[static_cast<std::size_t>(d_col)], schema.treated, ur);
    data.z(r, 0) = 1.0;
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      data.z(r, static_cast<Index>(c) + 1) =
          parse_number(row[static_cast<std::size_t>(cov_cols[c])], schema.covariates[c], ur);
    }
  }
  data.covariate_names.push_back("const");
  data.covariate_names.insert(data.covariate_names.end(), schema.covariates.begin(),
                              schema.covariates.end());
  data.period_labels = periods.names();
  data.validate();
  return data;
}

RcDataset load_rc_csv(const std::string& path, const CsvSchema& schema, int t_star) {
  return load_rc_csv(read_csv_file(path), schema, t_star);
}

TvPanelDataset load_tv_csv(const CsvTable& table, const CsvSchema& schema, int t_star) {
  const Index y_col = table.column(schema.outcome);
  const Index d_col = table.column(schema.treated);
  const Pivot p = pivot(table, schema);
  const auto n = static_cast<Index>(p.ids.size());
  TvPanelDataset data;
  data.y.resize(n, p.t_total);
  data.d.resize(n);
  data.t_star = t_star;
  fill_varying(table, p, y_col, schema.outcome, data.y);
  fill_constant(table, p, d_col, schema.treated, data.d);
  for (const auto& name : schema.covariates) {
    MatrixXd x(n, p.t_total);
    fill_varying(table, p, table.column(name), name, x);
    data.x_tv.push_back(std::move(x));
    data.covariate_names.push_back(name);
  }
  data.period_labels = p.periods.names();
  data.validate();
  return data;
}

TvPanelDataset load_tv_csv(const std::string& path, const CsvSchema& schema, int t_star) {
  return load_tv_csv(read_csv_file(path), schema, t_star);
}

void MultiGroupDataset::validate() const {
  if (n() < 1) throw Error(ErrorCode::InvalidArgument, "panel has no units");
  if (t_total() < 3) throw Error(ErrorCode::InvalidArgument, "need at least 3 periods");
  if (z.rows() != n() || static_cast<Index>(group.size()) != n()) {
    throw Error(ErrorCode::DimensionMismatch, "y, z and group disagree on the number of units");
  }
  if (!y.allFinite() || !z.allFinite()) throw Error(ErrorCode::NonFiniteInput, "non-finite values");
  if (z.cols() < 1 || (z.col(0).array() != 1.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "column 0 of z must be an all-ones intercept");
  }
  bool never = false;
  for (int g : group) {
    if (g == 0) {
      never = true;
    } else if (g < 3 || g > t_total()) {
      throw Error(ErrorCode::InvalidArgument, "treatment groups must start in period 3 or later, got " +
                                                  std::to_string(g));
    }
  }
  if (!never) throw Error(ErrorCode::InvalidArgument, "no never-treated units");
}

MultiGroupDataset MultiGroupDataset::subset(const std::vector<Index>& units) const {
  MultiGroupDataset out;
  const auto count = static_cast<Index>(units.size());
  out.y.resize(count, y.cols());
  out.z.resize(count, z.cols());
  out.group.resize(units.size());
  for (Index r = 0; r < count; ++r) {
    const Index i = units[static_cast<std::size_t>(r)];
    out.y.row(r) = y.row(i);
    out.z.row(r) = z.row(i);
    out.group[static_cast<std::size_t>(r)] = group[static_cast<std::size_t>(i)];
  }
  out.covariate_names = covariate_names;
  out.period_labels = period_labels;
  return out;
}

MultiGroupDataset load_multigroup_csv(const CsvTable& table, const CsvSchema& schema) {
  const Index y_col = table.column(schema.outcome);
  const Index g_col = table.column(schema.group);
  const Pivot p = pivot(table, schema);
  const auto n = static_cast<Index>(p.ids.size());
  const auto k = static_cast<Index>(schema.covariates.size()) + 1;
  MultiGroupDataset data;
  data.y.resize(n, p.t_total);
  data.z.resize(n, k);
  data.z.col(0).setOnes();
  data.group.assign(static_cast<std::size_t>(n), -1);
  fill_varying(table, p, y_col, schema.outcome, data.y);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& field = table.rows[r][static_cast<std::size_t>(g_col)];
    int g = 0;
    if (!is_missing(field) && field != "0") {
      const long long label = parse_period(field, r);
      const auto it = p.periods.index.find(label);
      if (it == p.periods.index.end()) {
        throw Error(ErrorCode::BadPeriodLabels, "group label " + field + " is not an observed period");
      }
      g = it->second;
    }
    int& slot = data.group[static_cast<std::size_t>(p.unit_of_row[r])];
    if (slot == -1) {
      slot = g;
    } else if (slot != g) {
      throw Error(ErrorCode::NonConstantCovariate, "column '" + schema.group +
                                                       "' changes over time for unit " +
                                                       p.ids[static_cast<std::size_t>(p.unit_of_row[r])]);
    }
  }
  data.covariate_names.push_back("const");
  for (std::size_t c = 0; c < schema.covariates.size(); ++c) {
    const auto& name = schema.covariates[c];
    fill_constant(table, p, table.column(name), name, data.z.col(static_cast<Index>(c) + 1));
    data.covariate_names.push_back(name);
  }
  data.period_labels = p.periods.names();
  data.validate();
  return data;
}

MultiGroupDataset load_multigroup_csv(const std::string& path, const CsvSchema& schema) {
  return load_multigroup_csv(read_csv_file(path), schema);
}

void write_panel_csv(std::ostream& out, const PanelDataset& data, const CsvSchema& schema) {
  const Index k = data.k();
  std::vector<std::string> names;
  for (Index c = 1; c < k; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    if (uc - 1 < schema.covariates.size()) {
      names.push_back(schema.covariates[uc - 1]);
    } else if (uc < data.covariate_names.size()) {
      names.push_back(data.covariate_names[uc]);
    } else {
      names.push_back("z" + std::to_string(c));
    }
  }
  out << schema.id << ',' << schema.period << ',' << schema.outcome << ',' << schema.treated;
  for (const auto& name : names) out << ',' << name;
  out << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    for (int t = 1; t <= data.t_total(); ++t) {
      const auto ut = static_cast<std::size_t>(t - 1);
      const std::string label =
          ut < data.period_labels.size() ? data.period_labels[ut] : std::to_string(t);
      out << (i + 1) << ',' << label << ',' << format_double(data.y(i, t - 1)) << ','
          << format_double(data.d(i));
      for (Index c = 1; c < k; ++c) out << ',' << format_double(data.z(i, c));
      out << '\n';
    }
  }
}

void write_panel_csv(const std::string& path, const PanelDataset& data, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_panel_csv(out, data, schema);
}

ModelSpec resolve_spec(const std::vector<std::string>& covariate_names,
                       const std::vector<std::string>& x_names,
                       const std::vector<std::string>& w_names) {
  auto lookup = [&](const std::string& name) -> Index {
    const auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) {
      throw Error(ErrorCode::SpecMismatch, "unknown covariate '" + name + "'");
    }
    return it - covariate_names.begin();
  };
  ModelSpec spec;
  for (const auto& name : x_names) spec.x_cols.push_back(lookup(name));
  for (const auto& name : w_names) spec.w_cols.push_back(lookup(name));
  return spec;
}

}  // namespace ifeatt
