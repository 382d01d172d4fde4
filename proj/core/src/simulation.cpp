#include "ifeatt/simulation.hpp"

#include "ifeatt/comparators.hpp"
#include "ifeatt/error.hpp"
#include "ifeatt/parallel.hpp"
#include "ifeatt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace ifeatt::sim {

namespace {

// Distinguishes the generators so that one seed never reuses a stream.
constexpr std::uint64_t kPanelStream = 0x70616e656cULL;
constexpr std::uint64_t kRcStream = 0x7263ULL;
constexpr std::uint64_t kTvStream = 0x7476ULL;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct UnitDraw {
  double d = 0.0;
  double xi = 0.0;
  double lambda = 0.0;
  double w = 0.0;
};

// Fixed draw order per unit: D, xi, (e1, e2), U_1..U_T.
template <typename Engine>
UnitDraw draw_unit(const SimConfig& cfg, Engine& eng, std::normal_distribution<double>& normal,
                   std::uniform_real_distribution<double>& unif) {
  UnitDraw u;
  u.d = unif(eng) < cfg.p ? 1.0 : 0.0;
  u.xi = u.d + normal(eng);
  const double e1 = normal(eng);
  const double e2 = normal(eng);
  u.lambda = u.d + e1;
  u.w = cfg.rho * e1 + std::sqrt(std::max(0.0, 1.0 - cfg.rho * cfg.rho)) * e2;
  return u;
}

template <typename Engine>
SimUnitLatents draw_latents(const SimConfig& cfg, Engine& eng, std::normal_distribution<double>& normal,
                            std::uniform_real_distribution<double>& unif) {
  const UnitDraw u = draw_unit(cfg, eng, normal, unif);
  SimUnitLatents out{u.d, u.xi, u.lambda, u.w, VectorXd(cfg.t_total())};
  const double innovation_scale = std::sqrt(1.0 - cfg.u_ar * cfg.u_ar);
  double shock = 0.0;
  for (int t = 1; t <= cfg.t_total(); ++t) {
    const double e = normal(eng);
    shock = t == 1 ? e : cfg.u_ar * shock + innovation_scale * e;
    out.u(t - 1) = shock;
  }
  return out;
}

double outcome(const SimConfig& cfg, const SimUnitLatents& u, int t) {
  double v = cfg.theta_at(t) + u.xi + u.lambda * cfg.f_at(t) + cfg.alpha * u.w + u.u(t - 1);
  if (t >= cfg.t_star) v += u.d * cfg.att_true;
  return v;
}

}  // namespace

double SimConfig::f_at(int t) const {
  if (t == 1) return 0.0;
  if (t == 2) return 1.0;
  if (t == 3) return f3;
  return f_extra.at(static_cast<std::size_t>(t - 4));
}

double SimConfig::theta_at(int t) const {
  if (t <= 2) return 0.0;
  if (t == 3) return theta3;
  return theta_extra.at(static_cast<std::size_t>(t - 4));
}

void SimConfig::validate() const {
  if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be at least 1");
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "n must be at least 4");
  if (!(std::abs(rho) <= 1.0)) throw Error(ErrorCode::InvalidArgument, "|rho| must be <= 1");
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in (0, 1)");
  if (!(std::abs(u_ar) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|u_ar| must be < 1");
  if (theta_extra.size() != f_extra.size()) {
    throw Error(ErrorCode::DimensionMismatch, "theta_extra and f_extra differ in length");
  }
  if (t_star < 3 || t_star > t_total()) {
    throw Error(ErrorCode::InvalidArgument, "t_star must lie in [3, T]");
  }
}

std::string SimConfig::cell_key() const {
  std::ostringstream key;
  key << "n=" << n << ";f3=" << format_double(f3) << ";rho=" << format_double(rho)
      << ";theta3=" << format_double(theta3) << ";p=" << format_double(p)
      << ";att=" << format_double(att_true) << ";alpha=" << format_double(alpha)
      << ";tstar=" << t_star << ";uar=" << format_double(u_ar) << ";f=";
  for (double f : f_extra) key << format_double(f) << ',';
  key << ";theta=";
  for (double th : theta_extra) key << format_double(th) << ',';
  return key.str();
}

std::vector<SimUnitLatents> generate_latents(const SimConfig& cfg, int rep) {
  cfg.validate();
  auto eng = rng::substream(cfg.seed, rng::hash_key(cfg.cell_key()) ^ kPanelStream,
                            static_cast<std::uint64_t>(rep));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  std::vector<SimUnitLatents> units;
  units.reserve(static_cast<std::size_t>(cfg.n));
  for (Index i = 0; i < cfg.n; ++i) units.push_back(draw_latents(cfg, eng, normal, unif));
  return units;
}

PanelDataset generate_panel(const SimConfig& cfg, int rep) {
  const std::vector<SimUnitLatents> units = generate_latents(cfg, rep);
  PanelDataset data;
  const int t_total = cfg.t_total();
  data.y.resize(cfg.n, t_total);
  data.z.resize(cfg.n, 2);
  data.d.resize(cfg.n);
  data.t_star = cfg.t_star;
  data.covariate_names = {"const", "w"};
  for (Index i = 0; i < cfg.n; ++i) {
    const SimUnitLatents& u = units[static_cast<std::size_t>(i)];
    for (int t = 1; t <= t_total; ++t) data.y(i, t - 1) = outcome(cfg, u, t);
    data.z(i, 0) = 1.0;
    data.z(i, 1) = u.w;
    data.d(i) = u.d;
  }
  return data;
}

RcDataset generate_rc(const SimConfig& cfg, int rep) {
  cfg.validate();
  auto eng = rng::substream(cfg.seed, rng::hash_key(cfg.cell_key()) ^ kRcStream,
                            static_cast<std::uint64_t>(rep));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const int t_total = cfg.t_total();
  std::uniform_int_distribution<int> period(1, t_total);
  RcDataset data;
  data.y.resize(cfg.n);
  data.z.resize(cfg.n, 2);
  data.d.resize(cfg.n);
  data.t.resize(static_cast<std::size_t>(cfg.n));
  data.t_total = t_total;
  data.t_star = cfg.t_star;
  data.covariate_names = {"const", "w"};
  for (Index i = 0; i < cfg.n; ++i) {
    const SimUnitLatents u = draw_latents(cfg, eng, normal, unif);
    const int s = period(eng);
    data.y(i) = outcome(cfg, u, s);
    data.z(i, 0) = 1.0;
    data.z(i, 1) = u.w;
    data.d(i) = u.d;
    data.t[static_cast<std::size_t>(i)] = s;
  }
  return data;
}

void TvSimConfig::validate() const {
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "n must be at least 4");
  if (f_path.empty() || f_path.size() != theta_path.size()) {
    throw Error(ErrorCode::DimensionMismatch, "f_path and theta_path must be nonempty and equal");
  }
  if (!(std::abs(x_ar) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|x_ar| must be < 1");
  if (t_star < 3 || t_star > t_total()) {
    throw Error(ErrorCode::InvalidArgument, "t_star must lie in [3, T]");
  }
}

TvPanelDataset generate_tv_panel(const TvSimConfig& cfg, int rep) {
  cfg.validate();
  auto eng = rng::substream(cfg.seed, kTvStream, static_cast<std::uint64_t>(rep));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const int t_total = cfg.t_total();
  TvPanelDataset data;
  data.y.resize(cfg.n, t_total);
  data.x_tv.assign(1, MatrixXd(cfg.n, t_total));
  data.d.resize(cfg.n);
  data.t_star = cfg.t_star;
  data.covariate_names = {"x"};
  const double scale = std::sqrt(1.0 - cfg.x_ar * cfg.x_ar);
  for (Index i = 0; i < cfg.n; ++i) {
    const double d = unif(eng) < cfg.p ? 1.0 : 0.0;
    const double xi = d + normal(eng);
    const double lambda = d + normal(eng);
    double shock = 0.0;
    for (int t = 1; t <= t_total; ++t) {
      const double e = normal(eng);
      shock = t == 1 ? e : cfg.x_ar * shock + scale * e;
      const double x = cfg.x_loading * lambda + shock;
      const double f = t == 1 ? 0.0 : (t == 2 ? 1.0 : cfg.f_path[static_cast<std::size_t>(t - 3)]);
      const double theta = t <= 2 ? 0.0 : cfg.theta_path[static_cast<std::size_t>(t - 3)];
      double y = theta + xi + lambda * f + x * cfg.beta + normal(eng);
      if (t >= cfg.t_star) y += d * cfg.att_true;
      data.x_tv[0](i, t - 1) = x;
      data.y(i, t - 1) = y;
    }
    data.d(i) = d;
  }
  return data;
}

std::string_view estimator_name(SimEstimator e) {
  switch (e) {
    case SimEstimator::Ife: return "ife";
    case SimEstimator::Did: return "did";
    case SimEstimator::Lt: return "lt";
  }
  return "unknown";
}

double estimate_att3(const PanelDataset& data, SimEstimator e) {
  switch (e) {
    case SimEstimator::Ife: {
      EstimateOptions options;
      options.compute_inference = false;
      const PanelFit fit = estimate_gamma1(data, ModelSpec::intercept_in_x(data.k()), options);
      return att_value(fit.params, 3);
    }
    case SimEstimator::Did: return did_att(data, 3);
    case SimEstimator::Lt: return lt_att(data, 3);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown estimator");
}

Metrics summarize(const std::vector<double>& estimates, double truth) {
  Metrics m;
  std::vector<double> abs_err;
  abs_err.reserve(estimates.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : estimates) {
    if (!std::isfinite(v)) {
      ++m.failed_reps;
      continue;
    }
    const double err = v - truth;
    sum += err;
    sum_sq += err * err;
    abs_err.push_back(std::abs(err));
  }
  m.used_reps = static_cast<int>(abs_err.size());
  if (abs_err.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.bias = m.rmse = m.mad = nan;
    return m;
  }
  const auto used = static_cast<double>(abs_err.size());
  m.bias = sum / used;
  m.rmse = std::sqrt(sum_sq / used);
  std::sort(abs_err.begin(), abs_err.end());
  const std::size_t mid = abs_err.size() / 2;
  m.mad = abs_err.size() % 2 == 1 ? abs_err[mid] : 0.5 * (abs_err[mid - 1] + abs_err[mid]);
  return m;
}

SimResult run_grid(const std::vector<SimConfig>& cells, unsigned threads) {
  for (const auto& cfg : cells) cfg.validate();
  std::vector<std::size_t> offsets(cells.size() + 1, 0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    offsets[c + 1] = offsets[c] + static_cast<std::size_t>(cells[c].reps);
  }
  const std::size_t tasks = offsets.back();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::array<double, 3>> estimates(tasks, {nan, nan, nan});

  parallel_for(tasks, threads, [&](std::size_t task) {
    const auto cell = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), task) - offsets.begin() - 1);
    const int rep = static_cast<int>(task - offsets[cell]);
    const PanelDataset data = generate_panel(cells[cell], rep);
    for (SimEstimator e : kSimEstimators) {
      try {
        estimates[task][static_cast<std::size_t>(e)] = estimate_att3(data, e);
      } catch (const Error&) {
        // counted as a failed replication
      }
    }
  });

  SimResult result;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellResult cell;
    cell.n = cells[c].n;
    cell.f3 = cells[c].f3;
    cell.rho = cells[c].rho;
    for (SimEstimator e : kSimEstimators) {
      std::vector<double> column;
      column.reserve(static_cast<std::size_t>(cells[c].reps));
      for (std::size_t task = offsets[c]; task < offsets[c + 1]; ++task) {
        column.push_back(estimates[task][static_cast<std::size_t>(e)]);
      }
      cell.metrics[static_cast<std::size_t>(e)] = summarize(column, cells[c].att_true);
    }
    result.cells.push_back(cell);
  }
  return result;
}

std::vector<SimConfig> table_grid(Index n, int reps, std::uint64_t seed) {
  std::vector<SimConfig> cells;
  for (double f3 : {1.0, 1.5, 2.0}) {
    for (double rho : {0.1, 0.5, 1.0}) {
      SimConfig cfg;
      cfg.n = n;
      cfg.reps = reps;
      cfg.f3 = f3;
      cfg.rho = rho;
      cfg.seed = seed;
      cells.push_back(cfg);
    }
  }
  return cells;
}

namespace {

constexpr std::array<const char*, 3> kMetricNames{"bias", "rmse", "mad"};

double metric_value(const Metrics& m, std::size_t k) {
  return k == 0 ? m.bias : (k == 1 ? m.rmse : m.mad);
}

std::string csv_header() {
  std::string header = "n,f3,rho";
  for (const char* metric : kMetricNames) {
    for (SimEstimator e : kSimEstimators) {
      header += ',';
      header += estimator_name(e);
      header += '_';
      header += metric;
    }
  }
  for (SimEstimator e : kSimEstimators) {
    header += ',';
    header += estimator_name(e);
    header += "_failed";
  }
  return header;
}

std::string emit_csv(const SimResult& result) {
  std::ostringstream out;
  out << csv_header() << '\n';
  for (const auto& cell : result.cells) {
    out << cell.n << ',' << format_double(cell.f3) << ',' << format_double(cell.rho);
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
      for (SimEstimator e : kSimEstimators) out << ',' << format_double(metric_value(cell.at(e), k));
    }
    for (SimEstimator e : kSimEstimators) out << ',' << cell.at(e).failed_reps;
    out << '\n';
  }
  return out.str();
}

std::string emit_text(const SimResult& result) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %-26s   %-26s   %-26s\n", "", "Bias", "RMSE", "MAD");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-12s", "");
  out << buf;
  for (int block = 0; block < 3; ++block) {
    std::snprintf(buf, sizeof buf, " %8s %8s %8s  ", "IFE", "DID", "LT");
    out << buf;
  }
  out << '\n';
  Index current_n = -1;
  double current_f3 = std::numeric_limits<double>::quiet_NaN();
  for (const auto& cell : result.cells) {
    if (cell.n != current_n) {
      out << "n=" << cell.n << '\n';
      current_n = cell.n;
      current_f3 = std::numeric_limits<double>::quiet_NaN();
    }
    if (cell.f3 != current_f3) {
      std::snprintf(buf, sizeof buf, "F3=%g\n", cell.f3);
      out << buf;
      current_f3 = cell.f3;
    }
    std::snprintf(buf, sizeof buf, "  rho=%-6g", cell.rho);
    out << buf;
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
      out << ' ';
      for (SimEstimator e : kSimEstimators) {
        std::snprintf(buf, sizeof buf, " %8.3f", metric_value(cell.at(e), k));
        out << buf;
      }
      out << ' ';
    }
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(field);
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

}  // namespace

std::string emit_table(const SimResult& result, TableFormat format) {
  return format == TableFormat::Csv ? emit_csv(result) : emit_text(result);
}

SimResult parse_table_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw Error(ErrorCode::ParseError, "unexpected table header");
  }
  SimResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 15) throw Error(ErrorCode::ParseError, "expected 15 fields: " + line);
    try {
      CellResult cell;
      cell.n = std::stoll(fields[0]);
      cell.f3 = std::stod(fields[1]);
      cell.rho = std::stod(fields[2]);
      std::size_t col = 3;
      for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        for (SimEstimator e : kSimEstimators) {
          auto& m = cell.metrics[static_cast<std::size_t>(e)];
          const double v = std::stod(fields[col++]);
          (k == 0 ? m.bias : (k == 1 ? m.rmse : m.mad)) = v;
        }
      }
      for (SimEstimator e : kSimEstimators) {
        cell.metrics[static_cast<std::size_t>(e)].failed_reps = std::stoi(fields[col++]);
      }
      result.cells.push_back(cell);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, "malformed number in: " + line);
    }
  }
  return result;
}

}  // namespace ifeatt::sim
