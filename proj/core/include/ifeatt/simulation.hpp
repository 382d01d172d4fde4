#pragma once

// Monte Carlo design for the interactive-fixed-effects model:
//
//   D ~ Bernoulli(p), xi | D=d ~ N(d, 1), U_t iid N(0, 1),
//   (lambda, W) | D=d ~ N((d, 0), [[1, rho], [rho, 1]]),
//   Y_t(0) = theta_t + xi + lambda F_t + alpha W + U_t,
//   Y_t(1) = Y_t(0) + att for t >= t*,
//
// with theta_1 = theta_2 = 0, F_1 = 0, F_2 = 1. The base design has three
// periods; f_extra/theta_extra extend it to longer panels.

#include "ifeatt/alt_identification.hpp"
#include "ifeatt/panel.hpp"
#include "ifeatt/rc.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ifeatt::sim {

struct SimConfig {
  Index n = 1000;
  int reps = 1000;
  double f3 = 1.0;
  double rho = 1.0;
  std::uint64_t seed = 20210601;
  double theta3 = 2.0;
  double p = 0.5;
  double att_true = 1.0;
  double alpha = 0.0;
  std::vector<double> f_extra;      // F_4..F_T
  std::vector<double> theta_extra;  // theta_4..theta_T, same length as f_extra
  int t_star = 3;
  double u_ar = 0.0;  // AR(1) coefficient of U_t (stationary, unit variance)

  int t_total() const { return 3 + static_cast<int>(f_extra.size()); }
  double f_at(int t) const;
  double theta_at(int t) const;
  void validate() const;
  // Identifies the cell for seeding; excludes seed and reps.
  std::string cell_key() const;
};

struct SimUnitLatents {
  double d = 0.0;
  double xi = 0.0;
  double lambda = 0.0;
  double w = 0.0;
  VectorXd u;  // U_1..U_T
};

// The unobservables behind generate_panel(cfg, rep), unit by unit.
std::vector<SimUnitLatents> generate_latents(const SimConfig& cfg, int rep);

// Z = (1, W). Deterministic in (cfg, rep).
PanelDataset generate_panel(const SimConfig& cfg, int rep);

// One period per unit, drawn uniformly from 1..T.
RcDataset generate_rc(const SimConfig& cfg, int rep);

struct TvSimConfig {
  Index n = 20000;
  std::uint64_t seed = 20210601;
  double p = 0.5;
  double att_true = 1.0;
  double beta = 1.0;
  std::vector<double> f_path{2.0};      // F_3..F_T
  std::vector<double> theta_path{2.0};  // theta_3..theta_T
  double x_ar = 0.5;                    // AR(1) coefficient of the covariate shocks
  double x_loading = 1.0;               // X_t = x_loading * lambda + shock
  int t_star = 3;

  int t_total() const { return 2 + static_cast<int>(f_path.size()); }
  void validate() const;
};

// Y_t(0) = theta_t + xi + lambda F_t + X_t beta + U_t with one covariate.
TvPanelDataset generate_tv_panel(const TvSimConfig& cfg, int rep);

enum class SimEstimator { Ife = 0, Did = 1, Lt = 2 };
inline constexpr std::array<SimEstimator, 3> kSimEstimators{SimEstimator::Ife, SimEstimator::Did,
                                                            SimEstimator::Lt};
std::string_view estimator_name(SimEstimator e);

// ATT_3 for one replication; IFE uses X = intercept, W = the simulated W.
double estimate_att3(const PanelDataset& data, SimEstimator e);

struct Metrics {
  double bias = 0.0;
  double rmse = 0.0;
  double mad = 0.0;  // median |estimate - truth|
  int failed_reps = 0;
  int used_reps = 0;
};

// Bias, RMSE and MAD about the truth, skipping non-finite entries.
Metrics summarize(const std::vector<double>& estimates, double truth);

struct CellResult {
  Index n = 0;
  double f3 = 0.0;
  double rho = 0.0;
  std::array<Metrics, 3> metrics;  // indexed by SimEstimator

  const Metrics& at(SimEstimator e) const { return metrics[static_cast<std::size_t>(e)]; }
};

struct SimResult {
  std::vector<CellResult> cells;
};

// threads = 0 uses every hardware thread. Output is independent of threads.
SimResult run_grid(const std::vector<SimConfig>& cells, unsigned threads = 0);

// The 3 x 3 grid F3 in {1, 1.5, 2} x rho in {0.1, 0.5, 1}.
std::vector<SimConfig> table_grid(Index n, int reps, std::uint64_t seed);

enum class TableFormat { Csv, Text };

// Csv: one row per cell, columns n,f3,rho then {ife,did,lt}_{bias,rmse,mad},
// then {ife,did,lt}_failed. Text: the cells grouped by F3 with the Bias, RMSE
// and MAD blocks side by side.
std::string emit_table(const SimResult& result, TableFormat format);
SimResult parse_table_csv(const std::string& csv);

}  // namespace ifeatt::sim
