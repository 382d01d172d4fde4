#pragma once

// Two alternatives to the time-invariant exclusion restriction.
//
// Serially uncorrelated errors: outcomes from other post-normalization periods
// instrument Y_2 - Y_1 in
//   Y_t - Y_1 = Z' delta_t + F_t (Y_2 - Y_1) + V_t.
//
// Strictly exogenous time-varying covariates: X in every period instruments
//   Y_t - Y_1 = theta_t + (X_t - X_1)' beta + F_t (Y_2 - Y_1) + (X_2 - X_1)' zeta_t + V_t,
// where the structural model implies zeta_t = -beta F_t.
//
// Both are estimated period by period with a user-chosen weighting matrix.

#include "ifeatt/panel.hpp"

#include <optional>
#include <vector>

namespace ifeatt {

struct SerialUncorrFit {
  int t = 0;
  VectorXd delta;  // coefficients on Z (K)
  double f = 0.0;
  Index instruments_untreated = 0;  // K + (T - 3)
  Index instruments_treated = 0;    // K + (t* - 4) when t < t*, else 0
  bool exactly_identified = false;
};

// Requires T >= 4 (NeedsFourPeriods). For t < t* the treated group's pre-period
// moments are stacked below the untreated ones. The default weighting is the
// block-diagonal inverse of the instrument second moments within each group.
SerialUncorrFit estimate_serial_uncorr(const PanelDataset& data, int t,
                                       const std::optional<MatrixXd>& w = std::nullopt);
std::vector<SerialUncorrFit> estimate_serial_uncorr_all(const PanelDataset& data);

// ATT_t = Ybar_t - Ybar_1 - Zbar' delta_t - F_t (Ybar_2 - Ybar_1), treated means.
// Point estimates only.
AttSeries att_serial_uncorr(const PanelDataset& data, const std::vector<SerialUncorrFit>& fits);

struct TvPanelDataset {
  MatrixXd y;                  // n x T
  std::vector<MatrixXd> x_tv;  // K_X entries, each n x T
  VectorXd d;
  int t_star = 3;
  std::vector<std::string> covariate_names;
  std::vector<std::string> period_labels;

  Index n() const { return y.rows(); }
  int t_total() const { return static_cast<int>(y.cols()); }
  Index k_x() const { return static_cast<Index>(x_tv.size()); }

  void validate() const;
  TvPanelDataset subset(const std::vector<Index>& units) const;
};

struct TimeVaryingFit {
  int t = 0;
  double theta = 0.0;
  VectorXd beta;
  double f = 0.0;
  VectorXd zeta;
  // zeta + beta F, zero in the structural model.
  VectorXd zeta_gap;
  bool exactly_identified = false;
};

// Instruments (1, X_1', ..., X_T') over untreated units; default weighting is
// their inverse second moment.
TimeVaryingFit estimate_timevarying(const TvPanelDataset& data, int t,
                                    const std::optional<MatrixXd>& w = std::nullopt);
std::vector<TimeVaryingFit> estimate_timevarying_all(const TvPanelDataset& data);

// ATT_t = Ybar_t - Ybar_1 - theta_t - (Xbar_t - Xbar_1)' beta - F_t (Ybar_2 - Ybar_1)
//         - (Xbar_2 - Xbar_1)' zeta_t, treated means.
AttSeries att_timevarying(const TvPanelDataset& data, const std::vector<TimeVaryingFit>& fits);

}  // namespace ifeatt
