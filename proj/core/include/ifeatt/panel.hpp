#pragma once

// ATT estimation for balanced panels under an interactive-fixed-effects model
// for untreated outcomes:
//
//   Y_t(0) = xi + lambda F_t + X' beta_t + W' alpha + U_t,
//
// normalized so that F_1 = 0, F_2 = 1 and the X effects vanish in periods 1-2.
// Differencing out (xi, lambda) with the first two periods leaves
//
//   Y_t - Y_1 = X' beta_t + F_t (Y_2 - Y_1) + V_t,
//
// and the time-invariant-effect covariates W instrument the short difference.
// All periods are 1-indexed; t_star is the first treated period.

#include "ifeatt/gmm.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ifeatt {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PanelDataset {
  MatrixXd y;  // n x T outcomes
  MatrixXd z;  // n x K time-invariant covariates, column 0 is the intercept
  VectorXd d;  // treated-group indicator (0/1)
  int t_star = 3;
  std::vector<std::string> covariate_names;  // optional, size K
  std::vector<std::string> period_labels;    // optional, size T

  Index n() const { return y.rows(); }
  int t_total() const { return static_cast<int>(y.cols()); }
  Index k() const { return z.cols(); }

  // Structural checks: dimensions, T >= 3, 3 <= t_star <= T, finite values,
  // binary d and an all-ones intercept column. Group presence is checked by
  // the estimators (DegeneratePi).
  void validate() const;

  PanelDataset subset(const std::vector<Index>& units) const;
};

// Partition of the covariate columns of Z. Indices are 0-based columns of
// PanelDataset::z; the intercept is column 0.
struct ModelSpec {
  std::vector<Index> x_cols;  // time-varying effects
  std::vector<Index> w_cols;  // time-invariant effects (instruments)

  Index k_x() const { return static_cast<Index>(x_cols.size()); }
  Index k_w() const { return static_cast<Index>(w_cols.size()); }

  // x_cols and w_cols must partition {0..k-1} with k_w >= 1.
  void validate(Index k) const;

  // Intercept (and therefore the time effects) in X, every other column in W.
  static ModelSpec intercept_in_x(Index k);
  // Intercept in W; remaining columns in X.
  static ModelSpec intercept_in_w(Index k);
};

struct StackDims {
  int t_total = 0;
  int t_star = 0;
  Index k = 0;
  Index k_x = 0;
  Index q = 0;   // (T-2) + (t*-3) differenced equations
  // Treated pre-period equations are instrumented by Z without the intercept:
  // the intercept moment there is an exact identity in the treated means and
  // is what the pre-test checks (ATT_t = 0 for t < t*).
  Index k_treated = 0;  // K - 1
  Index m = 0;          // K (T-2) + (K-1)(t*-3) moments
  Index l = 0;   // (T-2)(K_X+1) structural parameters
  Index q1 = 0;  // q + K_X + T + 1
  Index m1 = 0;  // m + K_X + T + 1
  Index l1 = 0;  // l + K_X + T + 1

  static StackDims compute(int t_total, int t_star, Index k, Index k_x);
};

// One unit's contribution: Y_i (q1), Z_i (m1 x q1), X_i' (q1 x l1).
struct StackedUnit {
  VectorXd y;
  MatrixXd z;
  MatrixXd x;
};

StackedUnit build_stacked_unit(const PanelDataset& data, Index unit, const ModelSpec& spec);

// gamma_1 = (beta_3', F_3, ..., beta_T', F_T, E[DX]', E[DY_1], ..., E[DY_T], p)'.
// F_1 = 0 and F_2 = 1 are fixed normalizations and are not stored.
struct GammaParams {
  int t_total = 0;
  Index k_x = 0;
  std::vector<VectorXd> beta;  // index t-3, each of length K_X
  std::vector<double> f;       // index t-3
  VectorXd mean_dx;            // E[DX]
  VectorXd mean_dy;            // E[DY_t], index t-1
  double p = 0.0;

  const VectorXd& beta_at(int t) const { return beta.at(static_cast<std::size_t>(t - 3)); }
  double f_at(int t) const { return f.at(static_cast<std::size_t>(t - 3)); }
  double dy_at(int t) const { return mean_dy(t - 1); }

  Index size() const { return (t_total - 2) * (k_x + 1) + k_x + t_total + 1; }
  VectorXd stacked() const;
  static GammaParams from_stacked(const VectorXd& gamma, int t_total, Index k_x);

  // Offsets into the stacked vector.
  Index beta_offset(int t) const { return (t - 3) * (k_x + 1); }
  Index f_offset(int t) const { return (t - 3) * (k_x + 1) + k_x; }
  Index mean_dx_offset() const { return (t_total - 2) * (k_x + 1); }
  Index mean_dy_offset(int t) const { return mean_dx_offset() + k_x + (t - 1); }
  Index p_offset() const { return mean_dx_offset() + k_x + t_total; }
};

struct AttSeries {
  std::vector<int> periods;         // 3..T
  VectorXd att;                     // aligned with periods
  std::optional<VectorXd> variance; // asymptotic V_t (se = sqrt(V_t / n))
  std::optional<MatrixXd> joint_cov;
  std::vector<int> pre_periods;     // 3 <= t < t*
  std::vector<int> post_periods;    // t >= t*
  Index n = 0;
  int t_star = 3;

  double att_at(int t) const;
  std::optional<double> se_at(int t) const;
};

struct EstimateOptions {
  bool compute_inference = true;
};

struct PanelFit {
  gmm::GmmFit gmm;
  GammaParams params;
  StackDims dims;
};

// Throws DegeneratePi when one of the groups is empty, RankDeficient when the
// instruments are not relevant in the sample.
PanelFit estimate_gamma1(const PanelDataset& data, const ModelSpec& spec,
                         const EstimateOptions& options = {});

// ATT_t = E[D(Y_t - Y_1)]/p - E[DX']/p beta_t - F_t E[D(Y_2 - Y_1)]/p
double att_value(const GammaParams& params, int t);
VectorXd att_gradient(const GammaParams& params, int t);

// Point estimates for t = 3..T, with delta-method variances when the fit
// carries sigma.
AttSeries att_series(const GammaParams& params, const gmm::GmmFit& fit, int t_star);
AttSeries att_series(const PanelFit& fit, const PanelDataset& data);

// Three periods, no covariates, intercept as the time-invariant-effect
// covariate.
struct Example1Result {
  double f3 = 0.0;
  double att3 = 0.0;
};
Example1Result closed_form_example1(const PanelDataset& data);

// Three periods, Z = (1, W) with W binary.
struct Example2Result {
  double f3 = 0.0;
  double theta3 = 0.0;
  double att3 = 0.0;
};
Example2Result closed_form_example2(const PanelDataset& data, Index w_col = 1);

struct FirstStageCoefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;
};

struct RelevanceReport {
  Index rank = 0;           // numeric rank of the sample E[ZX'] block
  Index required_rank = 0;  // (T-2)(K_X+1)
  double condition_number = 0.0;
  Index instrument_rank = 0;  // rank of the sample second moment of Z
  bool collinear = false;
  // Projection of (Y_2 - Y_1) on (X, W) among untreated units.
  std::vector<FirstStageCoefficient> w_coefficients;
  double first_stage_f = 0.0;  // joint test that the W coefficients are zero
  double first_stage_p = 1.0;
  bool rank_deficient = false;  // numeric rank failure or insignificant first stage
  std::string message;
};

RelevanceReport check_relevance(const PanelDataset& data, const ModelSpec& spec,
                                double significance = 0.05);

namespace detail {

// Shared by the panel and repeated-cross-section builders. The entries are the
// per-observation analogues of Y_t - Y_1 (t = 3..T), Y_2 - Y_1 and D Y_t.
struct StackInputs {
  Eigen::Ref<const VectorXd> z;        // K instruments
  Eigen::Ref<const VectorXd> x;        // K_X regressors
  double d;
  Eigen::Ref<const VectorXd> long_diff;  // length T-2
  double short_diff;
  Eigen::Ref<const VectorXd> dy;       // length T
};

void fill_stacked_unit(const StackDims& dims, const StackInputs& in, StackedUnit& out);

PanelFit fit_stacked(const StackDims& dims, MatrixXd zx, MatrixXd zy, double p_hat,
                     const EstimateOptions& options);

}  // namespace detail

}  // namespace ifeatt
