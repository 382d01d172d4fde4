#pragma once

// Repeated cross sections: every row is observed in exactly one period. Moments
// are taken under the period mixture, with period-t outcomes reweighted by the
// inverse sampling share 1/pi_t.

#include "ifeatt/panel.hpp"

#include <vector>

namespace ifeatt {

struct RcDataset {
  VectorXd y;             // one outcome per row
  MatrixXd z;             // rows x K, column 0 is the intercept
  VectorXd d;             // 0/1
  std::vector<int> t;     // period of each row, 1..T
  int t_total = 3;
  int t_star = 3;
  std::vector<std::string> covariate_names;
  std::vector<std::string> period_labels;

  Index rows() const { return y.size(); }
  Index k() const { return z.cols(); }
  std::vector<Index> period_counts() const;  // index t-1

  void validate() const;
  RcDataset subset(const std::vector<Index>& rows) const;

  // Every unit observed in every period.
  static RcDataset from_panel(const PanelDataset& panel);
};

struct PiShares {
  VectorXd pi;  // index t-1
  double at(int t) const { return pi(t - 1); }
};

PiShares estimate_pi(const RcDataset& data);

// One row's stacked contribution; Z is identical to the panel instrument matrix.
StackedUnit build_rc_unit(const RcDataset& data, Index row, const PiShares& pi,
                          const ModelSpec& spec);

PanelFit estimate_gamma1_rc(const RcDataset& data, const ModelSpec& spec,
                            const EstimateOptions& options = {});

// Point estimates only: the plug-in shares make the analytic variance
// incomplete, so standard errors come from bootstrap_att.
AttSeries estimate_att_rc(const RcDataset& data, const ModelSpec& spec);

}  // namespace ifeatt
