#pragma once

// Nonparametric bootstrap over units (or rows for repeated cross sections),
// pre-treatment Wald tests and over-identification reporting.

#include "ifeatt/alt_identification.hpp"
#include "ifeatt/gmm.hpp"
#include "ifeatt/panel.hpp"
#include "ifeatt/rc.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ifeatt {

enum class EstimatorId { IfePanel, IfeRc, Did, Lt, T3, T4 };

std::string_view to_string(EstimatorId id);
// Accepts "ife-panel", "ife-rc", "did", "lt", "t3", "t4".
std::optional<EstimatorId> parse_estimator_id(std::string_view name);

// ATT_t for t = 3..T with the panel estimators (IfePanel, Did, Lt, T3).
// IfePanel carries delta-method variances; the others are point estimates.
AttSeries estimate_att(const PanelDataset& data, const ModelSpec& spec, EstimatorId id);

struct BootstrapOptions {
  int reps = 999;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: every hardware thread
  double level = 0.95;
  double max_failure_share = 0.05;
};

struct BootstrapResult {
  std::vector<int> periods;
  VectorXd estimate;  // full-sample point estimates
  VectorXd se;        // standard deviation across successful replications
  VectorXd percentile_lower;
  VectorXd percentile_upper;
  VectorXd normal_lower;
  VectorXd normal_upper;
  int reps = 0;
  int failed = 0;
  MatrixXd draws;  // reps x periods; failed replications hold NaN
};

// One resample: the indices drawn with replacement.
using ResampleEstimator = std::function<VectorXd(const std::vector<Index>& sample)>;

// Generic engine. Replication r draws its indices from a stream keyed by
// (seed, r), so results do not depend on the thread count. When strata is
// given, indices are drawn within each stratum keeping its size.
// Throws InvalidArgument for reps < 100, TooManyFailures when more than
// max_failure_share of the replications throw an ifeatt::Error.
BootstrapResult bootstrap(Index units, const std::vector<int>& periods, const VectorXd& estimate,
                          const ResampleEstimator& estimator, const BootstrapOptions& options,
                          const std::vector<int>& strata = {});

// Panel estimators resample units with all their periods.
BootstrapResult bootstrap_att(const PanelDataset& data, const ModelSpec& spec, EstimatorId id,
                              const BootstrapOptions& options);
// Rows are resampled from the pooled cross sections.
BootstrapResult bootstrap_att(const RcDataset& data, const ModelSpec& spec,
                              const BootstrapOptions& options);
BootstrapResult bootstrap_att(const TvPanelDataset& data, const BootstrapOptions& options);

struct WaldTest {
  double statistic = 0.0;
  Index dof = 0;
  double p_value = 1.0;
};

// n a' C^+ a over the pre-period ATTs with dof = rank(C). Throws NoPrePeriods
// when t* = 3 and InvalidArgument without a joint covariance.
WaldTest pretest_wald(const AttSeries& series);

struct OverIdReport {
  double j_stat = 0.0;
  Index dof = 0;
  double p_value = 1.0;
  bool exactly_identified = false;
  std::string label;
};

OverIdReport overid_report(const gmm::GmmFit& fit);

}  // namespace ifeatt
