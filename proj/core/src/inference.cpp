#include "ifeatt/inference.hpp"

#include "ifeatt/comparators.hpp"
#include "ifeatt/error.hpp"
#include "ifeatt/parallel.hpp"
#include "ifeatt/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace ifeatt {

std::string_view to_string(EstimatorId id) {
  switch (id) {
    case EstimatorId::IfePanel: return "ife-panel";
    case EstimatorId::IfeRc: return "ife-rc";
    case EstimatorId::Did: return "did";
    case EstimatorId::Lt: return "lt";
    case EstimatorId::T3: return "t3";
    case EstimatorId::T4: return "t4";
  }
  return "unknown";
}

std::optional<EstimatorId> parse_estimator_id(std::string_view name) {
  for (EstimatorId id : {EstimatorId::IfePanel, EstimatorId::IfeRc, EstimatorId::Did,
                         EstimatorId::Lt, EstimatorId::T3, EstimatorId::T4}) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

namespace {

AttSeries comparator_series(const PanelDataset& data, double (*att)(const PanelDataset&, int)) {
  AttSeries out;
  out.n = data.n();
  out.t_star = data.t_star;
  out.att.resize(data.t_total() - 2);
  for (int t = 3; t <= data.t_total(); ++t) {
    out.periods.push_back(t);
    (t < data.t_star ? out.pre_periods : out.post_periods).push_back(t);
    out.att(t - 3) = att(data, t);
  }
  return out;
}

constexpr std::uint64_t kBootstrapStream = 0x626f6f74ULL;

// Linear interpolation between order statistics (type 7).
double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

AttSeries estimate_att(const PanelDataset& data, const ModelSpec& spec, EstimatorId id) {
  switch (id) {
    case EstimatorId::IfePanel: {
      const PanelFit fit = estimate_gamma1(data, spec);
      return att_series(fit, data);
    }
    case EstimatorId::Did: return comparator_series(data, did_att);
    case EstimatorId::Lt: return comparator_series(data, lt_att);
    case EstimatorId::T3: return att_serial_uncorr(data, estimate_serial_uncorr_all(data));
    case EstimatorId::IfeRc:
    case EstimatorId::T4:
      break;
  }
  throw Error(ErrorCode::SpecMismatch,
              std::string(to_string(id)) + " does not take a balanced panel of time-invariant covariates");
}

BootstrapResult bootstrap(Index units, const std::vector<int>& periods, const VectorXd& estimate,
                          const ResampleEstimator& estimator, const BootstrapOptions& options,
                          const std::vector<int>& strata) {
  if (options.reps < 100) throw Error(ErrorCode::InvalidArgument, "bootstrap needs at least 100 replications");
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
  }
  if (units < 1) throw Error(ErrorCode::InvalidArgument, "nothing to resample");
  const auto width = static_cast<Index>(periods.size());
  if (estimate.size() != width) throw Error(ErrorCode::DimensionMismatch, "estimate and periods differ");
  if (!strata.empty() && static_cast<Index>(strata.size()) != units) {
    throw Error(ErrorCode::DimensionMismatch, "strata must label every unit");
  }

  // Members of each stratum in index order.
  std::vector<std::vector<Index>> members;
  if (strata.empty()) {
    members.emplace_back(static_cast<std::size_t>(units));
    for (Index i = 0; i < units; ++i) members[0][static_cast<std::size_t>(i)] = i;
  } else {
    std::map<int, std::vector<Index>> by_label;
    for (Index i = 0; i < units; ++i) by_label[strata[static_cast<std::size_t>(i)]].push_back(i);
    for (auto& [label, idx] : by_label) members.push_back(std::move(idx));
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  BootstrapResult out;
  out.periods = periods;
  out.estimate = estimate;
  out.reps = options.reps;
  out.draws = MatrixXd::Constant(options.reps, width, nan);

  parallel_for(static_cast<std::size_t>(options.reps), options.threads, [&](std::size_t r) {
    auto eng = rng::substream(options.seed, kBootstrapStream, r);
    std::vector<Index> sample;
    sample.reserve(static_cast<std::size_t>(units));
    for (const auto& group : members) {
      std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
      for (std::size_t j = 0; j < group.size(); ++j) sample.push_back(group[pick(eng)]);
    }
    try {
      const VectorXd draw = estimator(sample);
      if (draw.size() == width && draw.allFinite()) {
        out.draws.row(static_cast<Index>(r)) = draw.transpose();
      }
    } catch (const Error&) {
      // left as NaN and counted below
    }
  });

  std::vector<Index> ok;
  for (Index r = 0; r < options.reps; ++r) {
    if (out.draws.row(r).allFinite()) ok.push_back(r);
  }
  out.failed = options.reps - static_cast<int>(ok.size());
  if (out.failed > options.max_failure_share * options.reps || ok.size() < 2) {
    throw Error(ErrorCode::TooManyFailures, std::to_string(out.failed) + " of " +
                                                std::to_string(options.reps) +
                                                " bootstrap replications failed");
  }

  const double alpha = 1.0 - options.level;
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
  out.se.resize(width);
  out.percentile_lower.resize(width);
  out.percentile_upper.resize(width);
  out.normal_lower.resize(width);
  out.normal_upper.resize(width);
  std::vector<double> column(ok.size());
  for (Index j = 0; j < width; ++j) {
    double mean = 0.0;
    for (std::size_t k = 0; k < ok.size(); ++k) {
      column[k] = out.draws(ok[k], j);
      mean += column[k];
    }
    mean /= static_cast<double>(ok.size());
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    out.se(j) = std::sqrt(ss / static_cast<double>(ok.size() - 1));
    std::sort(column.begin(), column.end());
    out.percentile_lower(j) = quantile_sorted(column, alpha / 2.0);
    out.percentile_upper(j) = quantile_sorted(column, 1.0 - alpha / 2.0);
    out.normal_lower(j) = estimate(j) - z * out.se(j);
    out.normal_upper(j) = estimate(j) + z * out.se(j);
  }
  return out;
}

BootstrapResult bootstrap_att(const PanelDataset& data, const ModelSpec& spec, EstimatorId id,
                              const BootstrapOptions& options) {
  const AttSeries point = estimate_att(data, spec, id);
  // Inference is not needed inside the replications.
  EstimateOptions light;
  light.compute_inference = false;
  const ResampleEstimator estimator = [&](const std::vector<Index>& sample) -> VectorXd {
    const PanelDataset resampled = data.subset(sample);
    if (id == EstimatorId::IfePanel) {
      const PanelFit fit = estimate_gamma1(resampled, spec, light);
      return att_series(fit.params, fit.gmm, resampled.t_star).att;
    }
    return estimate_att(resampled, spec, id).att;
  };
  return bootstrap(data.n(), point.periods, point.att, estimator, options);
}

BootstrapResult bootstrap_att(const RcDataset& data, const ModelSpec& spec,
                              const BootstrapOptions& options) {
  const AttSeries point = estimate_att_rc(data, spec);
  const ResampleEstimator estimator = [&](const std::vector<Index>& sample) -> VectorXd {
    return estimate_att_rc(data.subset(sample), spec).att;
  };
  return bootstrap(data.rows(), point.periods, point.att, estimator, options);
}

BootstrapResult bootstrap_att(const TvPanelDataset& data, const BootstrapOptions& options) {
  const AttSeries point = att_timevarying(data, estimate_timevarying_all(data));
  const ResampleEstimator estimator = [&](const std::vector<Index>& sample) -> VectorXd {
    const TvPanelDataset resampled = data.subset(sample);
    return att_timevarying(resampled, estimate_timevarying_all(resampled)).att;
  };
  return bootstrap(data.n(), point.periods, point.att, estimator, options);
}

WaldTest pretest_wald(const AttSeries& series) {
  if (series.pre_periods.empty()) {
    throw Error(ErrorCode::NoPrePeriods, "no pre-treatment periods after the normalization periods");
  }
  if (!series.joint_cov) {
    throw Error(ErrorCode::InvalidArgument, "pre-test needs the joint covariance of the estimates");
  }
  const auto k = static_cast<Index>(series.pre_periods.size());
  VectorXd a(k);
  std::vector<Index> pos(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) {
    const int t = series.pre_periods[static_cast<std::size_t>(j)];
    const auto it = std::find(series.periods.begin(), series.periods.end(), t);
    pos[static_cast<std::size_t>(j)] = it - series.periods.begin();
    a(j) = series.att(pos[static_cast<std::size_t>(j)]);
  }
  MatrixXd c(k, k);
  for (Index r = 0; r < k; ++r) {
    for (Index s = 0; s < k; ++s) {
      c(r, s) = (*series.joint_cov)(pos[static_cast<std::size_t>(r)], pos[static_cast<std::size_t>(s)]);
    }
  }
  WaldTest out;
  if (c.cwiseAbs().maxCoeff() == 0.0) return out;
  const gmm::PsdInverse inv = gmm::psd_inverse(0.5 * (c + c.transpose()));
  out.dof = inv.rank;
  out.statistic = static_cast<double>(series.n) * a.dot(inv.inverse * a);
  out.p_value = gmm::chi2_upper_tail(out.statistic, out.dof);
  return out;
}

OverIdReport overid_report(const gmm::GmmFit& fit) {
  OverIdReport out;
  out.dof = fit.j_dof;
  out.exactly_identified = fit.j_dof == 0;
  if (out.exactly_identified) {
    out.j_stat = 0.0;
    out.p_value = 1.0;
    out.label = "exactly identified";
  } else {
    out.j_stat = fit.j_stat;
    out.p_value = gmm::chi2_upper_tail(fit.j_stat, fit.j_dof);
    out.label = "over-identified";
  }
  return out;
}

}  // namespace ifeatt
