#include "ifeatt/alt_identification.hpp"

#include "ifeatt/error.hpp"

namespace ifeatt {

namespace {

void require_groups(const VectorXd& d) {
  const double treated = d.sum();
  if (treated < 1.0 || treated > static_cast<double>(d.size()) - 1.0) {
    throw Error(ErrorCode::DegeneratePi, "one of the groups is empty");
  }
}

void require_period(int t, int t_total) {
  if (t < 3 || t > t_total) {
    throw Error(ErrorCode::BadPeriod,
                "period " + std::to_string(t) + " outside [3, " + std::to_string(t_total) + "]");
  }
}

// Group averages of instrument cross products.
struct GroupMoments {
  MatrixXd zx;  // instruments x regressors
  VectorXd zy;
  MatrixXd zz;
  Index count = 0;
};

void accumulate(GroupMoments& g, const VectorXd& z, const VectorXd& x, double y) {
  g.zx.noalias() += z * x.transpose();
  g.zy.noalias() += z * y;
  g.zz.noalias() += z * z.transpose();
  ++g.count;
}

GroupMoments empty_moments(Index instruments, Index regressors) {
  return {MatrixXd::Zero(instruments, regressors), VectorXd::Zero(instruments),
          MatrixXd::Zero(instruments, instruments), 0};
}

void finish(GroupMoments& g) {
  const auto c = static_cast<double>(g.count);
  g.zx /= c;
  g.zy /= c;
  g.zz /= c;
}

MatrixXd inverse_second_moment(const MatrixXd& zz) {
  const gmm::PsdInverse inv = gmm::psd_inverse(0.5 * (zz + zz.transpose()));
  if (inv.rank < zz.rows()) {
    throw Error(ErrorCode::RankDeficient, "instruments are collinear");
  }
  return inv.inverse;
}

void check_weighting(const MatrixXd& w, Index m) {
  if (w.rows() != m || w.cols() != m) {
    throw Error(ErrorCode::DimensionMismatch, "weighting matrix must be " + std::to_string(m) +
                                                  " x " + std::to_string(m));
  }
}

double treated_mean(const VectorXd& d, const Eigen::Ref<const VectorXd>& v) {
  return d.dot(v) / d.sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// Serially uncorrelated errors

SerialUncorrFit estimate_serial_uncorr(const PanelDataset& data, int t,
                                       const std::optional<MatrixXd>& w) {
  data.validate();
  const int t_total = data.t_total();
  if (t_total < 4) throw Error(ErrorCode::NeedsFourPeriods, "need at least 4 periods");
  require_period(t, t_total);
  require_groups(data.d);
  const Index k = data.k();
  const int t_star = data.t_star;
  const bool pre = t < t_star;

  // Other-period outcomes used as instruments.
  std::vector<int> untreated_periods;
  for (int s = 3; s <= t_total; ++s) {
    if (s != t) untreated_periods.push_back(s);
  }
  std::vector<int> treated_periods;
  if (pre) {
    for (int s = 3; s < t_star; ++s) {
      if (s != t) treated_periods.push_back(s);
    }
  }
  const Index m0 = k + static_cast<Index>(untreated_periods.size());
  const Index m1 = pre ? k + static_cast<Index>(treated_periods.size()) : 0;
  const Index regressors = k + 1;

  GroupMoments g0 = empty_moments(m0, regressors);
  GroupMoments g1 = empty_moments(std::max<Index>(m1, 1), regressors);
  VectorXd x(regressors);
  for (Index i = 0; i < data.n(); ++i) {
    const bool treated = data.d(i) == 1.0;
    if (treated && !pre) continue;
    const auto& periods = treated ? treated_periods : untreated_periods;
    VectorXd z(k + static_cast<Index>(periods.size()));
    for (std::size_t j = 0; j < periods.size(); ++j) {
      z(static_cast<Index>(j)) = data.y(i, periods[j] - 1);
    }
    z.tail(k) = data.z.row(i).transpose();
    x.head(k) = data.z.row(i).transpose();
    x(k) = data.y(i, 1) - data.y(i, 0);
    accumulate(treated ? g1 : g0, z, x, data.y(i, t - 1) - data.y(i, 0));
  }
  finish(g0);
  if (pre) finish(g1);

  const Index m = m0 + m1;
  MatrixXd mzx(m, regressors);
  VectorXd mzy(m);
  mzx.topRows(m0) = g0.zx;
  mzy.head(m0) = g0.zy;
  if (pre) {
    mzx.bottomRows(m1) = g1.zx;
    mzy.tail(m1) = g1.zy;
  }
  if (gmm::numeric_rank(mzx) < regressors) {
    throw Error(ErrorCode::RankDeficient, "other-period outcomes do not predict Y_2 - Y_1 in period " +
                                              std::to_string(t));
  }
  MatrixXd weight;
  if (w) {
    check_weighting(*w, m);
    weight = *w;
  } else {
    weight = MatrixXd::Zero(m, m);
    weight.topLeftCorner(m0, m0) = inverse_second_moment(g0.zz);
    if (pre) weight.bottomRightCorner(m1, m1) = inverse_second_moment(g1.zz);
  }
  const VectorXd coef = gmm::solve_linear_gmm(mzx, mzy, weight);

  SerialUncorrFit fit;
  fit.t = t;
  fit.delta = coef.head(k);
  fit.f = coef(k);
  fit.instruments_untreated = m0;
  fit.instruments_treated = m1;
  fit.exactly_identified = m == regressors;
  return fit;
}

std::vector<SerialUncorrFit> estimate_serial_uncorr_all(const PanelDataset& data) {
  std::vector<SerialUncorrFit> fits;
  for (int t = 3; t <= data.t_total(); ++t) fits.push_back(estimate_serial_uncorr(data, t));
  return fits;
}

AttSeries att_serial_uncorr(const PanelDataset& data, const std::vector<SerialUncorrFit>& fits) {
  data.validate();
  require_groups(data.d);
  AttSeries out;
  out.n = data.n();
  out.t_star = data.t_star;
  out.att.resize(static_cast<Index>(fits.size()));
  const VectorXd zbar = data.z.transpose() * data.d / data.d.sum();
  const double y1 = treated_mean(data.d, data.y.col(0));
  const double y2 = treated_mean(data.d, data.y.col(1));
  for (std::size_t j = 0; j < fits.size(); ++j) {
    const auto& fit = fits[j];
    require_period(fit.t, data.t_total());
    if (fit.delta.size() != data.k()) {
      throw Error(ErrorCode::DimensionMismatch, "fit does not match the covariates");
    }
    const double yt = treated_mean(data.d, data.y.col(fit.t - 1));
    out.att(static_cast<Index>(j)) = yt - y1 - zbar.dot(fit.delta) - fit.f * (y2 - y1);
    out.periods.push_back(fit.t);
    (fit.t < data.t_star ? out.pre_periods : out.post_periods).push_back(fit.t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Time-varying covariates

void TvPanelDataset::validate() const {
  const Index units = n();
  if (units < 1) throw Error(ErrorCode::InvalidArgument, "panel has no units");
  if (t_total() < 3) throw Error(ErrorCode::InvalidArgument, "need at least 3 periods");
  if (t_star < 3 || t_star > t_total()) {
    throw Error(ErrorCode::InvalidArgument, "first treated period must lie in [3, T]");
  }
  if (x_tv.empty()) throw Error(ErrorCode::InvalidArgument, "no time-varying covariates");
  if (d.size() != units) throw Error(ErrorCode::DimensionMismatch, "d has the wrong length");
  for (const auto& x : x_tv) {
    if (x.rows() != units || x.cols() != y.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "covariate arrays must be n x T");
    }
    if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "covariates are not finite");
  }
  if (!y.allFinite() || !d.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "outcomes or treatment are not finite");
  }
  if (((d.array() != 0.0) && (d.array() != 1.0)).any()) {
    throw Error(ErrorCode::InvalidArgument, "treatment indicator must be 0 or 1");
  }
}

TvPanelDataset TvPanelDataset::subset(const std::vector<Index>& units) const {
  TvPanelDataset out;
  const auto count = static_cast<Index>(units.size());
  out.y.resize(count, y.cols());
  out.d.resize(count);
  out.x_tv.assign(x_tv.size(), MatrixXd(count, y.cols()));
  for (Index r = 0; r < count; ++r) {
    const Index i = units[static_cast<std::size_t>(r)];
    out.y.row(r) = y.row(i);
    out.d(r) = d(i);
    for (std::size_t j = 0; j < x_tv.size(); ++j) out.x_tv[j].row(r) = x_tv[j].row(i);
  }
  out.t_star = t_star;
  out.covariate_names = covariate_names;
  out.period_labels = period_labels;
  return out;
}

TimeVaryingFit estimate_timevarying(const TvPanelDataset& data, int t,
                                    const std::optional<MatrixXd>& w) {
  data.validate();
  const int t_total = data.t_total();
  require_period(t, t_total);
  require_groups(data.d);
  const Index kx = data.k_x();
  const Index m = 1 + t_total * kx;
  const Index regressors = 2 + 2 * kx;

  GroupMoments g = empty_moments(m, regressors);
  VectorXd z(m);
  VectorXd x(regressors);
  for (Index i = 0; i < data.n(); ++i) {
    if (data.d(i) == 1.0) continue;
    z(0) = 1.0;
    for (int s = 0; s < t_total; ++s) {
      for (Index j = 0; j < kx; ++j) z(1 + s * kx + j) = data.x_tv[static_cast<std::size_t>(j)](i, s);
    }
    x(0) = 1.0;
    for (Index j = 0; j < kx; ++j) {
      const auto& xj = data.x_tv[static_cast<std::size_t>(j)];
      x(1 + j) = xj(i, t - 1) - xj(i, 0);
      x(2 + kx + j) = xj(i, 1) - xj(i, 0);
    }
    x(1 + kx) = data.y(i, 1) - data.y(i, 0);
    accumulate(g, z, x, data.y(i, t - 1) - data.y(i, 0));
  }
  finish(g);
  if (gmm::numeric_rank(g.zx) < regressors) {
    throw Error(ErrorCode::RankDeficient, "covariate instruments are not relevant in period " +
                                              std::to_string(t));
  }
  MatrixXd weight;
  if (w) {
    check_weighting(*w, m);
    weight = *w;
  } else {
    weight = inverse_second_moment(g.zz);
  }
  const VectorXd coef = gmm::solve_linear_gmm(g.zx, g.zy, weight);

  TimeVaryingFit fit;
  fit.t = t;
  fit.theta = coef(0);
  fit.beta = coef.segment(1, kx);
  fit.f = coef(1 + kx);
  fit.zeta = coef.tail(kx);
  fit.zeta_gap = fit.zeta + fit.beta * fit.f;
  fit.exactly_identified = m == regressors;
  return fit;
}

std::vector<TimeVaryingFit> estimate_timevarying_all(const TvPanelDataset& data) {
  std::vector<TimeVaryingFit> fits;
  for (int t = 3; t <= data.t_total(); ++t) fits.push_back(estimate_timevarying(data, t));
  return fits;
}

AttSeries att_timevarying(const TvPanelDataset& data, const std::vector<TimeVaryingFit>& fits) {
  data.validate();
  require_groups(data.d);
  const Index kx = data.k_x();
  AttSeries out;
  out.n = data.n();
  out.t_star = data.t_star;
  out.att.resize(static_cast<Index>(fits.size()));
  const double y1 = treated_mean(data.d, data.y.col(0));
  const double y2 = treated_mean(data.d, data.y.col(1));
  for (std::size_t j = 0; j < fits.size(); ++j) {
    const auto& fit = fits[j];
    require_period(fit.t, data.t_total());
    if (fit.beta.size() != kx || fit.zeta.size() != kx) {
      throw Error(ErrorCode::DimensionMismatch, "fit does not match the covariates");
    }
    double att = treated_mean(data.d, data.y.col(fit.t - 1)) - y1 - fit.theta - fit.f * (y2 - y1);
    for (Index c = 0; c < kx; ++c) {
      const auto& xc = data.x_tv[static_cast<std::size_t>(c)];
      const double x1 = treated_mean(data.d, xc.col(0));
      att -= (treated_mean(data.d, xc.col(fit.t - 1)) - x1) * fit.beta(c);
      att -= (treated_mean(data.d, xc.col(1)) - x1) * fit.zeta(c);
    }
    out.att(static_cast<Index>(j)) = att;
    out.periods.push_back(fit.t);
    (fit.t < data.t_star ? out.pre_periods : out.post_periods).push_back(fit.t);
  }
  return out;
}

}  // namespace ifeatt
