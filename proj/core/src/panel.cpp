#include "ifeatt/panel.hpp"

#include "ifeatt/error.hpp"

#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace ifeatt {

// ---------------------------------------------------------------------------
// PanelDataset / ModelSpec

void PanelDataset::validate() const {
  const Index units = y.rows();
  if (units < 1) throw Error(ErrorCode::InvalidArgument, "panel has no units");
  if (z.rows() != units || d.size() != units) {
    throw Error(ErrorCode::DimensionMismatch, "y, z and d disagree on the number of units");
  }
  if (t_total() < 3) {
    throw Error(ErrorCode::InvalidArgument, "need at least 3 periods, got " +
                                                std::to_string(t_total()));
  }
  if (t_star < 3 || t_star > t_total()) {
    throw Error(ErrorCode::InvalidArgument, "first treated period must lie in [3, T], got " +
                                                std::to_string(t_star));
  }
  if (z.cols() < 1) throw Error(ErrorCode::InvalidArgument, "z needs an intercept column");
  if (!y.allFinite() || !z.allFinite() || !d.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "panel contains missing or non-finite values");
  }
  if ((z.col(0).array() != 1.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "column 0 of z must be an all-ones intercept");
  }
  if (((d.array() != 0.0) && (d.array() != 1.0)).any()) {
    throw Error(ErrorCode::InvalidArgument, "treatment indicator must be 0 or 1");
  }
  if (!covariate_names.empty() && static_cast<Index>(covariate_names.size()) != z.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "covariate_names does not match z");
  }
  if (!period_labels.empty() && static_cast<int>(period_labels.size()) != t_total()) {
    throw Error(ErrorCode::DimensionMismatch, "period_labels does not match y");
  }
}

PanelDataset PanelDataset::subset(const std::vector<Index>& units) const {
  PanelDataset out;
  const auto count = static_cast<Index>(units.size());
  out.y.resize(count, y.cols());
  out.z.resize(count, z.cols());
  out.d.resize(count);
  for (Index r = 0; r < count; ++r) {
    const Index i = units[static_cast<std::size_t>(r)];
    out.y.row(r) = y.row(i);
    out.z.row(r) = z.row(i);
    out.d(r) = d(i);
  }
  out.t_star = t_star;
  out.covariate_names = covariate_names;
  out.period_labels = period_labels;
  return out;
}

void ModelSpec::validate(Index k) const {
  std::vector<int> seen(static_cast<std::size_t>(k), 0);
  auto mark = [&](const std::vector<Index>& cols, const char* which) {
    for (Index c : cols) {
      if (c < 0 || c >= k) {
        throw Error(ErrorCode::SpecMismatch, std::string(which) + " column " + std::to_string(c) +
                                                 " out of range for " + std::to_string(k) +
                                                 " covariates");
      }
      ++seen[static_cast<std::size_t>(c)];
    }
  };
  mark(x_cols, "x");
  mark(w_cols, "w");
  for (Index c = 0; c < k; ++c) {
    if (seen[static_cast<std::size_t>(c)] != 1) {
      throw Error(ErrorCode::SpecMismatch,
                  "covariate column " + std::to_string(c) +
                      " must appear in exactly one of the X and W sets");
    }
  }
  if (w_cols.empty()) {
    throw Error(ErrorCode::SpecMismatch,
                "at least one covariate must have a time-invariant effect (empty W set)");
  }
}

ModelSpec ModelSpec::intercept_in_x(Index k) {
  ModelSpec spec;
  spec.x_cols = {0};
  for (Index c = 1; c < k; ++c) spec.w_cols.push_back(c);
  return spec;
}

ModelSpec ModelSpec::intercept_in_w(Index k) {
  ModelSpec spec;
  spec.w_cols = {0};
  for (Index c = 1; c < k; ++c) spec.x_cols.push_back(c);
  return spec;
}

StackDims StackDims::compute(int t_total, int t_star, Index k, Index k_x) {
  StackDims s;
  s.t_total = t_total;
  s.t_star = t_star;
  s.k = k;
  s.k_x = k_x;
  s.q = (t_total - 2) + (t_star - 3);
  s.k_treated = k - 1;
  s.m = k * (t_total - 2) + s.k_treated * (t_star - 3);
  s.l = (t_total - 2) * (k_x + 1);
  const Index extra = k_x + t_total + 1;
  s.q1 = s.q + extra;
  s.m1 = s.m + extra;
  s.l1 = s.l + extra;
  return s;
}

// ---------------------------------------------------------------------------
// Stacking

namespace detail {

void fill_stacked_unit(const StackDims& dims, const StackInputs& in, StackedUnit& out) {
  const Index k = dims.k;
  const Index kx = dims.k_x;
  const Index untreated_blocks = dims.t_total - 2;
  const Index treated_blocks = dims.t_star - 3;
  const Index width = kx + 1;

  out.y.setZero(dims.q1);
  out.z.setZero(dims.m1, dims.q1);
  out.x.setZero(dims.q1, dims.l1);

  for (Index j = 0; j < untreated_blocks; ++j) {
    out.y(j) = in.long_diff(j);
    out.z.block(j * k, j, k, 1) = (1.0 - in.d) * in.z;
    out.x.block(j, j * width, 1, kx) = in.x.transpose();
    out.x(j, j * width + kx) = in.short_diff;
  }
  for (Index j = 0; j < treated_blocks; ++j) {
    const Index row = untreated_blocks + j;
    out.y(row) = in.long_diff(j);
    const Index kt = dims.k_treated;
    out.z.block(untreated_blocks * k + j * kt, row, kt, 1) = in.d * in.z.tail(kt);
    out.x.block(row, j * width, 1, kx) = in.x.transpose();
    out.x(row, j * width + kx) = in.short_diff;
  }

  const Index extra = kx + dims.t_total + 1;
  out.y.segment(dims.q, kx) = in.d * in.x;
  out.y.segment(dims.q + kx, dims.t_total) = in.dy;
  out.y(dims.q + kx + dims.t_total) = in.d;
  out.z.block(dims.m, dims.q, extra, extra).setIdentity();
  out.x.block(dims.q, dims.l, extra, extra).setIdentity();
}

PanelFit fit_stacked(const StackDims& dims, MatrixXd zx, MatrixXd zy, double p_hat,
                     const EstimateOptions& options) {
  if (!(p_hat > 0.0 && p_hat < 1.0)) {
    throw Error(ErrorCode::DegeneratePi, "treated share is " + std::to_string(p_hat) +
                                             "; both groups must be present");
  }
  const gmm::MomentSystem system = gmm::make_moment_system(std::move(zx), std::move(zy));
  gmm::TwoStepOptions two_step;
  two_step.compute_inference = options.compute_inference;

  PanelFit fit;
  fit.dims = dims;
  fit.gmm = gmm::two_step_fit(system, two_step);
  fit.params = GammaParams::from_stacked(fit.gmm.gamma, dims.t_total, dims.k_x);
  return fit;
}

}  // namespace detail

namespace {

VectorXd gather(const Eigen::Ref<const Eigen::RowVectorXd>& row, const std::vector<Index>& cols) {
  VectorXd out(static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Index>(j)) = row(cols[j]);
  return out;
}

// Instruments are ordered as X columns then W columns.
std::vector<Index> instrument_order(const ModelSpec& spec) {
  std::vector<Index> cols = spec.x_cols;
  cols.insert(cols.end(), spec.w_cols.begin(), spec.w_cols.end());
  return cols;
}

void panel_unit(const PanelDataset& data, Index unit, const ModelSpec& spec,
                const std::vector<Index>& z_order, const StackDims& dims, StackedUnit& out) {
  const int t_total = data.t_total();
  const auto yrow = data.y.row(unit);
  const double d = data.d(unit);
  VectorXd long_diff(t_total - 2);
  for (int t = 3; t <= t_total; ++t) long_diff(t - 3) = yrow(t - 1) - yrow(0);
  const VectorXd dy = d * yrow.transpose();
  const VectorXd z = gather(data.z.row(unit), z_order);
  const VectorXd x = gather(data.z.row(unit), spec.x_cols);
  detail::fill_stacked_unit(dims, {z, x, d, long_diff, yrow(1) - yrow(0), dy}, out);
}

}  // namespace

StackedUnit build_stacked_unit(const PanelDataset& data, Index unit, const ModelSpec& spec) {
  data.validate();
  spec.validate(data.k());
  if (unit < 0 || unit >= data.n()) {
    throw Error(ErrorCode::SpecMismatch, "unit index out of range");
  }
  const StackDims dims = StackDims::compute(data.t_total(), data.t_star, data.k(), spec.k_x());
  StackedUnit out;
  panel_unit(data, unit, spec, instrument_order(spec), dims, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

VectorXd GammaParams::stacked() const {
  VectorXd g(size());
  for (int t = 3; t <= t_total; ++t) {
    g.segment(beta_offset(t), k_x) = beta_at(t);
    g(f_offset(t)) = f_at(t);
  }
  g.segment(mean_dx_offset(), k_x) = mean_dx;
  g.segment(mean_dy_offset(1), t_total) = mean_dy;
  g(p_offset()) = p;
  return g;
}

GammaParams GammaParams::from_stacked(const VectorXd& gamma, int t_total, Index k_x) {
  GammaParams out;
  out.t_total = t_total;
  out.k_x = k_x;
  if (gamma.size() != out.size()) {
    throw Error(ErrorCode::DimensionMismatch, "gamma has length " + std::to_string(gamma.size()) +
                                                  ", expected " + std::to_string(out.size()));
  }
  for (int t = 3; t <= t_total; ++t) {
    out.beta.push_back(gamma.segment(out.beta_offset(t), k_x));
    out.f.push_back(gamma(out.f_offset(t)));
  }
  out.mean_dx = gamma.segment(out.mean_dx_offset(), k_x);
  out.mean_dy = gamma.segment(out.mean_dy_offset(1), t_total);
  out.p = gamma(out.p_offset());
  return out;
}

PanelFit estimate_gamma1(const PanelDataset& data, const ModelSpec& spec,
                         const EstimateOptions& options) {
  data.validate();
  spec.validate(data.k());
  const StackDims dims = StackDims::compute(data.t_total(), data.t_star, data.k(), spec.k_x());
  const Index n = data.n();
  const std::vector<Index> z_order = instrument_order(spec);

  MatrixXd zx(dims.m1, n * dims.l1);
  MatrixXd zy(dims.m1, n);
  StackedUnit unit;
  for (Index i = 0; i < n; ++i) {
    panel_unit(data, i, spec, z_order, dims, unit);
    zx.middleCols(i * dims.l1, dims.l1).noalias() = unit.z * unit.x;
    zy.col(i).noalias() = unit.z * unit.y;
  }
  return detail::fit_stacked(dims, std::move(zx), std::move(zy), data.d.mean(), options);
}

// ---------------------------------------------------------------------------
// ATT

namespace {

void require_period(const GammaParams& params, int t) {
  if (t < 3 || t > params.t_total) {
    throw Error(ErrorCode::BadPeriod, "period " + std::to_string(t) + " outside [3, " +
                                          std::to_string(params.t_total) + "]");
  }
}

}  // namespace

double att_value(const GammaParams& params, int t) {
  require_period(params, t);
  const double p = params.p;
  const double long_term = (params.dy_at(t) - params.dy_at(1)) / p;
  const double x_term = params.mean_dx.dot(params.beta_at(t)) / p;
  const double short_term = params.f_at(t) * (params.dy_at(2) - params.dy_at(1)) / p;
  return long_term - x_term - short_term;
}

VectorXd att_gradient(const GammaParams& params, int t) {
  require_period(params, t);
  const double p = params.p;
  const double f = params.f_at(t);
  VectorXd g = VectorXd::Zero(params.size());
  g.segment(params.beta_offset(t), params.k_x) = -params.mean_dx / p;
  g(params.f_offset(t)) = -(params.dy_at(2) - params.dy_at(1)) / p;
  g.segment(params.mean_dx_offset(), params.k_x) = -params.beta_at(t) / p;
  g(params.mean_dy_offset(1)) = -(1.0 - f) / p;
  g(params.mean_dy_offset(2)) = -f / p;
  g(params.mean_dy_offset(t)) = 1.0 / p;
  g(params.p_offset()) = -att_value(params, t) / p;
  return g;
}

double AttSeries::att_at(int t) const {
  for (std::size_t j = 0; j < periods.size(); ++j) {
    if (periods[j] == t) return att(static_cast<Index>(j));
  }
  throw Error(ErrorCode::BadPeriod, "no estimate for period " + std::to_string(t));
}

std::optional<double> AttSeries::se_at(int t) const {
  if (!variance) return std::nullopt;
  for (std::size_t j = 0; j < periods.size(); ++j) {
    if (periods[j] == t) {
      return std::sqrt((*variance)(static_cast<Index>(j)) / static_cast<double>(n));
    }
  }
  throw Error(ErrorCode::BadPeriod, "no estimate for period " + std::to_string(t));
}

AttSeries att_series(const GammaParams& params, const gmm::GmmFit& fit, int t_star) {
  AttSeries out;
  out.n = fit.n;
  out.t_star = t_star;
  const int count = params.t_total - 2;
  out.att.resize(count);
  MatrixXd grads(count, params.size());
  for (int t = 3; t <= params.t_total; ++t) {
    out.periods.push_back(t);
    (t < t_star ? out.pre_periods : out.post_periods).push_back(t);
    out.att(t - 3) = att_value(params, t);
    grads.row(t - 3) = att_gradient(params, t).transpose();
  }
  if (fit.sigma.size() > 0) {
    MatrixXd cov = grads * fit.sigma * grads.transpose();
    cov = 0.5 * (cov + cov.transpose());
    VectorXd var(count);
    for (int j = 0; j < count; ++j) {
      var(j) = gmm::delta_method(grads.row(j).transpose(), fit.sigma, fit.n).variance;
    }
    out.variance = std::move(var);
    out.joint_cov = std::move(cov);
  }
  return out;
}

AttSeries att_series(const PanelFit& fit, const PanelDataset& data) {
  return att_series(fit.params, fit.gmm, data.t_star);
}

// ---------------------------------------------------------------------------
// Closed forms

namespace {

void require_three_periods(const PanelDataset& data) {
  data.validate();
  if (data.t_total() != 3 || data.t_star != 3) {
    throw Error(ErrorCode::SpecMismatch, "closed forms need exactly 3 periods with t* = 3");
  }
}

struct GroupMean {
  double sum = 0.0;
  Index count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  double mean() const { return sum / static_cast<double>(count); }
};

bool negligible(double denominator, double scale) {
  return std::abs(denominator) <= 1e-12 * std::max(scale, 1e-300);
}

}  // namespace

Example1Result closed_form_example1(const PanelDataset& data) {
  require_three_periods(data);
  GroupMean long0, short0, long1, short1;
  double scale = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const double long_diff = data.y(i, 2) - data.y(i, 0);
    const double short_diff = data.y(i, 1) - data.y(i, 0);
    if (data.d(i) == 0.0) {
      long0.add(long_diff);
      short0.add(short_diff);
      scale = std::max(scale, std::abs(short_diff));
    } else {
      long1.add(long_diff);
      short1.add(short_diff);
    }
  }
  if (long0.count == 0 || long1.count == 0) {
    throw Error(ErrorCode::DegeneratePi, "both groups must be present");
  }
  const double denominator = short0.mean();
  if (negligible(denominator, scale)) {
    throw Error(ErrorCode::ZeroDenominator, "E[Y2 - Y1 | D=0] is zero; F_3 is not identified");
  }
  Example1Result out;
  out.f3 = long0.mean() / denominator;
  out.att3 = long1.mean() - out.f3 * short1.mean();
  return out;
}

Example2Result closed_form_example2(const PanelDataset& data, Index w_col) {
  require_three_periods(data);
  if (w_col <= 0 || w_col >= data.k()) {
    throw Error(ErrorCode::SpecMismatch, "W column out of range");
  }
  GroupMean long_w0, short_w0, long_w1, short_w1, long_t, short_t;
  double scale = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const double w = data.z(i, w_col);
    if (w != 0.0 && w != 1.0) {
      throw Error(ErrorCode::SpecMismatch, "W must be binary");
    }
    const double long_diff = data.y(i, 2) - data.y(i, 0);
    const double short_diff = data.y(i, 1) - data.y(i, 0);
    if (data.d(i) == 1.0) {
      long_t.add(long_diff);
      short_t.add(short_diff);
    } else if (w == 0.0) {
      long_w0.add(long_diff);
      short_w0.add(short_diff);
      scale = std::max(scale, std::abs(short_diff));
    } else {
      long_w1.add(long_diff);
      short_w1.add(short_diff);
      scale = std::max(scale, std::abs(short_diff));
    }
  }
  if (long_w0.count == 0 || long_w1.count == 0) {
    throw Error(ErrorCode::MissingWCell, "untreated units need both W = 0 and W = 1");
  }
  if (long_t.count == 0) throw Error(ErrorCode::DegeneratePi, "no treated units");
  const double denominator = short_w0.mean() - short_w1.mean();
  if (negligible(denominator, scale)) {
    throw Error(ErrorCode::ZeroDenominator,
                "short differences do not vary with W among untreated units");
  }
  Example2Result out;
  out.f3 = (long_w0.mean() - long_w1.mean()) / denominator;
  out.theta3 = long_w0.mean() - out.f3 * short_w0.mean();
  out.att3 = long_t.mean() - (out.theta3 + out.f3 * short_t.mean());
  return out;
}

// ---------------------------------------------------------------------------
// Relevance diagnostics

RelevanceReport check_relevance(const PanelDataset& data, const ModelSpec& spec,
                                double significance) {
  data.validate();
  spec.validate(data.k());
  const StackDims dims = StackDims::compute(data.t_total(), data.t_star, data.k(), spec.k_x());
  const std::vector<Index> z_order = instrument_order(spec);

  RelevanceReport report;
  report.required_rank = dims.l;

  // Sample E[ZX'] restricted to the structural block.
  MatrixXd mzx = MatrixXd::Zero(dims.m, dims.l);
  StackedUnit unit;
  for (Index i = 0; i < data.n(); ++i) {
    panel_unit(data, i, spec, z_order, dims, unit);
    mzx.noalias() += unit.z.topLeftCorner(dims.m, dims.q) * unit.x.topLeftCorner(dims.q, dims.l);
  }
  mzx /= static_cast<double>(data.n());
  report.rank = gmm::numeric_rank(mzx);
  Eigen::JacobiSVD<MatrixXd> svd(mzx);
  const VectorXd& sv = svd.singularValues();
  const double smallest = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;
  report.condition_number = smallest > 0.0 ? sv(0) / smallest
                                           : std::numeric_limits<double>::infinity();

  const MatrixXd zz = data.z.transpose() * data.z / static_cast<double>(data.n());
  report.instrument_rank = gmm::numeric_rank(zz);
  report.collinear = report.instrument_rank < data.k();

  // First stage among untreated units.
  std::vector<Index> untreated;
  for (Index i = 0; i < data.n(); ++i) {
    if (data.d(i) == 0.0) untreated.push_back(i);
  }
  const auto n0 = static_cast<Index>(untreated.size());
  const Index kz = data.k();
  MatrixXd design(n0, kz);
  VectorXd target(n0);
  for (Index r = 0; r < n0; ++r) {
    const Index i = untreated[static_cast<std::size_t>(r)];
    design.row(r) = gather(data.z.row(i), z_order).transpose();
    target(r) = data.y(i, 1) - data.y(i, 0);
  }

  bool first_stage_ok = false;
  if (n0 > kz) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() == kz) {
      const VectorXd coef = qr.solve(target);
      const VectorXd resid = target - design * coef;
      const double sigma2 = resid.squaredNorm() / static_cast<double>(n0 - kz);
      const MatrixXd xtx = design.transpose() * design;
      const MatrixXd cov = sigma2 * xtx.ldlt().solve(MatrixXd::Identity(kz, kz));
      const Index kx = spec.k_x();
      const Index kw = spec.k_w();
      for (Index j = 0; j < kw; ++j) {
        FirstStageCoefficient c;
        const Index col = spec.w_cols[static_cast<std::size_t>(j)];
        c.name = data.covariate_names.empty() ? "z" + std::to_string(col)
                                              : data.covariate_names[static_cast<std::size_t>(col)];
        c.estimate = coef(kx + j);
        c.std_error = std::sqrt(std::max(cov(kx + j, kx + j), 0.0));
        c.t_stat = c.std_error > 0.0 ? c.estimate / c.std_error : 0.0;
        report.w_coefficients.push_back(c);
      }
      const VectorXd bw = coef.segment(kx, kw);
      const MatrixXd vw = cov.block(kx, kx, kw, kw);
      const gmm::PsdInverse vinv = gmm::psd_inverse(0.5 * (vw + vw.transpose()));
      const double wald = bw.dot(vinv.inverse * bw);
      report.first_stage_f = wald / static_cast<double>(kw);
      if (vinv.rank > 0 && n0 - kz > 0) {
        boost::math::fisher_f dist(static_cast<double>(kw), static_cast<double>(n0 - kz));
        report.first_stage_p =
            report.first_stage_f > 0.0
                ? boost::math::cdf(boost::math::complement(dist, report.first_stage_f))
                : 1.0;
      }
      first_stage_ok = true;
    }
  }

  std::ostringstream msg;
  if (report.rank < report.required_rank) {
    msg << "E[ZX'] has numeric rank " << report.rank << " < " << report.required_rank << ". ";
  }
  if (report.collinear) msg << "Covariates are collinear. ";
  if (!first_stage_ok) {
    msg << "First-stage regression is rank deficient. ";
  } else if (report.first_stage_p > significance) {
    msg << "W does not significantly predict Y2 - Y1 among untreated units (p = "
        << report.first_stage_p << "). ";
  }
  report.rank_deficient = report.rank < report.required_rank || report.collinear ||
                          !first_stage_ok || report.first_stage_p > significance;
  report.message = report.rank_deficient ? msg.str() : "relevance condition looks satisfied";
  if (!report.message.empty() && report.message.back() == ' ') report.message.pop_back();
  return report;
}

}  // namespace ifeatt
