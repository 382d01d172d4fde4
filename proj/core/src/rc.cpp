#include "ifeatt/rc.hpp"

#include "ifeatt/error.hpp"

namespace ifeatt {

namespace {

std::vector<Index> instrument_order(const ModelSpec& spec) {
  std::vector<Index> cols = spec.x_cols;
  cols.insert(cols.end(), spec.w_cols.begin(), spec.w_cols.end());
  return cols;
}

VectorXd gather(const Eigen::Ref<const Eigen::RowVectorXd>& row, const std::vector<Index>& cols) {
  VectorXd out(static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Index>(j)) = row(cols[j]);
  return out;
}

void rc_row(const RcDataset& data, Index row, const PiShares& pi, const ModelSpec& spec,
            const std::vector<Index>& z_order, const StackDims& dims, StackedUnit& out) {
  const int t_total = data.t_total;
  const int period = data.t[static_cast<std::size_t>(row)];
  const double y = data.y(row);
  const double d = data.d(row);
  // T_s Y / pi_s for every s.
  VectorXd level = VectorXd::Zero(t_total);
  level(period - 1) = y / pi.at(period);

  VectorXd long_diff(t_total - 2);
  for (int s = 3; s <= t_total; ++s) long_diff(s - 3) = level(s - 1) - level(0);
  const VectorXd dy = d * level;
  const VectorXd z = gather(data.z.row(row), z_order);
  const VectorXd x = gather(data.z.row(row), spec.x_cols);
  detail::fill_stacked_unit(dims, {z, x, d, long_diff, level(1) - level(0), dy}, out);
}

}  // namespace

std::vector<Index> RcDataset::period_counts() const {
  std::vector<Index> counts(static_cast<std::size_t>(std::max(t_total, 0)), 0);
  for (int s : t) {
    if (s >= 1 && s <= t_total) ++counts[static_cast<std::size_t>(s - 1)];
  }
  return counts;
}

void RcDataset::validate() const {
  const Index n = rows();
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "no rows");
  if (z.rows() != n || d.size() != n || static_cast<Index>(t.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "y, z, d and t disagree on the number of rows");
  }
  if (t_total < 3) throw Error(ErrorCode::InvalidArgument, "need at least 3 periods");
  if (t_star < 3 || t_star > t_total) {
    throw Error(ErrorCode::InvalidArgument, "first treated period must lie in [3, T]");
  }
  for (int s : t) {
    if (s < 1 || s > t_total) {
      throw Error(ErrorCode::BadPeriodLabels, "period " + std::to_string(s) + " outside [1, " +
                                                  std::to_string(t_total) + "]");
    }
  }
  if (!y.allFinite() || !z.allFinite() || !d.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "rows contain missing or non-finite values");
  }
  if (z.cols() < 1 || (z.col(0).array() != 1.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "column 0 of z must be an all-ones intercept");
  }
  if (((d.array() != 0.0) && (d.array() != 1.0)).any()) {
    throw Error(ErrorCode::InvalidArgument, "treatment indicator must be 0 or 1");
  }
  const auto counts = period_counts();
  for (int s = 1; s <= t_total; ++s) {
    if (counts[static_cast<std::size_t>(s - 1)] == 0) {
      throw Error(ErrorCode::EmptyPeriod, "period " + std::to_string(s) + " has no rows");
    }
  }
}

RcDataset RcDataset::subset(const std::vector<Index>& rows_in) const {
  RcDataset out;
  const auto count = static_cast<Index>(rows_in.size());
  out.y.resize(count);
  out.z.resize(count, z.cols());
  out.d.resize(count);
  out.t.resize(rows_in.size());
  for (Index r = 0; r < count; ++r) {
    const Index i = rows_in[static_cast<std::size_t>(r)];
    out.y(r) = y(i);
    out.z.row(r) = z.row(i);
    out.d(r) = d(i);
    out.t[static_cast<std::size_t>(r)] = t[static_cast<std::size_t>(i)];
  }
  out.t_total = t_total;
  out.t_star = t_star;
  out.covariate_names = covariate_names;
  out.period_labels = period_labels;
  return out;
}

RcDataset RcDataset::from_panel(const PanelDataset& panel) {
  panel.validate();
  RcDataset out;
  const Index n = panel.n();
  const int t_total = panel.t_total();
  const Index rows = n * t_total;
  out.y.resize(rows);
  out.z.resize(rows, panel.k());
  out.d.resize(rows);
  out.t.resize(static_cast<std::size_t>(rows));
  Index r = 0;
  for (Index i = 0; i < n; ++i) {
    for (int s = 1; s <= t_total; ++s, ++r) {
      out.y(r) = panel.y(i, s - 1);
      out.z.row(r) = panel.z.row(i);
      out.d(r) = panel.d(i);
      out.t[static_cast<std::size_t>(r)] = s;
    }
  }
  out.t_total = t_total;
  out.t_star = panel.t_star;
  out.covariate_names = panel.covariate_names;
  out.period_labels = panel.period_labels;
  return out;
}

PiShares estimate_pi(const RcDataset& data) {
  const auto counts = data.period_counts();
  PiShares out;
  out.pi.resize(data.t_total);
  const auto n = static_cast<double>(data.rows());
  for (int s = 1; s <= data.t_total; ++s) {
    const Index c = counts[static_cast<std::size_t>(s - 1)];
    if (c == 0) {
      throw Error(ErrorCode::EmptyPeriod, "period " + std::to_string(s) + " has no rows");
    }
    out.pi(s - 1) = static_cast<double>(c) / n;
  }
  return out;
}

StackedUnit build_rc_unit(const RcDataset& data, Index row, const PiShares& pi,
                          const ModelSpec& spec) {
  spec.validate(data.k());
  if (row < 0 || row >= data.rows()) throw Error(ErrorCode::SpecMismatch, "row out of range");
  if (pi.pi.size() != data.t_total || (pi.pi.array() <= 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "period shares must be positive for every period");
  }
  const StackDims dims = StackDims::compute(data.t_total, data.t_star, data.k(), spec.k_x());
  StackedUnit out;
  rc_row(data, row, pi, spec, instrument_order(spec), dims, out);
  return out;
}

PanelFit estimate_gamma1_rc(const RcDataset& data, const ModelSpec& spec,
                            const EstimateOptions& options) {
  data.validate();
  spec.validate(data.k());
  const PiShares pi = estimate_pi(data);
  const StackDims dims = StackDims::compute(data.t_total, data.t_star, data.k(), spec.k_x());
  const Index n = data.rows();
  const std::vector<Index> z_order = instrument_order(spec);

  MatrixXd zx(dims.m1, n * dims.l1);
  MatrixXd zy(dims.m1, n);
  StackedUnit unit;
  for (Index i = 0; i < n; ++i) {
    rc_row(data, i, pi, spec, z_order, dims, unit);
    zx.middleCols(i * dims.l1, dims.l1).noalias() = unit.z * unit.x;
    zy.col(i).noalias() = unit.z * unit.y;
  }
  return detail::fit_stacked(dims, std::move(zx), std::move(zy), data.d.mean(), options);
}

AttSeries estimate_att_rc(const RcDataset& data, const ModelSpec& spec) {
  data.validate();
  std::vector<Index> treated(static_cast<std::size_t>(data.t_total), 0);
  std::vector<Index> untreated(static_cast<std::size_t>(data.t_total), 0);
  for (Index r = 0; r < data.rows(); ++r) {
    auto& cell = data.d(r) == 1.0 ? treated : untreated;
    ++cell[static_cast<std::size_t>(data.t[static_cast<std::size_t>(r)] - 1)];
  }
  for (int s = 1; s <= data.t_total; ++s) {
    if (treated[static_cast<std::size_t>(s - 1)] == 0 ||
        untreated[static_cast<std::size_t>(s - 1)] == 0) {
      throw Error(ErrorCode::EmptyCell, "period " + std::to_string(s) +
                                            " lacks rows from one of the groups");
    }
  }
  EstimateOptions options;
  options.compute_inference = false;
  const PanelFit fit = estimate_gamma1_rc(data, spec, options);
  AttSeries series = att_series(fit.params, fit.gmm, data.t_star);
  series.n = data.rows();
  return series;
}

}  // namespace ifeatt
