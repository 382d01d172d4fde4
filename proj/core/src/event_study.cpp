#include "ifeatt/event_study.hpp"

#include "ifeatt/error.hpp"

namespace ifeatt {

PanelDataset cohort_panel(const MultiGroupDataset& data, int group) {
  std::vector<Index> units;
  for (Index i = 0; i < data.n(); ++i) {
    const int g = data.group[static_cast<std::size_t>(i)];
    if (g == group || g == 0) units.push_back(i);
  }
  PanelDataset out;
  const auto count = static_cast<Index>(units.size());
  out.y.resize(count, data.y.cols());
  out.z.resize(count, data.z.cols());
  out.d.resize(count);
  for (Index r = 0; r < count; ++r) {
    const Index i = units[static_cast<std::size_t>(r)];
    out.y.row(r) = data.y.row(i);
    out.z.row(r) = data.z.row(i);
    out.d(r) = data.group[static_cast<std::size_t>(i)] == group ? 1.0 : 0.0;
  }
  out.t_star = group;
  out.covariate_names = data.covariate_names;
  out.period_labels = data.period_labels;
  return out;
}

EventStudyResult group_time_event_study(const MultiGroupDataset& data, const ModelSpec& spec,
                                        const EventStudyOptions& options) {
  data.validate();
  std::map<int, Index> sizes;
  for (int g : data.group) {
    if (g != 0) ++sizes[g];
  }
  if (sizes.empty()) throw Error(ErrorCode::InvalidArgument, "no treated cohorts");

  EventStudyResult out;
  std::map<int, std::map<int, std::pair<double, Index>>> by_event;  // e -> group -> (att, size)
  for (const auto& [g, size] : sizes) {
    if (size < options.min_group_size) {
      throw Error(ErrorCode::GroupTooSmall, "cohort " + std::to_string(g) + " has " +
                                                std::to_string(size) + " units, minimum is " +
                                                std::to_string(options.min_group_size));
    }
    CohortEstimate cohort;
    cohort.group = g;
    cohort.treated = size;
    cohort.series = estimate_att(cohort_panel(data, g), spec, options.estimator);
    for (std::size_t j = 0; j < cohort.series.periods.size(); ++j) {
      const int t = cohort.series.periods[j];
      by_event[t - g][g] = {cohort.series.att(static_cast<Index>(j)), size};
    }
    out.cohorts.push_back(std::move(cohort));
  }

  out.att.resize(static_cast<Index>(by_event.size()));
  Index j = 0;
  for (const auto& [e, entries] : by_event) {
    double total = 0.0;
    for (const auto& [g, entry] : entries) total += static_cast<double>(entry.second);
    std::map<int, double> w;
    double value = 0.0;
    for (const auto& [g, entry] : entries) {
      w[g] = static_cast<double>(entry.second) / total;
      value += w[g] * entry.first;
    }
    out.event_times.push_back(e);
    out.att(j++) = value;
    out.weights.push_back(std::move(w));
  }
  return out;
}

BootstrapResult bootstrap_event_study(const MultiGroupDataset& data, const ModelSpec& spec,
                                      const EventStudyOptions& options,
                                      const BootstrapOptions& bootstrap_options) {
  const EventStudyResult point = group_time_event_study(data, spec, options);
  const ResampleEstimator estimator = [&](const std::vector<Index>& sample) -> VectorXd {
    return group_time_event_study(data.subset(sample), spec, options).att;
  };
  return bootstrap(data.n(), point.event_times, point.att, estimator, bootstrap_options, data.group);
}

}  // namespace ifeatt
