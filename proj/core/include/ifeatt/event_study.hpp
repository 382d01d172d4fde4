#pragma once

// Group-time effects for staggered adoption: each treatment cohort is compared
// with the never-treated units, estimates are re-indexed by event time
// e = t - g and averaged across cohorts with weights proportional to cohort
// size among the cohorts observed at that e.

#include "ifeatt/inference.hpp"
#include "ifeatt/io.hpp"

#include <map>
#include <vector>

namespace ifeatt {

struct EventStudyOptions {
  EstimatorId estimator = EstimatorId::IfePanel;
  Index min_group_size = 10;
};

struct CohortEstimate {
  int group = 0;  // first treated period, 1..T
  Index treated = 0;
  AttSeries series;  // calendar periods 3..T with t* = group
};

struct EventStudyResult {
  std::vector<int> event_times;
  VectorXd att;  // aligned with event_times
  // weights[j] maps group -> weight at event_times[j]; each sums to 1.
  std::vector<std::map<int, double>> weights;
  std::vector<CohortEstimate> cohorts;
};

// The cohort panel for group g: its units with D = 1 and the never-treated
// with D = 0, t* = g.
PanelDataset cohort_panel(const MultiGroupDataset& data, int group);

// Throws GroupTooSmall when a cohort has fewer than min_group_size units.
EventStudyResult group_time_event_study(const MultiGroupDataset& data, const ModelSpec& spec,
                                        const EventStudyOptions& options = {});

// Resamples units within each cohort and within the never-treated.
BootstrapResult bootstrap_event_study(const MultiGroupDataset& data, const ModelSpec& spec,
                                      const EventStudyOptions& options,
                                      const BootstrapOptions& bootstrap_options);

}  // namespace ifeatt
