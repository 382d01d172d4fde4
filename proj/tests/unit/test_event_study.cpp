#include "ifeatt/error.hpp"
#include "ifeatt/event_study.hpp"
#include "ifeatt/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace ifeatt;

// Five periods; cohorts first treated in periods 3 and 4 (sizes n3, n4), the
// rest never treated. Untreated outcomes follow the interactive model with W
// correlated with the loading.
MultiGroupDataset staggered(Index n_never, Index n3, Index n4, int rep) {
  sim::SimConfig cfg;
  cfg.n = n_never + n3 + n4;
  cfg.f_extra = {1.6, 2.0};
  cfg.theta_extra = {1.0, 1.5};
  cfg.p = 0.5;
  const auto latents = sim::generate_latents(cfg, rep);
  MultiGroupDataset data;
  data.y.resize(cfg.n, 5);
  data.z.resize(cfg.n, 2);
  data.covariate_names = {"const", "w"};
  for (Index i = 0; i < cfg.n; ++i) {
    const auto& u = latents[static_cast<std::size_t>(i)];
    const int g = i < n_never ? 0 : (i < n_never + n3 ? 3 : 4);
    // Cohort membership shifts the loading the same way D does in the base design.
    const double lambda = u.lambda - u.d + (g == 0 ? 0.0 : 1.0);
    for (int t = 1; t <= 5; ++t) {
      double y = cfg.theta_at(t) + u.xi + lambda * cfg.f_at(t) + u.u(t - 1);
      if (g != 0 && t >= g) y += 1.0;
      data.y(i, t - 1) = y;
    }
    data.z(i, 0) = 1.0;
    data.z(i, 1) = u.w;
    data.group.push_back(g);
  }
  return data;
}

TEST(EventStudy, SingleGroupMatchesPlainEstimator) {
  const MultiGroupDataset data = staggered(600, 400, 0, 0);
  const ModelSpec spec = ModelSpec::intercept_in_x(2);
  const EventStudyResult r = group_time_event_study(data, spec);
  const AttSeries plain = estimate_att(cohort_panel(data, 3), spec, EstimatorId::IfePanel);
  ASSERT_EQ(r.event_times, (std::vector<int>{0, 1, 2}));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(r.att(static_cast<Index>(j)), plain.att_at(3 + static_cast<int>(j)));
    EXPECT_EQ(r.weights[j].at(3), 1.0);
  }
}

TEST(EventStudy, WeightsSumToOneAndFollowSizes) {
  const MultiGroupDataset data = staggered(600, 300, 100, 1);
  const EventStudyResult r = group_time_event_study(data, ModelSpec::intercept_in_x(2));
  ASSERT_EQ(r.event_times, (std::vector<int>{-1, 0, 1, 2}));
  for (const auto& w : r.weights) {
    double total = 0.0;
    for (const auto& [g, v] : w) total += v;
    EXPECT_NEAR(total, 1.0, 1e-15);
  }
  EXPECT_DOUBLE_EQ(r.weights[1].at(3), 0.75);
  EXPECT_DOUBLE_EQ(r.weights[1].at(4), 0.25);
  EXPECT_EQ(r.weights[0].size(), 1u);
}

TEST(EventStudy, EqualCohortsRecoverCommonEffect) {
  double total = 0.0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    const EventStudyResult r =
        group_time_event_study(staggered(1000, 500, 500, rep), ModelSpec::intercept_in_x(2));
    total += r.att(1);  // e = 0
  }
  EXPECT_NEAR(total / reps, 1.0, 0.1);
}

TEST(EventStudy, GroupTooSmall) {
  const MultiGroupDataset data = staggered(100, 50, 5, 2);
  try {
    group_time_event_study(data, ModelSpec::intercept_in_x(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GroupTooSmall);
  }
  EventStudyOptions opt;
  opt.min_group_size = 5;
  opt.estimator = EstimatorId::Did;
  EXPECT_NO_THROW(group_time_event_study(data, ModelSpec::intercept_in_x(2), opt));
}

TEST(EventStudy, BootstrapIsDeterministic) {
  const MultiGroupDataset data = staggered(300, 150, 150, 3);
  EventStudyOptions opt;
  opt.estimator = EstimatorId::Did;
  BootstrapOptions b;
  b.reps = 100;
  b.threads = 1;
  const BootstrapResult x = bootstrap_event_study(data, ModelSpec::intercept_in_x(2), opt, b);
  b.threads = 2;
  const BootstrapResult y = bootstrap_event_study(data, ModelSpec::intercept_in_x(2), opt, b);
  EXPECT_EQ(x.draws, y.draws);
  EXPECT_EQ(x.periods, (std::vector<int>{-1, 0, 1, 2}));
  EXPECT_TRUE(x.se.allFinite());
}

}  // namespace
