#include "ifeatt/error.hpp"
#include "ifeatt/panel.hpp"
#include "ifeatt/simulation.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

namespace {

using namespace ifeatt;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an ifeatt::Error";
  return ErrorCode::IoError;
}

PanelDataset example2_hand() {
  return fixture::make_panel({
      {{0, 1, 2}, {0}, 0},
      {{0, 1, 2}, {0}, 0},
      {{0, 2, 4}, {1}, 0},
      {{0, 2, 4}, {1}, 0},
      {{0, 1, 5}, {0}, 1},
      {{0, 2, 6}, {1}, 1},
  });
}

TEST(StackDims, Formulas) {
  const StackDims a = StackDims::compute(3, 3, 2, 1);
  EXPECT_EQ(a.q, 1);
  EXPECT_EQ(a.m, 2);
  EXPECT_EQ(a.l, 2);
  EXPECT_EQ(a.q1, 6);
  EXPECT_EQ(a.m1, 7);
  EXPECT_EQ(a.l1, 7);

  const StackDims b = StackDims::compute(5, 4, 3, 2);
  EXPECT_EQ(b.q, 4);
  EXPECT_EQ(b.k_treated, 2);
  EXPECT_EQ(b.m, 3 * 3 + 2 * 1);
  EXPECT_EQ(b.l, 9);
  EXPECT_EQ(b.m - b.l, 2);
}

TEST(BuildStackedUnit, BlockStructure) {
  // T = 5, t* = 4, K = 3 with (const, x2) in X and one W.
  PanelDataset data = fixture::make_panel({
      {{1, 2, 3, 4, 5}, {0.5, -1.0}, 0},
      {{2, 1, 0, 2, 7}, {1.5, 2.0}, 1},
  }, 4);
  ModelSpec spec;
  spec.x_cols = {0, 1};
  spec.w_cols = {2};
  const StackDims dims = StackDims::compute(5, 4, 3, 2);

  const StackedUnit u0 = build_stacked_unit(data, 0, spec);
  const StackedUnit u1 = build_stacked_unit(data, 1, spec);
  for (const StackedUnit* u : {&u0, &u1}) {
    EXPECT_EQ(u->y.size(), dims.q1);
    EXPECT_EQ(u->z.rows(), dims.m1);
    EXPECT_EQ(u->z.cols(), dims.q1);
    EXPECT_EQ(u->x.rows(), dims.q1);
    EXPECT_EQ(u->x.cols(), dims.l1);
  }
  const Index a_rows = 3 * 3;
  const Index b_rows = 2 * 1;
  EXPECT_TRUE(u1.z.topRows(a_rows).isZero(0.0));
  EXPECT_TRUE(u0.z.middleRows(a_rows, b_rows).isZero(0.0));
  EXPECT_FALSE(u0.z.topRows(a_rows).isZero(0.0));
  EXPECT_FALSE(u1.z.middleRows(a_rows, b_rows).isZero(0.0));
  // Treated pre-period instruments exclude the intercept.
  EXPECT_EQ(u1.z(a_rows, 3), 1.5);
  EXPECT_EQ(u1.z(a_rows + 1, 3), 2.0);

  // Y_i: long differences, then D X, D Y_t and D.
  EXPECT_EQ(u1.y(0), 0 - 2);
  EXPECT_EQ(u1.y(2), 7 - 2);
  EXPECT_EQ(u1.y(3), 0 - 2);  // treated pre-period row for t = 3
  EXPECT_EQ(u1.y(dims.q + 1), 1.5);
  EXPECT_EQ(u1.y(dims.q + 2 + 4), 7.0);
  EXPECT_EQ(u1.y(dims.q1 - 1), 1.0);
  EXPECT_TRUE(u0.y.tail(2 + 5 + 1).isZero(0.0));
  // The treated pre-period regressor row is padded beyond its own period.
  EXPECT_TRUE(u1.x.row(3).segment(3, dims.l - 3).isZero(0.0));
  EXPECT_EQ(u1.x(3, 2), 1 - 2);
}

TEST(BuildStackedUnit, NoTreatedBlockWhenTStarIsThree) {
  PanelDataset data = fixture::make_panel({{{0, 1, 3}, {2.0}, 0}, {{0, 2, 1}, {1.0}, 1}});
  const StackedUnit u = build_stacked_unit(data, 0, ModelSpec::intercept_in_x(2));
  EXPECT_EQ(u.z.rows(), 7);
  EXPECT_EQ(u.z.cols(), 6);
  EXPECT_EQ(code_of([&] { build_stacked_unit(data, 0, ModelSpec{{0}, {}}); }),
            ErrorCode::SpecMismatch);
  EXPECT_EQ(code_of([&] { build_stacked_unit(data, 0, ModelSpec{{0, 1}, {1}}); }),
            ErrorCode::SpecMismatch);
}

TEST(EstimateGamma1, MomentBlockEqualsSampleMeans) {
  const PanelDataset data = sim::generate_panel(sim::SimConfig{}, 0);
  const PanelFit fit = estimate_gamma1(data, ModelSpec::intercept_in_x(2));
  EXPECT_EQ(fit.params.p, data.d.mean());
  for (int t = 1; t <= 3; ++t) {
    const double mean_dy = (data.d.array() * data.y.col(t - 1).array()).mean();
    EXPECT_NEAR(fit.params.dy_at(t), mean_dy, 1e-12);
  }
  EXPECT_NEAR(fit.params.mean_dx(0), data.d.mean(), 1e-12);
}

TEST(EstimateGamma1, SingleReplicationNearTruth) {
  sim::SimConfig cfg;
  cfg.f3 = 2.0;
  const PanelDataset data = sim::generate_panel(cfg, 0);
  const PanelFit fit = estimate_gamma1(data, ModelSpec::intercept_in_x(2));
  EXPECT_NEAR(fit.params.f_at(3), 2.0, 0.5);
}

TEST(EstimateGamma1, DegenerateGroups) {
  PanelDataset data = sim::generate_panel(sim::SimConfig{}, 0);
  data.d.setZero();
  EXPECT_EQ(code_of([&] { estimate_gamma1(data, ModelSpec::intercept_in_x(2)); }),
            ErrorCode::DegeneratePi);
}

TEST(ClosedForms, Example1TrivialCases) {
  const PanelDataset parallel = fixture::intercept_only(fixture::make_panel({
      {{0, 1, 1}, {0}, 0},
      {{0, 1, 1}, {0}, 0},
      {{0, 1, 3}, {0}, 1},
  }));
  EXPECT_DOUBLE_EQ(closed_form_example1(parallel).f3, 1.0);
  EXPECT_DOUBLE_EQ(closed_form_example1(parallel).att3, 2.0);

  const PanelDataset linear = fixture::intercept_only(fixture::make_panel({
      {{0, 1, 2}, {0}, 0},
      {{1, 2, 3}, {0}, 0},
      {{0, 1, 3}, {0}, 1},
  }));
  EXPECT_DOUBLE_EQ(closed_form_example1(linear).f3, 2.0);

  const PanelDataset flat = fixture::intercept_only(fixture::make_panel({
      {{0, 0, 1}, {0}, 0},
      {{0, 1, 3}, {0}, 1},
  }));
  EXPECT_EQ(code_of([&] { closed_form_example1(flat); }), ErrorCode::ZeroDenominator);
}

TEST(ClosedForms, Example2HandArithmetic) {
  const PanelDataset data = example2_hand();
  const Example2Result r = closed_form_example2(data);
  EXPECT_DOUBLE_EQ(r.f3, 2.0);
  EXPECT_DOUBLE_EQ(r.theta3, 0.0);
  // Treated long mean 5.5, short mean 1.5.
  EXPECT_DOUBLE_EQ(r.att3, 2.5);
  EXPECT_DOUBLE_EQ(oracle::att_from_means(data, 3, r.theta3, r.f3), 2.5);

  const PanelFit fit = estimate_gamma1(data, ModelSpec::intercept_in_x(2));
  EXPECT_NEAR(fit.params.f_at(3), 2.0, 1e-10);
  EXPECT_NEAR(fit.params.beta_at(3)(0), 0.0, 1e-10);
  EXPECT_NEAR(att_series(fit, data).att_at(3), 2.5, 1e-10);
}

TEST(ClosedForms, Example2Errors) {
  const PanelDataset same_paths = fixture::make_panel({
      {{0, 1, 2}, {0}, 0},
      {{0, 1, 2}, {1}, 0},
      {{0, 1, 5}, {0}, 1},
  });
  EXPECT_EQ(code_of([&] { closed_form_example2(same_paths); }), ErrorCode::ZeroDenominator);
  const PanelDataset one_cell = fixture::make_panel({
      {{0, 1, 2}, {0}, 0},
      {{0, 2, 2}, {0}, 0},
      {{0, 1, 5}, {1}, 1},
  });
  EXPECT_EQ(code_of([&] { closed_form_example2(one_cell); }), ErrorCode::MissingWCell);
}

TEST(ClosedForms, GmmMatchesBothExamples) {
  std::mt19937_64 gen(101);
  for (int rep = 0; rep < 20; ++rep) {
    const PanelDataset data = fixture::random_binary_w_panel(gen, 90);
    const Example2Result ex2 = closed_form_example2(data);
    const PanelFit fit2 = estimate_gamma1(data, ModelSpec::intercept_in_x(2));
    EXPECT_NEAR(fit2.params.f_at(3), ex2.f3, 1e-8);
    EXPECT_NEAR(fit2.params.beta_at(3)(0), ex2.theta3, 1e-8);
    EXPECT_NEAR(att_series(fit2, data).att_at(3), ex2.att3, 1e-8);

    const PanelDataset plain = fixture::intercept_only(data);
    const Example1Result ex1 = closed_form_example1(plain);
    const PanelFit fit1 = estimate_gamma1(plain, ModelSpec::intercept_in_w(1));
    EXPECT_NEAR(fit1.params.f_at(3), ex1.f3, 1e-8);
    EXPECT_NEAR(att_series(fit1, plain).att_at(3), ex1.att3, 1e-8);
  }
}

TEST(ClosedForms, IvRatioOracleWithContinuousW) {
  const PanelDataset data = sim::generate_panel(sim::SimConfig{}, 3);
  const PanelFit fit = estimate_gamma1(data, ModelSpec::intercept_in_x(2));
  const oracle::IvFit iv = oracle::iv_ratio(data, 3, 1);
  EXPECT_NEAR(fit.params.f_at(3), iv.f, 1e-9);
  EXPECT_NEAR(fit.params.beta_at(3)(0), iv.theta, 1e-9);
  EXPECT_NEAR(att_series(fit, data).att_at(3), oracle::att_from_means(data, 3, iv.theta, iv.f), 1e-9);
}

TEST(AttGradient, TrivialCases) {
  GammaParams p;
  p.t_total = 3;
  p.k_x = 1;
  p.beta = {VectorXd::Constant(1, 0.7)};
  p.f = {1.0};
  p.mean_dx = VectorXd::Constant(1, 0.4);
  p.mean_dy = Eigen::Vector3d(0.2, 0.9, 1.6);
  p.p = 0.4;
  const VectorXd g = att_gradient(p, 3);
  EXPECT_EQ(g.size(), p.size());
  EXPECT_EQ(g(p.mean_dy_offset(1)), 0.0);

  GammaParams s;
  s.t_total = 3;
  s.k_x = 1;
  s.beta = {VectorXd::Zero(1)};
  s.f = {0.3};
  s.mean_dx = VectorXd::Zero(1);
  s.mean_dy = Eigen::Vector3d(0.5, 0.5, 2.0);
  s.p = 1.0;
  const VectorXd gs = att_gradient(s, 3);
  const double att = att_value(s, 3);
  EXPECT_DOUBLE_EQ(att, 1.5);
  EXPECT_EQ(gs(s.mean_dy_offset(3)), 1.0);
  EXPECT_EQ(gs(s.p_offset()), -att);
  EXPECT_EQ(gs(s.mean_dy_offset(1)), -(1.0 - 0.3));
  EXPECT_EQ(gs(s.mean_dy_offset(2)), -0.3);
  EXPECT_EQ(gs(s.beta_offset(3)), 0.0);
  EXPECT_EQ(gs(s.f_offset(3)), 0.0);
  EXPECT_EQ(code_of([&] { att_gradient(s, 4); }), ErrorCode::BadPeriod);
}

TEST(AttGradient, MatchesFiniteDifferences) {
  std::mt19937_64 gen(29);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::uniform_real_distribution<double> share(0.2, 0.8);
  for (int rep = 0; rep < 20; ++rep) {
    GammaParams p;
    p.t_total = 5;
    p.k_x = 2;
    for (int t = 3; t <= 5; ++t) {
      p.beta.push_back(Eigen::Vector2d(unif(gen), unif(gen)));
      p.f.push_back(unif(gen));
    }
    p.mean_dx = Eigen::Vector2d(unif(gen), unif(gen));
    p.mean_dy = VectorXd::NullaryExpr(5, [&] { return unif(gen); });
    p.p = share(gen);
    const VectorXd x = p.stacked();
    for (int t = 3; t <= 5; ++t) {
      const auto f = [&](const VectorXd& v) {
        return att_value(GammaParams::from_stacked(v, 5, 2), t);
      };
      const VectorXd fd = oracle::central_difference(f, x);
      const VectorXd g = att_gradient(p, t);
      for (Index k = 0; k < g.size(); ++k) {
        EXPECT_NEAR(g(k), fd(k), 1e-6 * std::max(1.0, std::abs(g(k)))) << "entry " << k;
      }
      // Other periods' (beta, F) never enter ATT_t.
      for (int s = 3; s <= 5; ++s) {
        if (s == t) continue;
        EXPECT_TRUE(g.segment(p.beta_offset(s), 3).isZero(0.0));
      }
    }
  }
}

TEST(AttSeries, NoChangeGivesZero) {
  GammaParams p;
  p.t_total = 4;
  p.k_x = 1;
  p.beta = {VectorXd::Zero(1), VectorXd::Zero(1)};
  p.f = {0.0, 0.0};
  p.mean_dx = VectorXd::Constant(1, 0.5);
  p.mean_dy = VectorXd::Constant(4, 0.8);
  p.p = 0.5;
  EXPECT_EQ(att_value(p, 3), 0.0);
  EXPECT_EQ(att_value(p, 4), 0.0);
}

TEST(AttSeries, VarianceFromDeltaMethod) {
  const PanelDataset data = sim::generate_panel(sim::SimConfig{}, 1);
  const PanelFit fit = estimate_gamma1(data, ModelSpec::intercept_in_x(2));
  const AttSeries s = att_series(fit, data);
  ASSERT_TRUE(s.variance.has_value());
  const VectorXd g = att_gradient(fit.params, 3);
  EXPECT_NEAR((*s.variance)(0), oracle::double_sum_quadratic(g, fit.gmm.sigma), 1e-10);
  EXPECT_NEAR(*s.se_at(3), std::sqrt((*s.variance)(0) / static_cast<double>(data.n())), 1e-14);
  EXPECT_EQ(s.post_periods, std::vector<int>{3});
  EXPECT_TRUE(s.pre_periods.empty());
}

TEST(Invariance, Permutation) {
  sim::SimConfig cfg;
  cfg.f_extra = {1.7};
  cfg.theta_extra = {1.0};
  cfg.t_star = 4;
  cfg.n = 400;
  const PanelDataset data = sim::generate_panel(cfg, 2);
  std::vector<Index> order(static_cast<std::size_t>(data.n()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(5));
  const PanelDataset shuffled = data.subset(order);
  const ModelSpec spec = ModelSpec::intercept_in_x(2);
  const PanelFit a = estimate_gamma1(data, spec);
  const PanelFit b = estimate_gamma1(shuffled, spec);
  EXPECT_LT((a.gmm.gamma - b.gmm.gamma).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((att_series(a, data).att - att_series(b, shuffled).att).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Invariance, ScalingAndPeriodShift) {
  const PanelDataset data = sim::generate_panel(sim::SimConfig{}, 4);
  const ModelSpec spec = ModelSpec::intercept_in_x(2);
  const PanelFit base = estimate_gamma1(data, spec);
  const double att = att_series(base, data).att_at(3);

  PanelDataset scaled = data;
  scaled.y *= 2.5;
  const PanelFit fs = estimate_gamma1(scaled, spec);
  EXPECT_NEAR(att_series(fs, scaled).att_at(3), 2.5 * att, 1e-10);
  EXPECT_NEAR(fs.params.f_at(3), base.params.f_at(3), 1e-10);

  PanelDataset shifted = data;
  shifted.y.col(2).array() += 3.0;
  const PanelFit fh = estimate_gamma1(shifted, spec);
  EXPECT_NEAR(att_series(fh, shifted).att_at(3), att, 1e-10);
  EXPECT_NEAR(fh.params.f_at(3), base.params.f_at(3), 1e-10);
  EXPECT_NEAR(fh.params.beta_at(3)(0), base.params.beta_at(3)(0) + 3.0, 1e-10);
}

TEST(PrePeriod, MeanOfPlaceboIsZero) {
  sim::SimConfig cfg;
  cfg.n = 500;
  cfg.f_extra = {1.5};
  cfg.theta_extra = {3.0};
  cfg.t_star = 4;
  const ModelSpec spec = ModelSpec::intercept_in_x(2);
  const int reps = 500;
  std::vector<double> est;
  for (int r = 0; r < reps; ++r) {
    const PanelDataset data = sim::generate_panel(cfg, r);
    EstimateOptions opt;
    opt.compute_inference = false;
    const PanelFit fit = estimate_gamma1(data, spec, opt);
    est.push_back(att_value(fit.params, 3));
  }
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / reps;
  double ss = 0.0;
  for (double e : est) ss += (e - mean) * (e - mean);
  const double mc_se = std::sqrt(ss / (reps - 1) / reps);
  EXPECT_LT(std::abs(mean), 3.0 * mc_se);
}

TEST(Relevance, StrongWeakAndCollinear) {
  const PanelDataset strong = sim::generate_panel(sim::SimConfig{}, 0);
  const RelevanceReport r = check_relevance(strong, ModelSpec::intercept_in_x(2));
  ASSERT_EQ(r.w_coefficients.size(), 1u);
  EXPECT_GT(r.w_coefficients[0].estimate, 0.0);
  EXPECT_GT(r.w_coefficients[0].t_stat, 5.0);
  EXPECT_FALSE(r.rank_deficient);
  EXPECT_EQ(r.rank, r.required_rank);

  // W independent of lambda: flagged in about 95% of samples at the 5% level.
  sim::SimConfig irrelevant;
  irrelevant.rho = 0.0;
  irrelevant.n = 500;
  int flagged = 0;
  for (int rep = 0; rep < 200; ++rep) {
    if (check_relevance(sim::generate_panel(irrelevant, rep), ModelSpec::intercept_in_x(2))
            .rank_deficient) {
      ++flagged;
    }
  }
  EXPECT_GE(flagged, 180);

  PanelDataset exact_zero = strong;
  for (Index i = 0; i < exact_zero.n(); ++i) exact_zero.z(i, 1) = (i % 2 == 0) ? 1.0 : -1.0;
  for (Index i = 0; i < exact_zero.n(); ++i) exact_zero.y(i, 1) = exact_zero.y(i, 0) + 1.0;
  EXPECT_TRUE(check_relevance(exact_zero, ModelSpec::intercept_in_x(2)).rank_deficient);

  PanelDataset dup = strong;
  dup.z.conservativeResize(Eigen::NoChange, 3);
  dup.z.col(2) = dup.z.col(1);
  if (!dup.covariate_names.empty()) dup.covariate_names.push_back("w_copy");
  const RelevanceReport rd = check_relevance(dup, ModelSpec::intercept_in_x(3));
  EXPECT_TRUE(rd.collinear);
  EXPECT_TRUE(rd.rank_deficient);
}

TEST(PanelDataset, Validation) {
  PanelDataset data = sim::generate_panel(sim::SimConfig{}, 0);
  PanelDataset bad = data;
  bad.y(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::NonFiniteInput);
  bad = data;
  bad.t_star = 4;
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidArgument);
  bad = data;
  bad.z(0, 0) = 2.0;
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidArgument);
}

}  // namespace
