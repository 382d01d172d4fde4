#pragma once

#include "ifeatt/panel.hpp"

#include <initializer_list>
#include <random>
#include <vector>

namespace fixture {

using ifeatt::Index;
using ifeatt::MatrixXd;
using ifeatt::PanelDataset;
using ifeatt::VectorXd;

struct UnitRow {
  std::vector<double> y;
  std::vector<double> z;  // without the intercept
  double d = 0.0;
};

inline PanelDataset make_panel(const std::vector<UnitRow>& rows, int t_star = 3) {
  PanelDataset data;
  const auto n = static_cast<Index>(rows.size());
  const auto t = static_cast<Index>(rows.front().y.size());
  const auto k = static_cast<Index>(rows.front().z.size()) + 1;
  data.y.resize(n, t);
  data.z.resize(n, k);
  data.d.resize(n);
  for (Index i = 0; i < n; ++i) {
    const UnitRow& r = rows[static_cast<std::size_t>(i)];
    for (Index s = 0; s < t; ++s) data.y(i, s) = r.y[static_cast<std::size_t>(s)];
    data.z(i, 0) = 1.0;
    for (Index c = 1; c < k; ++c) data.z(i, c) = r.z[static_cast<std::size_t>(c - 1)];
    data.d(i) = r.d;
  }
  data.t_star = t_star;
  return data;
}

// Three-period data with a binary W that shifts the factor loading, so that
// W is a relevant instrument; F_3, theta_3 and the effect are drawn at random.
inline PanelDataset random_binary_w_panel(std::mt19937_64& gen, Index n) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double f3 = 0.5 + 2.0 * unif(gen);
  const double theta3 = normal(gen);
  const double effect = normal(gen);
  PanelDataset data;
  data.y.resize(n, 3);
  data.z.resize(n, 2);
  data.d.resize(n);
  for (Index i = 0; i < n; ++i) {
    // Keep both groups and both W cells among the untreated populated.
    const double d = i % 3 == 0 ? 1.0 : 0.0;
    const double w = (i / 3) % 2 == 0 ? 0.0 : 1.0;
    const double lambda = d + 1.5 * w + normal(gen);
    const double xi = d + normal(gen);
    const double f[3] = {0.0, 1.0, f3};
    const double theta[3] = {0.0, 0.0, theta3};
    for (Index s = 0; s < 3; ++s) {
      data.y(i, s) = theta[s] + xi + lambda * f[s] + normal(gen) + (s == 2 ? d * effect : 0.0);
    }
    data.z(i, 0) = 1.0;
    data.z(i, 1) = w;
    data.d(i) = d;
  }
  data.t_star = 3;
  return data;
}

inline PanelDataset intercept_only(const PanelDataset& data) {
  PanelDataset out = data;
  out.z = data.z.leftCols(1);
  if (!out.covariate_names.empty()) out.covariate_names.resize(1);
  return out;
}

}  // namespace fixture
