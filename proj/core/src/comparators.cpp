#include "ifeatt/comparators.hpp"

#include "ifeatt/error.hpp"


namespace ifeatt {

namespace {

void require_period(const PanelDataset& data, int t) {
  if (t < 3 || t > data.t_total()) {
    throw Error(ErrorCode::BadPeriod, "period " + std::to_string(t) + " outside [3, " +
                                          std::to_string(data.t_total()) + "]");
  }
}

// Treated minus untreated mean of a per-unit contrast.
template <typename Contrast>
double group_contrast(const PanelDataset& data, Contrast&& contrast) {
  double sum1 = 0.0;
  double sum0 = 0.0;
  Index n1 = 0;
  Index n0 = 0;
  for (Index i = 0; i < data.n(); ++i) {
    const double v = contrast(i);
    if (data.d(i) == 1.0) {
      sum1 += v;
      ++n1;
    } else {
      sum0 += v;
      ++n0;
    }
  }
  if (n1 == 0 || n0 == 0) throw Error(ErrorCode::DegeneratePi, "one of the groups is empty");
  return sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
}

}  // namespace

double did_att(const PanelDataset& data, int t) {
  data.validate();
  require_period(data, t);
  return group_contrast(data, [&](Index i) { return data.y(i, t - 1) - data.y(i, 1); });
}

double lt_att(const PanelDataset& data, int t) {
  data.validate();
  require_period(data, t);
  return group_contrast(data, [&](Index i) {
    return data.y(i, t - 1) - 2.0 * data.y(i, t - 2) + data.y(i, t - 3);
  });
}

double did_bias_oracle(const BiasOracleInputs& in) { return (in.f_t - 1.0) * in.lambda_gap; }

double lt_bias_oracle(const BiasOracleInputs& in) { return (in.f_t - 2.0) * in.lambda_gap; }

}  // namespace ifeatt
