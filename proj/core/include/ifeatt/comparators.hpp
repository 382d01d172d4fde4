#pragma once

// Difference-in-differences and unit-specific linear-trend comparators, plus
// their large-sample biases when untreated outcomes follow the interactive
// model instead.

#include "ifeatt/panel.hpp"

namespace ifeatt {

// (mean(Y_t - Y_2) | D=1) - (mean(Y_t - Y_2) | D=0). Throws BadPeriod unless
// 3 <= t <= T, DegeneratePi when a group is empty.
double did_att(const PanelDataset& data, int t);

// Group contrast of Y_t - 2 Y_{t-1} + Y_{t-2}.
double lt_att(const PanelDataset& data, int t);

struct BiasOracleInputs {
  double f_t = 0.0;
  double lambda_gap = 0.0;  // E[lambda | D=1] - E[lambda | D=0]
};

// (F_t - 1) * gap
double did_bias_oracle(const BiasOracleInputs& in);
// (F_t - 2) * gap
double lt_bias_oracle(const BiasOracleInputs& in);

}  // namespace ifeatt
