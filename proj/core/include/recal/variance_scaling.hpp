#pragma once

#include "recal/types.hpp"

namespace recal {

/// Global per-dimension variance rescaling weight, fitted by NLL.
struct VarianceScaler {
  Vec weights;
  bool clamped = false;  // some dimension hit the 1e-8 floor

  Index dim() const { return weights.size(); }
};

/// Per dimension, the NLL-optimal w for N(mu, w sigma^2) in closed form:
/// w* = mean((y - mu)^2 / sigma^2), floored at 1e-8.
VarianceScaler variance_scaling_fit(const CalibrationDataset& dataset);

/// Mean unchanged, variances multiplied elementwise by the weights.
GaussianPrediction variance_scaling_apply(const VarianceScaler& scaler,
                                          const GaussianPrediction& prediction);

}  // namespace recal
