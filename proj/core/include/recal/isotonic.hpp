#pragma once

#include "recal/types.hpp"

namespace recal {

/// Monotone recalibration map on [0,1] fitted per dimension: nondecreasing
/// breakpoints with nondecreasing fitted values. Evaluation interpolates
/// linearly, anchored at (0,0) and (1,1), and clamps into [eps, 1-eps].
struct IsotonicCalibrator {
  std::vector<Vec> breakpoints;
  std::vector<Vec> values;

  Index dim() const { return static_cast<Index>(breakpoints.size()); }
  double evaluate(double p, Index d) const;
  void validate() const;
};

/// Weighted L2 isotonic regression via pool-adjacent-violators.
Vec pav_fit(const Vec& targets, const Vec& weights);

/// Fits the CDF recalibration map: predicted CDF positions p_i = F_i(y_i)
/// against their mid-rank empirical CDF targets, pooled by PAV.
IsotonicCalibrator isotonic_fit(const CalibrationDataset& dataset);

/// Recalibrated CDF g(F(y)) tabulated on a grid spanning the input's
/// 1e-4 .. 1-1e-4 quantile range.
NonparametricDistribution isotonic_apply(const IsotonicCalibrator& calibrator,
                                         const GaussianPrediction& prediction,
                                         Index grid_points = 512);

}  // namespace recal
