#pragma once

#include "recal/types.hpp"

namespace recal {

// Per-dimension CDF evaluation. Monotone nondecreasing in y; grid CDFs are
// clamped into [eps, 1-eps] and return the clamps outside their support.
double cdf(const GaussianPrediction& dist, double y, Index d);
double cdf(const CauchyPrediction& dist, double y, Index d);
double cdf(const NonparametricDistribution& dist, double y, Index d);
double cdf(const PredictiveDistribution& dist, double y, Index d);

// Per-dimension quantile (inverse CDF), tau in the open unit interval.
double quantile(const GaussianPrediction& dist, double tau, Index d);
double quantile(const CauchyPrediction& dist, double tau, Index d);
double quantile(const NonparametricDistribution& dist, double tau, Index d);
double quantile(const PredictiveDistribution& dist, double tau, Index d);

// Joint log density at a K-vector. Diagonal Gaussians, Cauchy, and grid
// distributions factorize over dimensions; full-covariance Gaussians use the
// multivariate normal density.
double log_density(const GaussianPrediction& dist, const Vec& y);
double log_density(const CauchyPrediction& dist, const Vec& y);
double log_density(const NonparametricDistribution& dist, const Vec& y);
double log_density(const PredictiveDistribution& dist, const Vec& y);

// Single-dimension log density (marginal for full-covariance Gaussians).
double log_density_dim(const PredictiveDistribution& dist, double y, Index d);

// First two moments per dimension. variance_of throws DataError for Cauchy
// inputs (undefined); grid distributions integrate the piecewise-uniform
// density.
double mean_of(const PredictiveDistribution& dist, Index d);
double variance_of(const PredictiveDistribution& dist, Index d);

/// Dispersion statistic used for binning: sigma for Gaussians, the scale
/// gamma for Cauchy, and the grid standard deviation for grid CDFs.
double dispersion_of(const PredictiveDistribution& dist, Index d);

}  // namespace recal
