#pragma once

#include "recal/distributions.hpp"

#include <utility>
#include <vector>

namespace recal {

using Predictions = std::vector<PredictiveDistribution>;

/// Quantile levels for averaged metrics; strictly increasing, all in (0,1).
struct QuantileGrid {
  std::vector<double> levels;

  /// Inclusive regular grid lo, lo+step, ..., hi.
  static QuantileGrid regular(double lo, double hi, double step);
  void validate() const;
};

/// Equal-frequency binning over a scalar statistic. Interior edges sit at
/// midpoints between adjacent order statistics; degenerate (tied) edges are
/// merged, so the effective bin count may be smaller than requested.
struct BinningScheme {
  Vec edges;

  static BinningScheme equal_frequency(std::vector<double> stat, Index bins);
  Index bin_count() const { return edges.size() - 1; }
  Index bin_of(double x) const;
};

// --- proper scoring ------------------------------------------------------

/// Mean negative log likelihood in nats per sample (joint densities).
double nll(const Predictions& preds, const Mat& gt);
double nll_dim(const Predictions& preds, const Mat& gt, Index d);
/// Per-dimension NLL averaged over dimensions.
double nll_univariate_mean(const Predictions& preds, const Mat& gt);

// --- quantile losses ------------------------------------------------------

double pinball_dim(const Predictions& preds, const Mat& gt, double tau,
                   Index d);
/// Mean over samples and dimensions of the tilted absolute loss at tau.
double pinball(const Predictions& preds, const Mat& gt, double tau);
double pinball_mean(const Predictions& preds, const Mat& gt,
                    const QuantileGrid& grid);

// --- variance calibration -------------------------------------------------

/// Binned |MSE - mean variance| weighted by bin mass, averaged over
/// dimensions. Requires predictions with defined variance (rejects Cauchy).
double uce(const Predictions& preds, const Mat& gt, Index bins);
double uce_dim(const Predictions& preds, const Mat& gt, Index bins, Index d);

/// Binned |RMSE - RMV| / RMV averaged over nonempty bins and dimensions.
double ence(const Predictions& preds, const Mat& gt, Index bins);
double ence_dim(const Predictions& preds, const Mat& gt, Index bins, Index d);

// --- multivariate consistency ---------------------------------------------

/// Squared Mahalanobis distance of y under the predicted Gaussian.
double nees(const GaussianPrediction& pred, const Vec& y);

/// Standardized generalized variance det(Sigma)^(1/K).
double sgv(const Mat& cov);
double sgv(const GaussianPrediction& pred);

double chi2_cdf(Index k, double x);
/// Inverse chi-square CDF with k degrees of freedom, within 1e-8.
double chi2_quantile(Index k, double tau);

// --- quantile calibration error --------------------------------------------

/// Univariate QCE for one dimension: bins over the dispersion statistic,
/// per-bin frequency of the ground truth falling inside the central
/// tau-interval (equivalently NEES <= chi2(1, tau) for Gaussians).
double qce_dim(const Predictions& preds, const Mat& gt, double tau, Index bins,
               Index d);
double qce_mean_dim(const Predictions& preds, const Mat& gt,
                    const QuantileGrid& grid, Index bins, Index d);
/// Mean over dimensions of qce_mean_dim.
double qce_mean(const Predictions& preds, const Mat& gt,
                const QuantileGrid& grid, Index bins);

/// Joint QCE over all K dimensions: bins over sqrt(SGV), acceptance via
/// NEES <= chi2(K, tau). Gaussian predictions only.
double qce_multivariate(const Predictions& preds, const Mat& gt, double tau,
                        Index bins);
double qce_mean_multivariate(const Predictions& preds, const Mat& gt,
                             const QuantileGrid& grid, Index bins);

// --- reliability ------------------------------------------------------------

/// (tau, empirical coverage) pairs for one dimension, where coverage is the
/// fraction of samples with y <= quantile(pred, tau).
std::vector<std::pair<double, double>> reliability_curve(
    const Predictions& preds, const Mat& gt, const QuantileGrid& grid,
    Index d);

}  // namespace recal
