#pragma once

#include "recal/gp/heads.hpp"

namespace recal::gp {

// Fit entry points. Joint heads train one coregionalized GP over the K-dim
// inputs; the per-dimension variants train K independent single-output GPs,
// one per data dimension, with seeds derived per dimension.

GpCalibrator fit_gp_joint(const CalibrationDataset& dataset, HeadKind head,
                          const SvgpConfig& config);

std::vector<GpCalibrator> fit_gp_per_dim(const CalibrationDataset& dataset,
                                         HeadKind head,
                                         const SvgpConfig& config);

struct CovarianceGpModel {
  GpCalibrator gp;
  std::optional<CorrelationTemplate> tmpl;  // empty in recalibration mode
  bool recalibration = false;
};

/// Covariance estimation (template from training residual correlations) or
/// covariance recalibration (inputs carry their own full covariances).
CovarianceGpModel fit_gp_covariance(const CalibrationDataset& dataset,
                                    const SvgpConfig& config,
                                    bool recalibration);

// Apply paths. Posterior weight draws are averaged per the head rule:
// mean of CDF maps for beta, mean of weights otherwise.

GaussianPrediction gp_normal_apply(const GpCalibrator& model,
                                   const PosteriorOperator& op,
                                   const GaussianPrediction& prediction,
                                   int mc_samples, std::uint64_t seed);

CauchyPrediction gp_cauchy_apply(const GpCalibrator& model,
                                 const PosteriorOperator& op,
                                 const GaussianPrediction& prediction,
                                 int mc_samples, std::uint64_t seed);

NonparametricDistribution gp_beta_apply(const GpCalibrator& model,
                                        const PosteriorOperator& op,
                                        const GaussianPrediction& prediction,
                                        int mc_samples, std::uint64_t seed,
                                        Index grid_points = 512);

/// Estimation mode when tmpl is non-null, recalibration mode otherwise.
GaussianPrediction covariance_head_apply(const GpCalibrator& model,
                                         const PosteriorOperator& op,
                                         const GaussianPrediction& prediction,
                                         const CorrelationTemplate* tmpl,
                                         int mc_samples, std::uint64_t seed);

// Convenience overloads constructing the posterior operator on the fly.
GaussianPrediction gp_normal_apply(const GpCalibrator& model,
                                   const GaussianPrediction& prediction,
                                   int mc_samples, std::uint64_t seed);
CauchyPrediction gp_cauchy_apply(const GpCalibrator& model,
                                 const GaussianPrediction& prediction,
                                 int mc_samples, std::uint64_t seed);
NonparametricDistribution gp_beta_apply(const GpCalibrator& model,
                                        const GaussianPrediction& prediction,
                                        int mc_samples, std::uint64_t seed,
                                        Index grid_points = 512);
GaussianPrediction covariance_head_apply(const GpCalibrator& model,
                                         const GaussianPrediction& prediction,
                                         const CorrelationTemplate* tmpl,
                                         int mc_samples, std::uint64_t seed);

DistributionInput input_of(const GaussianPrediction& prediction);

}  // namespace recal::gp
