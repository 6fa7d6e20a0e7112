#pragma once

#include "recal/types.hpp"

#include <string>
#include <vector>

namespace recal {

enum class SynthKind {
  cosine,              // heteroscedastic cosine, predicted std = miscal * true
  cosine_const_var,    // cosine truth, constant predicted variance
  gaussian_const_miscal,  // true std = miscal * predicted std
  cauchy_noise,        // Cauchy residuals with scale miscal * predicted sigma
  correlated_mv,       // correlated 2-D residuals, diagonal predictions
};

const char* synth_kind_name(SynthKind kind);
SynthKind parse_synth_kind(const std::string& name);

struct SynthConfig {
  SynthKind kind = SynthKind::cosine;
  Index n = 1000;
  std::uint64_t seed = 1;
  double miscal = 1.0;
  double rho = 0.0;
  Index dim = 1;
  /// correlated_mv only: predictions carry the true full covariance, giving
  /// a correctly specified multivariate forecaster.
  bool full_cov_predictions = false;
};

/// True noise profile of the cosine tasks: increases toward the maximum of
/// the cosine, from 0.05 at the minimum to 0.5 at the maximum.
double cosine_noise_std(double x);

/// Bit-reproducible generator for (kind, n, seed, parameters).
CalibrationDataset generate(const SynthConfig& config);

/// Independent empirical coverage check: fraction of samples with
/// y <= q_tau, with the quantile found by bisection on the CDF rather than
/// the closed-form inverses used elsewhere.
double coverage_oracle(const std::vector<PredictiveDistribution>& preds,
                       const Mat& gt, double tau, Index d);

}  // namespace recal
