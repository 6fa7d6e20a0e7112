#pragma once

#include "recal/common.hpp"

#include <variant>
#include <vector>

namespace recal {

/// Gaussian predictive distribution over K output dimensions: a mean vector
/// with either independent per-dimension variances or a full covariance.
struct GaussianPrediction {
  Vec mean;
  Vec variances;   // diagonal variances; size 0 when covariance is set
  Mat covariance;  // full covariance; 0x0 when diagonal

  Index dim() const { return mean.size(); }
  bool has_full_covariance() const { return covariance.size() > 0; }

  double variance(Index d) const {
    return has_full_covariance() ? covariance(d, d) : variances(d);
  }
  Vec diagonal_variances() const {
    return has_full_covariance() ? Vec(covariance.diagonal()) : variances;
  }

  static GaussianPrediction diagonal(Vec mean, Vec variances);
  static GaussianPrediction with_covariance(Vec mean, Mat covariance);

  /// Checks finiteness, positive variances and (for full covariances)
  /// symmetry within 1e-9 relative plus positive definiteness under the
  /// jitter policy. Throws DataError / NumericError.
  void validate() const;
};

/// Cauchy predictive distribution: location x0 and scale gamma per dimension.
struct CauchyPrediction {
  Vec location;
  Vec scale;

  Index dim() const { return location.size(); }
  void validate() const;
};

/// Grid-based CDF with independent dimensions: strictly increasing support
/// points and nondecreasing CDF values per dimension. Evaluation clamps the
/// CDF into [kCdfEps, 1 - kCdfEps].
struct NonparametricDistribution {
  std::vector<Vec> support;
  std::vector<Vec> cdf;

  static constexpr double kCdfEps = 1e-7;

  Index dim() const { return static_cast<Index>(support.size()); }
  void validate() const;
};

using PredictiveDistribution =
    std::variant<GaussianPrediction, CauchyPrediction,
                 NonparametricDistribution>;

Index dim_of(const PredictiveDistribution& dist);

/// Matched (prediction, ground truth) pairs in K dimensions; the unit a
/// calibrator is fitted on and evaluated against.
struct CalibrationDataset {
  std::vector<GaussianPrediction> predictions;
  Mat ground_truth;  // N x K

  Index size() const { return static_cast<Index>(predictions.size()); }
  Index dim() const { return ground_truth.cols(); }

  void validate() const;

  /// Single-dimension view (marginal prediction + ground truth column).
  CalibrationDataset slice_dim(Index d) const;

  std::vector<PredictiveDistribution> prediction_variants() const;
};

}  // namespace recal
