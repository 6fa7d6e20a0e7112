#include "recal/types.hpp"

#include "recal/linalg.hpp"

#include <cmath>

namespace recal {

GaussianPrediction GaussianPrediction::diagonal(Vec mean, Vec variances) {
  GaussianPrediction p;
  p.mean = std::move(mean);
  p.variances = std::move(variances);
  p.validate();
  return p;
}

GaussianPrediction GaussianPrediction::with_covariance(Vec mean,
                                                       Mat covariance) {
  GaussianPrediction p;
  p.mean = std::move(mean);
  p.covariance = std::move(covariance);
  p.validate();
  return p;
}

void GaussianPrediction::validate() const {
  if (mean.size() == 0) throw DataError("GaussianPrediction: empty mean");
  if (!mean.allFinite()) throw DataError("GaussianPrediction: non-finite mean");
  if (has_full_covariance()) {
    if (covariance.rows() != dim() || covariance.cols() != dim()) {
      throw DataError("GaussianPrediction: covariance shape mismatch");
    }
    if (!covariance.allFinite()) {
      throw DataError("GaussianPrediction: non-finite covariance");
    }
    if (!is_symmetric(covariance, 1e-9)) {
      throw DataError("GaussianPrediction: covariance not symmetric");
    }
    cholesky_spd(covariance);  // throws when not SPD under the jitter policy
  } else {
    if (variances.size() != dim()) {
      throw DataError("GaussianPrediction: variance size mismatch");
    }
    if (!variances.allFinite() || (variances.array() <= 0.0).any()) {
      throw DataError("GaussianPrediction: variances must be positive");
    }
  }
}

void CauchyPrediction::validate() const {
  if (location.size() == 0) throw DataError("CauchyPrediction: empty");
  if (scale.size() != location.size()) {
    throw DataError("CauchyPrediction: scale size mismatch");
  }
  if (!location.allFinite() || !scale.allFinite() ||
      (scale.array() <= 0.0).any()) {
    throw DataError("CauchyPrediction: scale must be positive and finite");
  }
}

void NonparametricDistribution::validate() const {
  if (support.empty() || support.size() != cdf.size()) {
    throw DataError("NonparametricDistribution: empty or mismatched grids");
  }
  for (std::size_t d = 0; d < support.size(); ++d) {
    const Vec& y = support[d];
    const Vec& f = cdf[d];
    if (y.size() < 2 || y.size() != f.size()) {
      throw DataError("NonparametricDistribution: grid too small");
    }
    for (Index g = 1; g < y.size(); ++g) {
      if (!(y(g) > y(g - 1))) {
        throw DataError(
            "NonparametricDistribution: support must be strictly increasing");
      }
      if (f(g) < f(g - 1) - 1e-12) {
        throw DataError(
            "NonparametricDistribution: cdf values must be nondecreasing");
      }
    }
    if (f(0) < -1e-12 || f(f.size() - 1) > 1.0 + 1e-12) {
      throw DataError("NonparametricDistribution: cdf out of [0,1]");
    }
    if (!(f(f.size() - 1) > f(0))) {
      throw DataError(
          "NonparametricDistribution: cdf must increase over the grid");
    }
  }
}

Index dim_of(const PredictiveDistribution& dist) {
  return std::visit([](const auto& d) { return d.dim(); }, dist);
}

void CalibrationDataset::validate() const {
  if (predictions.empty()) throw DataError("CalibrationDataset: empty");
  const Index k = dim();
  if (ground_truth.rows() != size()) {
    throw DataError("CalibrationDataset: ground truth row count mismatch");
  }
  if (!ground_truth.allFinite()) {
    throw DataError("CalibrationDataset: non-finite ground truth");
  }
  for (const auto& p : predictions) {
    if (p.dim() != k) {
      throw DataError("CalibrationDataset: inconsistent dimension count");
    }
  }
}

CalibrationDataset CalibrationDataset::slice_dim(Index d) const {
  if (d < 0 || d >= dim()) {
    throw DataError("CalibrationDataset::slice_dim: bad dimension index");
  }
  CalibrationDataset out;
  out.predictions.reserve(predictions.size());
  for (const auto& p : predictions) {
    Vec m(1), v(1);
    m(0) = p.mean(d);
    v(0) = p.variance(d);
    out.predictions.push_back(GaussianPrediction::diagonal(m, v));
  }
  out.ground_truth = ground_truth.col(d);
  return out;
}

std::vector<PredictiveDistribution> CalibrationDataset::prediction_variants()
    const {
  std::vector<PredictiveDistribution> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.emplace_back(p);
  return out;
}

}  // namespace recal
