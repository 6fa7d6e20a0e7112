#include "recal/variance_scaling.hpp"

namespace recal {

VarianceScaler variance_scaling_fit(const CalibrationDataset& dataset) {
  dataset.validate();
  const Index n = dataset.size();
  const Index k = dataset.dim();

  VarianceScaler scaler;
  scaler.weights = Vec::Zero(k);
  for (Index d = 0; d < k; ++d) {
    double sum = 0.0;
    for (Index i = 0; i < n; ++i) {
      const auto& p = dataset.predictions[i];
      if (p.has_full_covariance()) {
        throw DataError("variance_scaling_fit: diagonal variances required");
      }
      const double r = dataset.ground_truth(i, d) - p.mean(d);
      sum += r * r / p.variances(d);
    }
    double w = sum / static_cast<double>(n);
    if (w < 1e-8) {
      w = 1e-8;
      scaler.clamped = true;
    }
    scaler.weights(d) = w;
  }
  return scaler;
}

GaussianPrediction variance_scaling_apply(
    const VarianceScaler& scaler, const GaussianPrediction& prediction) {
  if (prediction.has_full_covariance()) {
    throw DataError("variance_scaling_apply: diagonal variances required");
  }
  if (prediction.dim() != scaler.dim()) {
    throw DataError("variance_scaling_apply: dimension mismatch");
  }
  return GaussianPrediction::diagonal(
      prediction.mean, prediction.variances.cwiseProduct(scaler.weights));
}

}  // namespace recal
