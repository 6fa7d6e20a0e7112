#pragma once

#include "recal/gp/apply.hpp"
#include "recal/isotonic.hpp"
#include "recal/variance_scaling.hpp"

#include <memory>
#include <optional>
#include <string>

namespace recal {

enum class Method {
  isotonic,
  var_scaling,
  gp_beta,
  gp_normal,
  gp_normal_mv,
  gp_cauchy,
  gp_cov_est,
  gp_cov_recal,
};

const char* method_name(Method method);
Method parse_method(const std::string& name);

/// A fitted calibration model of any method, together with the training
/// configuration snapshot. Round-trips losslessly through the JSON model
/// file (format_version 1).
struct Model {
  Method method = Method::var_scaling;
  Index k = 0;
  std::uint64_t seed = 0;
  Index grid_points = 512;
  gp::SvgpConfig config;  // snapshot for GP methods

  std::optional<IsotonicCalibrator> isotonic;
  std::optional<VarianceScaler> scaler;
  std::vector<gp::GpCalibrator> gp_dims;      // gp-normal / gp-cauchy
  std::optional<gp::GpCalibrator> gp_joint;   // gp-beta / gp-normal-mv / cov
  std::optional<gp::CorrelationTemplate> tmpl;
  bool recalibration = false;

  bool diverged() const;
};

struct FitOptions {
  gp::SvgpConfig config;
  Index grid_points = 512;
};

Model fit_model(Method method, const CalibrationDataset& dataset,
                const FitOptions& options);

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

/// Caches per-model posterior operators for repeated application.
class ModelApplier {
 public:
  explicit ModelApplier(const Model& model);

  /// Calibrated distribution for one input; seed should be derived per
  /// sample (seed xor index) by batch callers.
  PredictiveDistribution apply(const GaussianPrediction& prediction,
                               int mc_samples, std::uint64_t seed) const;

 private:
  const Model* model_;
  std::vector<gp::PosteriorOperator> ops_;
};

/// Applies a model over a dataset with per-sample derived seeds.
std::vector<PredictiveDistribution> apply_model(
    const Model& model, const CalibrationDataset& dataset, int mc_samples,
    std::uint64_t seed);

}  // namespace recal
