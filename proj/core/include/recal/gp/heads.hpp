#pragma once

#include "recal/gp/svgp.hpp"
#include "recal/linalg.hpp"

#include <optional>

namespace recal::gp {

/// Parameters of the monotone beta-family CDF map; a, b > 0 keep it
/// strictly increasing.
struct BetaLinkParams {
  double a = 1.0;
  double b = 1.0;
  double c = 0.0;
};

/// g(p) = logistic(a ln p - b ln(1-p) + c); the identity at (1, 1, 0).
double beta_link(double p, const BetaLinkParams& params);

/// Derivative g'(p) = g (1-g) (a/p + b/(1-p)), used for densities.
double beta_link_derivative(double p, const BetaLinkParams& params);

/// Marginal Pearson correlations of the normalized residuals
/// z = (y - mu) / sigma over a training set; diagonal forced to 1 and the
/// implied covariance repaired to SPD by eigenvalue clipping when needed.
struct CorrelationTemplate {
  Mat rho;  // K x K, symmetric, unit diagonal

  Index dim() const { return rho.rows(); }
  /// Sigma_ij = rho_ij sigma_i sigma_j from the prediction's diagonal scale.
  Mat covariance_for(const GaussianPrediction& prediction) const;
};

CorrelationTemplate correlation_template(const CalibrationDataset& dataset);

/// LDL-based covariance rescale: strict-lower entries of L multiplied by
/// w_lower (packed row-major over the lower triangle including the diagonal;
/// diagonal positions are ignored so unit triangularity is preserved), D
/// multiplied elementwise by w_diag > 0. The result L^ D^ L^^T is SPD by
/// construction.
Mat rescale_covariance(const LdlDecomposition& ldl, const Vec& w_lower,
                       const Vec& w_diag);

// --- training likelihoods ---------------------------------------------------

/// Gaussian likelihood with per-dimension variance rescale w = exp(f).
class NormalHeadLikelihood final : public HeadLikelihood {
 public:
  explicit NormalHeadLikelihood(const CalibrationDataset& dataset);
  Index latent_dim() const override { return z2_.cols(); }
  Index sample_count() const override { return z2_.rows(); }
  double log_lik(Index sample, const Vec& f, Vec* grad) const override;

 private:
  Mat z2_;         // squared normalized residuals
  Mat log_const_;  // -(log 2 pi + log sigma^2) / 2
};

/// Cauchy likelihood with scale gamma = w sigma, w = exp(f).
class CauchyHeadLikelihood final : public HeadLikelihood {
 public:
  explicit CauchyHeadLikelihood(const CalibrationDataset& dataset);
  Index latent_dim() const override { return r0_.cols(); }
  Index sample_count() const override { return r0_.rows(); }
  double log_lik(Index sample, const Vec& f, Vec* grad) const override;

 private:
  Mat r0_;         // (y - x0) / sigma
  Mat log_sigma_;
};

/// Beta-link likelihood on the predicted CDF positions; three latents per
/// dimension mapped as (a, b) = exp(latents 1, 2), c = latent 3.
class BetaHeadLikelihood final : public HeadLikelihood {
 public:
  explicit BetaHeadLikelihood(const CalibrationDataset& dataset);
  Index latent_dim() const override { return 3 * log_p_.cols(); }
  Index sample_count() const override { return log_p_.rows(); }
  double log_lik(Index sample, const Vec& f, Vec* grad) const override;

 private:
  Mat log_p_;      // ln p, p clamped into (eps, 1-eps)
  Mat log_1mp_;    // ln(1-p)
  Mat base_logpdf_;
};

/// Multivariate normal likelihood through the LDL rescale of a per-sample
/// base covariance (correlation template or the input's own covariance).
class CovarianceHeadLikelihood final : public HeadLikelihood {
 public:
  /// Estimation mode when a template is given, recalibration mode otherwise
  /// (inputs must then carry full covariances).
  CovarianceHeadLikelihood(const CalibrationDataset& dataset,
                           const std::optional<CorrelationTemplate>& tmpl);
  Index latent_dim() const override;
  Index sample_count() const override {
    return static_cast<Index>(samples_.size());
  }
  double log_lik(Index sample, const Vec& f, Vec* grad) const override;

 private:
  struct Sample {
    LdlDecomposition ldl;
    Vec residual;
  };
  std::vector<Sample> samples_;
  Index k_ = 0;
};

}  // namespace recal::gp
