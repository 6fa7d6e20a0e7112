#include "recal/gp/heads.hpp"

#include "recal/distributions.hpp"
#include "recal/special.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace recal::gp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

double beta_link(double p, const BetaLinkParams& params) {
  if (!(params.a > 0.0) || !(params.b > 0.0)) {
    throw DataError("beta_link: a and b must be positive");
  }
  constexpr double eps = NonparametricDistribution::kCdfEps;
  p = std::clamp(p, eps, 1.0 - eps);
  return logistic(params.a * std::log(p) - params.b * std::log1p(-p) +
                  params.c);
}

double beta_link_derivative(double p, const BetaLinkParams& params) {
  constexpr double eps = NonparametricDistribution::kCdfEps;
  p = std::clamp(p, eps, 1.0 - eps);
  const double g = beta_link(p, params);
  return g * (1.0 - g) * (params.a / p + params.b / (1.0 - p));
}

Mat CorrelationTemplate::covariance_for(
    const GaussianPrediction& prediction) const {
  if (prediction.dim() != dim()) {
    throw DataError("CorrelationTemplate: dimension mismatch");
  }
  const Vec sigma = prediction.diagonal_variances().cwiseSqrt();
  return rho.cwiseProduct(sigma * sigma.transpose());
}

CorrelationTemplate correlation_template(const CalibrationDataset& dataset) {
  dataset.validate();
  const Index k = dataset.dim();
  const Index n = dataset.size();
  if (k < 2) throw DataError("correlation_template: need K >= 2");
  if (n < 10) throw DataError("correlation_template: need at least 10 samples");

  Mat z(n, k);
  for (Index i = 0; i < n; ++i) {
    const auto& p = dataset.predictions[i];
    for (Index d = 0; d < k; ++d) {
      z(i, d) = (dataset.ground_truth(i, d) - p.mean(d)) /
                std::sqrt(p.variance(d));
    }
  }
  const Vec mean = z.colwise().mean();
  z.rowwise() -= mean.transpose();
  const Vec sd = (z.array().square().colwise().mean()).sqrt();
  if ((sd.array() <= 0.0).any()) {
    throw DataError("correlation_template: zero-variance residual column");
  }

  CorrelationTemplate tmpl;
  tmpl.rho = (z.transpose() * z) / static_cast<double>(n);
  tmpl.rho = tmpl.rho.cwiseQuotient(sd * sd.transpose());
  tmpl.rho.diagonal().setOnes();
  tmpl.rho = 0.5 * (tmpl.rho + tmpl.rho.transpose()).eval();

  // SPD repair by eigenvalue clipping, then renormalize the diagonal to 1.
  Eigen::SelfAdjointEigenSolver<Mat> eig(tmpl.rho);
  const double floor = 1e-6 * eig.eigenvalues().maxCoeff();
  if (eig.eigenvalues().minCoeff() < floor) {
    Vec clipped = eig.eigenvalues().cwiseMax(floor);
    tmpl.rho = eig.eigenvectors() * clipped.asDiagonal() *
               eig.eigenvectors().transpose();
    const Vec scale = tmpl.rho.diagonal().cwiseSqrt().cwiseInverse();
    tmpl.rho = tmpl.rho.cwiseProduct(scale * scale.transpose());
    tmpl.rho.diagonal().setOnes();
  }
  return tmpl;
}

Mat rescale_covariance(const LdlDecomposition& ldl, const Vec& w_lower,
                       const Vec& w_diag) {
  const Index k = ldl.diag.size();
  if (w_diag.size() != k || w_lower.size() != k * (k + 1) / 2) {
    throw DataError("rescale_covariance: weight size mismatch");
  }
  if ((w_diag.array() <= 0.0).any()) {
    throw DataError("rescale_covariance: diagonal weights must be positive");
  }
  Mat l_hat = Mat::Identity(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < i; ++j) {
      l_hat(i, j) = ldl.unit_lower(i, j) * w_lower(i * (i + 1) / 2 + j);
    }
  }
  const Vec d_hat = ldl.diag.cwiseProduct(w_diag);
  return l_hat * d_hat.asDiagonal() * l_hat.transpose();
}

NormalHeadLikelihood::NormalHeadLikelihood(const CalibrationDataset& dataset) {
  dataset.validate();
  const Index n = dataset.size();
  const Index k = dataset.dim();
  z2_ = Mat(n, k);
  log_const_ = Mat(n, k);
  for (Index i = 0; i < n; ++i) {
    const auto& p = dataset.predictions[i];
    for (Index d = 0; d < k; ++d) {
      const double v = p.variance(d);
      const double r = dataset.ground_truth(i, d) - p.mean(d);
      z2_(i, d) = r * r / v;
      log_const_(i, d) = -0.5 * (kLog2Pi + std::log(v));
    }
  }
}

double NormalHeadLikelihood::log_lik(Index sample, const Vec& f,
                                     Vec* grad) const {
  double ll = 0.0;
  for (Index d = 0; d < z2_.cols(); ++d) {
    const double inv_w = std::exp(-f(d));
    ll += log_const_(sample, d) - 0.5 * f(d) - 0.5 * z2_(sample, d) * inv_w;
    if (grad != nullptr) {
      (*grad)(d) += -0.5 + 0.5 * z2_(sample, d) * inv_w;
    }
  }
  return ll;
}

CauchyHeadLikelihood::CauchyHeadLikelihood(const CalibrationDataset& dataset) {
  dataset.validate();
  const Index n = dataset.size();
  const Index k = dataset.dim();
  r0_ = Mat(n, k);
  log_sigma_ = Mat(n, k);
  for (Index i = 0; i < n; ++i) {
    const auto& p = dataset.predictions[i];
    for (Index d = 0; d < k; ++d) {
      const double sigma = std::sqrt(p.variance(d));
      r0_(i, d) = (dataset.ground_truth(i, d) - p.mean(d)) / sigma;
      log_sigma_(i, d) = std::log(sigma);
    }
  }
}

double CauchyHeadLikelihood::log_lik(Index sample, const Vec& f,
                                     Vec* grad) const {
  double ll = 0.0;
  for (Index d = 0; d < r0_.cols(); ++d) {
    const double r = r0_(sample, d) * std::exp(-f(d));
    const double r2 = r * r;
    ll += -std::log(std::numbers::pi) - log_sigma_(sample, d) - f(d) -
          std::log1p(r2);
    if (grad != nullptr) {
      (*grad)(d) += -1.0 + 2.0 * r2 / (1.0 + r2);
    }
  }
  return ll;
}

BetaHeadLikelihood::BetaHeadLikelihood(const CalibrationDataset& dataset) {
  dataset.validate();
  const Index n = dataset.size();
  const Index k = dataset.dim();
  constexpr double eps = NonparametricDistribution::kCdfEps;
  log_p_ = Mat(n, k);
  log_1mp_ = Mat(n, k);
  base_logpdf_ = Mat(n, k);
  for (Index i = 0; i < n; ++i) {
    const PredictiveDistribution pred = dataset.predictions[i];
    for (Index d = 0; d < k; ++d) {
      const double y = dataset.ground_truth(i, d);
      const double p = std::clamp(cdf(pred, y, d), eps, 1.0 - eps);
      log_p_(i, d) = std::log(p);
      log_1mp_(i, d) = std::log1p(-p);
      base_logpdf_(i, d) = log_density_dim(pred, y, d);
    }
  }
}

double BetaHeadLikelihood::log_lik(Index sample, const Vec& f,
                                   Vec* grad) const {
  // Per dimension d the latents are (log a, log b, c) at 3d, 3d+1, 3d+2.
  // Calibrated density: g'(p) * base_pdf with g = logistic(z),
  // z = a ln p - b ln(1-p) + c, so
  //   log lik = log g + log(1-g) + log(a/p + b/(1-p)) + base_logpdf.
  double ll = 0.0;
  for (Index d = 0; d < log_p_.cols(); ++d) {
    const double lp = log_p_(sample, d);
    const double l1p = log_1mp_(sample, d);
    const double a = std::exp(f(3 * d));
    const double b = std::exp(f(3 * d + 1));
    const double c = f(3 * d + 2);
    const double z = a * lp - b * l1p + c;
    const double u = a * std::exp(-lp);   // a / p
    const double v = b * std::exp(-l1p);  // b / (1-p)
    ll += -log1pexp(z) - log1pexp(-z) + std::log(u + v) +
          base_logpdf_(sample, d);
    if (grad != nullptr) {
      const double g = logistic(z);
      const double dz = 1.0 - 2.0 * g;
      (*grad)(3 * d) += dz * a * lp + u / (u + v);
      (*grad)(3 * d + 1) += -dz * b * l1p + v / (u + v);
      (*grad)(3 * d + 2) += dz;
    }
  }
  return ll;
}

CovarianceHeadLikelihood::CovarianceHeadLikelihood(
    const CalibrationDataset& dataset,
    const std::optional<CorrelationTemplate>& tmpl) {
  dataset.validate();
  k_ = dataset.dim();
  const Index n = dataset.size();
  samples_.reserve(n);
  for (Index i = 0; i < n; ++i) {
    const auto& p = dataset.predictions[i];
    Mat base;
    if (tmpl.has_value()) {
      base = tmpl->covariance_for(p);
    } else {
      if (!p.has_full_covariance()) {
        throw DataError(
            "covariance recalibration requires full input covariances");
      }
      base = p.covariance;
    }
    Sample s;
    s.ldl = ldl_decompose(base);
    s.residual = dataset.ground_truth.row(i).transpose() - p.mean;
    samples_.push_back(std::move(s));
  }
}

Index CovarianceHeadLikelihood::latent_dim() const {
  return k_ * (k_ + 1) / 2 + k_;
}

double CovarianceHeadLikelihood::log_lik(Index sample, const Vec& f,
                                         Vec* grad) const {
  // Latent layout: f(0..K) = log w_D, f(K..) = w_L packed row-major over the
  // lower triangle including the diagonal; diagonal positions are inert so
  // the unit diagonal of L is preserved.
  const Sample& s = samples_[sample];
  const Index k = k_;

  Mat l_hat = Mat::Identity(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < i; ++j) {
      l_hat(i, j) = s.ldl.unit_lower(i, j) * f(k + i * (i + 1) / 2 + j);
    }
  }
  Vec d_hat(k);
  for (Index i = 0; i < k; ++i) {
    d_hat(i) = s.ldl.diag(i) * std::exp(f(i));
  }

  // Forward substitution with the unit diagonal.
  Vec e = s.residual;
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < i; ++j) e(i) -= l_hat(i, j) * e(j);
  }

  double ll = -0.5 * static_cast<double>(k) * kLog2Pi;
  for (Index i = 0; i < k; ++i) {
    ll += -0.5 * std::log(d_hat(i)) - 0.5 * e(i) * e(i) / d_hat(i);
  }
  if (grad == nullptr) return ll;

  for (Index i = 0; i < k; ++i) {
    (*grad)(i) += -0.5 + 0.5 * e(i) * e(i) / d_hat(i);
  }
  // e_bar = d ll / d e; L_hat_bar = -(L_hat^{-T} e_bar) e^T on strict lower.
  Vec e_bar(k);
  for (Index i = 0; i < k; ++i) e_bar(i) = -e(i) / d_hat(i);
  Vec back = e_bar;
  for (Index i = k - 1; i >= 0; --i) {
    for (Index j = i + 1; j < k; ++j) back(i) -= l_hat(j, i) * back(j);
  }
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < i; ++j) {
      (*grad)(k + i * (i + 1) / 2 + j) +=
          -back(i) * e(j) * s.ldl.unit_lower(i, j);
    }
  }
  return ll;
}

}  // namespace recal::gp
