#include "recal/gp/apply.hpp"

#include "recal/distributions.hpp"

#include <cmath>

namespace recal::gp {

DistributionInput input_of(const GaussianPrediction& prediction) {
  return {prediction.mean, prediction.diagonal_variances()};
}

GpCalibrator fit_gp_joint(const CalibrationDataset& dataset, HeadKind head,
                          const SvgpConfig& config) {
  dataset.validate();
  if (head == HeadKind::covariance) {
    throw DataError("fit_gp_joint: use fit_gp_covariance for this head");
  }
  const auto inputs = kernel_inputs(dataset);
  switch (head) {
    case HeadKind::beta: {
      BetaHeadLikelihood lik(dataset);
      return fit_svgp(inputs, lik, head, dataset.dim(), config);
    }
    case HeadKind::normal:
    case HeadKind::normal_mv: {
      NormalHeadLikelihood lik(dataset);
      return fit_svgp(inputs, lik, head, dataset.dim(), config);
    }
    case HeadKind::cauchy: {
      CauchyHeadLikelihood lik(dataset);
      return fit_svgp(inputs, lik, head, dataset.dim(), config);
    }
    default:
      throw DataError("fit_gp_joint: unsupported head");
  }
}

std::vector<GpCalibrator> fit_gp_per_dim(const CalibrationDataset& dataset,
                                         HeadKind head,
                                         const SvgpConfig& config) {
  dataset.validate();
  if (head != HeadKind::normal && head != HeadKind::cauchy) {
    throw DataError("fit_gp_per_dim: normal or cauchy heads only");
  }
  std::vector<GpCalibrator> models;
  models.reserve(dataset.dim());
  for (Index d = 0; d < dataset.dim(); ++d) {
    SvgpConfig dim_config = config;
    dim_config.seed = mix_seed(config.seed, 0xD1A0 + static_cast<std::uint64_t>(d));
    models.push_back(
        fit_gp_joint(dataset.slice_dim(d), head, dim_config));
  }
  return models;
}

CovarianceGpModel fit_gp_covariance(const CalibrationDataset& dataset,
                                    const SvgpConfig& config,
                                    bool recalibration) {
  dataset.validate();
  CovarianceGpModel model;
  model.recalibration = recalibration;
  if (!recalibration) {
    model.tmpl = correlation_template(dataset);
  }
  CovarianceHeadLikelihood lik(dataset, model.tmpl);
  model.gp = fit_svgp(kernel_inputs(dataset), lik, HeadKind::covariance,
                      dataset.dim(), config);
  return model;
}

namespace {

void check_apply(const GpCalibrator& model,
                 const GaussianPrediction& prediction,
                 std::initializer_list<HeadKind> heads) {
  if (!model.fitted) throw DataError("apply: calibrator is not fitted");
  bool ok = false;
  for (HeadKind h : heads) ok = ok || model.head == h;
  if (!ok) throw DataError("apply: wrong head for this apply path");
  if (prediction.dim() != model.k) {
    throw DataError("apply: prediction dimension mismatch");
  }
}

/// Columnwise mean of exp(draws) for the positive weight heads.
Vec mean_exp_weights(const Mat& draws) {
  return draws.array().exp().colwise().mean().transpose().matrix();
}

}  // namespace

GaussianPrediction gp_normal_apply(const GpCalibrator& model,
                                   const PosteriorOperator& op,
                                   const GaussianPrediction& prediction,
                                   int mc_samples, std::uint64_t seed) {
  check_apply(model, prediction, {HeadKind::normal, HeadKind::normal_mv});
  const Mat draws =
      posterior_weight_samples(op, input_of(prediction), mc_samples, seed);
  const Vec w = mean_exp_weights(draws);
  return GaussianPrediction::diagonal(
      prediction.mean, prediction.diagonal_variances().cwiseProduct(w));
}

CauchyPrediction gp_cauchy_apply(const GpCalibrator& model,
                                 const PosteriorOperator& op,
                                 const GaussianPrediction& prediction,
                                 int mc_samples, std::uint64_t seed) {
  check_apply(model, prediction, {HeadKind::cauchy});
  const Mat draws =
      posterior_weight_samples(op, input_of(prediction), mc_samples, seed);
  const Vec w = mean_exp_weights(draws);
  CauchyPrediction out;
  out.location = prediction.mean;  // x0 = mu
  out.scale =
      prediction.diagonal_variances().cwiseSqrt().cwiseProduct(w);
  out.validate();
  return out;
}

NonparametricDistribution gp_beta_apply(const GpCalibrator& model,
                                        const PosteriorOperator& op,
                                        const GaussianPrediction& prediction,
                                        int mc_samples, std::uint64_t seed,
                                        Index grid_points) {
  check_apply(model, prediction, {HeadKind::beta});
  if (grid_points < 2) throw DataError("gp_beta_apply: grid too small");
  const Mat draws =
      posterior_weight_samples(op, input_of(prediction), mc_samples, seed);
  const Index k = model.k;

  NonparametricDistribution out;
  out.support.resize(k);
  out.cdf.resize(k);
  for (Index d = 0; d < k; ++d) {
    std::vector<BetaLinkParams> links(draws.rows());
    for (Index s = 0; s < draws.rows(); ++s) {
      links[s] = {std::exp(draws(s, 3 * d)), std::exp(draws(s, 3 * d + 1)),
                  draws(s, 3 * d + 2)};
    }
    const double lo = quantile(prediction, 1e-4, d);
    const double hi = quantile(prediction, 1.0 - 1e-4, d);
    Vec y = Vec::LinSpaced(grid_points, lo, hi);
    Vec f(grid_points);
    double prev = 0.0;
    for (Index g = 0; g < grid_points; ++g) {
      const double p = cdf(prediction, y(g), d);
      double acc = 0.0;
      for (const auto& link : links) acc += beta_link(p, link);
      double value = acc / static_cast<double>(draws.rows());
      value = std::max(value, prev);  // round-off guard; each map is monotone
      f(g) = value;
      prev = value;
    }
    out.support[d] = std::move(y);
    out.cdf[d] = std::move(f);
  }
  out.validate();
  return out;
}

GaussianPrediction covariance_head_apply(const GpCalibrator& model,
                                         const PosteriorOperator& op,
                                         const GaussianPrediction& prediction,
                                         const CorrelationTemplate* tmpl,
                                         int mc_samples, std::uint64_t seed) {
  check_apply(model, prediction, {HeadKind::covariance});
  const Index k = model.k;
  Mat base;
  if (tmpl != nullptr) {
    base = tmpl->covariance_for(prediction);
  } else {
    if (!prediction.has_full_covariance()) {
      throw DataError(
          "covariance_head_apply: recalibration mode needs full covariance");
    }
    base = prediction.covariance;
  }
  const LdlDecomposition ldl = ldl_decompose(base);

  const Mat draws =
      posterior_weight_samples(op, input_of(prediction), mc_samples, seed);
  Vec w_diag = Vec::Zero(k);
  Vec w_lower = Vec::Zero(k * (k + 1) / 2);
  for (Index s = 0; s < draws.rows(); ++s) {
    for (Index i = 0; i < k; ++i) w_diag(i) += std::exp(draws(s, i));
    for (Index j = 0; j < w_lower.size(); ++j) {
      w_lower(j) += draws(s, k + j);
    }
  }
  w_diag /= static_cast<double>(draws.rows());
  w_lower /= static_cast<double>(draws.rows());

  return GaussianPrediction::with_covariance(
      prediction.mean, rescale_covariance(ldl, w_lower, w_diag));
}

GaussianPrediction gp_normal_apply(const GpCalibrator& model,
                                   const GaussianPrediction& prediction,
                                   int mc_samples, std::uint64_t seed) {
  return gp_normal_apply(model, PosteriorOperator(model), prediction,
                         mc_samples, seed);
}

CauchyPrediction gp_cauchy_apply(const GpCalibrator& model,
                                 const GaussianPrediction& prediction,
                                 int mc_samples, std::uint64_t seed) {
  return gp_cauchy_apply(model, PosteriorOperator(model), prediction,
                         mc_samples, seed);
}

NonparametricDistribution gp_beta_apply(const GpCalibrator& model,
                                        const GaussianPrediction& prediction,
                                        int mc_samples, std::uint64_t seed,
                                        Index grid_points) {
  return gp_beta_apply(model, PosteriorOperator(model), prediction, mc_samples,
                       seed, grid_points);
}

GaussianPrediction covariance_head_apply(const GpCalibrator& model,
                                         const GaussianPrediction& prediction,
                                         const CorrelationTemplate* tmpl,
                                         int mc_samples, std::uint64_t seed) {
  return covariance_head_apply(model, PosteriorOperator(model), prediction,
                               tmpl, mc_samples, seed);
}

}  // namespace recal::gp
