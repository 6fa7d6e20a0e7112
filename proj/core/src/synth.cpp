#include "recal/synth.hpp"

#include "recal/distributions.hpp"
#include "recal/linalg.hpp"

#include <cmath>
#include <numbers>

namespace recal {

const char* synth_kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::cosine: return "cosine";
    case SynthKind::cosine_const_var: return "cosine-const-var";
    case SynthKind::gaussian_const_miscal: return "gaussian-const-miscal";
    case SynthKind::cauchy_noise: return "cauchy-noise";
    case SynthKind::correlated_mv: return "correlated-mv";
  }
  throw DataError("synth_kind_name: unknown kind");
}

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "cosine") return SynthKind::cosine;
  if (name == "cosine-const-var") return SynthKind::cosine_const_var;
  if (name == "gaussian-const-miscal") return SynthKind::gaussian_const_miscal;
  if (name == "cauchy-noise") return SynthKind::cauchy_noise;
  if (name == "correlated-mv") return SynthKind::correlated_mv;
  throw DataError("parse_synth_kind: unknown kind '" + name + "'");
}

double cosine_noise_std(double x) {
  return 0.05 + 0.45 * 0.5 * (1.0 + std::cos(x));
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// E[s(x)^2] over uniform x for s = 0.275 + 0.225 cos x.
constexpr double kCosineMeanSquaredStd = 0.275 * 0.275 + 0.5 * 0.225 * 0.225;

void check_config(const SynthConfig& config) {
  if (config.n < 1) throw DataError("synth: n must be >= 1");
  if (!(config.miscal > 0.0)) throw DataError("synth: miscal must be > 0");
  if (!(config.rho > -1.0 && config.rho < 1.0)) {
    throw DataError("synth: rho must lie in (-1, 1)");
  }
}

CalibrationDataset gen_cosine(const SynthConfig& config, bool const_var) {
  CalibrationDataset data;
  data.ground_truth = Mat(config.n, 1);
  GaussianSampler rng(mix_seed(config.seed, 0x5EED));
  const double const_variance =
      config.miscal * config.miscal * kCosineMeanSquaredStd;
  for (Index i = 0; i < config.n; ++i) {
    const double x = kTwoPi * rng.uniform();
    const double mean = std::cos(x);
    const double s = cosine_noise_std(x);
    data.ground_truth(i, 0) = mean + s * rng();
    Vec mu(1), var(1);
    mu(0) = mean;
    var(0) = const_var ? const_variance
                       : (config.miscal * s) * (config.miscal * s);
    data.predictions.push_back(GaussianPrediction::diagonal(mu, var));
  }
  return data;
}

CalibrationDataset gen_gaussian_const(const SynthConfig& config) {
  const Index k = std::max<Index>(config.dim, 1);
  CalibrationDataset data;
  data.ground_truth = Mat(config.n, k);
  GaussianSampler rng(mix_seed(config.seed, 0x5EED));
  for (Index i = 0; i < config.n; ++i) {
    Vec mu(k), var(k);
    for (Index d = 0; d < k; ++d) {
      mu(d) = -5.0 + 10.0 * rng.uniform();
      const double sigma = 0.5 + 1.5 * rng.uniform();
      var(d) = sigma * sigma;
      data.ground_truth(i, d) = mu(d) + config.miscal * sigma * rng();
    }
    data.predictions.push_back(GaussianPrediction::diagonal(mu, var));
  }
  return data;
}

CalibrationDataset gen_cauchy(const SynthConfig& config) {
  const Index k = std::max<Index>(config.dim, 1);
  CalibrationDataset data;
  data.ground_truth = Mat(config.n, k);
  GaussianSampler rng(mix_seed(config.seed, 0x5EED));
  for (Index i = 0; i < config.n; ++i) {
    Vec mu(k), var(k);
    for (Index d = 0; d < k; ++d) {
      mu(d) = -5.0 + 10.0 * rng.uniform();
      const double sigma = 0.5 + 1.5 * rng.uniform();
      var(d) = sigma * sigma;
      const double cauchy =
          std::tan(std::numbers::pi * (rng.uniform() - 0.5));
      data.ground_truth(i, d) = mu(d) + config.miscal * sigma * cauchy;
    }
    data.predictions.push_back(GaussianPrediction::diagonal(mu, var));
  }
  return data;
}

CalibrationDataset gen_correlated(const SynthConfig& config) {
  if (config.dim != 2) throw DataError("correlated-mv: K = 2 required");
  const double rho = config.rho;
  Mat corr(2, 2);
  corr << 1.0, rho, rho, 1.0;
  Mat l_corr;
  if (!try_cholesky(corr, l_corr)) {
    throw DataError("correlated-mv: correlation matrix not SPD");
  }

  CalibrationDataset data;
  data.ground_truth = Mat(config.n, 2);
  GaussianSampler rng(mix_seed(config.seed, 0x5EED));
  for (Index i = 0; i < config.n; ++i) {
    Vec mu(2), sigma(2);
    for (Index d = 0; d < 2; ++d) mu(d) = -5.0 + 10.0 * rng.uniform();
    for (Index d = 0; d < 2; ++d) sigma(d) = 0.5 + 1.5 * rng.uniform();
    Vec eps(2);
    eps << rng(), rng();
    const Vec z = l_corr * eps;
    for (Index d = 0; d < 2; ++d) {
      data.ground_truth(i, d) = mu(d) + config.miscal * sigma(d) * z(d);
    }
    if (config.full_cov_predictions) {
      const double m2 = config.miscal * config.miscal;
      Mat cov(2, 2);
      cov << m2 * sigma(0) * sigma(0), m2 * rho * sigma(0) * sigma(1),
          m2 * rho * sigma(0) * sigma(1), m2 * sigma(1) * sigma(1);
      data.predictions.push_back(
          GaussianPrediction::with_covariance(mu, cov));
    } else {
      data.predictions.push_back(
          GaussianPrediction::diagonal(mu, sigma.cwiseProduct(sigma)));
    }
  }
  return data;
}

}  // namespace

CalibrationDataset generate(const SynthConfig& config) {
  check_config(config);
  switch (config.kind) {
    case SynthKind::cosine: return gen_cosine(config, false);
    case SynthKind::cosine_const_var: return gen_cosine(config, true);
    case SynthKind::gaussian_const_miscal: return gen_gaussian_const(config);
    case SynthKind::cauchy_noise: return gen_cauchy(config);
    case SynthKind::correlated_mv: return gen_correlated(config);
  }
  throw DataError("generate: unknown kind");
}

double coverage_oracle(const std::vector<PredictiveDistribution>& preds,
                       const Mat& gt, double tau, Index d) {
  if (preds.empty() || gt.rows() != static_cast<Index>(preds.size())) {
    throw DataError("coverage_oracle: misaligned inputs");
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw DataError("coverage_oracle: tau must be in (0,1)");
  }
  Index covered = 0;
  for (Index i = 0; i < gt.rows(); ++i) {
    // Quantile by bisection on the CDF, independent of the closed-form
    // inverses used by the metrics module.
    double lo = -1.0, hi = 1.0;
    int guard = 0;
    while (cdf(preds[i], lo, d) > tau && guard++ < 300) lo = 2.0 * lo - 1.0;
    guard = 0;
    while (cdf(preds[i], hi, d) < tau && guard++ < 300) hi = 2.0 * hi + 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (cdf(preds[i], mid, d) < tau) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    if (gt(i, d) <= 0.5 * (lo + hi)) covered += 1;
  }
  return static_cast<double>(covered) / static_cast<double>(gt.rows());
}

}  // namespace recal
