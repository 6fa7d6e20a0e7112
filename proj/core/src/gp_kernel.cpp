#include "recal/gp/kernel.hpp"

#include "recal/linalg.hpp"

#include <cmath>

namespace recal::gp {

std::vector<DistributionInput> kernel_inputs(const CalibrationDataset& data) {
  std::vector<DistributionInput> inputs;
  inputs.reserve(data.predictions.size());
  for (const auto& p : data.predictions) {
    inputs.push_back({p.mean, p.diagonal_variances()});
  }
  return inputs;
}

namespace {

void check_pair(const DistributionInput& a, const DistributionInput& b,
                double theta) {
  if (a.dim() != b.dim() || a.dim() == 0) {
    throw DataError("song_kernel: dimension mismatch");
  }
  if (!a.mean.allFinite() || !b.mean.allFinite() || !a.var.allFinite() ||
      !b.var.allFinite() || !std::isfinite(theta) || theta <= 0.0) {
    throw DataError("song_kernel: non-finite input or nonpositive theta");
  }
}

}  // namespace

double song_kernel(const DistributionInput& a, const DistributionInput& b,
                   double theta) {
  check_pair(a, b, theta);
  const Index k = a.dim();
  const double t2 = theta * theta;
  double log_value = static_cast<double>(k) * std::log(theta);
  for (Index i = 0; i < k; ++i) {
    const double s = a.var(i) + b.var(i) + t2;
    const double d = a.mean(i) - b.mean(i);
    log_value += -0.5 * std::log(s) - 0.5 * d * d / s;
  }
  return std::exp(log_value);
}

SongKernelGrad song_kernel_grad(const DistributionInput& a,
                                const DistributionInput& b, double theta) {
  check_pair(a, b, theta);
  const Index k = a.dim();
  const double t2 = theta * theta;

  SongKernelGrad g;
  g.d_mean_a = Vec::Zero(k);
  g.d_mean_b = Vec::Zero(k);
  g.d_var_a = Vec::Zero(k);
  g.d_var_b = Vec::Zero(k);

  double log_value = static_cast<double>(k) * std::log(theta);
  double dlog_dtheta = static_cast<double>(k) / theta;
  for (Index i = 0; i < k; ++i) {
    const double s = a.var(i) + b.var(i) + t2;
    const double d = a.mean(i) - b.mean(i);
    log_value += -0.5 * std::log(s) - 0.5 * d * d / s;
    dlog_dtheta += theta * (d * d / (s * s) - 1.0 / s);
    const double dlog_dvar = 0.5 * (d * d / (s * s) - 1.0 / s);
    g.d_var_a(i) = dlog_dvar;
    g.d_var_b(i) = dlog_dvar;
    g.d_mean_a(i) = -d / s;
    g.d_mean_b(i) = d / s;
  }
  g.value = std::exp(log_value);
  g.d_theta = g.value * dlog_dtheta;
  g.d_mean_a *= g.value;
  g.d_mean_b *= g.value;
  g.d_var_a *= g.value;
  g.d_var_b *= g.value;
  return g;
}

Mat gram(const std::vector<DistributionInput>& inputs, double theta) {
  const Index n = static_cast<Index>(inputs.size());
  if (n == 0) throw DataError("gram: need at least one input");
  Mat k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = song_kernel(inputs[i], inputs[j], theta);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

GramCholesky gram_cholesky(const std::vector<DistributionInput>& inputs,
                           double theta, double base_jitter) {
  Mat k = gram(inputs, theta);
  GramCholesky result;
  for (double jitter : {base_jitter, 1e-4}) {
    Mat bumped = k;
    bumped.diagonal().array() += jitter;
    if (try_cholesky(bumped, result.lower)) {
      result.jitter = jitter;
      return result;
    }
  }
  throw NumericError("gram_cholesky: kernel matrix not SPD after jitter");
}

}  // namespace recal::gp
