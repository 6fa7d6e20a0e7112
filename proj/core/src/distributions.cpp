#include "recal/distributions.hpp"

#include "recal/linalg.hpp"
#include "recal/special.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace recal {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kGridDensityFloor = 1e-12;

void check_dim(Index d, Index k, const char* who) {
  if (d < 0 || d >= k) throw DataError(std::string(who) + ": bad dimension");
}

void check_finite(double y, const char* who) {
  if (!std::isfinite(y)) throw DataError(std::string(who) + ": non-finite y");
}

void check_tau(double tau, const char* who) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw DataError(std::string(who) + ": tau must be in (0,1)");
  }
}

double clamp_cdf(double p) {
  constexpr double eps = NonparametricDistribution::kCdfEps;
  return std::clamp(p, eps, 1.0 - eps);
}

// Raw piecewise-linear CDF on the grid, before clamping.
double grid_cdf_raw(const Vec& y, const Vec& f, double point) {
  const Index g = y.size();
  if (point <= y(0)) return f(0);
  if (point >= y(g - 1)) return f(g - 1);
  const double* begin = y.data();
  const Index hi = std::upper_bound(begin, begin + g, point) - begin;
  const Index lo = hi - 1;
  const double t = (point - y(lo)) / (y(hi) - y(lo));
  return f(lo) + t * (f(hi) - f(lo));
}

}  // namespace

double cdf(const GaussianPrediction& dist, double y, Index d) {
  check_dim(d, dist.dim(), "cdf");
  check_finite(y, "cdf");
  const double sigma = std::sqrt(dist.variance(d));
  return std_normal_cdf((y - dist.mean(d)) / sigma);
}

double cdf(const CauchyPrediction& dist, double y, Index d) {
  check_dim(d, dist.dim(), "cdf");
  check_finite(y, "cdf");
  return 0.5 +
         std::atan((y - dist.location(d)) / dist.scale(d)) / std::numbers::pi;
}

double cdf(const NonparametricDistribution& dist, double y, Index d) {
  check_dim(d, dist.dim(), "cdf");
  check_finite(y, "cdf");
  return clamp_cdf(grid_cdf_raw(dist.support[d], dist.cdf[d], y));
}

double cdf(const PredictiveDistribution& dist, double y, Index d) {
  return std::visit([&](const auto& v) { return cdf(v, y, d); }, dist);
}

double quantile(const GaussianPrediction& dist, double tau, Index d) {
  check_dim(d, dist.dim(), "quantile");
  check_tau(tau, "quantile");
  return dist.mean(d) + std::sqrt(dist.variance(d)) * std_normal_quantile(tau);
}

double quantile(const CauchyPrediction& dist, double tau, Index d) {
  check_dim(d, dist.dim(), "quantile");
  check_tau(tau, "quantile");
  return dist.location(d) +
         dist.scale(d) * std::tan(std::numbers::pi * (tau - 0.5));
}

double quantile(const NonparametricDistribution& dist, double tau, Index d) {
  check_dim(d, dist.dim(), "quantile");
  check_tau(tau, "quantile");
  const Vec& y = dist.support[d];
  const Vec& f = dist.cdf[d];
  const Index g = y.size();
  if (tau <= f(0)) return y(0);
  if (tau >= f(g - 1)) return y(g - 1);
  // Largest index with f(lo) <= tau; interpolate into the next segment.
  const double* begin = f.data();
  Index hi = std::upper_bound(begin, begin + g, tau) - begin;
  hi = std::min(hi, g - 1);
  const Index lo = hi - 1;
  const double df = f(hi) - f(lo);
  if (df <= 0.0) return y(lo);
  const double t = (tau - f(lo)) / df;
  return y(lo) + t * (y(hi) - y(lo));
}

double quantile(const PredictiveDistribution& dist, double tau, Index d) {
  return std::visit([&](const auto& v) { return quantile(v, tau, d); }, dist);
}

double log_density(const GaussianPrediction& dist, const Vec& y) {
  const Index k = dist.dim();
  if (y.size() != k) throw DataError("log_density: dimension mismatch");
  const Vec r = y - dist.mean;
  if (dist.has_full_covariance()) {
    const CholeskyResult chol = cholesky_spd(dist.covariance);
    const Vec e = solve_lower(chol.lower, r);
    double log_det = 0.0;
    for (Index i = 0; i < k; ++i) log_det += std::log(chol.lower(i, i));
    return -0.5 * static_cast<double>(k) * kLog2Pi - log_det -
           0.5 * e.squaredNorm();
  }
  double sum = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double v = dist.variances(i);
    sum += -0.5 * (kLog2Pi + std::log(v)) - 0.5 * r(i) * r(i) / v;
  }
  return sum;
}

double log_density(const CauchyPrediction& dist, const Vec& y) {
  const Index k = dist.dim();
  if (y.size() != k) throw DataError("log_density: dimension mismatch");
  double sum = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double r = (y(i) - dist.location(i)) / dist.scale(i);
    sum += -std::log(std::numbers::pi * dist.scale(i)) - std::log1p(r * r);
  }
  return sum;
}

namespace {

double grid_log_density_dim(const NonparametricDistribution& dist, double y,
                            Index d) {
  const Vec& sup = dist.support[d];
  const Vec& f = dist.cdf[d];
  const Index g = sup.size();
  double pdf = kGridDensityFloor;
  if (y > sup(0) && y < sup(g - 1)) {
    const double* begin = sup.data();
    const Index hi = std::upper_bound(begin, begin + g, y) - begin;
    const Index lo = hi - 1;
    const double mass = f(hi) - f(lo);
    const double width = sup(hi) - sup(lo);
    pdf = std::max(mass / width, kGridDensityFloor);
  }
  return std::log(pdf);
}

}  // namespace

double log_density(const NonparametricDistribution& dist, const Vec& y) {
  const Index k = dist.dim();
  if (y.size() != k) throw DataError("log_density: dimension mismatch");
  double sum = 0.0;
  for (Index d = 0; d < k; ++d) sum += grid_log_density_dim(dist, y(d), d);
  return sum;
}

double log_density(const PredictiveDistribution& dist, const Vec& y) {
  return std::visit([&](const auto& v) { return log_density(v, y); }, dist);
}

double log_density_dim(const PredictiveDistribution& dist, double y, Index d) {
  check_dim(d, dim_of(dist), "log_density_dim");
  check_finite(y, "log_density_dim");
  if (const auto* g = std::get_if<GaussianPrediction>(&dist)) {
    const double v = g->variance(d);
    const double r = y - g->mean(d);
    return -0.5 * (kLog2Pi + std::log(v)) - 0.5 * r * r / v;
  }
  if (const auto* c = std::get_if<CauchyPrediction>(&dist)) {
    const double r = (y - c->location(d)) / c->scale(d);
    return -std::log(std::numbers::pi * c->scale(d)) - std::log1p(r * r);
  }
  return grid_log_density_dim(std::get<NonparametricDistribution>(dist), y, d);
}

namespace {

// Moments of the piecewise-uniform density implied by a grid CDF; leftover
// tail mass is treated as point masses on the boundary support points.
void grid_moments(const Vec& y, const Vec& f, double& mean, double& second) {
  const Index g = y.size();
  mean = 0.0;
  second = 0.0;
  const double p_low = std::max(f(0), 0.0);
  const double p_high = std::max(1.0 - f(g - 1), 0.0);
  mean += p_low * y(0) + p_high * y(g - 1);
  second += p_low * y(0) * y(0) + p_high * y(g - 1) * y(g - 1);
  for (Index i = 0; i + 1 < g; ++i) {
    const double w = std::max(f(i + 1) - f(i), 0.0);
    const double a = y(i);
    const double b = y(i + 1);
    mean += w * 0.5 * (a + b);
    second += w * (a * a + a * b + b * b) / 3.0;
  }
}

}  // namespace

double mean_of(const PredictiveDistribution& dist, Index d) {
  check_dim(d, dim_of(dist), "mean_of");
  if (const auto* g = std::get_if<GaussianPrediction>(&dist)) {
    return g->mean(d);
  }
  if (std::holds_alternative<CauchyPrediction>(dist)) {
    throw DataError("mean_of: undefined for Cauchy distributions");
  }
  const auto& np = std::get<NonparametricDistribution>(dist);
  double mean = 0.0, second = 0.0;
  grid_moments(np.support[d], np.cdf[d], mean, second);
  return mean;
}

double variance_of(const PredictiveDistribution& dist, Index d) {
  check_dim(d, dim_of(dist), "variance_of");
  if (const auto* g = std::get_if<GaussianPrediction>(&dist)) {
    return g->variance(d);
  }
  if (std::holds_alternative<CauchyPrediction>(dist)) {
    throw DataError("variance_of: undefined for Cauchy distributions");
  }
  const auto& np = std::get<NonparametricDistribution>(dist);
  double mean = 0.0, second = 0.0;
  grid_moments(np.support[d], np.cdf[d], mean, second);
  return std::max(second - mean * mean, 0.0);
}

double dispersion_of(const PredictiveDistribution& dist, Index d) {
  if (const auto* c = std::get_if<CauchyPrediction>(&dist)) {
    check_dim(d, c->dim(), "dispersion_of");
    return c->scale(d);
  }
  return std::sqrt(variance_of(dist, d));
}

}  // namespace recal
