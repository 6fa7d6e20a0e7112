#include "recal/metrics.hpp"

#include "recal/linalg.hpp"
#include "recal/special.hpp"

#include <algorithm>
#include <cmath>

namespace recal {

namespace {

void check_alignment(const Predictions& preds, const Mat& gt,
                     const char* who) {
  if (preds.empty()) throw DataError(std::string(who) + ": empty predictions");
  if (gt.rows() != static_cast<Index>(preds.size())) {
    throw DataError(std::string(who) +
                    ": predictions and ground truth misaligned");
  }
  const Index k = gt.cols();
  for (const auto& p : preds) {
    if (dim_of(p) != k) {
      throw DataError(std::string(who) + ": dimension mismatch");
    }
  }
}

}  // namespace

QuantileGrid QuantileGrid::regular(double lo, double hi, double step) {
  QuantileGrid grid;
  if (!(step > 0.0)) throw DataError("QuantileGrid: step must be positive");
  const Index count = static_cast<Index>(std::floor((hi - lo) / step + 1e-9));
  for (Index i = 0; i <= count; ++i) {
    grid.levels.push_back(std::min(lo + static_cast<double>(i) * step, hi));
  }
  grid.validate();
  return grid;
}

void QuantileGrid::validate() const {
  if (levels.empty()) throw DataError("QuantileGrid: empty");
  double prev = 0.0;
  for (double t : levels) {
    if (!(t > 0.0 && t < 1.0)) {
      throw DataError("QuantileGrid: levels must lie in (0,1)");
    }
    if (t <= prev) throw DataError("QuantileGrid: levels must increase");
    prev = t;
  }
}

BinningScheme BinningScheme::equal_frequency(std::vector<double> stat,
                                             Index bins) {
  if (stat.empty()) throw DataError("BinningScheme: empty statistic");
  if (bins < 1) throw DataError("BinningScheme: need at least one bin");
  std::sort(stat.begin(), stat.end());
  const Index n = static_cast<Index>(stat.size());

  std::vector<double> edges;
  edges.push_back(stat.front());
  for (Index j = 1; j < bins; ++j) {
    const Index cut = (j * n) / bins;
    const double edge =
        cut > 0 ? 0.5 * (stat[cut - 1] + stat[cut]) : stat.front();
    if (edge > edges.back()) edges.push_back(edge);
  }
  if (stat.back() > edges.back()) {
    edges.push_back(stat.back());
  } else {
    edges.push_back(edges.back() + 1.0);  // all values tied; single bin
  }

  BinningScheme scheme;
  scheme.edges = Eigen::Map<Vec>(edges.data(), static_cast<Index>(edges.size()));
  return scheme;
}

Index BinningScheme::bin_of(double x) const {
  // First interior edge strictly greater than x selects the bin; values
  // outside [edges.front(), edges.back()] land in the end bins.
  const double* begin = edges.data() + 1;
  const double* end = edges.data() + edges.size() - 1;
  const Index b = std::upper_bound(begin, end, x) - begin;
  return std::clamp<Index>(b, 0, bin_count() - 1);
}

double nll(const Predictions& preds, const Mat& gt) {
  check_alignment(preds, gt, "nll");
  double sum = 0.0;
  for (Index i = 0; i < gt.rows(); ++i) {
    sum -= log_density(preds[i], Vec(gt.row(i)));
  }
  return sum / static_cast<double>(gt.rows());
}

double nll_dim(const Predictions& preds, const Mat& gt, Index d) {
  check_alignment(preds, gt, "nll_dim");
  double sum = 0.0;
  for (Index i = 0; i < gt.rows(); ++i) {
    sum -= log_density_dim(preds[i], gt(i, d), d);
  }
  return sum / static_cast<double>(gt.rows());
}

double nll_univariate_mean(const Predictions& preds, const Mat& gt) {
  double sum = 0.0;
  for (Index d = 0; d < gt.cols(); ++d) sum += nll_dim(preds, gt, d);
  return sum / static_cast<double>(gt.cols());
}

double pinball_dim(const Predictions& preds, const Mat& gt, double tau,
                   Index d) {
  check_alignment(preds, gt, "pinball");
  if (!(tau > 0.0 && tau < 1.0)) {
    throw DataError("pinball: tau must be in (0,1)");
  }
  double sum = 0.0;
  for (Index i = 0; i < gt.rows(); ++i) {
    const double q = quantile(preds[i], tau, d);
    const double u = gt(i, d) - q;
    sum += u >= 0.0 ? tau * u : (tau - 1.0) * u;
  }
  return sum / static_cast<double>(gt.rows());
}

double pinball(const Predictions& preds, const Mat& gt, double tau) {
  double sum = 0.0;
  for (Index d = 0; d < gt.cols(); ++d) sum += pinball_dim(preds, gt, tau, d);
  return sum / static_cast<double>(gt.cols());
}

double pinball_mean(const Predictions& preds, const Mat& gt,
                    const QuantileGrid& grid) {
  grid.validate();
  double sum = 0.0;
  for (double tau : grid.levels) sum += pinball(preds, gt, tau);
  return sum / static_cast<double>(grid.levels.size());
}

namespace {

struct BinAccumulator {
  double sq_err = 0.0;
  double var = 0.0;
  Index count = 0;
};

std::vector<BinAccumulator> variance_bins(const Predictions& preds,
                                          const Mat& gt, Index bins, Index d,
                                          const char* who) {
  check_alignment(preds, gt, who);
  const Index n = gt.rows();
  std::vector<double> stat(n);
  for (Index i = 0; i < n; ++i) stat[i] = variance_of(preds[i], d);
  const BinningScheme scheme = BinningScheme::equal_frequency(stat, bins);

  std::vector<BinAccumulator> acc(scheme.bin_count());
  for (Index i = 0; i < n; ++i) {
    BinAccumulator& a = acc[scheme.bin_of(stat[i])];
    const double r = gt(i, d) - mean_of(preds[i], d);
    a.sq_err += r * r;
    a.var += stat[i];
    a.count += 1;
  }
  return acc;
}

}  // namespace

double uce_dim(const Predictions& preds, const Mat& gt, Index bins, Index d) {
  const auto acc = variance_bins(preds, gt, bins, d, "uce");
  const double n = static_cast<double>(gt.rows());
  double total = 0.0;
  for (const auto& a : acc) {
    if (a.count == 0) continue;
    const double c = static_cast<double>(a.count);
    total += (c / n) * std::fabs(a.sq_err / c - a.var / c);
  }
  return total;
}

double uce(const Predictions& preds, const Mat& gt, Index bins) {
  double sum = 0.0;
  for (Index d = 0; d < gt.cols(); ++d) sum += uce_dim(preds, gt, bins, d);
  return sum / static_cast<double>(gt.cols());
}

double ence_dim(const Predictions& preds, const Mat& gt, Index bins, Index d) {
  const auto acc = variance_bins(preds, gt, bins, d, "ence");
  double total = 0.0;
  Index nonempty = 0;
  for (const auto& a : acc) {
    if (a.count == 0) continue;
    const double c = static_cast<double>(a.count);
    const double rmse = std::sqrt(a.sq_err / c);
    const double rmv = std::sqrt(a.var / c);
    total += std::fabs(rmse - rmv) / rmv;
    nonempty += 1;
  }
  return nonempty > 0 ? total / static_cast<double>(nonempty) : 0.0;
}

double ence(const Predictions& preds, const Mat& gt, Index bins) {
  double sum = 0.0;
  for (Index d = 0; d < gt.cols(); ++d) sum += ence_dim(preds, gt, bins, d);
  return sum / static_cast<double>(gt.cols());
}

double nees(const GaussianPrediction& pred, const Vec& y) {
  if (y.size() != pred.dim()) throw DataError("nees: dimension mismatch");
  const Vec r = y - pred.mean;
  if (pred.has_full_covariance()) {
    return mahalanobis_squared(pred.covariance, r);
  }
  double sum = 0.0;
  for (Index i = 0; i < r.size(); ++i) {
    sum += r(i) * r(i) / pred.variances(i);
  }
  return sum;
}

double sgv(const Mat& cov) {
  const CholeskyResult chol = cholesky_spd(cov);
  double log_det = 0.0;
  for (Index i = 0; i < cov.rows(); ++i) {
    log_det += 2.0 * std::log(chol.lower(i, i));
  }
  return std::exp(log_det / static_cast<double>(cov.rows()));
}

double sgv(const GaussianPrediction& pred) {
  if (pred.has_full_covariance()) return sgv(pred.covariance);
  return std::exp(pred.variances.array().log().mean());
}

double chi2_cdf(Index k, double x) {
  if (k < 1) throw DataError("chi2_cdf: k must be >= 1");
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * static_cast<double>(k), 0.5 * x);
}

double chi2_quantile(Index k, double tau) {
  if (k < 1) throw DataError("chi2_quantile: k must be >= 1");
  if (!(tau > 0.0 && tau < 1.0)) {
    throw DataError("chi2_quantile: tau must be in (0,1)");
  }
  double hi = 2.0 * static_cast<double>(k);
  while (chi2_cdf(k, hi) < tau) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericError("chi2_quantile: failed to bracket");
  }
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(k, mid) < tau) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

namespace {

bool inside_central_interval(const PredictiveDistribution& pred, double y,
                             double tau, Index d, double chi2_1_tau) {
  if (const auto* g = std::get_if<GaussianPrediction>(&pred)) {
    const double r = y - g->mean(d);
    return r * r / g->variance(d) <= chi2_1_tau;
  }
  const double lo = quantile(pred, 0.5 * (1.0 - tau), d);
  const double hi = quantile(pred, 0.5 * (1.0 + tau), d);
  return y >= lo && y <= hi;
}

double binned_qce(const std::vector<double>& stat,
                  const std::vector<char>& accepted, double tau, Index bins) {
  const BinningScheme scheme = BinningScheme::equal_frequency(stat, bins);
  const Index m = scheme.bin_count();
  std::vector<Index> hits(m, 0), counts(m, 0);
  for (std::size_t i = 0; i < stat.size(); ++i) {
    const Index b = scheme.bin_of(stat[i]);
    counts[b] += 1;
    hits[b] += accepted[i] ? 1 : 0;
  }
  const double n = static_cast<double>(stat.size());
  double total = 0.0;
  for (Index b = 0; b < m; ++b) {
    if (counts[b] == 0) continue;
    const double freq =
        static_cast<double>(hits[b]) / static_cast<double>(counts[b]);
    total += (static_cast<double>(counts[b]) / n) * std::fabs(freq - tau);
  }
  return total;
}

}  // namespace

double qce_dim(const Predictions& preds, const Mat& gt, double tau, Index bins,
               Index d) {
  check_alignment(preds, gt, "qce");
  if (!(tau > 0.0 && tau < 1.0)) throw DataError("qce: tau must be in (0,1)");
  const Index n = gt.rows();
  const double a_tau = chi2_quantile(1, tau);
  std::vector<double> stat(n);
  std::vector<char> accepted(n);
  for (Index i = 0; i < n; ++i) {
    stat[i] = dispersion_of(preds[i], d);
    accepted[i] =
        inside_central_interval(preds[i], gt(i, d), tau, d, a_tau) ? 1 : 0;
  }
  return binned_qce(stat, accepted, tau, bins);
}

double qce_mean_dim(const Predictions& preds, const Mat& gt,
                    const QuantileGrid& grid, Index bins, Index d) {
  grid.validate();
  double sum = 0.0;
  for (double tau : grid.levels) sum += qce_dim(preds, gt, tau, bins, d);
  return sum / static_cast<double>(grid.levels.size());
}

double qce_mean(const Predictions& preds, const Mat& gt,
                const QuantileGrid& grid, Index bins) {
  double sum = 0.0;
  for (Index d = 0; d < gt.cols(); ++d) {
    sum += qce_mean_dim(preds, gt, grid, bins, d);
  }
  return sum / static_cast<double>(gt.cols());
}

double qce_multivariate(const Predictions& preds, const Mat& gt, double tau,
                        Index bins) {
  check_alignment(preds, gt, "qce_multivariate");
  if (!(tau > 0.0 && tau < 1.0)) throw DataError("qce: tau must be in (0,1)");
  const Index n = gt.rows();
  const Index k = gt.cols();
  const double a_tau = chi2_quantile(k, tau);
  std::vector<double> stat(n);
  std::vector<char> accepted(n);
  for (Index i = 0; i < n; ++i) {
    const auto* g = std::get_if<GaussianPrediction>(&preds[i]);
    if (g == nullptr) {
      throw DataError(
          "qce_multivariate: defined for Gaussian predictions only");
    }
    stat[i] = std::sqrt(sgv(*g));
    accepted[i] = nees(*g, Vec(gt.row(i))) <= a_tau ? 1 : 0;
  }
  return binned_qce(stat, accepted, tau, bins);
}

double qce_mean_multivariate(const Predictions& preds, const Mat& gt,
                             const QuantileGrid& grid, Index bins) {
  grid.validate();
  double sum = 0.0;
  for (double tau : grid.levels) {
    sum += qce_multivariate(preds, gt, tau, bins);
  }
  return sum / static_cast<double>(grid.levels.size());
}

std::vector<std::pair<double, double>> reliability_curve(
    const Predictions& preds, const Mat& gt, const QuantileGrid& grid,
    Index d) {
  check_alignment(preds, gt, "reliability_curve");
  grid.validate();
  std::vector<std::pair<double, double>> curve;
  curve.reserve(grid.levels.size());
  const Index n = gt.rows();
  for (double tau : grid.levels) {
    Index covered = 0;
    for (Index i = 0; i < n; ++i) {
      if (gt(i, d) <= quantile(preds[i], tau, d)) covered += 1;
    }
    curve.emplace_back(tau, static_cast<double>(covered) / n);
  }
  return curve;
}

}  // namespace recal
