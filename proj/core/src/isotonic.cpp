#include "recal/isotonic.hpp"

#include "recal/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace recal {

double IsotonicCalibrator::evaluate(double p, Index d) const {
  if (d < 0 || d >= dim()) throw DataError("IsotonicCalibrator: bad dimension");
  constexpr double eps = NonparametricDistribution::kCdfEps;
  const Vec& bp = breakpoints[d];
  const Vec& val = values[d];
  const Index b = bp.size();
  p = std::clamp(p, 0.0, 1.0);

  double g;
  if (p <= bp(0)) {
    g = bp(0) > 0.0 ? val(0) * (p / bp(0)) : val(0);
  } else if (p >= bp(b - 1)) {
    const double rest = 1.0 - bp(b - 1);
    g = rest > 0.0
            ? val(b - 1) + (1.0 - val(b - 1)) * (p - bp(b - 1)) / rest
            : val(b - 1);
  } else {
    const double* begin = bp.data();
    const Index hi = std::upper_bound(begin, begin + b, p) - begin;
    const Index lo = hi - 1;
    const double dp = bp(hi) - bp(lo);
    const double t = dp > 0.0 ? (p - bp(lo)) / dp : 0.0;
    g = val(lo) + t * (val(hi) - val(lo));
  }
  return std::clamp(g, eps, 1.0 - eps);
}

void IsotonicCalibrator::validate() const {
  if (breakpoints.empty() || breakpoints.size() != values.size()) {
    throw DataError("IsotonicCalibrator: empty or mismatched dimensions");
  }
  for (Index d = 0; d < dim(); ++d) {
    const Vec& bp = breakpoints[d];
    const Vec& val = values[d];
    if (bp.size() == 0 || bp.size() != val.size()) {
      throw DataError("IsotonicCalibrator: empty dimension");
    }
    for (Index i = 0; i < bp.size(); ++i) {
      if (bp(i) < 0.0 || bp(i) > 1.0 || val(i) < 0.0 || val(i) > 1.0) {
        throw DataError("IsotonicCalibrator: entries must lie in [0,1]");
      }
      if (i > 0 && (bp(i) < bp(i - 1) || val(i) < val(i - 1))) {
        throw DataError("IsotonicCalibrator: sequences must be nondecreasing");
      }
    }
  }
}

Vec pav_fit(const Vec& targets, const Vec& weights) {
  const Index n = targets.size();
  if (n == 0 || weights.size() != n) {
    throw DataError("pav_fit: empty or mismatched input");
  }
  // Blocks of pooled points, merged while the means violate monotonicity.
  std::vector<double> mean, weight;
  std::vector<Index> count;
  mean.reserve(n);
  for (Index i = 0; i < n; ++i) {
    mean.push_back(targets(i));
    weight.push_back(weights(i));
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      const double w = weight[weight.size() - 2] + weight.back();
      const double m = (weight[weight.size() - 2] * mean[mean.size() - 2] +
                        weight.back() * mean.back()) /
                       w;
      mean.pop_back();
      weight.pop_back();
      const Index c = count.back();
      count.pop_back();
      mean.back() = m;
      weight.back() = w;
      count.back() += c;
    }
  }
  Vec fitted(n);
  Index pos = 0;
  for (std::size_t b = 0; b < mean.size(); ++b) {
    for (Index r = 0; r < count[b]; ++r) fitted(pos++) = mean[b];
  }
  return fitted;
}

IsotonicCalibrator isotonic_fit(const CalibrationDataset& dataset) {
  dataset.validate();
  const Index n = dataset.size();
  if (n < 2) throw DataError("isotonic_fit: need at least two samples");
  const Index k = dataset.dim();

  IsotonicCalibrator calibrator;
  calibrator.breakpoints.resize(k);
  calibrator.values.resize(k);

  for (Index d = 0; d < k; ++d) {
    std::vector<double> p(n);
    for (Index i = 0; i < n; ++i) {
      p[i] = cdf(dataset.predictions[i], dataset.ground_truth(i, d), d);
    }
    std::sort(p.begin(), p.end());

    // Collapse duplicate CDF positions; targets are mid-rank ECDF values.
    std::vector<double> xs, target, weight;
    Index i = 0;
    while (i < n) {
      Index j = i;
      while (j < n && p[j] == p[i]) ++j;
      xs.push_back(p[i]);
      // 1-based positions i+1 .. j averaged, shifted to the rank midpoint.
      target.push_back((static_cast<double>(i + 1 + j) - 1.0) /
                       (2.0 * static_cast<double>(n)));
      weight.push_back(static_cast<double>(j - i));
      i = j;
    }
    const Index b = static_cast<Index>(xs.size());
    Vec t = Eigen::Map<Vec>(target.data(), b);
    Vec w = Eigen::Map<Vec>(weight.data(), b);
    Vec fitted = pav_fit(t, w);
    for (Index g = 0; g < b; ++g) fitted(g) = std::clamp(fitted(g), 0.0, 1.0);

    calibrator.breakpoints[d] = Eigen::Map<Vec>(xs.data(), b);
    calibrator.values[d] = std::move(fitted);
  }
  calibrator.validate();
  return calibrator;
}

NonparametricDistribution isotonic_apply(const IsotonicCalibrator& calibrator,
                                         const GaussianPrediction& prediction,
                                         Index grid_points) {
  prediction.validate();
  if (prediction.dim() != calibrator.dim()) {
    throw DataError("isotonic_apply: dimension mismatch");
  }
  if (grid_points < 2) throw DataError("isotonic_apply: grid too small");

  NonparametricDistribution out;
  const Index k = prediction.dim();
  out.support.resize(k);
  out.cdf.resize(k);
  for (Index d = 0; d < k; ++d) {
    const double lo = quantile(prediction, 1e-4, d);
    const double hi = quantile(prediction, 1.0 - 1e-4, d);
    Vec y = Vec::LinSpaced(grid_points, lo, hi);
    Vec f(grid_points);
    double prev = 0.0;
    for (Index g = 0; g < grid_points; ++g) {
      double v = calibrator.evaluate(cdf(prediction, y(g), d), d);
      v = std::max(v, prev);  // guard against interpolation round-off
      f(g) = v;
      prev = v;
    }
    out.support[d] = std::move(y);
    out.cdf[d] = std::move(f);
  }
  out.validate();
  return out;
}

}  // namespace recal
