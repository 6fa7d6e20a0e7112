#pragma once

#include "recal/common.hpp"

#include <cmath>
#include <functional>
#include <numbers>

namespace recal::testing {

/// Simpson integration of the standard normal pdf over [-12, x]; independent
/// oracle for CDF values (no erfc).
inline double normal_cdf_oracle(double x) {
  const double lo = -12.0;
  const int n = 20000;  // even
  const double h = (x - lo) / n;
  auto pdf = [](double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
  };
  double sum = pdf(lo) + pdf(x);
  for (int i = 1; i < n; ++i) {
    sum += pdf(lo + i * h) * ((i % 2 == 1) ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

/// Bisection on the CDF oracle; independent quantile oracle.
inline double normal_quantile_oracle(double tau) {
  double lo = -12.0, hi = 12.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf_oracle(mid) < tau) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Golden-section minimizer on [lo, hi].
inline double golden_section_min(const std::function<double(double)>& f,
                                 double lo, double hi, int iters = 200) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Central finite difference of a scalar function of a packed vector.
inline Vec finite_difference_grad(const std::function<double(const Vec&)>& f,
                                  const Vec& x, double h = 1e-5) {
  Vec grad(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    grad(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return grad;
}

/// Random SPD matrix A A^T + eps I.
inline Mat random_spd(Index k, GaussianSampler& rng, double eps = 0.1) {
  Mat a(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) a(i, j) = rng();
  }
  Mat m = a * a.transpose();
  m.diagonal().array() += eps;
  return m;
}

}  // namespace recal::testing
