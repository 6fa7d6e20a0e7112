#pragma once

namespace recal {

/// Standard normal CDF via erfc; accurate over the full double range.
double std_normal_cdf(double x);

/// Standard normal log-pdf.
double std_normal_log_pdf(double x);

/// Inverse standard normal CDF. Rational initial guess refined by two
/// Newton steps on the erfc-based CDF; |error| < 1e-14 for p in (1e-300, 1).
double std_normal_quantile(double p);

/// log(1 + exp(x)) without overflow.
double log1pexp(double x);

/// Logistic sigmoid.
double logistic(double x);

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

}  // namespace recal
