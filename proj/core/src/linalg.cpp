#include "recal/linalg.hpp"

#include <cmath>
#include <sstream>

namespace recal {

LdlDecomposition ldl_decompose(const Mat& spd) {
  const Index k = spd.rows();
  if (k == 0 || spd.cols() != k) {
    throw DataError("ldl_decompose: matrix must be square and nonempty");
  }
  if (!is_symmetric(spd)) {
    throw DataError("ldl_decompose: matrix is not symmetric");
  }
  Mat l = Mat::Identity(k, k);
  Vec d = Vec::Zero(k);
  for (Index j = 0; j < k; ++j) {
    double dj = spd(j, j);
    for (Index m = 0; m < j; ++m) dj -= l(j, m) * l(j, m) * d(m);
    if (!(dj > 0.0) || !std::isfinite(dj)) {
      std::ostringstream msg;
      msg << "ldl_decompose: matrix not positive definite (pivot " << dj
          << " at index " << j << ")";
      throw NumericError(msg.str());
    }
    d(j) = dj;
    for (Index i = j + 1; i < k; ++i) {
      double v = spd(i, j);
      for (Index m = 0; m < j; ++m) v -= l(i, m) * l(j, m) * d(m);
      l(i, j) = v / dj;
    }
  }
  return {std::move(l), std::move(d)};
}

Mat ldl_reconstruct(const LdlDecomposition& ldl) {
  return ldl.unit_lower * ldl.diag.asDiagonal() * ldl.unit_lower.transpose();
}

bool try_cholesky(const Mat& sym, Mat& lower_out) {
  const Index k = sym.rows();
  lower_out = Mat::Zero(k, k);
  for (Index j = 0; j < k; ++j) {
    double dj = sym(j, j);
    for (Index m = 0; m < j; ++m) dj -= lower_out(j, m) * lower_out(j, m);
    if (!(dj > 0.0) || !std::isfinite(dj)) return false;
    const double ljj = std::sqrt(dj);
    lower_out(j, j) = ljj;
    for (Index i = j + 1; i < k; ++i) {
      double v = sym(i, j);
      for (Index m = 0; m < j; ++m) v -= lower_out(i, m) * lower_out(j, m);
      lower_out(i, j) = v / ljj;
    }
  }
  return true;
}

CholeskyResult cholesky_spd(const Mat& sym, double rel_jitter) {
  const Index k = sym.rows();
  if (k == 0 || sym.cols() != k) {
    throw DataError("cholesky_spd: matrix must be square and nonempty");
  }
  CholeskyResult result;
  if (try_cholesky(sym, result.lower)) return result;

  const double jitter = rel_jitter * sym.trace() / static_cast<double>(k);
  Mat bumped = sym;
  bumped.diagonal().array() += jitter;
  if (try_cholesky(bumped, result.lower)) {
    result.jitter = jitter;
    return result;
  }
  throw NumericError(
      "cholesky_spd: matrix not positive definite after jitter");
}

Vec solve_lower(const Mat& lower, const Vec& b) {
  return lower.triangularView<Eigen::Lower>().solve(b);
}

Vec solve_lower_transposed(const Mat& lower, const Vec& b) {
  return lower.transpose().triangularView<Eigen::Upper>().solve(b);
}

Mat cholesky_backward(const Mat& lower, const Mat& l_bar) {
  const Index k = lower.rows();
  Mat p = lower.transpose() * l_bar;
  // Keep the lower triangle, halve the diagonal.
  for (Index i = 0; i < k; ++i) {
    p(i, i) *= 0.5;
    for (Index j = i + 1; j < k; ++j) p(i, j) = 0.0;
  }
  // X = L^{-T} P L^{-1}
  Mat x = lower.transpose().triangularView<Eigen::Upper>().solve(p);
  x = lower.transpose()
          .triangularView<Eigen::Upper>()
          .solve(x.transpose())
          .transpose();
  return 0.5 * (x + x.transpose());
}

double mahalanobis_squared(const Mat& cov, const Vec& r) {
  const CholeskyResult chol = cholesky_spd(cov);
  const Vec e = solve_lower(chol.lower, r);
  return e.squaredNorm();
}

bool is_symmetric(const Mat& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace recal
