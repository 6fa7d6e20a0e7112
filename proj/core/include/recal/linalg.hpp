#pragma once

#include "recal/common.hpp"

namespace recal {

/// Sigma = L * D * L^T with unit lower-triangular L and positive diagonal D.
struct LdlDecomposition {
  Mat unit_lower;
  Vec diag;
};

/// LDL^T factorization of a symmetric positive definite matrix.
/// Throws NumericError naming the smallest pivot when the input is indefinite.
LdlDecomposition ldl_decompose(const Mat& spd);

Mat ldl_reconstruct(const LdlDecomposition& ldl);

/// Plain lower Cholesky attempt; returns false on a nonpositive pivot.
bool try_cholesky(const Mat& sym, Mat& lower_out);

struct CholeskyResult {
  Mat lower;
  double jitter = 0.0;  // amount actually added to the diagonal
};

/// Lower Cholesky with a single jitter retry: on failure, rel_jitter *
/// (trace / K) is added to the diagonal once; a second failure throws
/// NumericError. Large distortions are never applied silently.
CholeskyResult cholesky_spd(const Mat& sym, double rel_jitter = 1e-6);

/// Solves L x = b for lower-triangular L.
Vec solve_lower(const Mat& lower, const Vec& b);

/// Solves L^T x = b for lower-triangular L.
Vec solve_lower_transposed(const Mat& lower, const Vec& b);

/// Reverse-mode sensitivity of a lower Cholesky factorization.
///
/// Given L with Sigma = L L^T and the gradient l_bar = d f / d L (lower
/// triangle), returns the symmetric matrix sigma_bar with
///   d f = sum_ij sigma_bar_ij  d sigma_ij
/// for symmetric perturbations of Sigma (off-diagonal sensitivity split
/// evenly between the (i,j) and (j,i) entries).
Mat cholesky_backward(const Mat& lower, const Mat& l_bar);

/// (r)^T Sigma^{-1} (r) via Cholesky solve.
double mahalanobis_squared(const Mat& cov, const Vec& r);

/// max |M - M^T| <= tol * max|M|.
bool is_symmetric(const Mat& m, double rel_tol = 1e-9);

}  // namespace recal
