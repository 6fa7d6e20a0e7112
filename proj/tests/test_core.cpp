#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "recal/distributions.hpp"
#include "recal/linalg.hpp"
#include "recal/special.hpp"

#include <cmath>
#include <numbers>

using namespace recal;
using namespace recal::testing;

namespace {

GaussianPrediction std_normal() {
  Vec m(1), v(1);
  m << 0.0;
  v << 1.0;
  return GaussianPrediction::diagonal(m, v);
}

CauchyPrediction std_cauchy() {
  CauchyPrediction c;
  c.location = Vec::Zero(1);
  c.scale = Vec::Ones(1);
  return c;
}

NonparametricDistribution ramp_grid() {
  NonparametricDistribution np;
  np.support.push_back(Vec::LinSpaced(11, -1.0, 1.0));
  np.cdf.push_back(Vec::LinSpaced(11, 0.0, 1.0));
  np.validate();
  return np;
}

}  // namespace

TEST_CASE("standard normal special functions match integration oracle") {
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std_normal_cdf(1.0) ==
        doctest::Approx(normal_cdf_oracle(1.0)).epsilon(1e-8));
  CHECK(std_normal_cdf(1.0) == doctest::Approx(0.84134).epsilon(1e-4));
  CHECK(std_normal_quantile(0.975) ==
        doctest::Approx(normal_quantile_oracle(0.975)).epsilon(1e-7));
  CHECK(std_normal_quantile(0.975) == doctest::Approx(1.95996).epsilon(1e-5));
  for (double p : {1e-10, 1e-4, 0.2, 0.5, 0.9, 1.0 - 1e-9}) {
    CHECK(std_normal_cdf(std_normal_quantile(p)) ==
          doctest::Approx(p).epsilon(1e-10));
  }
  CHECK_THROWS_AS(std_normal_quantile(0.0), DataError);
  CHECK_THROWS_AS(std_normal_quantile(1.0), DataError);
}

TEST_CASE("cdf examples") {
  const PredictiveDistribution g = std_normal();
  CHECK(cdf(g, 0.0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cdf(g, 1.0, 0) ==
        doctest::Approx(normal_cdf_oracle(1.0)).epsilon(1e-8));

  const PredictiveDistribution c = std_cauchy();
  // 1/2 + arctan(1)/pi
  CHECK(cdf(c, 1.0, 0) == doctest::Approx(0.75).epsilon(1e-12));

  CHECK_THROWS_AS(cdf(g, 0.0, 1), DataError);
  CHECK_THROWS_AS(cdf(g, std::nan(""), 0), DataError);
}

TEST_CASE("quantile examples and roundtrip") {
  const PredictiveDistribution g = std_normal();
  CHECK(quantile(g, 0.5, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(quantile(g, 0.975, 0) ==
        doctest::Approx(normal_quantile_oracle(0.975)).epsilon(1e-7));

  const PredictiveDistribution c = std_cauchy();
  CHECK(quantile(c, 0.75, 0) ==
        doctest::Approx(std::tan(std::numbers::pi * 0.25)).epsilon(1e-12));
  CHECK(quantile(c, 0.75, 0) == doctest::Approx(1.0).epsilon(1e-12));

  const PredictiveDistribution np = ramp_grid();
  for (double tau = 0.02; tau < 1.0; tau += 0.02) {
    CHECK(cdf(g, quantile(g, tau, 0), 0) == doctest::Approx(tau).epsilon(1e-6));
    CHECK(cdf(c, quantile(c, tau, 0), 0) == doctest::Approx(tau).epsilon(1e-6));
    // Grid distributions invert within one grid cell.
    const double q = quantile(np, tau, 0);
    const double back = cdf(np, q, 0);
    CHECK(std::fabs(back - tau) <= 0.1 + 1e-9);
  }
  CHECK_THROWS_AS(quantile(g, 0.0, 0), DataError);
  CHECK_THROWS_AS(quantile(g, 1.0, 0), DataError);
}

TEST_CASE("log density examples") {
  const PredictiveDistribution g = std_normal();
  Vec y0(1);
  y0 << 0.0;
  CHECK(log_density(g, y0) == doctest::Approx(-0.918939).epsilon(1e-6));

  const PredictiveDistribution c = std_cauchy();
  CHECK(log_density(c, y0) ==
        doctest::Approx(-std::log(std::numbers::pi)).epsilon(1e-12));

  const auto mv = GaussianPrediction::with_covariance(
      Vec::Zero(2), Mat::Identity(2, 2));
  CHECK(log_density(mv, Vec::Zero(2)) ==
        doctest::Approx(-1.837877).epsilon(1e-6));

  // Diagonal Gaussians factorize over dimensions.
  Vec m2(2), v2(2), y2(2);
  m2 << 0.3, -0.5;
  v2 << 2.0, 0.7;
  y2 << 0.1, 0.4;
  const auto diag2 = GaussianPrediction::diagonal(m2, v2);
  double per_dim = 0.0;
  for (Index d = 0; d < 2; ++d) {
    per_dim += log_density_dim(PredictiveDistribution(diag2), y2(d), d);
  }
  CHECK(log_density(diag2, y2) == doctest::Approx(per_dim).epsilon(1e-12));
}

TEST_CASE("gaussian density integrates to one") {
  Vec m(1), v(1);
  m << 0.7;
  v << 2.3;
  const PredictiveDistribution g = GaussianPrediction::diagonal(m, v);
  const double sigma = std::sqrt(2.3);
  const int n = 40000;
  const double lo = 0.7 - 8.0 * sigma, hi = 0.7 + 8.0 * sigma;
  const double h = (hi - lo) / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    Vec y(1);
    y << lo + i * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    sum += w * std::exp(log_density(g, y));
  }
  CHECK(sum * h == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("cdf is nondecreasing for all distribution types") {
  GaussianSampler rng(11);
  const PredictiveDistribution dists[] = {
      PredictiveDistribution(std_normal()), PredictiveDistribution(std_cauchy()),
      PredictiveDistribution(ramp_grid())};
  for (const auto& dist : dists) {
    double prev = -1.0;
    for (int i = 0; i <= 400; ++i) {
      const double y = -4.0 + 8.0 * i / 400.0;
      const double f = cdf(dist, y, 0);
      CHECK(f >= prev - 1e-12);
      prev = f;
    }
  }
}

TEST_CASE("ldl decomposition examples") {
  SUBCASE("identity") {
    const auto ldl = ldl_decompose(Mat::Identity(2, 2));
    CHECK((ldl.unit_lower - Mat::Identity(2, 2)).norm() == 0.0);
    CHECK((ldl.diag - Vec::Ones(2)).norm() == 0.0);
  }
  SUBCASE("hand example") {
    Mat s(2, 2);
    s << 4.0, 2.0, 2.0, 3.0;
    const auto ldl = ldl_decompose(s);
    CHECK(ldl.unit_lower(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(ldl.diag(0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(ldl.diag(1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK((ldl_reconstruct(ldl) - s).norm() <= 1e-12);
  }
  SUBCASE("diagonal input") {
    Mat s = Vec((Vec(2) << 9.0, 16.0).finished()).asDiagonal();
    const auto ldl = ldl_decompose(s);
    CHECK((ldl.unit_lower - Mat::Identity(2, 2)).norm() == 0.0);
    CHECK(ldl.diag(0) == 9.0);
    CHECK(ldl.diag(1) == 16.0);
  }
  SUBCASE("indefinite reports smallest pivot") {
    Mat s(2, 2);
    s << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_WITH_AS(ldl_decompose(s),
                         doctest::Contains("pivot"), NumericError);
  }
}

TEST_CASE("ldl roundtrip on random SPD matrices") {
  GaussianSampler rng(1234);
  std::mt19937_64 dims(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index k = 1 + static_cast<Index>(dims() % 6);
    const Mat s = random_spd(k, rng);
    const auto ldl = ldl_decompose(s);
    CHECK((ldl.unit_lower.diagonal().array() == 1.0).all());
    CHECK((ldl.diag.array() > 0.0).all());
    const double rel = (ldl_reconstruct(ldl) - s).norm() / s.norm();
    CHECK(rel <= 1e-9);
  }
}

TEST_CASE("cholesky jitter policy") {
  Mat near_singular(2, 2);
  near_singular << 1.0, 1.0, 1.0, 1.0;  // rank one
  const auto result = cholesky_spd(near_singular);
  CHECK(result.jitter > 0.0);
  CHECK(result.lower(0, 0) > 0.0);

  Mat indefinite(2, 2);
  indefinite << 1.0, 3.0, 3.0, 1.0;
  CHECK_THROWS_AS(cholesky_spd(indefinite), NumericError);
}

TEST_CASE("cholesky backward matches finite differences") {
  GaussianSampler rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const Index k = 2 + trial % 4;
    const Mat sigma = random_spd(k, rng, 0.5);
    Mat l_bar = Mat::Zero(k, k);
    for (Index i = 0; i < k; ++i) {
      for (Index j = 0; j <= i; ++j) l_bar(i, j) = rng();
    }
    auto f = [&](const Mat& s) {
      Mat lower;
      REQUIRE(try_cholesky(s, lower));
      return (lower.array() * l_bar.array()).sum();
    };
    Mat lower;
    REQUIRE(try_cholesky(sigma, lower));
    const Mat sigma_bar = cholesky_backward(lower, l_bar);
    const double h = 1e-6;
    for (Index i = 0; i < k; ++i) {
      for (Index j = 0; j <= i; ++j) {
        Mat sp = sigma, sm = sigma;
        sp(i, j) += h;
        sm(i, j) -= h;
        if (i != j) {
          sp(j, i) += h;
          sm(j, i) -= h;
        }
        const double fd = (f(sp) - f(sm)) / (2.0 * h);
        const double expected =
            i == j ? sigma_bar(i, i) : 2.0 * sigma_bar(i, j);
        CHECK(fd == doctest::Approx(expected).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("type invariants") {
  CHECK_THROWS_AS(GaussianPrediction::diagonal(Vec::Zero(2), Vec::Zero(2)),
                  DataError);
  Mat asym(2, 2);
  asym << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(GaussianPrediction::with_covariance(Vec::Zero(2), asym),
                  DataError);

  CauchyPrediction c;
  c.location = Vec::Zero(1);
  c.scale = Vec::Zero(1);
  CHECK_THROWS_AS(c.validate(), DataError);

  NonparametricDistribution np;
  np.support.push_back(Vec::LinSpaced(3, 0.0, 1.0));
  Vec decreasing(3);
  decreasing << 0.8, 0.5, 0.9;
  np.cdf.push_back(decreasing);
  CHECK_THROWS_AS(np.validate(), DataError);

  NonparametricDistribution bad_support;
  Vec s(3);
  s << 0.0, 0.0, 1.0;  // not strictly increasing
  bad_support.support.push_back(s);
  bad_support.cdf.push_back(Vec::LinSpaced(3, 0.0, 1.0));
  CHECK_THROWS_AS(bad_support.validate(), DataError);
}

TEST_CASE("grid moments and dispersion") {
  // Uniform CDF on [-1, 1]: variance 1/3.
  const PredictiveDistribution np = ramp_grid();
  CHECK(mean_of(np, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(variance_of(np, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(dispersion_of(np, 0) ==
        doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-9));

  const PredictiveDistribution c = std_cauchy();
  CHECK_THROWS_AS(variance_of(c, 0), DataError);
  CHECK(dispersion_of(c, 0) == 1.0);
}
