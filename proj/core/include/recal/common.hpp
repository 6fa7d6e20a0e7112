#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace recal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Malformed input data or a violated precondition. CLI maps this to exit 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (indefinite matrix, diverged fit, ...). CLI exit 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// SplitMix64 finalizer; derives decorrelated child seeds from (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index = 0);

/// Deterministic standard-normal stream: Box-Muller over mt19937_64.
///
/// std::normal_distribution consumes an implementation-defined number of
/// engine draws per variate, which breaks common-random-number reuse across
/// parameter perturbations. Box-Muller always consumes two uniforms per pair.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  /// Uniform in (0,1).
  double uniform() {
    return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double operator()();

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace recal
