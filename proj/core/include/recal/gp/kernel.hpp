#pragma once

#include "recal/types.hpp"

#include <vector>

namespace recal::gp {

/// Input-space element of the recalibration GP: a predicted distribution
/// reduced to its mean and diagonal variances.
struct DistributionInput {
  Vec mean;
  Vec var;

  Index dim() const { return mean.size(); }
};

/// Kernel inputs extracted from a dataset (means + diagonal variances).
std::vector<DistributionInput> kernel_inputs(const CalibrationDataset& data);

/// Kernel between two Gaussian inputs with lengthscale theta:
///   k(a, b) = theta^K |S|^{-1/2} exp(-1/2 (mu_a - mu_b)^T S^{-1} (mu_a - mu_b))
/// where S = Sigma_a + Sigma_b + theta^2 I (diagonal here). Equals 1 for
/// coincident point-mass inputs and decays with both distance and spread.
double song_kernel(const DistributionInput& a, const DistributionInput& b,
                   double theta);

struct SongKernelGrad {
  double value = 0.0;
  double d_theta = 0.0;
  Vec d_mean_a, d_mean_b;
  Vec d_var_a, d_var_b;
};

SongKernelGrad song_kernel_grad(const DistributionInput& a,
                                const DistributionInput& b, double theta);

/// Pairwise kernel matrix without jitter.
Mat gram(const std::vector<DistributionInput>& inputs, double theta);

struct GramCholesky {
  Mat lower;
  double jitter = 0.0;
};

/// Cholesky of gram + jitter I. Starts at base_jitter and escalates once to
/// 1e-4 before failing with NumericError.
GramCholesky gram_cholesky(const std::vector<DistributionInput>& inputs,
                           double theta, double base_jitter = 1e-6);

}  // namespace recal::gp
