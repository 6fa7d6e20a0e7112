#pragma once

#include "recal/gp/kernel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace recal::gp {

/// Likelihood head attached to the latent GP outputs.
enum class HeadKind { beta, normal, cauchy, normal_mv, covariance };

const char* head_name(HeadKind head);
HeadKind parse_head(const std::string& name);

/// Latent output count P per head for K data dimensions:
/// beta 3K; normal / cauchy / normal_mv K; covariance K(K+1)/2 + K.
Index latent_count(HeadKind head, Index k);

struct SvgpConfig {
  Index inducing = 50;
  int epochs = 200;
  double learning_rate = 0.01;
  int mc_samples = 128;
  Index batch_size = 256;
  std::uint64_t seed = 42;
  Index coreg_rank = 0;  // 0 selects full rank P
  double jitter = 1e-6;
};

/// Trainable parameters. The variational posterior over the whitened
/// inducing weights v (u = chol(K_uu) v) is N(m, S S^T), which keeps the
/// KL term independent of the kernel. Positivity constraints are handled by
/// log parameterizations (theta, coregionalization diagonal, inducing input
/// variances, variational factor diagonal).
struct SvgpParams {
  double log_theta = 0.0;
  Mat coreg_factor;         // P x R, lower-trapezoidal
  Vec coreg_raw_diag;       // P; lambda = 1e-6 + exp(raw)
  Mat inducing_mean;        // N* x K
  Mat inducing_log_var;     // N* x K
  Vec var_mean;             // P N*, output-major blocks of N*
  Mat var_factor_strict;    // P N* x P N*, strictly lower entries
  Vec var_factor_log_diag;  // P N*

  static constexpr double kLambdaFloor = 1e-6;

  Index inducing_count() const { return inducing_mean.rows(); }
  Index input_dim() const { return inducing_mean.cols(); }
  Index latent_dim() const {
    return var_mean.size() / std::max<Index>(inducing_count(), 1);
  }
  Index coreg_rank() const { return coreg_factor.cols(); }

  Vec lambda() const;
  Mat coregionalization() const;    // B = A A^T + diag(lambda)
  Mat variational_factor() const;   // S = strict + diag(exp(log_diag))
  std::vector<DistributionInput> inducing_inputs() const;

  Index param_count() const;
  Vec pack() const;
  void set_flat(const Vec& flat);
};

/// Fitted sparse variational GP: kernel lengthscale, coregionalization,
/// inducing set, variational posterior, head tag and the training snapshot.
struct GpCalibrator {
  HeadKind head = HeadKind::normal;
  Index k = 0;        // data dimension count
  Index latents = 0;  // P
  SvgpParams params;
  SvgpConfig config;
  std::vector<double> training_log;  // per-epoch ELBO, full-data scale
  bool fitted = false;
  bool diverged = false;
};

/// Per-sample data likelihood: log p(y_n | f) and its latent gradient.
class HeadLikelihood {
 public:
  virtual ~HeadLikelihood() = default;
  virtual Index latent_dim() const = 0;
  virtual Index sample_count() const = 0;
  /// When grad is non-null, d log p / d f is accumulated into it.
  virtual double log_lik(Index sample, const Vec& f, Vec* grad) const = 0;
};

/// KL(q(v) || N(0, I)) of the whitened variational posterior.
double kl_to_prior(const SvgpParams& params);

/// Deterministic Monte-Carlo ELBO estimate over a batch of training indices:
///   scale * sum_n E_q[log p(y_n | f_n)] - KL(q || prior).
/// Reparameterized draws use common random numbers keyed on
/// (seed, sample index), so repeated calls with one seed are bitwise equal
/// and finite differences across parameter perturbations see frozen noise.
double elbo_mc(const GpCalibrator& model, const HeadLikelihood& lik,
               const std::vector<DistributionInput>& inputs,
               const std::vector<Index>& batch, int mc_samples,
               std::uint64_t seed, double scale = 1.0);

/// ELBO plus its gradient for every trainable parameter (pack order).
double elbo_mc_grad(const GpCalibrator& model, const HeadLikelihood& lik,
                    const std::vector<DistributionInput>& inputs,
                    const std::vector<Index>& batch, int mc_samples,
                    std::uint64_t seed, double scale, Vec& grad_out);

/// Inducing points from a seeded subsample of the inputs; variational
/// posterior initialized at the prior (m = 0, S = I, so the KL term is 0).
GpCalibrator init_svgp(const std::vector<DistributionInput>& inputs,
                       HeadKind head, Index k, const SvgpConfig& config);

/// Stochastic gradient ascent (Adam) on the MC ELBO. Non-finite estimates
/// abort the fit, reverting to the last parameters that evaluated cleanly.
GpCalibrator fit_svgp(const std::vector<DistributionInput>& inputs,
                      const HeadLikelihood& lik, HeadKind head, Index k,
                      const SvgpConfig& config);

struct MarginalPosterior {
  Vec mu;   // P
  Mat cov;  // P x P
};

/// Caches the input-independent factors of a fitted model for repeated
/// evaluation of marginal posteriors. Read-only and safe to share.
class PosteriorOperator {
 public:
  explicit PosteriorOperator(const GpCalibrator& model);
  MarginalPosterior marginal(const DistributionInput& x) const;
  Index latent_dim() const { return p_; }

 private:
  double theta_;
  Mat l_coreg_;      // chol(B)
  Mat l_gram_;       // chol(K_zz + jitter)
  std::vector<DistributionInput> inducing_;
  Mat mean_blocks_;  // N* x P
  Mat factor_;       // P N* x P N* lower
  Index p_ = 0;
  Index n_star_ = 0;
};

/// S reparameterized draws of the latent vector at one input (rows = draws).
Mat posterior_weight_samples(const PosteriorOperator& op,
                             const DistributionInput& x, int mc_samples,
                             std::uint64_t seed);
Mat posterior_weight_samples(const GpCalibrator& model,
                             const DistributionInput& x, int mc_samples,
                             std::uint64_t seed);

}  // namespace recal::gp
