#include "recal/gp/svgp.hpp"

#include "recal/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace recal::gp {

namespace {

constexpr double kMarginalJitter = 1e-10;

Mat tril(const Mat& m) {
  Mat out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = i + 1; j < out.cols(); ++j) out(i, j) = 0.0;
  }
  return out;
}

}  // namespace

const char* head_name(HeadKind head) {
  switch (head) {
    case HeadKind::beta: return "beta";
    case HeadKind::normal: return "normal";
    case HeadKind::cauchy: return "cauchy";
    case HeadKind::normal_mv: return "normal_mv";
    case HeadKind::covariance: return "covariance";
  }
  throw DataError("head_name: unknown head");
}

HeadKind parse_head(const std::string& name) {
  if (name == "beta") return HeadKind::beta;
  if (name == "normal") return HeadKind::normal;
  if (name == "cauchy") return HeadKind::cauchy;
  if (name == "normal_mv") return HeadKind::normal_mv;
  if (name == "covariance") return HeadKind::covariance;
  throw DataError("parse_head: unknown head '" + name + "'");
}

Index latent_count(HeadKind head, Index k) {
  switch (head) {
    case HeadKind::beta: return 3 * k;
    case HeadKind::normal:
    case HeadKind::cauchy:
    case HeadKind::normal_mv: return k;
    case HeadKind::covariance: return k * (k + 1) / 2 + k;
  }
  throw DataError("latent_count: unknown head");
}

Vec SvgpParams::lambda() const {
  return (coreg_raw_diag.array().exp() + kLambdaFloor).matrix();
}

Mat SvgpParams::coregionalization() const {
  Mat b = coreg_factor * coreg_factor.transpose();
  b.diagonal() += lambda();
  return b;
}

Mat SvgpParams::variational_factor() const {
  Mat s = var_factor_strict;
  s.diagonal() = var_factor_log_diag.array().exp();
  return s;
}

std::vector<DistributionInput> SvgpParams::inducing_inputs() const {
  std::vector<DistributionInput> z;
  const Index n = inducing_count();
  z.reserve(n);
  for (Index i = 0; i < n; ++i) {
    z.push_back({inducing_mean.row(i).transpose(),
                 inducing_log_var.row(i).array().exp().matrix()});
  }
  return z;
}

namespace {

Index lower_trapezoid_count(Index p, Index r) {
  Index count = 0;
  for (Index i = 0; i < p; ++i) count += std::min(i + 1, r);
  return count;
}

}  // namespace

Index SvgpParams::param_count() const {
  const Index m = var_mean.size();
  return 1 + lower_trapezoid_count(coreg_factor.rows(), coreg_factor.cols()) +
         coreg_raw_diag.size() + 2 * inducing_mean.size() + m +
         m * (m - 1) / 2 + m;
}

Vec SvgpParams::pack() const {
  Vec flat(param_count());
  Index pos = 0;
  flat(pos++) = log_theta;
  for (Index i = 0; i < coreg_factor.rows(); ++i) {
    for (Index j = 0; j <= std::min(i, coreg_factor.cols() - 1); ++j) {
      flat(pos++) = coreg_factor(i, j);
    }
  }
  for (Index i = 0; i < coreg_raw_diag.size(); ++i) {
    flat(pos++) = coreg_raw_diag(i);
  }
  for (Index j = 0; j < inducing_mean.cols(); ++j) {
    for (Index i = 0; i < inducing_mean.rows(); ++i) {
      flat(pos++) = inducing_mean(i, j);
    }
  }
  for (Index j = 0; j < inducing_log_var.cols(); ++j) {
    for (Index i = 0; i < inducing_log_var.rows(); ++i) {
      flat(pos++) = inducing_log_var(i, j);
    }
  }
  for (Index i = 0; i < var_mean.size(); ++i) flat(pos++) = var_mean(i);
  const Index m = var_mean.size();
  for (Index j = 0; j < m; ++j) {
    for (Index i = j + 1; i < m; ++i) flat(pos++) = var_factor_strict(i, j);
  }
  for (Index i = 0; i < m; ++i) flat(pos++) = var_factor_log_diag(i);
  return flat;
}

void SvgpParams::set_flat(const Vec& flat) {
  if (flat.size() != param_count()) {
    throw DataError("SvgpParams::set_flat: size mismatch");
  }
  Index pos = 0;
  log_theta = flat(pos++);
  for (Index i = 0; i < coreg_factor.rows(); ++i) {
    for (Index j = 0; j <= std::min(i, coreg_factor.cols() - 1); ++j) {
      coreg_factor(i, j) = flat(pos++);
    }
  }
  for (Index i = 0; i < coreg_raw_diag.size(); ++i) {
    coreg_raw_diag(i) = flat(pos++);
  }
  for (Index j = 0; j < inducing_mean.cols(); ++j) {
    for (Index i = 0; i < inducing_mean.rows(); ++i) {
      inducing_mean(i, j) = flat(pos++);
    }
  }
  for (Index j = 0; j < inducing_log_var.cols(); ++j) {
    for (Index i = 0; i < inducing_log_var.rows(); ++i) {
      inducing_log_var(i, j) = flat(pos++);
    }
  }
  for (Index i = 0; i < var_mean.size(); ++i) var_mean(i) = flat(pos++);
  const Index m = var_mean.size();
  for (Index j = 0; j < m; ++j) {
    for (Index i = j + 1; i < m; ++i) var_factor_strict(i, j) = flat(pos++);
  }
  for (Index i = 0; i < m; ++i) var_factor_log_diag(i) = flat(pos++);
}

double kl_to_prior(const SvgpParams& params) {
  const Mat s = params.variational_factor();
  const Index m = params.var_mean.size();
  return 0.5 * (params.var_mean.squaredNorm() + s.squaredNorm() -
                static_cast<double>(m)) -
         params.var_factor_log_diag.sum();
}

namespace {

struct ElboWorkspace {
  // Shared factors.
  double theta = 0.0;
  Mat coreg;        // B
  Mat l_coreg;      // chol(B)
  Mat l_gram;       // chol(K_zz + jitter)
  Mat s;            // variational factor, lower
  Mat mean_blocks;  // N* x P
  std::vector<DistributionInput> inducing;
};

ElboWorkspace build_workspace(const SvgpParams& params, double base_jitter) {
  ElboWorkspace w;
  w.theta = std::exp(params.log_theta);
  w.coreg = params.coregionalization();
  if (!try_cholesky(w.coreg, w.l_coreg)) {
    throw NumericError("svgp: coregionalization matrix not SPD");
  }
  w.inducing = params.inducing_inputs();
  const GramCholesky gram = gram_cholesky(w.inducing, w.theta, base_jitter);
  w.l_gram = gram.lower;
  w.s = params.variational_factor();
  const Index n_star = params.inducing_count();
  const Index p = params.latent_dim();
  w.mean_blocks = Mat(n_star, p);
  for (Index q = 0; q < p; ++q) {
    w.mean_blocks.col(q) = params.var_mean.segment(q * n_star, n_star);
  }
  return w;
}

// Marginal q(f(x)) = N(mu, cov) in the whitened parameterization:
//   c = L_K^{-1} k_zx,            gap = k_xx - c^T c
//   mu = L_B (M^T c),             cov = B gap + (L_B T)(L_B T)^T
// with T = (I_P kron c^T) S. Intermediates are kept for the backward pass.
struct PointMarginal {
  Vec k;        // N*
  double kappa = 0.0;
  Vec c;        // N*
  double gap = 0.0;
  bool gap_clamped = false;
  Vec g;        // P, = M^T c
  Vec mu;       // P
  Mat t;        // P x PN*
  Mat v;        // P x PN*
  Mat cov;      // P x P
  Mat l_cov;    // chol(cov)
};

PointMarginal point_marginal(const ElboWorkspace& w,
                             const DistributionInput& x) {
  const Index n_star = static_cast<Index>(w.inducing.size());
  const Index p = w.mean_blocks.cols();

  PointMarginal pm;
  pm.k = Vec(n_star);
  for (Index i = 0; i < n_star; ++i) {
    pm.k(i) = song_kernel(w.inducing[i], x, w.theta);
  }
  pm.kappa = song_kernel(x, x, w.theta);
  pm.c = solve_lower(w.l_gram, pm.k);
  const double raw_gap = pm.kappa - pm.c.squaredNorm();
  pm.gap_clamped = raw_gap < 0.0;
  pm.gap = std::max(raw_gap, 0.0);

  pm.g = w.mean_blocks.transpose() * pm.c;
  pm.mu = w.l_coreg * pm.g;

  pm.t = Mat(p, p * n_star);
  for (Index q = 0; q < p; ++q) {
    pm.t.row(q) = pm.c.transpose() * w.s.middleRows(q * n_star, n_star);
  }
  pm.v = w.l_coreg * pm.t;
  pm.cov = w.coreg * pm.gap + pm.v * pm.v.transpose();
  pm.cov.diagonal().array() += kMarginalJitter;
  if (!try_cholesky(pm.cov, pm.l_cov)) {
    throw NumericError("svgp: marginal posterior covariance not SPD");
  }
  return pm;
}

struct ParamGrads {
  double d_log_theta = 0.0;
  Mat d_coreg_factor;
  Vec d_coreg_raw_diag;
  Mat d_inducing_mean;
  Mat d_inducing_log_var;
  Vec d_var_mean;
  Mat d_var_factor;  // full lower accumulation, split into channels later
};

double elbo_impl(const GpCalibrator& model, const HeadLikelihood& lik,
                 const std::vector<DistributionInput>& inputs,
                 const std::vector<Index>& batch, int mc_samples,
                 std::uint64_t seed, double scale, Vec* grad_out) {
  const SvgpParams& params = model.params;
  if (batch.empty()) throw DataError("elbo_mc: empty batch");
  if (mc_samples < 1) throw DataError("elbo_mc: need at least one MC draw");
  if (lik.latent_dim() != model.latents) {
    throw DataError("elbo_mc: likelihood latent dimension mismatch");
  }

  const Index n_star = params.inducing_count();
  const Index p = model.latents;
  const Index m_total = p * n_star;
  const ElboWorkspace w = build_workspace(params, model.config.jitter);

  const bool want_grad = grad_out != nullptr;
  const double draw_weight = scale / static_cast<double>(mc_samples);

  // Accumulators for the backward pass.
  Mat d_coreg = Mat::Zero(p, p);
  Mat d_l_coreg = Mat::Zero(p, p);
  Mat d_l_gram = Mat::Zero(n_star, n_star);
  Mat d_s_full = Mat::Zero(m_total, m_total);
  Mat d_mean_blocks = Mat::Zero(n_star, p);
  double d_theta = 0.0;
  Mat d_z_mean = Mat::Zero(n_star, params.input_dim());
  Mat d_z_log_var = Mat::Zero(n_star, params.input_dim());

  double expected_loglik = 0.0;
  Vec f(p), gf(p), eps(p);

  for (Index idx : batch) {
    if (idx < 0 || idx >= static_cast<Index>(inputs.size())) {
      throw DataError("elbo_mc: batch index out of range");
    }
    const DistributionInput& x = inputs[idx];
    const PointMarginal pm = point_marginal(w, x);

    GaussianSampler sampler(mix_seed(seed, static_cast<std::uint64_t>(idx)));
    Vec mu_bar = Vec::Zero(p);
    Mat l_cov_bar = Mat::Zero(p, p);

    double point_loglik = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
      for (Index j = 0; j < p; ++j) eps(j) = sampler();
      f = pm.mu + pm.l_cov.triangularView<Eigen::Lower>() * eps;
      if (want_grad) {
        gf.setZero();
        point_loglik += lik.log_lik(idx, f, &gf);
        gf *= draw_weight;
        mu_bar += gf;
        l_cov_bar += gf * eps.transpose();
      } else {
        point_loglik += lik.log_lik(idx, f, nullptr);
      }
    }
    expected_loglik +=
        scale * point_loglik / static_cast<double>(mc_samples);

    if (!want_grad) continue;

    // Backward through the marginal construction.
    const Mat cov_bar = cholesky_backward(pm.l_cov, tril(l_cov_bar));
    d_coreg += pm.gap * cov_bar;
    const double gap_bar =
        pm.gap_clamped ? 0.0 : (cov_bar.array() * w.coreg.array()).sum();
    const Mat v_bar = 2.0 * cov_bar * pm.v;

    d_l_coreg += v_bar * pm.t.transpose() + mu_bar * pm.g.transpose();
    const Mat t_bar = w.l_coreg.transpose() * v_bar;

    Vec c_bar = Vec::Zero(n_star);
    for (Index q = 0; q < p; ++q) {
      d_s_full.middleRows(q * n_star, n_star).noalias() +=
          pm.c * t_bar.row(q);
      c_bar.noalias() +=
          w.s.middleRows(q * n_star, n_star) * t_bar.row(q).transpose();
    }

    const Vec g_bar = w.l_coreg.transpose() * mu_bar;
    d_mean_blocks.noalias() += pm.c * g_bar.transpose();
    c_bar.noalias() += w.mean_blocks * g_bar;
    c_bar.noalias() += (-2.0 * gap_bar) * pm.c;

    const Vec k_bar = solve_lower_transposed(w.l_gram, c_bar);
    d_l_gram.noalias() -= k_bar * pm.c.transpose();

    // kappa depends on theta only (the input itself is data).
    const SongKernelGrad self = song_kernel_grad(x, x, w.theta);
    d_theta += gap_bar * self.d_theta;
    for (Index i = 0; i < n_star; ++i) {
      const SongKernelGrad kg = song_kernel_grad(w.inducing[i], x, w.theta);
      d_theta += k_bar(i) * kg.d_theta;
      d_z_mean.row(i) += k_bar(i) * kg.d_mean_a.transpose();
      d_z_log_var.row(i) +=
          k_bar(i) *
          (kg.d_var_a.array() * w.inducing[i].var.array()).matrix().transpose();
    }
  }

  const double elbo = expected_loglik - kl_to_prior(params);
  if (!want_grad) return elbo;

  // Gram backward: symmetric sensitivity, each unordered pair hit once.
  const Mat gram_bar = cholesky_backward(w.l_gram, tril(d_l_gram));
  for (Index i = 0; i < n_star; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double weight = (i == j) ? gram_bar(i, i) : 2.0 * gram_bar(i, j);
      if (weight == 0.0) continue;
      const SongKernelGrad kg =
          song_kernel_grad(w.inducing[i], w.inducing[j], w.theta);
      d_theta += weight * kg.d_theta;
      d_z_mean.row(i) += weight * kg.d_mean_a.transpose();
      d_z_mean.row(j) += weight * kg.d_mean_b.transpose();
      d_z_log_var.row(i) +=
          weight *
          (kg.d_var_a.array() * w.inducing[i].var.array()).matrix().transpose();
      d_z_log_var.row(j) +=
          weight *
          (kg.d_var_b.array() * w.inducing[j].var.array()).matrix().transpose();
    }
  }

  d_coreg += cholesky_backward(w.l_coreg, tril(d_l_coreg));

  ParamGrads grads;
  grads.d_log_theta = d_theta * w.theta;
  grads.d_coreg_factor = 2.0 * d_coreg * params.coreg_factor;
  grads.d_coreg_raw_diag =
      (d_coreg.diagonal().array() *
       params.coreg_raw_diag.array().exp())
          .matrix();
  grads.d_inducing_mean = d_z_mean;
  grads.d_inducing_log_var = d_z_log_var;

  // Variational mean: likelihood part minus the KL pull toward the prior.
  grads.d_var_mean = Vec(m_total);
  for (Index q = 0; q < p; ++q) {
    grads.d_var_mean.segment(q * n_star, n_star) = d_mean_blocks.col(q);
  }
  grads.d_var_mean -= params.var_mean;

  grads.d_var_factor = d_s_full;

  // Pack in SvgpParams order.
  Vec& out = *grad_out;
  out.resize(params.param_count());
  Index pos = 0;
  out(pos++) = grads.d_log_theta;
  for (Index i = 0; i < params.coreg_factor.rows(); ++i) {
    for (Index j = 0; j <= std::min(i, params.coreg_factor.cols() - 1); ++j) {
      out(pos++) = grads.d_coreg_factor(i, j);
    }
  }
  for (Index i = 0; i < params.coreg_raw_diag.size(); ++i) {
    out(pos++) = grads.d_coreg_raw_diag(i);
  }
  for (Index j = 0; j < params.inducing_mean.cols(); ++j) {
    for (Index i = 0; i < params.inducing_mean.rows(); ++i) {
      out(pos++) = grads.d_inducing_mean(i, j);
    }
  }
  for (Index j = 0; j < params.inducing_log_var.cols(); ++j) {
    for (Index i = 0; i < params.inducing_log_var.rows(); ++i) {
      out(pos++) = grads.d_inducing_log_var(i, j);
    }
  }
  for (Index i = 0; i < m_total; ++i) out(pos++) = grads.d_var_mean(i);
  for (Index j = 0; j < m_total; ++j) {
    for (Index i = j + 1; i < m_total; ++i) {
      out(pos++) = grads.d_var_factor(i, j) - params.var_factor_strict(i, j);
    }
  }
  const Vec s_diag = params.var_factor_log_diag.array().exp().matrix();
  for (Index i = 0; i < m_total; ++i) {
    out(pos++) = grads.d_var_factor(i, i) * s_diag(i) -
                 (s_diag(i) * s_diag(i) - 1.0);
  }
  return elbo;
}

}  // namespace

double elbo_mc(const GpCalibrator& model, const HeadLikelihood& lik,
               const std::vector<DistributionInput>& inputs,
               const std::vector<Index>& batch, int mc_samples,
               std::uint64_t seed, double scale) {
  return elbo_impl(model, lik, inputs, batch, mc_samples, seed, scale,
                   nullptr);
}

double elbo_mc_grad(const GpCalibrator& model, const HeadLikelihood& lik,
                    const std::vector<DistributionInput>& inputs,
                    const std::vector<Index>& batch, int mc_samples,
                    std::uint64_t seed, double scale, Vec& grad_out) {
  return elbo_impl(model, lik, inputs, batch, mc_samples, seed, scale,
                   &grad_out);
}

GpCalibrator init_svgp(const std::vector<DistributionInput>& inputs,
                       HeadKind head, Index k, const SvgpConfig& config) {
  if (inputs.empty()) throw DataError("init_svgp: empty input set");
  for (const auto& in : inputs) {
    if (in.dim() != k) throw DataError("init_svgp: input dimension mismatch");
  }
  GpCalibrator model;
  model.head = head;
  model.k = k;
  model.latents = latent_count(head, k);
  model.config = config;

  const Index n = static_cast<Index>(inputs.size());
  const Index n_star = std::min<Index>(std::max<Index>(config.inducing, 1), n);
  const Index p = model.latents;
  const Index r =
      config.coreg_rank > 0 ? std::min(config.coreg_rank, p) : p;

  SvgpParams& params = model.params;
  params.log_theta = 0.0;
  params.coreg_factor = Mat::Zero(p, r);
  params.coreg_raw_diag = Vec::Zero(p);
  params.var_mean = Vec::Zero(p * n_star);
  params.var_factor_strict = Mat::Zero(p * n_star, p * n_star);
  params.var_factor_log_diag = Vec::Zero(p * n_star);

  // Small seeded noise on the factor breaks the A = 0 saddle of A A^T.
  GaussianSampler noise(mix_seed(config.seed, 0xC0E6));
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j <= std::min(i, r - 1); ++j) {
      params.coreg_factor(i, j) = 0.01 * noise();
    }
  }

  // Inducing points: seeded subsample of the training inputs.
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(mix_seed(config.seed, 0x1DCE));
  std::shuffle(order.begin(), order.end(), rng);
  params.inducing_mean = Mat(n_star, k);
  params.inducing_log_var = Mat(n_star, k);
  for (Index i = 0; i < n_star; ++i) {
    const DistributionInput& in = inputs[order[i]];
    params.inducing_mean.row(i) = in.mean.transpose();
    params.inducing_log_var.row(i) =
        in.var.cwiseMax(1e-12).array().log().matrix().transpose();
  }
  return model;
}

GpCalibrator fit_svgp(const std::vector<DistributionInput>& inputs,
                      const HeadLikelihood& lik, HeadKind head, Index k,
                      const SvgpConfig& config) {
  GpCalibrator model = init_svgp(inputs, head, k, config);
  if (lik.sample_count() != static_cast<Index>(inputs.size())) {
    throw DataError("fit_svgp: likelihood sample count mismatch");
  }
  const Index n = static_cast<Index>(inputs.size());
  const Index batch_size = std::min<Index>(std::max<Index>(config.batch_size, 1), n);

  Vec x = model.params.pack();
  Vec x_prev = x;
  Vec grad(x.size());
  Vec m1 = Vec::Zero(x.size());
  Vec m2 = Vec::Zero(x.size());
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(config.seed, 0xE70C + epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_sum = 0.0;
    Index batches = 0;
    for (Index start = 0; start < n; start += batch_size) {
      const Index len = std::min(batch_size, n - start);
      std::vector<Index> batch(order.begin() + start,
                               order.begin() + start + len);
      const double scale = static_cast<double>(n) / static_cast<double>(len);

      model.params.set_flat(x);
      double elbo = std::numeric_limits<double>::quiet_NaN();
      try {
        elbo = elbo_mc_grad(
            model, lik, inputs, batch, config.mc_samples,
            mix_seed(config.seed, 0xBA7C + static_cast<std::uint64_t>(step)),
            scale, grad);
      } catch (const std::exception&) {
        // Exploding parameters can break the kernel evaluation outright;
        // configuration errors surface on the very first step instead.
        if (step == 0) throw;
      }
      if (!std::isfinite(elbo) || !grad.allFinite()) {
        model.params.set_flat(x_prev);
        model.diverged = true;
        model.fitted = true;
        return model;
      }
      x_prev = x;

      ++step;
      const double bias1 = 1.0 - std::pow(kBeta1, step);
      const double bias2 = 1.0 - std::pow(kBeta2, step);
      m1 = kBeta1 * m1 + (1.0 - kBeta1) * grad;
      m2 = kBeta2 * m2 + (1.0 - kBeta2) * grad.cwiseProduct(grad).eval();
      // Ascent on the ELBO.
      x.array() += config.learning_rate * (m1.array() / bias1) /
                   ((m2.array() / bias2).sqrt() + kAdamEps);

      epoch_sum += elbo;
      ++batches;
    }
    model.training_log.push_back(epoch_sum / static_cast<double>(batches));
  }
  model.params.set_flat(x);
  model.fitted = true;
  return model;
}

PosteriorOperator::PosteriorOperator(const GpCalibrator& model) {
  if (!model.fitted) {
    throw DataError("PosteriorOperator: calibrator is not fitted");
  }
  const SvgpParams& params = model.params;
  theta_ = std::exp(params.log_theta);
  const Mat coreg = params.coregionalization();
  if (!try_cholesky(coreg, l_coreg_)) {
    throw NumericError("PosteriorOperator: coregionalization not SPD");
  }
  inducing_ = params.inducing_inputs();
  l_gram_ = gram_cholesky(inducing_, theta_, model.config.jitter).lower;
  factor_ = params.variational_factor();
  p_ = model.latents;
  n_star_ = params.inducing_count();
  mean_blocks_ = Mat(n_star_, p_);
  for (Index q = 0; q < p_; ++q) {
    mean_blocks_.col(q) = params.var_mean.segment(q * n_star_, n_star_);
  }
}

MarginalPosterior PosteriorOperator::marginal(
    const DistributionInput& x) const {
  Vec k(n_star_);
  for (Index i = 0; i < n_star_; ++i) {
    k(i) = song_kernel(inducing_[i], x, theta_);
  }
  const double kappa = song_kernel(x, x, theta_);
  const Vec c = solve_lower(l_gram_, k);
  const double gap = std::max(kappa - c.squaredNorm(), 0.0);

  MarginalPosterior out;
  out.mu = l_coreg_ * (mean_blocks_.transpose() * c);
  Mat t(p_, p_ * n_star_);
  for (Index q = 0; q < p_; ++q) {
    t.row(q) = c.transpose() * factor_.middleRows(q * n_star_, n_star_);
  }
  const Mat v = l_coreg_ * t;
  out.cov = l_coreg_ * l_coreg_.transpose() * gap + v * v.transpose();
  out.cov.diagonal().array() += kMarginalJitter;
  return out;
}

Mat posterior_weight_samples(const PosteriorOperator& op,
                             const DistributionInput& x, int mc_samples,
                             std::uint64_t seed) {
  if (mc_samples < 1) {
    throw DataError("posterior_weight_samples: need at least one draw");
  }
  const MarginalPosterior marg = op.marginal(x);
  const Index p = marg.mu.size();
  Mat lower;
  if (!try_cholesky(marg.cov, lower)) {
    throw NumericError("posterior_weight_samples: covariance not SPD");
  }
  GaussianSampler sampler(seed);
  Mat draws(mc_samples, p);
  Vec eps(p);
  for (int s = 0; s < mc_samples; ++s) {
    for (Index j = 0; j < p; ++j) eps(j) = sampler();
    draws.row(s) =
        (marg.mu + lower.triangularView<Eigen::Lower>() * eps).transpose();
  }
  return draws;
}

Mat posterior_weight_samples(const GpCalibrator& model,
                             const DistributionInput& x, int mc_samples,
                             std::uint64_t seed) {
  const PosteriorOperator op(model);
  return posterior_weight_samples(op, x, mc_samples, seed);
}

}  // namespace recal::gp
