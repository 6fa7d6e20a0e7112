#include "recal/model_io.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace recal {

using nlohmann::json;

const char* method_name(Method method) {
  switch (method) {
    case Method::isotonic: return "isotonic";
    case Method::var_scaling: return "var-scaling";
    case Method::gp_beta: return "gp-beta";
    case Method::gp_normal: return "gp-normal";
    case Method::gp_normal_mv: return "gp-normal-mv";
    case Method::gp_cauchy: return "gp-cauchy";
    case Method::gp_cov_est: return "gp-cov-est";
    case Method::gp_cov_recal: return "gp-cov-recal";
  }
  throw DataError("method_name: unknown method");
}

Method parse_method(const std::string& name) {
  if (name == "isotonic") return Method::isotonic;
  if (name == "var-scaling") return Method::var_scaling;
  if (name == "gp-beta") return Method::gp_beta;
  if (name == "gp-normal") return Method::gp_normal;
  if (name == "gp-normal-mv") return Method::gp_normal_mv;
  if (name == "gp-cauchy") return Method::gp_cauchy;
  if (name == "gp-cov-est") return Method::gp_cov_est;
  if (name == "gp-cov-recal") return Method::gp_cov_recal;
  throw DataError("unknown method '" + name + "'");
}

bool Model::diverged() const {
  if (gp_joint.has_value() && gp_joint->diverged) return true;
  for (const auto& g : gp_dims) {
    if (g.diverged) return true;
  }
  return false;
}

Model fit_model(Method method, const CalibrationDataset& dataset,
                const FitOptions& options) {
  dataset.validate();
  Model model;
  model.method = method;
  model.k = dataset.dim();
  model.seed = options.config.seed;
  model.grid_points = options.grid_points;
  model.config = options.config;

  switch (method) {
    case Method::isotonic:
      model.isotonic = isotonic_fit(dataset);
      break;
    case Method::var_scaling:
      model.scaler = variance_scaling_fit(dataset);
      break;
    case Method::gp_beta:
      model.gp_joint =
          gp::fit_gp_joint(dataset, gp::HeadKind::beta, options.config);
      break;
    case Method::gp_normal_mv:
      model.gp_joint =
          gp::fit_gp_joint(dataset, gp::HeadKind::normal_mv, options.config);
      break;
    case Method::gp_normal:
      model.gp_dims =
          gp::fit_gp_per_dim(dataset, gp::HeadKind::normal, options.config);
      break;
    case Method::gp_cauchy:
      model.gp_dims =
          gp::fit_gp_per_dim(dataset, gp::HeadKind::cauchy, options.config);
      break;
    case Method::gp_cov_est:
    case Method::gp_cov_recal: {
      const bool recal = method == Method::gp_cov_recal;
      auto cov = gp::fit_gp_covariance(dataset, options.config, recal);
      model.gp_joint = std::move(cov.gp);
      model.tmpl = std::move(cov.tmpl);
      model.recalibration = recal;
      break;
    }
  }
  return model;
}

// --- serialization -----------------------------------------------------------

namespace {

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json mat_to_json(const Mat& m) {
  json arr = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    arr.push_back(std::move(row));
  }
  return arr;
}

Vec vec_from_json(const json& arr) {
  Vec v(static_cast<Index>(arr.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = arr[i].get<double>();
  return v;
}

Mat mat_from_json(const json& arr) {
  const Index rows = static_cast<Index>(arr.size());
  const Index cols = rows > 0 ? static_cast<Index>(arr[0].size()) : 0;
  Mat m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = arr[r][c].get<double>();
  }
  return m;
}

json config_to_json(const gp::SvgpConfig& config) {
  json j;
  j["inducing"] = static_cast<long long>(config.inducing);
  j["epochs"] = config.epochs;
  j["learning_rate"] = config.learning_rate;
  j["mc_samples"] = config.mc_samples;
  j["batch_size"] = static_cast<long long>(config.batch_size);
  j["seed"] = config.seed;
  j["coreg_rank"] = static_cast<long long>(config.coreg_rank);
  j["jitter"] = config.jitter;
  return j;
}

gp::SvgpConfig config_from_json(const json& j) {
  gp::SvgpConfig config;
  config.inducing = j.at("inducing").get<Index>();
  config.epochs = j.at("epochs").get<int>();
  config.learning_rate = j.at("learning_rate").get<double>();
  config.mc_samples = j.at("mc_samples").get<int>();
  config.batch_size = j.at("batch_size").get<Index>();
  config.seed = j.at("seed").get<std::uint64_t>();
  config.coreg_rank = j.at("coreg_rank").get<Index>();
  config.jitter = j.at("jitter").get<double>();
  return config;
}

json gp_to_json(const gp::GpCalibrator& g) {
  json j;
  j["head"] = gp::head_name(g.head);
  j["k"] = static_cast<long long>(g.k);
  j["latents"] = static_cast<long long>(g.latents);
  j["fitted"] = g.fitted;
  j["diverged"] = g.diverged;
  j["log_theta"] = g.params.log_theta;
  j["coreg_factor"] = mat_to_json(g.params.coreg_factor);
  j["coreg_raw_diag"] = vec_to_json(g.params.coreg_raw_diag);
  j["inducing_mean"] = mat_to_json(g.params.inducing_mean);
  j["inducing_log_var"] = mat_to_json(g.params.inducing_log_var);
  j["var_mean"] = vec_to_json(g.params.var_mean);
  j["var_factor_strict"] = mat_to_json(g.params.var_factor_strict);
  j["var_factor_log_diag"] = vec_to_json(g.params.var_factor_log_diag);
  j["training_log"] = g.training_log;
  j["config"] = config_to_json(g.config);
  return j;
}

gp::GpCalibrator gp_from_json(const json& j) {
  gp::GpCalibrator g;
  g.head = gp::parse_head(j.at("head").get<std::string>());
  g.k = j.at("k").get<Index>();
  g.latents = j.at("latents").get<Index>();
  g.fitted = j.at("fitted").get<bool>();
  g.diverged = j.at("diverged").get<bool>();
  g.params.log_theta = j.at("log_theta").get<double>();
  g.params.coreg_factor = mat_from_json(j.at("coreg_factor"));
  g.params.coreg_raw_diag = vec_from_json(j.at("coreg_raw_diag"));
  g.params.inducing_mean = mat_from_json(j.at("inducing_mean"));
  g.params.inducing_log_var = mat_from_json(j.at("inducing_log_var"));
  g.params.var_mean = vec_from_json(j.at("var_mean"));
  g.params.var_factor_strict = mat_from_json(j.at("var_factor_strict"));
  g.params.var_factor_log_diag = vec_from_json(j.at("var_factor_log_diag"));
  g.training_log = j.at("training_log").get<std::vector<double>>();
  g.config = config_from_json(j.at("config"));
  return g;
}

}  // namespace

void save_model(const std::string& path, const Model& model) {
  json j;
  j["format_version"] = 1;
  j["method"] = method_name(model.method);
  j["k"] = static_cast<long long>(model.k);
  j["seed"] = model.seed;
  j["grid_points"] = static_cast<long long>(model.grid_points);
  j["config"] = config_to_json(model.config);

  json payload;
  if (model.isotonic.has_value()) {
    json dims = json::array();
    for (Index d = 0; d < model.isotonic->dim(); ++d) {
      json entry;
      entry["breakpoints"] = vec_to_json(model.isotonic->breakpoints[d]);
      entry["values"] = vec_to_json(model.isotonic->values[d]);
      dims.push_back(std::move(entry));
    }
    payload["dims"] = std::move(dims);
  }
  if (model.scaler.has_value()) {
    payload["weights"] = vec_to_json(model.scaler->weights);
    payload["clamped"] = model.scaler->clamped;
  }
  if (!model.gp_dims.empty()) {
    json dims = json::array();
    for (const auto& g : model.gp_dims) dims.push_back(gp_to_json(g));
    payload["gp_dims"] = std::move(dims);
  }
  if (model.gp_joint.has_value()) {
    payload["gp"] = gp_to_json(*model.gp_joint);
  }
  if (model.tmpl.has_value()) {
    payload["template_rho"] = mat_to_json(model.tmpl->rho);
  }
  payload["recalibration"] = model.recalibration;
  j["payload"] = std::move(payload);

  std::ofstream out(path);
  if (!out) throw DataError("cannot open model file for writing: " + path);
  out << j.dump(2) << '\n';
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DataError("malformed model file: " + path);
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
    throw DataError("unsupported model format_version in " + path);
  }

  Model model;
  model.method = parse_method(j.at("method").get<std::string>());
  model.k = j.at("k").get<Index>();
  model.seed = j.at("seed").get<std::uint64_t>();
  model.grid_points = j.at("grid_points").get<Index>();
  model.config = config_from_json(j.at("config"));

  const json& payload = j.at("payload");
  if (payload.contains("dims")) {
    IsotonicCalibrator calib;
    for (const auto& entry : payload["dims"]) {
      calib.breakpoints.push_back(vec_from_json(entry.at("breakpoints")));
      calib.values.push_back(vec_from_json(entry.at("values")));
    }
    calib.validate();
    model.isotonic = std::move(calib);
  }
  if (payload.contains("weights")) {
    VarianceScaler scaler;
    scaler.weights = vec_from_json(payload["weights"]);
    scaler.clamped = payload.value("clamped", false);
    model.scaler = std::move(scaler);
  }
  if (payload.contains("gp_dims")) {
    for (const auto& entry : payload["gp_dims"]) {
      model.gp_dims.push_back(gp_from_json(entry));
    }
  }
  if (payload.contains("gp")) {
    model.gp_joint = gp_from_json(payload["gp"]);
  }
  if (payload.contains("template_rho")) {
    gp::CorrelationTemplate tmpl;
    tmpl.rho = mat_from_json(payload["template_rho"]);
    model.tmpl = std::move(tmpl);
  }
  model.recalibration = payload.value("recalibration", false);
  return model;
}

// --- application -------------------------------------------------------------

ModelApplier::ModelApplier(const Model& model) : model_(&model) {
  switch (model.method) {
    case Method::isotonic:
      if (!model.isotonic.has_value()) {
        throw DataError("model file missing the isotonic payload");
      }
      break;
    case Method::var_scaling:
      if (!model.scaler.has_value()) {
        throw DataError("model file missing the variance scaling payload");
      }
      break;
    case Method::gp_normal:
    case Method::gp_cauchy:
      if (model.gp_dims.size() != static_cast<std::size_t>(model.k)) {
        throw DataError("model file missing per-dimension GP payloads");
      }
      break;
    case Method::gp_cov_est:
      if (!model.tmpl.has_value()) {
        throw DataError("model file missing the correlation template");
      }
      [[fallthrough]];
    default:
      if (!model.gp_joint.has_value()) {
        throw DataError("model file missing the GP payload");
      }
  }
  if (model.gp_joint.has_value()) {
    ops_.emplace_back(*model.gp_joint);
  }
  for (const auto& g : model.gp_dims) ops_.emplace_back(g);
}

PredictiveDistribution ModelApplier::apply(const GaussianPrediction& pred,
                                           int mc_samples,
                                           std::uint64_t seed) const {
  const Model& model = *model_;
  if (pred.dim() != model.k) {
    throw DataError("apply: prediction dimension mismatch with model");
  }
  switch (model.method) {
    case Method::isotonic:
      return isotonic_apply(*model.isotonic, pred, model.grid_points);
    case Method::var_scaling:
      return variance_scaling_apply(*model.scaler, pred);
    case Method::gp_beta:
      return gp_beta_apply(*model.gp_joint, ops_[0], pred, mc_samples, seed,
                           model.grid_points);
    case Method::gp_normal_mv:
      return gp_normal_apply(*model.gp_joint, ops_[0], pred, mc_samples, seed);
    case Method::gp_cov_est:
      return covariance_head_apply(*model.gp_joint, ops_[0], pred,
                                   &*model.tmpl, mc_samples, seed);
    case Method::gp_cov_recal:
      return covariance_head_apply(*model.gp_joint, ops_[0], pred, nullptr,
                                   mc_samples, seed);
    case Method::gp_normal: {
      Vec variances(model.k), means = pred.mean;
      for (Index d = 0; d < model.k; ++d) {
        Vec m(1), v(1);
        m(0) = pred.mean(d);
        v(0) = pred.variance(d);
        const auto out = gp_normal_apply(
            model.gp_dims[d], ops_[d], GaussianPrediction::diagonal(m, v),
            mc_samples, mix_seed(seed, 0xD0 + static_cast<std::uint64_t>(d)));
        variances(d) = out.variances(0);
      }
      return GaussianPrediction::diagonal(means, variances);
    }
    case Method::gp_cauchy: {
      CauchyPrediction out;
      out.location = pred.mean;
      out.scale = Vec(model.k);
      for (Index d = 0; d < model.k; ++d) {
        Vec m(1), v(1);
        m(0) = pred.mean(d);
        v(0) = pred.variance(d);
        const auto c = gp_cauchy_apply(
            model.gp_dims[d], ops_[d], GaussianPrediction::diagonal(m, v),
            mc_samples, mix_seed(seed, 0xD0 + static_cast<std::uint64_t>(d)));
        out.scale(d) = c.scale(0);
      }
      out.validate();
      return out;
    }
  }
  throw DataError("apply: unknown method");
}

std::vector<PredictiveDistribution> apply_model(
    const Model& model, const CalibrationDataset& dataset, int mc_samples,
    std::uint64_t seed) {
  dataset.validate();
  const ModelApplier applier(model);
  std::vector<PredictiveDistribution> out;
  out.reserve(dataset.predictions.size());
  for (Index i = 0; i < dataset.size(); ++i) {
    out.push_back(applier.apply(dataset.predictions[i], mc_samples,
                                mix_seed(seed, static_cast<std::uint64_t>(i))));
  }
  return out;
}

}  // namespace recal
