// recal: post-hoc uncertainty recalibration for probabilistic regression.
//
// Subcommands: synth, match, fit, apply, eval. All commands are
// deterministic given their flags and seed; reruns produce byte-identical
// outputs. Exit codes: 0 ok, 2 usage or data error, 3 numerical failure.

#include "CLI11.hpp"

#include "recal/detection.hpp"
#include "recal/metrics.hpp"
#include "recal/model_io.hpp"
#include "recal/report.hpp"
#include "recal/synth.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace recal;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("RECAL_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw DataError("RECAL_SEED must be an unsigned integer");
    }
  }
  return 42;
}

QuantileGrid parse_levels(const std::string& text) {
  double lo = 0.0, hi = 0.0, step = 0.0;
  char c1 = 0, c2 = 0;
  std::istringstream is(text);
  if (!(is >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':') {
    throw DataError("levels must be of the form lo:hi:step");
  }
  if (hi < lo) throw DataError("levels: hi must be >= lo");
  return QuantileGrid::regular(lo, hi, step);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << text;
}

int cmd_synth(const std::string& kind, Index n, std::uint64_t seed,
              double miscal, double rho, Index dim, bool full_cov,
              const std::string& output) {
  SynthConfig config;
  config.kind = parse_synth_kind(kind);
  config.n = n;
  config.seed = seed;
  config.miscal = miscal;
  config.rho = rho;
  config.dim = dim;
  config.full_cov_predictions = full_cov;
  const CalibrationDataset data = generate(config);
  write_dataset_jsonl(output, data);
  std::cout << "wrote " << data.size() << " samples to " << output << "\n";
  return 0;
}

int cmd_match(const std::string& det_path, const std::string& gt_path,
              double iou_threshold, bool no_category, bool corner_boxes,
              bool split_half, std::uint64_t seed, const std::string& output,
              const std::string& train_out, const std::string& eval_out) {
  MatchConfig config;
  config.iou_threshold = iou_threshold;
  config.category_strict = !no_category;
  const auto detections = read_detections_jsonl(det_path, corner_boxes);
  const auto ground_truths = read_ground_truths_jsonl(gt_path, corner_boxes);
  const MatchedDataset matched = match(detections, ground_truths, config);
  std::cout << "matched " << matched.report.matched << " pairs ("
            << matched.report.unmatched_detections << " detections and "
            << matched.report.unmatched_ground_truths
            << " ground truths unmatched)\n";
  if (matched.report.matched == 0) {
    throw DataError("match: no pairs at this IoU threshold");
  }
  if (split_half) {
    if (train_out.empty() || eval_out.empty()) {
      throw DataError("--split-half requires --train-output and --eval-output");
    }
    const auto [train, eval] = half_split(matched, seed);
    write_dataset_jsonl(train_out, train);
    write_dataset_jsonl(eval_out, eval);
    std::cout << "train: " << train.size() << " samples, eval: " << eval.size()
              << " samples\n";
  } else {
    if (output.empty()) throw DataError("match requires --output");
    write_dataset_jsonl(output, matched.data);
  }
  return 0;
}

int cmd_fit(const std::string& method_name, const std::string& input,
            const std::string& output, const FitOptions& options) {
  const Method method = parse_method(method_name);
  const CalibrationDataset dataset = read_dataset_jsonl(input);
  const Model model = fit_model(method, dataset, options);
  if (model.diverged()) {
    save_model(output, model);
    throw NumericError("fit diverged; last valid state written to " + output);
  }
  save_model(output, model);

  const auto calibrated =
      apply_model(model, dataset, options.config.mc_samples, model.seed);
  std::cout << "train nll: " << nll(calibrated, dataset.ground_truth) << "\n";
  if (model.scaler.has_value() && model.scaler->clamped) {
    std::cerr << "warning: variance scaling weight clamped at 1e-8 "
                 "(degenerate residuals)\n";
  }
  return 0;
}

int cmd_apply(const std::string& model_path, const std::string& input,
              const std::string& output, int mc_samples, std::uint64_t seed) {
  const Model model = load_model(model_path);
  const CalibrationDataset dataset = read_dataset_jsonl(input);
  const auto calibrated = apply_model(model, dataset, mc_samples, seed);
  write_calibrated_jsonl(output, calibrated, dataset.ground_truth);
  std::cout << "calibrated " << dataset.size() << " samples\n";
  return 0;
}

int cmd_eval(const std::string& input, const std::string& report_path,
             const std::string& curves_path, Index bins,
             const std::string& levels,
             const std::vector<std::string>& metrics) {
  const LoadedPredictions loaded = read_predictions_jsonl(input);
  EvalOptions opts;
  opts.bins = bins;
  opts.levels = parse_levels(levels);
  opts.metrics = metrics;
  const std::string report =
      build_report_json(loaded.predictions, loaded.ground_truth, opts);
  if (report_path.empty()) {
    std::cout << report;
  } else {
    write_text(report_path, report);
  }
  if (!curves_path.empty()) {
    write_text(curves_path, reliability_csv(loaded.predictions,
                                            loaded.ground_truth, opts.levels));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"post-hoc uncertainty recalibration for probabilistic "
               "regression and object detection"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  try {
    seed = default_seed();
  } catch (const recal::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_kind = "cosine", synth_out;
  recal::Index synth_n = 1000, synth_dim = 1;
  double synth_miscal = 1.0, synth_rho = 0.0;
  bool synth_full_cov = false;
  synth->add_option("--kind", synth_kind,
                    "cosine|cosine-const-var|gaussian-const-miscal|"
                    "cauchy-noise|correlated-mv");
  synth->add_option("--n", synth_n, "sample count");
  synth->add_option("--seed", seed, "rng seed");
  synth->add_option("--miscal", synth_miscal, "miscalibration factor");
  synth->add_option("--rho", synth_rho, "correlation (correlated-mv)");
  auto* synth_dim_opt =
      synth->add_option("--dim", synth_dim, "dimension count");
  synth->add_flag("--full-cov", synth_full_cov,
                  "emit true covariances (correlated-mv)");
  synth->add_option("--output", synth_out, "output JSON-lines file")
      ->required();

  // match
  auto* match_cmd =
      app.add_subcommand("match", "match detections to ground truth by IoU");
  std::string det_path, gt_path, match_out, train_out, eval_out;
  double iou_threshold = 0.5;
  bool no_category = false, corner_boxes = false, split_half = false;
  match_cmd->add_option("--detections", det_path, "detections JSON-lines")
      ->required();
  match_cmd->add_option("--ground-truth", gt_path, "ground truth JSON-lines")
      ->required();
  match_cmd->add_option("--iou", iou_threshold, "IoU threshold (default 0.5)");
  match_cmd->add_flag("--no-category-strict", no_category,
                      "match across categories");
  match_cmd->add_flag("--corner-boxes", corner_boxes,
                      "boxes given as (x1,y1,x2,y2)");
  match_cmd->add_flag("--split-half", split_half,
                      "write disjoint train/eval halves split by image");
  match_cmd->add_option("--seed", seed, "split hash seed");
  match_cmd->add_option("--output", match_out, "matched dataset output");
  match_cmd->add_option("--train-output", train_out, "train half output");
  match_cmd->add_option("--eval-output", eval_out, "eval half output");

  // fit
  auto* fit = app.add_subcommand("fit", "fit a calibration model");
  std::string fit_method, fit_input, fit_output;
  recal::FitOptions options;
  fit->add_option("--method", fit_method,
                  "isotonic|var-scaling|gp-beta|gp-normal|gp-normal-mv|"
                  "gp-cauchy|gp-cov-est|gp-cov-recal")
      ->required();
  fit->add_option("--input", fit_input, "training dataset JSON-lines")
      ->required();
  fit->add_option("--output", fit_output, "model JSON output")->required();
  fit->add_option("--inducing", options.config.inducing,
                  "inducing point count (default 50)");
  fit->add_option("--epochs", options.config.epochs, "epochs (default 200)");
  fit->add_option("--lr", options.config.learning_rate,
                  "learning rate (default 0.01)");
  fit->add_option("--mc-samples", options.config.mc_samples,
                  "MC draws (default 128)");
  fit->add_option("--batch", options.config.batch_size,
                  "batch size (default 256)");
  fit->add_option("--rank", options.config.coreg_rank,
                  "coregionalization rank (default: full)");
  fit->add_option("--jitter", options.config.jitter,
                  "kernel jitter (default 1e-6)");
  fit->add_option("--grid", options.grid_points,
                  "output CDF grid size (default 512)");
  fit->add_option("--seed", seed, "rng seed");

  // apply
  auto* apply = app.add_subcommand("apply", "apply a fitted model");
  std::string apply_model_path, apply_input, apply_output;
  int apply_mc = 128;
  apply->add_option("--model", apply_model_path, "model JSON")->required();
  apply->add_option("--input", apply_input, "dataset JSON-lines")->required();
  apply->add_option("--output", apply_output, "calibrated JSON-lines")
      ->required();
  apply->add_option("--mc-samples", apply_mc, "MC draws (default 128)");
  apply->add_option("--seed", seed, "rng seed");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate calibration metrics");
  std::string eval_input, eval_report, eval_curves, eval_levels =
      "0.05:0.95:0.05";
  std::vector<std::string> eval_metrics;
  recal::Index eval_bins = 20;
  eval->add_option("--input", eval_input, "calibrated or raw JSON-lines")
      ->required();
  eval->add_option("--report", eval_report, "report JSON output (default stdout)");
  eval->add_option("--curves", eval_curves, "reliability CSV output");
  eval->add_option("--bins", eval_bins, "bin count (default 20)");
  eval->add_option("--levels", eval_levels, "quantile grid lo:hi:step");
  eval->add_option("--metrics", eval_metrics,
                   "metric families to report (default: all of "
                   "nll,pinball,qce,uce,ence)")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      if (synth_kind == "correlated-mv" && synth_dim_opt->count() == 0) {
        synth_dim = 2;
      }
      return cmd_synth(synth_kind, synth_n, seed, synth_miscal, synth_rho,
                       synth_dim, synth_full_cov, synth_out);
    }
    if (match_cmd->parsed()) {
      return cmd_match(det_path, gt_path, iou_threshold, no_category,
                       corner_boxes, split_half, seed, match_out, train_out,
                       eval_out);
    }
    if (fit->parsed()) {
      options.config.seed = seed;
      return cmd_fit(fit_method, fit_input, fit_output, options);
    }
    if (apply->parsed()) {
      return cmd_apply(apply_model_path, apply_input, apply_output, apply_mc,
                       seed);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_input, eval_report, eval_curves, eval_bins,
                      eval_levels, eval_metrics);
    }
  } catch (const recal::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const recal::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
