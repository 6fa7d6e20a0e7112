#include "recal/report.hpp"

#include "json.hpp"

#include <set>
#include <sstream>
#include <variant>

namespace recal {

using nlohmann::json;

namespace {

const std::set<std::string> kMetricFamilies = {"nll", "pinball", "qce", "uce",
                                               "ence"};

std::set<std::string> selected_metrics(const EvalOptions& opts) {
  if (opts.metrics.empty()) return kMetricFamilies;
  std::set<std::string> selected;
  for (const auto& name : opts.metrics) {
    if (!kMetricFamilies.count(name)) {
      throw DataError("unknown metric name '" + name + "'");
    }
    selected.insert(name);
  }
  return selected;
}

}  // namespace

std::string build_report_json(const Predictions& preds, const Mat& gt,
                              const EvalOptions& opts) {
  opts.levels.validate();
  const std::set<std::string> wanted = selected_metrics(opts);
  const Index k = gt.cols();

  bool any_cauchy = false;
  bool all_gaussian = true;
  for (const auto& p : preds) {
    any_cauchy = any_cauchy || std::holds_alternative<CauchyPrediction>(p);
    all_gaussian =
        all_gaussian && std::holds_alternative<GaussianPrediction>(p);
  }

  json report;
  report["schema"] = "recal-report-v1";
  report["n"] = static_cast<long long>(gt.rows());
  report["k"] = static_cast<long long>(k);
  report["bins"] = static_cast<long long>(opts.bins);
  report["levels"] = opts.levels.levels;
  report["binning"] = "equal_frequency";
  report["empty_bins"] = "zero_weight";
  json notes = json::array();

  auto dim_key = [](const char* name, Index d) {
    std::ostringstream os;
    os << name << "_dim" << d;
    return os.str();
  };

  if (wanted.count("nll")) {
    double nll_sum = 0.0;
    for (Index d = 0; d < k; ++d) {
      const double v = nll_dim(preds, gt, d);
      report[dim_key("nll", d)] = v;
      nll_sum += v;
    }
    report["nll_mean"] = nll_sum / static_cast<double>(k);
    report["nll_multivariate"] = nll(preds, gt);
  }

  if (wanted.count("pinball")) {
    double pin_sum = 0.0;
    for (Index d = 0; d < k; ++d) {
      double acc = 0.0;
      for (double tau : opts.levels.levels) {
        acc += pinball_dim(preds, gt, tau, d);
      }
      acc /= static_cast<double>(opts.levels.levels.size());
      report[dim_key("pinball_mean", d)] = acc;
      pin_sum += acc;
    }
    report["pinball_mean"] = pin_sum / static_cast<double>(k);
  }

  if (wanted.count("qce")) {
    double qce_sum = 0.0;
    for (Index d = 0; d < k; ++d) {
      const double v = qce_mean_dim(preds, gt, opts.levels, opts.bins, d);
      report[dim_key("qce_mean", d)] = v;
      qce_sum += v;
    }
    report["qce_mean"] = qce_sum / static_cast<double>(k);

    if (all_gaussian && k >= 2) {
      report["qce_mean_multivariate"] =
          qce_mean_multivariate(preds, gt, opts.levels, opts.bins);
    }
  }

  if (wanted.count("uce") || wanted.count("ence")) {
    if (any_cauchy) {
      notes.push_back(
          "uce/ence omitted: the Cauchy distribution has no variance defined");
    } else {
      double uce_sum = 0.0, ence_sum = 0.0;
      for (Index d = 0; d < k; ++d) {
        if (wanted.count("uce")) {
          const double u = uce_dim(preds, gt, opts.bins, d);
          report[dim_key("uce", d)] = u;
          uce_sum += u;
        }
        if (wanted.count("ence")) {
          const double e = ence_dim(preds, gt, opts.bins, d);
          report[dim_key("ence", d)] = e;
          ence_sum += e;
        }
      }
      if (wanted.count("uce")) {
        report["uce_mean"] = uce_sum / static_cast<double>(k);
      }
      if (wanted.count("ence")) {
        report["ence_mean"] = ence_sum / static_cast<double>(k);
      }
    }
  }

  report["notes"] = std::move(notes);
  return report.dump(2) + "\n";
}

std::string reliability_csv(const Predictions& preds, const Mat& gt,
                            const QuantileGrid& levels) {
  const Index k = gt.cols();
  std::vector<std::vector<std::pair<double, double>>> curves;
  curves.reserve(k);
  for (Index d = 0; d < k; ++d) {
    curves.push_back(reliability_curve(preds, gt, levels, d));
  }
  std::ostringstream os;
  os.precision(12);
  os << "tau";
  for (Index d = 0; d < k; ++d) os << ",coverage_dim" << d;
  os << '\n';
  for (std::size_t row = 0; row < levels.levels.size(); ++row) {
    os << curves[0][row].first;
    for (Index d = 0; d < k; ++d) os << ',' << curves[d][row].second;
    os << '\n';
  }
  return os.str();
}

}  // namespace recal
