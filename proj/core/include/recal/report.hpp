#pragma once

#include "recal/metrics.hpp"

#include <string>

namespace recal {

struct EvalOptions {
  Index bins = 20;
  QuantileGrid levels = QuantileGrid::regular(0.05, 0.95, 0.05);
  /// Metric families to include; empty selects all of
  /// {nll, pinball, qce, uce, ence}. Unknown names are rejected.
  std::vector<std::string> metrics;
};

/// Flat JSON object keyed by metric name and dimension index. UCE/ENCE are
/// omitted (with a note) for Cauchy outputs; the multivariate QCE is
/// reported for all-Gaussian predictions with K >= 2.
std::string build_report_json(const Predictions& preds, const Mat& gt,
                              const EvalOptions& opts);

/// CSV with one row per level: tau, coverage_dim0, ..., coverage_dim{K-1}.
std::string reliability_csv(const Predictions& preds, const Mat& gt,
                            const QuantileGrid& levels);

}  // namespace recal
