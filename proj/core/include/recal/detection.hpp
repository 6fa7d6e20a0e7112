#pragma once

#include "recal/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace recal {

/// One detector output: box in (cx, cy, w, h) pixels with per-quantity
/// variances and an optional full 4x4 covariance.
struct DetectionRecord {
  std::string image_id;
  std::string category;
  Eigen::Vector4d box_mean;
  Eigen::Vector4d box_var;
  std::optional<Eigen::Matrix4d> box_cov;
  double score = 0.0;

  void validate() const;
};

struct GroundTruthRecord {
  std::string image_id;
  std::string category;
  Eigen::Vector4d box;

  void validate() const;
};

struct MatchConfig {
  double iou_threshold = 0.5;
  bool category_strict = true;
};

/// Intersection over union of two (cx, cy, w, h) boxes.
double iou(const Eigen::Vector4d& a, const Eigen::Vector4d& b);

struct MatchReport {
  Index matched = 0;
  Index unmatched_detections = 0;
  Index unmatched_ground_truths = 0;
};

/// Matched pairs with per-sample image provenance, which the half split
/// keys on so one image never leaks across train/eval.
struct MatchedDataset {
  CalibrationDataset data;  // K = 4 targets (cx, cy, w, h)
  std::vector<std::string> image_ids;
  MatchReport report;
};

/// Greedy matching per image (and category when strict): detections in
/// descending score order each take the best remaining ground truth with
/// IoU >= threshold. Deterministic regardless of input order.
MatchedDataset match(const std::vector<DetectionRecord>& detections,
                     const std::vector<GroundTruthRecord>& ground_truths,
                     const MatchConfig& config);

/// Deterministic half split keyed on hashed image ids: first half of the
/// samples (in hash order) trains, the rest evaluates.
std::pair<CalibrationDataset, CalibrationDataset> half_split(
    const MatchedDataset& matched, std::uint64_t seed);

// --- JSON-lines formats ------------------------------------------------------
// detections  {"image_id","category","box_mean":[4],"box_var":[4],
//              "box_cov":[[4x4]]?,"score"}
// ground truth {"image_id","category","box":[4]}
// dataset      {"mean":[K],"var":[K],"cov":[[KxK]]?,"gt":[K]}
// calibrated   dataset lines, or {"dist":"cauchy","loc","scale","gt"} /
//              {"dist":"grid","support","cdf","gt"} for non-Gaussian outputs.

std::vector<DetectionRecord> read_detections_jsonl(const std::string& path,
                                                   bool corner_boxes = false);
std::vector<GroundTruthRecord> read_ground_truths_jsonl(
    const std::string& path, bool corner_boxes = false);

CalibrationDataset read_dataset_jsonl(const std::string& path);
void write_dataset_jsonl(const std::string& path,
                         const CalibrationDataset& dataset);

struct LoadedPredictions {
  std::vector<PredictiveDistribution> predictions;
  Mat ground_truth;
};

LoadedPredictions read_predictions_jsonl(const std::string& path);
void write_calibrated_jsonl(const std::string& path,
                            const std::vector<PredictiveDistribution>& preds,
                            const Mat& ground_truth);

}  // namespace recal
