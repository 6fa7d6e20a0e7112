#include "recal/detection.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace recal {

using nlohmann::json;

namespace {

void check_box(const Eigen::Vector4d& box, const char* who) {
  if (!box.allFinite()) throw DataError(std::string(who) + ": non-finite box");
  if (box(2) <= 0.0 || box(3) <= 0.0) {
    throw DataError(std::string(who) + ": width and height must be positive");
  }
}

Eigen::Vector4d corners_to_center(const Eigen::Vector4d& c) {
  const double w = c(2) - c(0);
  const double h = c(3) - c(1);
  return {0.5 * (c(0) + c(2)), 0.5 * (c(1) + c(3)), w, h};
}

// Linear corner->center map applied to independent corner variances.
Eigen::Vector4d corner_vars_to_center(const Eigen::Vector4d& v) {
  return {0.25 * (v(0) + v(2)), 0.25 * (v(1) + v(3)), v(0) + v(2),
          v(1) + v(3)};
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void DetectionRecord::validate() const {
  if (image_id.empty()) throw DataError("DetectionRecord: empty image_id");
  check_box(box_mean, "DetectionRecord");
  if (!box_var.allFinite() || (box_var.array() <= 0.0).any()) {
    throw DataError("DetectionRecord: variances must be positive");
  }
  if (!(score >= 0.0 && score <= 1.0)) {
    throw DataError("DetectionRecord: score must lie in [0,1]");
  }
  if (box_cov.has_value() && !box_cov->allFinite()) {
    throw DataError("DetectionRecord: non-finite covariance");
  }
}

void GroundTruthRecord::validate() const {
  if (image_id.empty()) throw DataError("GroundTruthRecord: empty image_id");
  check_box(box, "GroundTruthRecord");
}

double iou(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  check_box(a, "iou");
  check_box(b, "iou");
  const double ax1 = a(0) - 0.5 * a(2), ax2 = a(0) + 0.5 * a(2);
  const double ay1 = a(1) - 0.5 * a(3), ay2 = a(1) + 0.5 * a(3);
  const double bx1 = b(0) - 0.5 * b(2), bx2 = b(0) + 0.5 * b(2);
  const double by1 = b(1) - 0.5 * b(3), by2 = b(1) + 0.5 * b(3);
  const double iw = std::min(ax2, bx2) - std::max(ax1, bx1);
  const double ih = std::min(ay2, by2) - std::max(ay1, by1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a(2) * a(3) + b(2) * b(3) - inter;
  return inter / uni;
}

namespace {

std::string box_key(const std::string& image_id, const Eigen::Vector4d& box) {
  std::ostringstream os;
  os.precision(17);
  os << image_id << '\x1f' << box(0) << ',' << box(1) << ',' << box(2) << ','
     << box(3);
  return os.str();
}

std::string group_key(const std::string& image_id, const std::string& category,
                      bool category_strict) {
  return category_strict ? image_id + '\x1f' + category : image_id;
}

bool box_less(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  for (int i = 0; i < 4; ++i) {
    if (a(i) != b(i)) return a(i) < b(i);
  }
  return false;
}

}  // namespace

MatchedDataset match(const std::vector<DetectionRecord>& detections,
                     const std::vector<GroundTruthRecord>& ground_truths,
                     const MatchConfig& config) {
  if (!(config.iou_threshold > 0.0 && config.iou_threshold <= 1.0)) {
    throw DataError("match: iou threshold must lie in (0,1]");
  }
  for (const auto& d : detections) d.validate();

  std::set<std::string> seen;
  std::map<std::string, std::vector<Index>> gt_groups;
  for (Index i = 0; i < static_cast<Index>(ground_truths.size()); ++i) {
    const auto& g = ground_truths[i];
    g.validate();
    if (!seen.insert(box_key(g.image_id, g.box)).second) {
      throw DataError("match: duplicate ground truth for image " + g.image_id);
    }
    gt_groups[group_key(g.image_id, g.category, config.category_strict)]
        .push_back(i);
  }

  // Score-descending greedy order, ties broken by image id then box order.
  std::vector<Index> det_order(detections.size());
  std::iota(det_order.begin(), det_order.end(), Index{0});
  std::sort(det_order.begin(), det_order.end(), [&](Index a, Index b) {
    const auto& da = detections[a];
    const auto& db = detections[b];
    if (da.score != db.score) return da.score > db.score;
    if (da.image_id != db.image_id) return da.image_id < db.image_id;
    if (box_less(da.box_mean, db.box_mean)) return true;
    if (box_less(db.box_mean, da.box_mean)) return false;
    return da.category < db.category;
  });

  std::vector<bool> gt_used(ground_truths.size(), false);
  struct Pair {
    Index det;
    Index gt;
  };
  std::vector<Pair> pairs;
  for (Index di : det_order) {
    const auto& det = detections[di];
    const auto it = gt_groups.find(
        group_key(det.image_id, det.category, config.category_strict));
    if (it == gt_groups.end()) continue;
    Index best = -1;
    double best_iou = config.iou_threshold;
    for (Index gi : it->second) {
      if (gt_used[gi]) continue;
      const double overlap = iou(det.box_mean, ground_truths[gi].box);
      if (overlap > best_iou || (overlap == best_iou && best == -1 &&
                                 overlap >= config.iou_threshold)) {
        best = gi;
        best_iou = overlap;
      }
    }
    if (best >= 0) {
      gt_used[best] = true;
      pairs.push_back({di, best});
    }
  }

  // Merge in sorted image order; within an image keep the greedy order.
  std::stable_sort(pairs.begin(), pairs.end(), [&](const Pair& a,
                                                   const Pair& b) {
    return detections[a.det].image_id < detections[b.det].image_id;
  });

  MatchedDataset out;
  out.data.ground_truth = Mat(static_cast<Index>(pairs.size()), 4);
  for (Index i = 0; i < static_cast<Index>(pairs.size()); ++i) {
    const auto& det = detections[pairs[i].det];
    const auto& gt = ground_truths[pairs[i].gt];
    GaussianPrediction pred;
    if (det.box_cov.has_value()) {
      pred = GaussianPrediction::with_covariance(det.box_mean, *det.box_cov);
    } else {
      pred = GaussianPrediction::diagonal(det.box_mean, det.box_var);
    }
    out.data.predictions.push_back(std::move(pred));
    out.data.ground_truth.row(i) = gt.box.transpose();
    out.image_ids.push_back(det.image_id);
  }
  out.report.matched = static_cast<Index>(pairs.size());
  out.report.unmatched_detections =
      static_cast<Index>(detections.size()) - out.report.matched;
  out.report.unmatched_ground_truths =
      static_cast<Index>(ground_truths.size()) - out.report.matched;
  return out;
}

std::pair<CalibrationDataset, CalibrationDataset> half_split(
    const MatchedDataset& matched, std::uint64_t seed) {
  const Index n = matched.data.size();
  if (n < 2) throw DataError("half_split: need at least two samples");
  if (matched.image_ids.size() != static_cast<std::size_t>(n)) {
    throw DataError("half_split: missing image provenance");
  }

  std::map<std::string, std::vector<Index>> by_image;
  for (Index i = 0; i < n; ++i) by_image[matched.image_ids[i]].push_back(i);
  if (by_image.size() < 2) {
    throw DataError("half_split: cannot split a single-image dataset");
  }

  struct HashedImage {
    std::uint64_t hash;
    const std::string* id;
  };
  std::vector<HashedImage> images;
  images.reserve(by_image.size());
  for (const auto& [id, rows] : by_image) {
    images.push_back({mix_seed(fnv1a(id) ^ seed), &id});
  }
  std::sort(images.begin(), images.end(),
            [](const HashedImage& a, const HashedImage& b) {
              if (a.hash != b.hash) return a.hash < b.hash;
              return *a.id < *b.id;
            });

  const double target = 0.5 * static_cast<double>(n);
  std::vector<Index> train_rows, eval_rows;
  std::size_t last_train_image = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& rows = by_image.at(*images[i].id);
    if (static_cast<double>(train_rows.size()) < target) {
      train_rows.insert(train_rows.end(), rows.begin(), rows.end());
      last_train_image = i;
    } else {
      eval_rows.insert(eval_rows.end(), rows.begin(), rows.end());
    }
  }
  if (eval_rows.empty()) {
    // All samples fell into the first half; move the last train image over.
    const auto& rows = by_image.at(*images[last_train_image].id);
    train_rows.resize(train_rows.size() - rows.size());
    eval_rows.insert(eval_rows.end(), rows.begin(), rows.end());
  }

  auto take = [&](const std::vector<Index>& rows) {
    CalibrationDataset subset;
    subset.ground_truth = Mat(static_cast<Index>(rows.size()), 4);
    for (Index i = 0; i < static_cast<Index>(rows.size()); ++i) {
      subset.predictions.push_back(matched.data.predictions[rows[i]]);
      subset.ground_truth.row(i) = matched.data.ground_truth.row(rows[i]);
    }
    return subset;
  };
  return {take(train_rows), take(eval_rows)};
}

// --- JSON-lines IO -----------------------------------------------------------

namespace {

json parse_line(const std::string& line, const std::string& path,
                Index line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": malformed JSON line";
    throw DataError(msg.str());
  }
  return j;
}

Vec get_vec(const json& j, const char* field, Index expect, const std::string& path,
            Index line_no) {
  if (!j.contains(field) || !j[field].is_array()) {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": missing array field '" << field << "'";
    throw DataError(msg.str());
  }
  const auto& arr = j[field];
  if (expect > 0 && static_cast<Index>(arr.size()) != expect) {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": field '" << field << "' must have "
        << expect << " entries";
    throw DataError(msg.str());
  }
  Vec v(static_cast<Index>(arr.size()));
  for (Index i = 0; i < v.size(); ++i) {
    if (!arr[i].is_number()) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": non-numeric entry in '" << field
          << "'";
      throw DataError(msg.str());
    }
    v(i) = arr[i].get<double>();
    if (!std::isfinite(v(i))) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": non-finite entry in '" << field
          << "'";
      throw DataError(msg.str());
    }
  }
  return v;
}

Mat get_mat(const json& j, const char* field, Index rows, Index cols,
            const std::string& path, Index line_no) {
  const auto& arr = j.at(field);
  if (!arr.is_array() || static_cast<Index>(arr.size()) != rows) {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": field '" << field
        << "' must be a " << rows << "x" << cols << " matrix";
    throw DataError(msg.str());
  }
  Mat m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = arr[r];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": ragged matrix in '" << field << "'";
      throw DataError(msg.str());
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  if (!m.allFinite()) {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": non-finite entry in '" << field << "'";
    throw DataError(msg.str());
  }
  return m;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  return out;
}

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json mat_to_json(const Mat& m) {
  json arr = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    arr.push_back(vec_to_json(m.row(r).transpose()));
  }
  return arr;
}

}  // namespace

std::vector<DetectionRecord> read_detections_jsonl(const std::string& path,
                                                   bool corner_boxes) {
  auto in = open_input(path);
  std::vector<DetectionRecord> records;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, path, line_no);
    DetectionRecord rec;
    try {
      rec.image_id = j.at("image_id").get<std::string>();
      rec.category = j.value("category", std::string{});
      rec.box_mean = get_vec(j, "box_mean", 4, path, line_no);
      rec.box_var = get_vec(j, "box_var", 4, path, line_no);
      rec.score = j.value("score", 1.0);
      if (j.contains("box_cov")) {
        if (corner_boxes) {
          throw DataError(
              "corner box format does not support full covariances");
        }
        rec.box_cov = get_mat(j, "box_cov", 4, 4, path, line_no);
      }
    } catch (const json::exception& e) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": " << e.what();
      throw DataError(msg.str());
    }
    if (corner_boxes) {
      rec.box_var = corner_vars_to_center(rec.box_var);
      rec.box_mean = corners_to_center(rec.box_mean);
    }
    rec.validate();
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<GroundTruthRecord> read_ground_truths_jsonl(
    const std::string& path, bool corner_boxes) {
  auto in = open_input(path);
  std::vector<GroundTruthRecord> records;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, path, line_no);
    GroundTruthRecord rec;
    try {
      rec.image_id = j.at("image_id").get<std::string>();
      rec.category = j.value("category", std::string{});
      rec.box = get_vec(j, "box", 4, path, line_no);
    } catch (const json::exception& e) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": " << e.what();
      throw DataError(msg.str());
    }
    if (corner_boxes) rec.box = corners_to_center(rec.box);
    rec.validate();
    records.push_back(std::move(rec));
  }
  return records;
}

CalibrationDataset read_dataset_jsonl(const std::string& path) {
  auto in = open_input(path);
  CalibrationDataset dataset;
  std::vector<Vec> gts;
  std::string line;
  Index line_no = 0;
  Index k = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, path, line_no);
    const Vec mean = get_vec(j, "mean", k > 0 ? k : 0, path, line_no);
    if (k < 0) k = mean.size();
    const Vec gt = get_vec(j, "gt", k, path, line_no);
    GaussianPrediction pred;
    if (j.contains("cov")) {
      pred = GaussianPrediction::with_covariance(
          mean, get_mat(j, "cov", k, k, path, line_no));
    } else {
      pred = GaussianPrediction::diagonal(mean,
                                          get_vec(j, "var", k, path, line_no));
    }
    dataset.predictions.push_back(std::move(pred));
    gts.push_back(gt);
  }
  if (dataset.predictions.empty()) {
    throw DataError("read_dataset_jsonl: no samples in " + path);
  }
  dataset.ground_truth = Mat(static_cast<Index>(gts.size()), k);
  for (Index i = 0; i < static_cast<Index>(gts.size()); ++i) {
    dataset.ground_truth.row(i) = gts[i].transpose();
  }
  dataset.validate();
  return dataset;
}

void write_dataset_jsonl(const std::string& path,
                         const CalibrationDataset& dataset) {
  dataset.validate();
  auto out = open_output(path);
  for (Index i = 0; i < dataset.size(); ++i) {
    const auto& p = dataset.predictions[i];
    json j;
    j["mean"] = vec_to_json(p.mean);
    j["var"] = vec_to_json(p.diagonal_variances());
    if (p.has_full_covariance()) j["cov"] = mat_to_json(p.covariance);
    j["gt"] = vec_to_json(dataset.ground_truth.row(i).transpose());
    out << j.dump() << '\n';
  }
}

LoadedPredictions read_predictions_jsonl(const std::string& path) {
  auto in = open_input(path);
  LoadedPredictions loaded;
  std::vector<Vec> gts;
  std::string line;
  Index line_no = 0;
  Index k = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, path, line_no);
    const std::string dist = j.value("dist", std::string("gaussian"));
    PredictiveDistribution pred;
    Vec gt;
    if (dist == "gaussian") {
      const Vec mean = get_vec(j, "mean", k > 0 ? k : 0, path, line_no);
      if (k < 0) k = mean.size();
      if (j.contains("cov")) {
        pred = GaussianPrediction::with_covariance(
            mean, get_mat(j, "cov", k, k, path, line_no));
      } else {
        pred = GaussianPrediction::diagonal(
            mean, get_vec(j, "var", k, path, line_no));
      }
      gt = get_vec(j, "gt", k, path, line_no);
    } else if (dist == "cauchy") {
      const Vec loc = get_vec(j, "loc", k > 0 ? k : 0, path, line_no);
      if (k < 0) k = loc.size();
      CauchyPrediction c;
      c.location = loc;
      c.scale = get_vec(j, "scale", k, path, line_no);
      c.validate();
      pred = std::move(c);
      gt = get_vec(j, "gt", k, path, line_no);
    } else if (dist == "grid") {
      if (!j.contains("support") || !j.contains("cdf")) {
        throw DataError(path + ": grid line missing support/cdf");
      }
      NonparametricDistribution np;
      const auto& sup = j["support"];
      const auto& cdfv = j["cdf"];
      if (!sup.is_array() || !cdfv.is_array() || sup.size() != cdfv.size()) {
        throw DataError(path + ": malformed grid payload");
      }
      if (k < 0) k = static_cast<Index>(sup.size());
      for (Index d = 0; d < k; ++d) {
        const auto& s = sup[d];
        const auto& f = cdfv[d];
        Vec sv(static_cast<Index>(s.size())), fv(static_cast<Index>(f.size()));
        for (Index g = 0; g < sv.size(); ++g) sv(g) = s[g].get<double>();
        for (Index g = 0; g < fv.size(); ++g) fv(g) = f[g].get<double>();
        np.support.push_back(std::move(sv));
        np.cdf.push_back(std::move(fv));
      }
      np.validate();
      pred = std::move(np);
      gt = get_vec(j, "gt", k, path, line_no);
    } else {
      throw DataError(path + ": unknown dist tag '" + dist + "'");
    }
    loaded.predictions.push_back(std::move(pred));
    gts.push_back(gt);
  }
  if (loaded.predictions.empty()) {
    throw DataError("read_predictions_jsonl: no samples in " + path);
  }
  loaded.ground_truth = Mat(static_cast<Index>(gts.size()), k);
  for (Index i = 0; i < static_cast<Index>(gts.size()); ++i) {
    loaded.ground_truth.row(i) = gts[i].transpose();
  }
  return loaded;
}

void write_calibrated_jsonl(const std::string& path,
                            const std::vector<PredictiveDistribution>& preds,
                            const Mat& ground_truth) {
  if (ground_truth.rows() != static_cast<Index>(preds.size())) {
    throw DataError("write_calibrated_jsonl: misaligned ground truth");
  }
  auto out = open_output(path);
  for (Index i = 0; i < static_cast<Index>(preds.size()); ++i) {
    json j;
    if (const auto* g = std::get_if<GaussianPrediction>(&preds[i])) {
      j["mean"] = vec_to_json(g->mean);
      j["var"] = vec_to_json(g->diagonal_variances());
      if (g->has_full_covariance()) j["cov"] = mat_to_json(g->covariance);
    } else if (const auto* c = std::get_if<CauchyPrediction>(&preds[i])) {
      j["dist"] = "cauchy";
      j["loc"] = vec_to_json(c->location);
      j["scale"] = vec_to_json(c->scale);
    } else {
      const auto& np = std::get<NonparametricDistribution>(preds[i]);
      j["dist"] = "grid";
      json sup = json::array(), cdfv = json::array();
      for (Index d = 0; d < np.dim(); ++d) {
        sup.push_back(vec_to_json(np.support[d]));
        cdfv.push_back(vec_to_json(np.cdf[d]));
      }
      j["support"] = std::move(sup);
      j["cdf"] = std::move(cdfv);
    }
    j["gt"] = vec_to_json(ground_truth.row(i).transpose());
    out << j.dump() << '\n';
  }
}

}  // namespace recal
