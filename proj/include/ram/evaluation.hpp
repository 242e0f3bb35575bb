#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ram/error.hpp"
#include "ram/geometry.hpp"

namespace ram {

/// Dataset subsets used when reporting accuracy.
enum class SubsetTag { SSS, NSS, MOS, Other };

inline constexpr std::string_view to_string(SubsetTag tag) {
  switch (tag) {
    case SubsetTag::SSS: return "SSS";
    case SubsetTag::NSS: return "NSS";
    case SubsetTag::MOS: return "MOS";
    case SubsetTag::Other: return "other";
  }
  return "other";
}

inline SubsetTag parse_subset_tag(std::string_view s) {
  if (s == "SSS" || s == "sss") return SubsetTag::SSS;
  if (s == "NSS" || s == "nss") return SubsetTag::NSS;
  if (s == "MOS" || s == "mos") return SubsetTag::MOS;
  return SubsetTag::Other;
}

struct Prediction {
  std::string image_id;
  GraspBox box;
  double confidence = 0.0;
};

/// Rectangle-metric thresholds; both comparisons are inclusive.
struct EvalCriteria {
  double angle_threshold = 30.0;
  double iou_threshold = 0.25;
  AngleWrap angle_wrap = AngleWrap::Mod180;

  void validate() const {
    if (!(angle_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "angle threshold must be > 0");
    if (!(iou_threshold > 0.0) || iou_threshold > 1.0) {
      throw Error(ErrorCode::InvalidArgument, "IoU threshold must be in (0, 1]");
    }
  }
};

inline bool is_correct(const GraspBox& pred, const GraspBox& gt, const EvalCriteria& criteria) {
  if (angle_difference(pred.theta, gt.theta, criteria.angle_wrap) > criteria.angle_threshold) return false;
  return oriented_iou(pred, gt) >= criteria.iou_threshold;
}

struct ImageVerdict {
  std::optional<GraspBox> judged_box;
  std::optional<std::size_t> matched_gt;
  bool correct = false;
  bool no_predictions = false;
};

/// Orders predictions by descending confidence; equal confidences keep input order.
inline std::vector<std::size_t> rank_by_confidence(std::span<const Prediction> preds) {
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].confidence > preds[b].confidence; });
  return order;
}

/// Judges one image by its highest-confidence prediction (or the `top_n` highest):
/// correct when it satisfies the rectangle metric against at least one ground truth.
inline ImageVerdict judge_image(std::span<const Prediction> preds, std::span<const GraspBox> gts,
                                const EvalCriteria& criteria, std::size_t top_n = 1) {
  if (gts.empty()) throw Error(ErrorCode::InvalidArgument, "cannot judge an image without ground truth");
  if (top_n == 0) throw Error(ErrorCode::InvalidArgument, "top_n must be >= 1");
  ImageVerdict v;
  if (preds.empty()) {
    v.no_predictions = true;
    return v;
  }
  const auto order = rank_by_confidence(preds);
  const std::size_t n = std::min(top_n, order.size());
  v.judged_box = preds[order.front()].box;
  for (std::size_t r = 0; r < n; ++r) {
    const GraspBox& box = preds[order[r]].box;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (is_correct(box, gts[g], criteria)) {
        v.judged_box = box;
        v.matched_gt = g;
        v.correct = true;
        return v;
      }
    }
  }
  return v;
}

/// One image's inputs to the evaluation.
struct EvalSample {
  std::string image_id;
  SubsetTag subset = SubsetTag::Other;
  std::vector<Prediction> predictions;
  std::vector<GraspBox> ground_truths;
};

struct ImageResult {
  std::string image_id;
  SubsetTag subset = SubsetTag::Other;
  ImageVerdict verdict;
};

struct SubsetScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct EvalReport {
  std::vector<ImageResult> per_image;
  EvalCriteria criteria;
  std::size_t correct_count = 0;
  double accuracy = 0.0;  // micro average over all images
  std::map<SubsetTag, SubsetScore> subsets;

  /// Unweighted mean of the subset accuracies.
  double macro_accuracy() const {
    if (subsets.empty()) return accuracy;
    double s = 0.0;
    for (const auto& [tag, score] : subsets) s += score.accuracy();
    return s / static_cast<double>(subsets.size());
  }
};

inline EvalReport accuracy(std::span<const EvalSample> dataset, const EvalCriteria& criteria, std::size_t top_n = 1) {
  criteria.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "no images to evaluate");
  EvalReport report;
  report.criteria = criteria;
  report.per_image.reserve(dataset.size());
  for (const EvalSample& s : dataset) {
    ImageVerdict v = judge_image(s.predictions, s.ground_truths, criteria, top_n);
    auto& score = report.subsets[s.subset];
    ++score.total;
    if (v.correct) {
      ++score.correct;
      ++report.correct_count;
    }
    report.per_image.push_back({s.image_id, s.subset, std::move(v)});
  }
  report.accuracy = static_cast<double>(report.correct_count) / static_cast<double>(dataset.size());
  return report;
}

enum class SweepKind { Angle, Iou };

struct SweepRow {
  double threshold = 0.0;
  double accuracy = 0.0;
  double macro_accuracy = 0.0;
  std::map<SubsetTag, SubsetScore> subsets;
};

struct SweepTable {
  SweepKind kind = SweepKind::Angle;
  EvalCriteria base;
  std::vector<SweepRow> rows;
};

/// Re-evaluates the dataset once per threshold, varying one criterion and
/// holding the other at `base`.
inline SweepTable threshold_sweep(std::span<const EvalSample> dataset, SweepKind kind,
                                  std::span<const double> thresholds, const EvalCriteria& base,
                                  std::size_t top_n = 1) {
  SweepTable table{kind, base, {}};
  for (double t : thresholds) {
    EvalCriteria c = base;
    (kind == SweepKind::Angle ? c.angle_threshold : c.iou_threshold) = t;
    const EvalReport r = accuracy(dataset, c, top_n);
    table.rows.push_back({t, r.accuracy, r.macro_accuracy(), r.subsets});
  }
  return table;
}

inline const std::vector<double>& default_angle_sweep() {
  static const std::vector<double> v{30.0, 25.0, 20.0, 15.0, 10.0};
  return v;
}

inline const std::vector<double>& default_iou_sweep() {
  static const std::vector<double> v{0.25, 0.30, 0.35, 0.40, 0.45};
  return v;
}

}  // namespace ram
