#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ram/anchor_codec.hpp"
#include "ram/error.hpp"
#include "ram/geometry.hpp"

namespace ram {

/// How the angle condition of sample matching is read.
enum class MatchRule {
  // Anchor m is positive only for ground truths whose angle falls in
  // [theta_anchor, theta_anchor + theta_margin), the span decode can reach.
  OneSided,
  // |theta - theta_anchor| < theta_margin, which can admit two bins per ground truth.
  Symmetric,
};

struct PositiveLabel {
  OffsetVector target;
  std::size_t gt_index = 0;

  friend bool operator==(const PositiveLabel&, const PositiveLabel&) = default;
};

/// Per-anchor confidence labels and regression targets for one image.
/// An empty slot is a negative sample.
class Assignment {
 public:
  explicit Assignment(const AnchorGridConfig& config) : config_(config), labels_(config.anchor_count()) {}

  const AnchorGridConfig& config() const { return config_; }

  std::size_t anchor_index(const Anchor& a) const {
    return (static_cast<std::size_t>(a.row) * config_.grid_cols + a.col) * config_.anchors_per_cell + a.angle_index;
  }

  const std::optional<PositiveLabel>& at(const Anchor& a) const { return labels_[anchor_index(a)]; }
  std::optional<PositiveLabel>& at(const Anchor& a) { return labels_[anchor_index(a)]; }
  const std::optional<PositiveLabel>& at(std::size_t anchor_index) const { return labels_[anchor_index]; }

  bool is_positive(const Anchor& a) const { return at(a).has_value(); }

  /// Confidence label: 1 for positives, 0 for negatives.
  double confidence_label(const Anchor& a) const { return is_positive(a) ? 1.0 : 0.0; }

  std::size_t positive_count() const {
    std::size_t n = 0;
    for (const auto& l : labels_) n += l.has_value();
    return n;
  }

  std::size_t size() const { return labels_.size(); }

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  AnchorGridConfig config_;
  std::vector<std::optional<PositiveLabel>> labels_;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Grid cell holding a box center. Centers on the far image border fall into
/// the last row/column.
inline Cell cell_of(const AnchorGridConfig& config, const GraspBox& box) {
  if (box.x < 0.0 || box.y < 0.0 || box.x > config.image_w || box.y > config.image_h) {
    throw Error(ErrorCode::OutOfImage, "box center (" + std::to_string(box.x) + ", " + std::to_string(box.y) +
                                           ") lies outside the image");
  }
  const Margins m = margins(config);
  const int row = std::min(static_cast<int>(std::floor(box.y / m.y)), config.grid_rows - 1);
  const int col = std::min(static_cast<int>(std::floor(box.x / m.x)), config.grid_cols - 1);
  return {row, col};
}

inline int angle_bin(const AnchorGridConfig& config, double theta) {
  const int bin = static_cast<int>(std::floor(normalize_angle(theta) / theta_margin(config)));
  return std::min(bin, config.anchors_per_cell - 1);
}

inline bool angle_condition(const AnchorGridConfig& config, int angle_index, double theta, MatchRule rule) {
  if (rule == MatchRule::OneSided) return angle_bin(config, theta) == angle_index;
  return std::abs(theta - angle_index * theta_margin(config)) < theta_margin(config);
}

/// Positive/negative sample matching. An anchor is positive when some ground
/// truth has its center in the anchor's cell and satisfies the angle condition;
/// among competing ground truths the one nearest the cell center wins, ties going
/// to the lower list index.
inline Assignment match(const AnchorGridConfig& config, std::span<const GraspBox> ground_truths,
                        MatchRule rule = MatchRule::OneSided) {
  config.validate();
  Assignment out(config);
  const Margins m = margins(config);

  struct Best {
    std::size_t gt;
    double dist2;
  };
  std::vector<std::optional<Best>> best(config.anchor_count());

  for (std::size_t g = 0; g < ground_truths.size(); ++g) {
    const GraspBox& gt = ground_truths[g];
    const Cell cell = cell_of(config, gt);
    const double dx = gt.x - (cell.col + 0.5) * m.x;
    const double dy = gt.y - (cell.row + 0.5) * m.y;
    const double d2 = dx * dx + dy * dy;
    for (int a = 0; a < config.anchors_per_cell; ++a) {
      if (!angle_condition(config, a, gt.theta, rule)) continue;
      auto& slot = best[out.anchor_index({cell.row, cell.col, a})];
      if (!slot || d2 < slot->dist2) slot = Best{g, d2};
    }
  }

  for_each_anchor(config, [&](const Anchor& anchor) {
    const auto& b = best[out.anchor_index(anchor)];
    if (!b) return;
    const GraspBox& gt = ground_truths[b->gt];
    const OffsetVector target = rule == MatchRule::OneSided ? encode(config, anchor, gt)
                                                            : encode_saturating(config, anchor, gt);
    out.at(anchor) = PositiveLabel{target, b->gt};
  });
  return out;
}

/// Debug dump listing only the positive anchors.
inline nlohmann::json assignment_to_json(const Assignment& assignment) {
  const auto& c = assignment.config();
  nlohmann::json positives = nlohmann::json::array();
  for_each_anchor(c, [&](const Anchor& a) {
    const auto& label = assignment.at(a);
    if (!label) return;
    const auto& t = label->target;
    positives.push_back({{"row", a.row},
                         {"col", a.col},
                         {"bin", a.angle_index},
                         {"gt_index", label->gt_index},
                         {"target", {t.t_x, t.t_y, t.t_w, t.t_h, t.t_theta}}});
  });
  return {{"grid_rows", c.grid_rows},
          {"grid_cols", c.grid_cols},
          {"anchors_per_cell", c.anchors_per_cell},
          {"anchor_count", c.anchor_count()},
          {"positive_count", assignment.positive_count()},
          {"positives", std::move(positives)}};
}

}  // namespace ram
