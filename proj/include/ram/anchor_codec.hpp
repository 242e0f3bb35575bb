#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ram/error.hpp"
#include "ram/geometry.hpp"

namespace ram {

/// Layout of the rotation-anchor grid: an image of image_h x image_w pixels is
/// covered by grid_rows x grid_cols cells, each holding anchors_per_cell anchors
/// that split [0, 180) into equal angular bins.
struct AnchorGridConfig {
  int image_h = 416;
  int image_w = 416;
  int grid_rows = 13;
  int grid_cols = 13;
  int anchors_per_cell = 3;
  double anchor_w = 50.0;
  double anchor_h = 50.0;

  void validate() const {
    if (image_h <= 0 || image_w <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
    if (grid_rows < 1 || grid_cols < 1) throw Error(ErrorCode::InvalidArgument, "grid size must be >= 1");
    if (anchors_per_cell < 1) throw Error(ErrorCode::InvalidArgument, "anchors per cell must be >= 1");
    if (!(anchor_w > 0.0) || !(anchor_h > 0.0) || !std::isfinite(anchor_w) || !std::isfinite(anchor_h)) {
      throw Error(ErrorCode::InvalidArgument, "anchor dimensions must be finite and positive");
    }
  }

  std::size_t anchor_count() const {
    return static_cast<std::size_t>(grid_rows) * static_cast<std::size_t>(grid_cols) *
           static_cast<std::size_t>(anchors_per_cell);
  }

  friend bool operator==(const AnchorGridConfig&, const AnchorGridConfig&) = default;
};

struct Margins {
  double x;  // horizontal extent of one column
  double y;  // vertical extent of one row
};

inline Margins margins(const AnchorGridConfig& config) {
  return {static_cast<double>(config.image_w) / config.grid_cols,
          static_cast<double>(config.image_h) / config.grid_rows};
}

/// Angular width of one anchor bin: 180 / k degrees.
inline double theta_margin(const AnchorGridConfig& config) { return 180.0 / config.anchors_per_cell; }

struct Anchor {
  int row = 0;
  int col = 0;
  int angle_index = 0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

inline double anchor_angle(const AnchorGridConfig& config, const Anchor& anchor) {
  return anchor.angle_index * theta_margin(config);
}

inline bool anchor_in_grid(const AnchorGridConfig& config, const Anchor& a) {
  return a.row >= 0 && a.row < config.grid_rows && a.col >= 0 && a.col < config.grid_cols &&
         a.angle_index >= 0 && a.angle_index < config.anchors_per_cell;
}

struct OffsetVector {
  double t_x = 0.0;
  double t_y = 0.0;
  double t_w = 0.0;
  double t_h = 0.0;
  double t_theta = 0.0;

  std::array<double, 5> as_array() const { return {t_x, t_y, t_w, t_h, t_theta}; }
  friend bool operator==(const OffsetVector&, const OffsetVector&) = default;
};

/// Numerically stable logistic function.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// Ratio clamp applied before the logit in encode().
inline constexpr double kEncodeEpsilon = 1e-6;

/// Scale offsets are clamped to this magnitude before exponentiation so decoded
/// widths stay finite and strictly positive.
inline constexpr double kMaxLogScale = 20.0;

/// Maps raw network offsets on an anchor to a box. The center never leaves the
/// anchor's cell and the angle stays within [theta_anchor, theta_anchor + theta_margin].
inline GraspBox decode(const AnchorGridConfig& config, const Anchor& anchor, const OffsetVector& t) {
  if (!anchor_in_grid(config, anchor)) throw Error(ErrorCode::InvalidArgument, "anchor outside grid");
  const Margins m = margins(config);
  const double x = (anchor.col + sigmoid(t.t_x)) * m.x;
  const double y = (anchor.row + sigmoid(t.t_y)) * m.y;
  const double w = config.anchor_w * std::exp(std::clamp(t.t_w, -kMaxLogScale, kMaxLogScale));
  const double h = config.anchor_h * std::exp(std::clamp(t.t_h, -kMaxLogScale, kMaxLogScale));
  const double theta = anchor_angle(config, anchor) + sigmoid(t.t_theta) * theta_margin(config);
  return GraspBox(x, y, w, h, theta);
}

namespace detail {

inline double clamped_logit(double ratio) {
  return logit(std::clamp(ratio, kEncodeEpsilon, 1.0 - kEncodeEpsilon));
}

inline void check_target_cell(const AnchorGridConfig& config, const Anchor& anchor, const GraspBox& target) {
  const Margins m = margins(config);
  const double rx = target.x / m.x - anchor.col;
  const double ry = target.y / m.y - anchor.row;
  constexpr double tol = 1e-9;
  if (rx < -tol || rx > 1.0 + tol || ry < -tol || ry > 1.0 + tol) {
    throw Error(ErrorCode::CellMismatch, "target center (" + std::to_string(target.x) + ", " +
                                             std::to_string(target.y) + ") is outside cell (row " +
                                             std::to_string(anchor.row) + ", col " +
                                             std::to_string(anchor.col) + ")");
  }
}

inline OffsetVector encode_unchecked(const AnchorGridConfig& config, const Anchor& anchor, const GraspBox& target) {
  const Margins m = margins(config);
  return {
      clamped_logit(target.x / m.x - anchor.col),
      clamped_logit(target.y / m.y - anchor.row),
      std::log(target.w / config.anchor_w),
      std::log(target.h / config.anchor_h),
      clamped_logit((target.theta - anchor_angle(config, anchor)) / theta_margin(config)),
  };
}

}  // namespace detail

/// Exact inverse of decode() for targets inside the anchor's cell and angle bin.
inline OffsetVector encode(const AnchorGridConfig& config, const Anchor& anchor, const GraspBox& target) {
  if (!anchor_in_grid(config, anchor)) throw Error(ErrorCode::InvalidArgument, "anchor outside grid");
  detail::check_target_cell(config, anchor, target);
  const double rel = (target.theta - anchor_angle(config, anchor)) / theta_margin(config);
  constexpr double tol = 1e-9;
  if (rel < -tol || rel > 1.0 + tol) {
    throw Error(ErrorCode::AngleBinMismatch, "target angle " + std::to_string(target.theta) +
                                                 " is outside the span of anchor bin " +
                                                 std::to_string(anchor.angle_index));
  }
  return detail::encode_unchecked(config, anchor, target);
}

/// Like encode() but saturates the angle ratio instead of rejecting targets
/// outside the anchor's bin. Used for anchors admitted by the symmetric match rule.
inline OffsetVector encode_saturating(const AnchorGridConfig& config, const Anchor& anchor, const GraspBox& target) {
  if (!anchor_in_grid(config, anchor)) throw Error(ErrorCode::InvalidArgument, "anchor outside grid");
  detail::check_target_cell(config, anchor, target);
  return detail::encode_unchecked(config, anchor, target);
}

enum Channel : std::size_t {
  kConfidence = 0,
  kTx = 1,
  kTy = 2,
  kTw = 3,
  kTh = 4,
  kTtheta = 5,
  kChannelCount = 6,
};

inline constexpr std::array<const char*, kChannelCount> kChannelNames = {"confidence_logit", "t_x", "t_y",
                                                                         "t_w", "t_h", "t_theta"};

/// Dense rows x cols x k x 6 prediction volume in row-major
/// [row][col][anchor][channel] order.
class OutputTensor {
 public:
  explicit OutputTensor(const AnchorGridConfig& config)
      : config_(validated(config)), values_(config.anchor_count() * kChannelCount, 0.0) {}

  OutputTensor(const AnchorGridConfig& config, std::vector<double> values)
      : config_(validated(config)), values_(std::move(values)) {
    if (values_.size() != config_.anchor_count() * kChannelCount) {
      throw Error(ErrorCode::ConfigMismatch, "tensor has " + std::to_string(values_.size()) + " entries, expected " +
                                                 std::to_string(config_.anchor_count() * kChannelCount));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "tensor entries must be finite");
    }
  }

  const AnchorGridConfig& config() const { return config_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  std::size_t size() const { return values_.size(); }

  std::size_t anchor_index(const Anchor& a) const {
    return (static_cast<std::size_t>(a.row) * config_.grid_cols + a.col) * config_.anchors_per_cell + a.angle_index;
  }
  std::size_t index(const Anchor& a, std::size_t channel) const { return anchor_index(a) * kChannelCount + channel; }

  double at(const Anchor& a, std::size_t channel) const { return values_[index(a, channel)]; }
  double& at(const Anchor& a, std::size_t channel) { return values_[index(a, channel)]; }

  OffsetVector offsets(const Anchor& a) const {
    const std::size_t base = index(a, 0);
    return {values_[base + kTx], values_[base + kTy], values_[base + kTw], values_[base + kTh], values_[base + kTtheta]};
  }

  void set_offsets(const Anchor& a, const OffsetVector& t) {
    const std::size_t base = index(a, 0);
    values_[base + kTx] = t.t_x;
    values_[base + kTy] = t.t_y;
    values_[base + kTw] = t.t_w;
    values_[base + kTh] = t.t_h;
    values_[base + kTtheta] = t.t_theta;
  }

 private:
  static const AnchorGridConfig& validated(const AnchorGridConfig& config) {
    config.validate();
    return config;
  }

  AnchorGridConfig config_;
  std::vector<double> values_;
};

/// Visits every anchor of the grid in tensor order.
template <typename Fn>
void for_each_anchor(const AnchorGridConfig& config, Fn&& fn) {
  for (int r = 0; r < config.grid_rows; ++r) {
    for (int c = 0; c < config.grid_cols; ++c) {
      for (int m = 0; m < config.anchors_per_cell; ++m) fn(Anchor{r, c, m});
    }
  }
}

}  // namespace ram
