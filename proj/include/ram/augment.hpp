#pragma once

#include <string_view>

#include "ram/annotation.hpp"
#include "ram/error.hpp"
#include "ram/geometry.hpp"

namespace ram {

/// Geometric augmentations. Rotations are clockwise as seen on screen.
enum class AugmentOp { Rot90Cw, Rot180, Rot270Cw, FlipH, FlipV };

inline constexpr std::string_view to_string(AugmentOp op) {
  switch (op) {
    case AugmentOp::Rot90Cw: return "rot90cw";
    case AugmentOp::Rot180: return "rot180";
    case AugmentOp::Rot270Cw: return "rot270cw";
    case AugmentOp::FlipH: return "flip_h";
    case AugmentOp::FlipV: return "flip_v";
  }
  return "?";
}

inline AugmentOp parse_augment_op(std::string_view s) {
  for (AugmentOp op : {AugmentOp::Rot90Cw, AugmentOp::Rot180, AugmentOp::Rot270Cw, AugmentOp::FlipH, AugmentOp::FlipV}) {
    if (to_string(op) == s) return op;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown augmentation '" + std::string(s) + "'");
}

/// Continuous-coordinate point map of `op` on a width x height image.
inline Point transform_point(Point p, AugmentOp op, double width, double height) {
  switch (op) {
    case AugmentOp::Rot90Cw: return {height - p.y, p.x};
    case AugmentOp::Rot180: return {width - p.x, height - p.y};
    case AugmentOp::Rot270Cw: return {p.y, width - p.x};
    case AugmentOp::FlipH: return {width - p.x, p.y};
    case AugmentOp::FlipV: return {p.x, height - p.y};
  }
  return p;
}

inline bool swaps_dimensions(AugmentOp op) { return op == AugmentOp::Rot90Cw || op == AugmentOp::Rot270Cw; }

inline GraspBox transform_box(const GraspBox& b, AugmentOp op, double width, double height) {
  const Point c = transform_point({b.x, b.y}, op, width, height);
  double theta = b.theta;
  switch (op) {
    case AugmentOp::Rot90Cw:
    case AugmentOp::Rot270Cw: theta = b.theta + 90.0; break;
    case AugmentOp::Rot180: break;
    case AugmentOp::FlipH:
    case AugmentOp::FlipV: theta = 180.0 - b.theta; break;
  }
  return GraspBox(c.x, c.y, b.w, b.h, theta);
}

/// Applies `op` to every label of an image; rotations by 90 degrees swap width and height.
inline AnnotatedImage transform_labels(const AnnotatedImage& img, AugmentOp op) {
  AnnotatedImage out = img;
  out.boxes.clear();
  for (const GraspBox& b : img.boxes) out.boxes.push_back(transform_box(b, op, img.width, img.height));
  if (swaps_dimensions(op)) std::swap(out.width, out.height);
  return out;
}

}  // namespace ram
