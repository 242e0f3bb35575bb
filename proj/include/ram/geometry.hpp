#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ram/error.hpp"

namespace ram {

/// Reduces any real angle into the canonical grasp range [0, 180).
inline double normalize_angle(double degrees) {
  double r = std::fmod(degrees, 180.0);
  if (r < 0.0) r += 180.0;
  // fmod of a tiny negative value can round up to exactly 180.
  if (r >= 180.0) r = 0.0;
  return r;
}

inline constexpr double deg_to_rad(double degrees) { return degrees * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double radians) { return radians * 180.0 / std::numbers::pi; }

/// Oriented grasp rectangle in image pixels (y axis pointing down).
///
/// `w` is the gripper opening measured along the edge that makes angle `theta`
/// with the +x axis, counterclockwise as seen on screen. `h` is the finger width.
/// A grasp rectangle is unchanged by a half turn, so `theta` is kept in [0, 180).
struct GraspBox {
  double x;
  double y;
  double w;
  double h;
  double theta;

  GraspBox(double cx, double cy, double width, double height, double theta_deg)
      : x(cx), y(cy), w(width), h(height), theta(normalize_angle(theta_deg)) {
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(theta_deg)) {
      throw Error(ErrorCode::InvalidArgument, "grasp box has non-finite center or angle");
    }
    if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height)) {
      throw Error(ErrorCode::InvalidArgument,
                  "grasp box needs finite positive w and h, got w=" + std::to_string(width) +
                      " h=" + std::to_string(height));
    }
  }

  friend bool operator==(const GraspBox&, const GraspBox&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }
  friend bool operator==(const Point&, const Point&) = default;
};

inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }

/// Convex polygon with positive shoelace orientation in raw image coordinates.
/// An empty vertex list is the empty set.
struct ConvexPolygon {
  std::vector<Point> vertices;

  bool empty() const { return vertices.empty(); }
  std::size_t size() const { return vertices.size(); }
};

inline constexpr double kVertexMergeTolerance = 1e-9;
inline constexpr double kMinIntersectionArea = 1e-12;

/// Unit vectors along the w edge and the h edge of a box.
struct BoxAxes {
  Point along_w;
  Point along_h;
};

inline BoxAxes box_axes(const GraspBox& box) {
  const double rad = deg_to_rad(box.theta);
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  // Screen-counterclockwise with y down means the y component is negated.
  return {{c, -s}, {s, c}};
}

inline ConvexPolygon box_to_polygon(const GraspBox& box) {
  const auto [u, v] = box_axes(box);
  const Point c{box.x, box.y};
  const Point hw = u * (box.w / 2.0);
  const Point hh = v * (box.h / 2.0);
  return {{c - hw - hh, c + hw - hh, c + hw + hh, c - hw + hh}};
}

inline double signed_area(std::span<const Point> pts) {
  if (pts.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point& a = pts[i];
    const Point& b = pts[(i + 1) % pts.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  return acc / 2.0;
}

/// Shoelace area.
inline double polygon_area(const ConvexPolygon& p) { return std::abs(signed_area(p.vertices)); }

namespace detail {

inline bool near(Point a, Point b) {
  return std::abs(a.x - b.x) <= kVertexMergeTolerance && std::abs(a.y - b.y) <= kVertexMergeTolerance;
}

// Drops repeated vertices and vertices lying on the segment between their neighbours.
inline std::vector<Point> simplify(std::vector<Point> pts) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const Point& p : pts) {
    if (out.empty() || !near(out.back(), p)) out.push_back(p);
  }
  while (out.size() > 1 && near(out.front(), out.back())) out.pop_back();

  bool changed = true;
  while (changed && out.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Point& prev = out[(i + out.size() - 1) % out.size()];
      const Point& next = out[(i + 1) % out.size()];
      const Point e1 = out[i] - prev;
      const Point e2 = next - out[i];
      const double scale = std::hypot(e1.x, e1.y) * std::hypot(e2.x, e2.y);
      if (std::abs(cross(e1, e2)) <= kVertexMergeTolerance * scale && dot(e1, e2) >= 0.0) {
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Intersection of two convex polygons by successive half-plane clipping.
/// Returns the empty polygon for disjoint inputs or slivers below kMinIntersectionArea.
inline ConvexPolygon polygon_clip(const ConvexPolygon& subject, const ConvexPolygon& clip) {
  if (subject.size() < 3 || clip.size() < 3) return {};

  std::vector<Point> clip_pts = clip.vertices;
  if (signed_area(clip_pts) < 0.0) std::reverse(clip_pts.begin(), clip_pts.end());

  std::vector<Point> output = subject.vertices;
  std::vector<Point> input;
  for (std::size_t e = 0; e < clip_pts.size() && !output.empty(); ++e) {
    const Point a = clip_pts[e];
    const Point edge = clip_pts[(e + 1) % clip_pts.size()] - a;
    input.swap(output);
    output.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Point cur = input[i];
      const Point prev = input[(i + input.size() - 1) % input.size()];
      const double d_cur = cross(edge, cur - a);
      const double d_prev = cross(edge, prev - a);
      const bool cur_in = d_cur >= 0.0;
      const bool prev_in = d_prev >= 0.0;
      if (cur_in != prev_in) {
        const double t = d_prev / (d_prev - d_cur);
        output.push_back(prev + (cur - prev) * t);
      }
      if (cur_in) output.push_back(cur);
    }
  }

  ConvexPolygon result{detail::simplify(std::move(output))};
  if (result.size() < 3 || polygon_area(result) < kMinIntersectionArea) return {};
  return result;
}

/// Exact intersection-over-union of two oriented rectangles.
inline double oriented_iou(const GraspBox& a, const GraspBox& b) {
  const double area_a = a.w * a.h;
  const double area_b = b.w * b.h;
  const double inter = polygon_area(polygon_clip(box_to_polygon(a), box_to_polygon(b)));
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline bool box_contains(const GraspBox& box, Point p) {
  const auto [u, v] = box_axes(box);
  const Point d{p.x - box.x, p.y - box.y};
  return std::abs(dot(d, u)) <= box.w / 2.0 && std::abs(dot(d, v)) <= box.h / 2.0;
}

/// Grid-sampled IoU used to cross-check oriented_iou. Samples cell centers of a
/// resolution x resolution grid laid over the joint bounding box of both rectangles.
inline double raster_iou(const GraspBox& a, const GraspBox& b, int resolution) {
  if (resolution < 100) {
    throw Error(ErrorCode::InvalidArgument, "raster_iou resolution must be >= 100");
  }
  double min_x = a.x, max_x = a.x, min_y = a.y, max_y = a.y;
  for (const GraspBox* box : {&a, &b}) {
    for (const Point& p : box_to_polygon(*box).vertices) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  const double dx = (max_x - min_x) / resolution;
  const double dy = (max_y - min_y) / resolution;
  long in_a = 0, in_b = 0, in_both = 0;
  for (int j = 0; j < resolution; ++j) {
    const double py = min_y + (j + 0.5) * dy;
    for (int i = 0; i < resolution; ++i) {
      const Point p{min_x + (i + 0.5) * dx, py};
      const bool ia = box_contains(a, p);
      const bool ib = box_contains(b, p);
      in_a += ia;
      in_b += ib;
      in_both += ia && ib;
    }
  }
  const long uni = in_a + in_b - in_both;
  return uni == 0 ? 0.0 : static_cast<double>(in_both) / static_cast<double>(uni);
}

enum class AngleWrap {
  Mod180,   // circular distance on the half-turn circle
  Literal,  // plain |t1 - t2|
};

/// Distance between two grasp angles on the mod-180 circle, in [0, 90].
inline double angular_distance(double t1, double t2) {
  const double d = std::fmod(std::abs(t1 - t2), 180.0);
  return std::min(d, 180.0 - d);
}

inline double angle_difference(double t1, double t2, AngleWrap wrap) {
  if (wrap == AngleWrap::Literal) return std::abs(normalize_angle(t1) - normalize_angle(t2));
  return angular_distance(t1, t2);
}

}  // namespace ram
