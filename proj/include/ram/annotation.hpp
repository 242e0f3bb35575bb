#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "ram/error.hpp"
#include "ram/evaluation.hpp"
#include "ram/geometry.hpp"
#include "ram/text.hpp"

// rolabelimg "robndbox" annotations:
//   annotation/size/{width,height}
//   annotation/object/{name, robndbox/{cx, cy, w, h, angle}}
// with the angle in radians in [0, pi].

namespace ram {

struct AnnotatedImage {
  std::string image_id;
  int width = 0;
  int height = 0;
  SubsetTag subset = SubsetTag::Other;
  std::vector<GraspBox> boxes;
  std::vector<std::string> object_names;  // parallel to boxes
};

/// How the stored radian angle maps onto the internal counterclockwise-degrees angle.
enum class XmlAngleConvention {
  Counterclockwise,  // degrees = angle * 180 / pi
  Clockwise,         // degrees = (180 - angle * 180 / pi) mod 180
};

struct ParseOptions {
  XmlAngleConvention angle_convention = XmlAngleConvention::Counterclockwise;
};

/// Angles this far outside [0, pi] are snapped back with a warning instead of rejected.
inline constexpr double kAngleSlackRad = 1e-6;

namespace detail {

using boost::property_tree::ptree;

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline const ptree& require_child(const ptree& node, const std::string& name) {
  const auto child = node.get_child_optional(name);
  if (!child) throw Error(ErrorCode::MissingField, name);
  return *child;
}

template <typename T>
T parse_number(const ptree& node, const std::string& name) {
  const std::string raw = require_child(node, name).data();
  const std::string_view s = trim(raw);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::MalformedXml, "field <" + name + "> is not a number: '" + raw + "'");
  }
  return value;
}

inline std::string stem(std::string_view filename) {
  const auto slash = filename.find_last_of("/\\");
  if (slash != std::string_view::npos) filename.remove_prefix(slash + 1);
  const auto dot = filename.find_last_of('.');
  if (dot != std::string_view::npos && dot > 0) filename = filename.substr(0, dot);
  return std::string(filename);
}

inline double angle_from_radians(double rad, XmlAngleConvention conv) {
  const double deg = rad_to_deg(rad);
  return conv == XmlAngleConvention::Counterclockwise ? normalize_angle(deg) : normalize_angle(180.0 - deg);
}

inline double angle_to_radians(double deg, XmlAngleConvention conv) {
  const double d = conv == XmlAngleConvention::Counterclockwise ? deg : normalize_angle(180.0 - deg);
  return deg_to_rad(d);
}

}  // namespace detail

/// Parses one rolabelimg XML document. Angles are converted to degrees here so
/// nothing downstream sees radians. `warnings` collects non-fatal repairs.
inline AnnotatedImage parse_annotation(std::string_view xml, const ParseOptions& options = {},
                                       std::vector<std::string>* warnings = nullptr) {
  using detail::ptree;
  ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    boost::property_tree::read_xml(in, tree);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedXml, e.what());
  }
  const ptree& root = detail::require_child(tree, "annotation");

  AnnotatedImage img;
  if (const auto fn = root.get_optional<std::string>("filename")) img.image_id = detail::stem(detail::trim(*fn));
  if (const auto folder = root.get_optional<std::string>("folder")) {
    img.subset = parse_subset_tag(detail::trim(*folder));
  }
  const ptree& size = detail::require_child(root, "size");
  img.width = detail::parse_number<int>(size, "width");
  img.height = detail::parse_number<int>(size, "height");

  std::size_t index = 0;
  for (const auto& [tag, obj] : root) {
    if (tag != "object") continue;
    const std::string name{detail::trim(obj.get<std::string>("name", ""))};
    if (const auto rb = obj.get_child_optional("robndbox")) {
      const double cx = detail::parse_number<double>(*rb, "cx");
      const double cy = detail::parse_number<double>(*rb, "cy");
      const double w = detail::parse_number<double>(*rb, "w");
      const double h = detail::parse_number<double>(*rb, "h");
      double angle = detail::parse_number<double>(*rb, "angle");
      if (!(angle >= -kAngleSlackRad && angle <= std::numbers::pi + kAngleSlackRad)) {
        throw Error(ErrorCode::AngleOutOfRange, "object " + std::to_string(index) + " angle " +
                                                    detail::shortest(angle) + " rad is outside [0, pi]");
      }
      if (angle < 0.0 || angle > std::numbers::pi) {
        if (warnings) {
          warnings->push_back("object " + std::to_string(index) + " angle " + detail::shortest(angle) +
                              " rad snapped into [0, pi]");
        }
        angle = std::clamp(angle, 0.0, std::numbers::pi);
      }
      img.boxes.emplace_back(cx, cy, w, h, detail::angle_from_radians(angle, options.angle_convention));
    } else if (const auto bb = obj.get_child_optional("bndbox")) {
      const double x0 = detail::parse_number<double>(*bb, "xmin");
      const double y0 = detail::parse_number<double>(*bb, "ymin");
      const double x1 = detail::parse_number<double>(*bb, "xmax");
      const double y1 = detail::parse_number<double>(*bb, "ymax");
      img.boxes.emplace_back((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0, 0.0);
    } else {
      throw Error(ErrorCode::MissingField, "robndbox");
    }
    img.object_names.push_back(name);
    ++index;
  }
  return img;
}

/// Canonical rolabelimg document with a fixed element order, so the same
/// image always serializes to the same bytes. The subset tag goes in <folder>.
inline std::string write_annotation(const AnnotatedImage& img, const ParseOptions& options = {}) {
  std::string out;
  out += "<annotation verified=\"no\">\n";
  out += "  <folder>" + std::string(to_string(img.subset)) + "</folder>\n";
  out += "  <filename>" + detail::xml_escape(img.image_id) + "</filename>\n";
  out += "  <size>\n";
  out += "    <width>" + std::to_string(img.width) + "</width>\n";
  out += "    <height>" + std::to_string(img.height) + "</height>\n";
  out += "    <depth>3</depth>\n";
  out += "  </size>\n";
  out += "  <segmented>0</segmented>\n";
  for (std::size_t i = 0; i < img.boxes.size(); ++i) {
    const GraspBox& b = img.boxes[i];
    const std::string name = i < img.object_names.size() ? img.object_names[i] : std::string();
    out += "  <object>\n";
    out += "    <type>robndbox</type>\n";
    out += "    <name>" + detail::xml_escape(name) + "</name>\n";
    out += "    <pose>Unspecified</pose>\n";
    out += "    <truncated>0</truncated>\n";
    out += "    <difficult>0</difficult>\n";
    out += "    <robndbox>\n";
    out += "      <cx>" + detail::shortest(b.x) + "</cx>\n";
    out += "      <cy>" + detail::shortest(b.y) + "</cy>\n";
    out += "      <w>" + detail::shortest(b.w) + "</w>\n";
    out += "      <h>" + detail::shortest(b.h) + "</h>\n";
    out += "      <angle>" + detail::shortest(detail::angle_to_radians(b.theta, options.angle_convention)) +
           "</angle>\n";
    out += "    </robndbox>\n";
    out += "  </object>\n";
  }
  out += "</annotation>\n";
  return out;
}

/// Constraint violations of an already-parsed annotation (empty when valid).
inline std::vector<std::string> annotation_issues(const AnnotatedImage& img) {
  std::vector<std::string> issues;
  if (img.width <= 0 || img.height <= 0) {
    issues.push_back("image size " + std::to_string(img.width) + "x" + std::to_string(img.height) + " is not positive");
  }
  if (img.boxes.empty()) issues.push_back("no grasp boxes annotated");
  for (std::size_t i = 0; i < img.boxes.size(); ++i) {
    const GraspBox& b = img.boxes[i];
    if (b.x < 0.0 || b.y < 0.0 || b.x >= img.width || b.y >= img.height) {
      issues.push_back("object " + std::to_string(i) + " center (" + detail::shortest(b.x) + ", " +
                       detail::shortest(b.y) + ") is outside the image");
    }
  }
  return issues;
}

}  // namespace ram
