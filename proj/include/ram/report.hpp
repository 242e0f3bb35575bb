#pragma once

#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ram/evaluation.hpp"
#include "ram/geometry.hpp"
#include "ram/text.hpp"

// Markdown / CSV accuracy tables (one column per subset, then mean and macro),
// threshold sweeps, and SVG overlays.

namespace ram {

namespace detail {

inline std::string percent(double ratio) { return fixed(100.0 * ratio, 1); }

inline std::string wrap_name(AngleWrap w) { return w == AngleWrap::Mod180 ? "mod180" : "literal"; }

inline std::vector<SubsetTag> subset_columns(const std::map<SubsetTag, SubsetScore>& subsets) {
  std::vector<SubsetTag> cols;
  for (const auto& [tag, score] : subsets) cols.push_back(tag);
  return cols;
}

inline std::string criteria_line(const EvalCriteria& c, std::size_t top_n) {
  return "angle <= " + fixed(c.angle_threshold, 2) + " deg, IoU >= " + fixed(c.iou_threshold, 2) +
         ", angle wrap " + wrap_name(c.angle_wrap) + ", top-" + std::to_string(top_n);
}

}  // namespace detail

/// One-row summary table: Model | <subset> (%) ... | Mean (%) | Macro (%).
inline std::string render_summary_markdown(const EvalReport& report, const std::string& model, std::size_t top_n = 1) {
  const auto cols = detail::subset_columns(report.subsets);
  std::ostringstream os;
  os << "# Detection results\n\n";
  os << "Criteria: " << detail::criteria_line(report.criteria, top_n) << "\n\n";
  os << "| Model |";
  for (SubsetTag t : cols) os << ' ' << to_string(t) << " (%) |";
  os << " Mean (%) | Macro (%) |\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) os << "---|";
  os << "---|---|\n";
  os << "| " << model << " |";
  for (SubsetTag t : cols) os << ' ' << detail::percent(report.subsets.at(t).accuracy()) << " |";
  os << ' ' << detail::percent(report.accuracy) << " | " << detail::percent(report.macro_accuracy()) << " |\n\n";
  os << "Images: " << report.per_image.size() << ", correct: " << report.correct_count << "\n";
  return os.str();
}

inline std::string render_summary_csv(const EvalReport& report, const std::string& model) {
  const auto cols = detail::subset_columns(report.subsets);
  std::ostringstream os;
  os << "model";
  for (SubsetTag t : cols) os << ',' << to_string(t);
  os << ",mean,macro,images,correct\n";
  os << detail::csv_escape(model);
  for (SubsetTag t : cols) os << ',' << detail::percent(report.subsets.at(t).accuracy());
  os << ',' << detail::percent(report.accuracy) << ',' << detail::percent(report.macro_accuracy()) << ','
     << report.per_image.size() << ',' << report.correct_count << '\n';
  return os.str();
}

inline std::string render_per_image_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "image_id,subset,correct,matched_gt,x,y,w,h,theta_deg\n";
  for (const auto& r : report.per_image) {
    os << detail::csv_escape(r.image_id) << ',' << to_string(r.subset) << ',' << (r.verdict.correct ? 1 : 0) << ',';
    if (r.verdict.matched_gt) os << *r.verdict.matched_gt;
    if (r.verdict.judged_box) {
      const auto& b = *r.verdict.judged_box;
      os << ',' << detail::fixed(b.x, 3) << ',' << detail::fixed(b.y, 3) << ',' << detail::fixed(b.w, 3) << ','
         << detail::fixed(b.h, 3) << ',' << detail::fixed(b.theta, 3) << '\n';
    } else {
      os << ",,,,,\n";
    }
  }
  return os.str();
}

inline std::string sweep_header(SweepKind kind) { return kind == SweepKind::Angle ? "Angle threshold" : "IoU threshold"; }

inline std::string sweep_label(SweepKind kind, double t) {
  return kind == SweepKind::Angle ? detail::fixed(t, 0) + "°" : detail::fixed(t, 2);
}

/// Threshold sweep as a table: one row per threshold, one column per subset.
inline std::string render_sweep_markdown(const SweepTable& table, const std::string& model) {
  std::ostringstream os;
  const bool angle = table.kind == SweepKind::Angle;
  os << "# " << (angle ? "Changing the angular threshold" : "Changing the IoU threshold") << ": " << model << "\n\n";
  os << "Fixed: "
     << (angle ? "IoU >= " + detail::fixed(table.base.iou_threshold, 2)
               : "angle <= " + detail::fixed(table.base.angle_threshold, 2) + " deg")
     << "\n\n";
  const auto cols = table.rows.empty() ? std::vector<SubsetTag>{} : detail::subset_columns(table.rows.front().subsets);
  os << "| " << sweep_header(table.kind) << " |";
  for (SubsetTag t : cols) os << ' ' << to_string(t) << " (%) |";
  os << " Mean (%) | Macro (%) |\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) os << "---|";
  os << "---|---|\n";
  for (const auto& row : table.rows) {
    os << "| " << sweep_label(table.kind, row.threshold) << " |";
    for (SubsetTag t : cols) {
      const auto it = row.subsets.find(t);
      os << ' ' << (it == row.subsets.end() ? std::string("-") : detail::percent(it->second.accuracy())) << " |";
    }
    os << ' ' << detail::percent(row.accuracy) << " | " << detail::percent(row.macro_accuracy) << " |\n";
  }
  return os.str();
}

inline std::string render_sweep_csv(const SweepTable& table) {
  std::ostringstream os;
  const auto cols = table.rows.empty() ? std::vector<SubsetTag>{} : detail::subset_columns(table.rows.front().subsets);
  os << (table.kind == SweepKind::Angle ? "angle_threshold" : "iou_threshold");
  for (SubsetTag t : cols) os << ',' << to_string(t);
  os << ",mean,macro\n";
  for (const auto& row : table.rows) {
    os << detail::fixed(row.threshold, table.kind == SweepKind::Angle ? 2 : 3);
    for (SubsetTag t : cols) {
      const auto it = row.subsets.find(t);
      os << ',' << (it == row.subsets.end() ? std::string() : detail::percent(it->second.accuracy()));
    }
    os << ',' << detail::percent(row.accuracy) << ',' << detail::percent(row.macro_accuracy) << '\n';
  }
  return os.str();
}

namespace detail {

inline std::string svg_polygon(const GraspBox& box, const char* style) {
  std::string pts;
  for (const Point& p : box_to_polygon(box).vertices) {
    if (!pts.empty()) pts += ' ';
    pts += fixed(p.x, 2) + "," + fixed(p.y, 2);
  }
  return "  <polygon points=\"" + pts + "\" " + style + "/>\n";
}

}  // namespace detail

/// Ground truths drawn as thin solid green outlines, the judged prediction as
/// a thick dashed outline (blue when correct, red otherwise).
inline std::string render_overlay_svg(const std::string& image_id, int width, int height,
                                      std::span<const GraspBox> gts, const ImageVerdict& verdict) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "  <title>" << detail::xml_escape(image_id) << "</title>\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
  for (const GraspBox& g : gts) {
    os << detail::svg_polygon(g, "class=\"gt\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.5\"");
  }
  if (verdict.judged_box) {
    os << detail::svg_polygon(*verdict.judged_box,
                              verdict.correct
                                  ? "class=\"pred correct\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"3\" "
                                    "stroke-dasharray=\"6,3\""
                                  : "class=\"pred incorrect\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"3\" "
                                    "stroke-dasharray=\"6,3\"");
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ram
