#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ram/anchor_codec.hpp"
#include "ram/annotation.hpp"
#include "ram/assignment.hpp"
#include "ram/error.hpp"
#include "ram/evaluation.hpp"
#include "ram/manifest.hpp"
#include "ram/parallel.hpp"
#include "ram/report.hpp"
#include "ram/tensor_io.hpp"
#include "ram/text.hpp"
#include "ram/toy_trainer.hpp"

// ramgrasp: validate / stats / encode / decode / eval / fit-demo.
// Exit codes: 0 ok, 1 validation or evaluation failure, 2 usage error, 3 I/O error.

namespace ramcli {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitIo = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Global flags as typed; resolved into library configs by resolve().
struct GlobalFlags {
  std::vector<int> grid{13, 13};
  int anchors = 3;
  std::vector<int> image_size{416, 416};
  std::vector<double> anchor_size{50.0, 50.0};
  double angle_thresh = 30.0;
  double iou_thresh = 0.25;
  std::string angle_wrap = "mod180";
  std::string match_rule = "one-sided";
  std::string xml_angle_convention = "ccw";
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  bool show_config = false;
};

struct Settings {
  ram::AnchorGridConfig grid;
  bool image_size_given = false;
  ram::EvalCriteria criteria;
  ram::MatchRule rule = ram::MatchRule::OneSided;
  ram::ParseOptions parse;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
};

inline Settings resolve(const GlobalFlags& f, bool image_size_given) {
  Settings s;
  if (f.grid.size() != 2 || f.image_size.size() != 2 || f.anchor_size.size() != 2) {
    throw UsageError("--grid, --image-size and --anchor-size each take two comma-separated values");
  }
  s.grid.grid_rows = f.grid[0];
  s.grid.grid_cols = f.grid[1];
  s.grid.anchors_per_cell = f.anchors;
  s.grid.image_h = f.image_size[0];
  s.grid.image_w = f.image_size[1];
  s.grid.anchor_w = f.anchor_size[0];
  s.grid.anchor_h = f.anchor_size[1];
  s.image_size_given = image_size_given;
  s.criteria.angle_threshold = f.angle_thresh;
  s.criteria.iou_threshold = f.iou_thresh;
  s.criteria.angle_wrap = f.angle_wrap == "literal" ? ram::AngleWrap::Literal : ram::AngleWrap::Mod180;
  s.rule = f.match_rule == "symmetric" ? ram::MatchRule::Symmetric : ram::MatchRule::OneSided;
  s.parse.angle_convention =
      f.xml_angle_convention == "cw" ? ram::XmlAngleConvention::Clockwise : ram::XmlAngleConvention::Counterclockwise;
  s.seed = f.seed;
  s.threads = std::max<std::size_t>(1, f.threads);
  try {
    s.grid.validate();
    s.criteria.validate();
  } catch (const ram::Error& e) {
    throw UsageError(e.what());
  }
  return s;
}

/// Effective global configuration in the same key=value form --config reads.
inline std::string render_config(const GlobalFlags& f) {
  std::ostringstream os;
  os << "grid=" << f.grid[0] << ',' << f.grid[1] << '\n';
  os << "anchors=" << f.anchors << '\n';
  os << "image-size=" << f.image_size[0] << ',' << f.image_size[1] << '\n';
  os << "anchor-size=" << ram::detail::shortest(f.anchor_size[0]) << ',' << ram::detail::shortest(f.anchor_size[1])
     << '\n';
  os << "angle-thresh=" << ram::detail::shortest(f.angle_thresh) << '\n';
  os << "iou-thresh=" << ram::detail::shortest(f.iou_thresh) << '\n';
  os << "angle-wrap=" << f.angle_wrap << '\n';
  os << "match-rule=" << f.match_rule << '\n';
  os << "xml-angle-convention=" << f.xml_angle_convention << '\n';
  os << "seed=" << f.seed << '\n';
  os << "threads=" << f.threads << '\n';
  return os.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  f << content;
  if (!f) throw ram::Error(ram::ErrorCode::Io, "cannot write " + path.string());
}

// ---------------------------------------------------------------- validate

inline int cmd_validate(const Settings& s, const fs::path& dir, std::ostream& out) {
  if (!fs::is_directory(dir)) throw ram::Error(ram::ErrorCode::Io, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".xml") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  struct FileResult {
    std::vector<std::string> problems;
    std::vector<std::string> warnings;
  };
  std::vector<FileResult> results(files.size());
  ram::parallel_for(files.size(), s.threads, [&](std::size_t i) {
    FileResult& r = results[i];
    try {
      const auto img = ram::parse_annotation(ram::read_text_file(files[i]), s.parse, &r.warnings);
      for (const auto& issue : ram::annotation_issues(img)) r.problems.push_back("OutOfImage: " + issue);
    } catch (const ram::Error& e) {
      r.problems.push_back(e.what());
    }
  });

  std::size_t failed = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto rel = files[i].lexically_relative(dir).generic_string();
    const auto& r = results[i];
    out << (r.problems.empty() ? "PASS " : "FAIL ") << rel << '\n';
    for (const auto& p : r.problems) out << "  error: " << p << '\n';
    for (const auto& w : r.warnings) out << "  warning: " << w << '\n';
    failed += !r.problems.empty();
  }
  out << files.size() << " files: " << files.size() - failed << " passed, " << failed << " failed\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- stats

struct DatasetStats {
  std::size_t images = 0;
  std::size_t boxes = 0;
  ram::AnchorDims anchor;
  std::size_t anchor_images = 0;
  std::map<std::string, std::size_t> subsets;
  std::array<std::size_t, 18> angle_histogram{};
  std::map<std::size_t, std::size_t> boxes_per_image;
};

inline DatasetStats compute_stats(const ram::DatasetManifest& m, const Settings& s) {
  DatasetStats st;
  const auto images = ram::load_annotations(m.entries, s.parse, s.threads);
  const auto train = ram::manifest_splits(m).first;
  std::set<std::string> train_ids;
  for (const auto& e : train) train_ids.insert(e.id);
  std::vector<ram::AnnotatedImage> train_images;
  for (const auto& img : images) {
    ++st.images;
    ++st.subsets[std::string(ram::to_string(img.subset))];
    ++st.boxes_per_image[img.boxes.size()];
    for (const auto& b : img.boxes) {
      ++st.boxes;
      ++st.angle_histogram[std::min<std::size_t>(17, static_cast<std::size_t>(b.theta / 10.0))];
    }
    if (train_ids.count(img.image_id)) train_images.push_back(img);
  }
  st.anchor_images = train_images.size();
  st.anchor = ram::anchor_dims_from(train_images);
  return st;
}

inline nlohmann::json stats_to_json(const DatasetStats& st) {
  nlohmann::json j;
  j["images"] = st.images;
  j["boxes"] = st.boxes;
  j["anchor_w"] = st.anchor.w;
  j["anchor_h"] = st.anchor.h;
  j["anchor_images"] = st.anchor_images;
  j["subsets"] = st.subsets;
  j["angle_histogram"] = st.angle_histogram;
  nlohmann::json bpi = nlohmann::json::object();
  for (const auto& [n, c] : st.boxes_per_image) bpi[std::to_string(n)] = c;
  j["boxes_per_image"] = bpi;
  return j;
}

inline std::string render_stats(const DatasetStats& st) {
  std::ostringstream os;
  os << "images: " << st.images << '\n';
  os << "boxes: " << st.boxes << '\n';
  os << "anchor_w: " << ram::detail::fixed(st.anchor.w, 4) << '\n';
  os << "anchor_h: " << ram::detail::fixed(st.anchor.h, 4) << '\n';
  os << "anchor images (training split): " << st.anchor_images << '\n';
  os << "subsets:\n";
  for (const auto& [tag, n] : st.subsets) os << "  " << tag << ": " << n << '\n';
  os << "angle histogram (degrees):\n";
  for (std::size_t b = 0; b < st.angle_histogram.size(); ++b) {
    os << "  [" << 10 * b << ", " << 10 * (b + 1) << "): " << st.angle_histogram[b] << '\n';
  }
  os << "boxes per image:\n";
  for (const auto& [n, c] : st.boxes_per_image) os << "  " << n << ": " << c << '\n';
  return os.str();
}

// ---------------------------------------------------------------- encode

inline ram::OutputTensor label_tensor(const ram::Assignment& a) {
  ram::OutputTensor t(a.config());
  ram::for_each_anchor(a.config(), [&](const ram::Anchor& anchor) {
    if (const auto& label = a.at(anchor)) {
      t.at(anchor, ram::kConfidence) = 1.0;
      t.set_offsets(anchor, label->target);
    }
  });
  return t;
}

struct EncodeArgs {
  std::string xml;
  std::string output;
  std::string assignment_json;
  bool json = false;
};

inline int cmd_encode(Settings s, const EncodeArgs& a, std::ostream& out) {
  const auto img = ram::parse_annotation(ram::read_text_file(a.xml), s.parse);
  if (!s.image_size_given) {
    s.grid.image_h = img.height;
    s.grid.image_w = img.width;
    s.grid.validate();
  } else if (img.height != s.grid.image_h || img.width != s.grid.image_w) {
    throw ram::Error(ram::ErrorCode::ConfigMismatch, "annotation is " + std::to_string(img.height) + "x" +
                                                         std::to_string(img.width) + " (HxW), --image-size is " +
                                                         std::to_string(s.grid.image_h) + "x" +
                                                         std::to_string(s.grid.image_w));
  }
  const ram::Assignment assignment = ram::match(s.grid, img.boxes, s.rule);
  const ram::OutputTensor t = label_tensor(assignment);
  if (a.json) {
    write_file(a.output, ram::tensor_to_json(t).dump(1) + "\n");
  } else {
    std::ostringstream bin;
    ram::write_tensor(bin, t);
    write_file(a.output, bin.str());
  }
  if (!a.assignment_json.empty()) write_file(a.assignment_json, ram::assignment_to_json(assignment).dump(1) + "\n");
  out << "encoded " << img.boxes.size() << " boxes: " << assignment.positive_count() << " positive of "
      << s.grid.anchor_count() << " anchors -> " << a.output << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- decode

inline ram::OutputTensor load_tensor(const fs::path& path, const ram::AnchorGridConfig& grid) {
  const std::string bytes = ram::read_text_file(path);
  const auto first = bytes.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && bytes[first] == '{') {
    try {
      return ram::tensor_from_json(nlohmann::json::parse(bytes), grid);
    } catch (const nlohmann::json::exception& e) {
      throw ram::Error(ram::ErrorCode::MalformedTensor, path.string() + ": " + e.what());
    }
  }
  std::istringstream in(bytes);
  return ram::read_tensor(in, grid);
}

struct DecodeArgs {
  std::vector<std::string> tensors;
  std::string output = "-";
  std::string image_id;
  bool label_tensor = false;
  double min_conf = 0.5;
  std::size_t top = 0;
};

/// One JSONL record: every anchor at or above min_conf, most confident first.
inline nlohmann::json decode_record(const ram::OutputTensor& t, const std::string& image_id, const DecodeArgs& a) {
  std::vector<ram::Prediction> preds;
  ram::for_each_anchor(t.config(), [&](const ram::Anchor& anchor) {
    const double raw = t.at(anchor, ram::kConfidence);
    const double conf = a.label_tensor ? std::clamp(raw, 0.0, 1.0) : ram::sigmoid(raw);
    if (conf < a.min_conf) return;
    preds.push_back({image_id, ram::decode(t.config(), anchor, t.offsets(anchor)), conf});
  });
  const auto order = ram::rank_by_confidence(preds);
  nlohmann::json boxes = nlohmann::json::array();
  for (std::size_t r = 0; r < order.size() && (a.top == 0 || r < a.top); ++r) {
    const auto& p = preds[order[r]];
    boxes.push_back({{"x", p.box.x},
                     {"y", p.box.y},
                     {"w", p.box.w},
                     {"h", p.box.h},
                     {"theta_deg", p.box.theta},
                     {"confidence", p.confidence}});
  }
  return {{"image_id", image_id}, {"boxes", std::move(boxes)}};
}

inline int cmd_decode(const Settings& s, const DecodeArgs& a, std::ostream& out) {
  if (!a.image_id.empty() && a.tensors.size() != 1) throw UsageError("--image-id needs exactly one tensor file");
  std::string lines;
  for (const auto& path : a.tensors) {
    const ram::OutputTensor t = load_tensor(path, s.grid);
    const std::string id = a.image_id.empty() ? fs::path(path).stem().string() : a.image_id;
    lines += decode_record(t, id, a).dump() + "\n";
  }
  if (a.output == "-") {
    out << lines;
  } else {
    write_file(a.output, lines);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct PredictionLine {
  std::size_t line = 0;
  std::string image_id;
  std::vector<ram::Prediction> predictions;
};

inline ram::Error malformed(std::size_t line, const std::string& what) {
  return ram::Error(ram::ErrorCode::MalformedJsonl, "line " + std::to_string(line) + ": " + what);
}

/// Parses a predictions JSONL document. Blank lines are skipped.
inline std::vector<PredictionLine> parse_predictions(std::string_view text) {
  std::vector<PredictionLine> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (ram::detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw malformed(line_no, e.what());
    }
    PredictionLine rec;
    rec.line = line_no;
    try {
      if (!j.is_object()) throw malformed(line_no, "record is not an object");
      rec.image_id = j.at("image_id").get<std::string>();
      if (rec.image_id.empty()) throw malformed(line_no, "image_id is empty");
      for (const auto& b : j.at("boxes")) {
        const double theta = b.at("theta_deg").get<double>();
        const double conf = b.at("confidence").get<double>();
        if (!(theta >= 0.0 && theta < 180.0)) throw malformed(line_no, "theta_deg outside [0, 180)");
        if (!(conf >= 0.0 && conf <= 1.0)) throw malformed(line_no, "confidence outside [0, 1]");
        rec.predictions.push_back({rec.image_id,
                                   ram::GraspBox(b.at("x").get<double>(), b.at("y").get<double>(),
                                                 b.at("w").get<double>(), b.at("h").get<double>(), theta),
                                   conf});
      }
    } catch (const nlohmann::json::exception& e) {
      throw malformed(line_no, e.what());
    } catch (const ram::Error& e) {
      if (e.code() == ram::ErrorCode::MalformedJsonl) throw;
      throw malformed(line_no, e.what());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

struct EvalArgs {
  std::string predictions;
  std::string manifest;
  std::string out_dir = ".";
  std::string model;
  bool sweep_angle = false;
  bool sweep_iou = false;
  bool overlay = false;
  bool include_mos = false;
  std::size_t top_n = 1;
};

inline int cmd_eval(const Settings& s, const EvalArgs& a, std::ostream& out) {
  if (a.top_n == 0) throw UsageError("--top-n must be >= 1");
  const ram::DatasetManifest manifest = ram::load_manifest(a.manifest);
  const auto lines = parse_predictions(ram::read_text_file(a.predictions));

  std::set<std::string> known;
  for (const auto& e : manifest.entries) known.insert(e.id);
  std::map<std::string, std::vector<ram::Prediction>> by_image;
  for (const auto& rec : lines) {
    if (!known.count(rec.image_id)) {
      throw ram::Error(ram::ErrorCode::UnknownImageId, "image id '" + rec.image_id + "' on line " +
                                                           std::to_string(rec.line) + " is not in the manifest");
    }
    auto& v = by_image[rec.image_id];
    v.insert(v.end(), rec.predictions.begin(), rec.predictions.end());
  }

  std::vector<ram::ManifestEntry> entries;
  for (const auto& e : ram::manifest_splits(manifest).second) {
    if (e.subset != ram::SubsetTag::MOS || a.include_mos) entries.push_back(e);
  }
  const auto images = ram::load_annotations(entries, s.parse, s.threads);
  std::vector<ram::EvalSample> samples;
  for (const auto& img : images) {
    auto it = by_image.find(img.image_id);
    samples.push_back({img.image_id, img.subset, it == by_image.end() ? std::vector<ram::Prediction>{} : it->second,
                       img.boxes});
  }

  const std::string model = a.model.empty() ? fs::path(a.predictions).stem().string() : a.model;
  const ram::EvalReport report = ram::accuracy(samples, s.criteria, a.top_n);
  const fs::path dir(a.out_dir);
  std::string md = ram::render_summary_markdown(report, model, a.top_n);
  write_file(dir / "results.csv", ram::render_summary_csv(report, model));
  write_file(dir / "per_image.csv", ram::render_per_image_csv(report));
  if (a.sweep_angle) {
    const auto t = ram::threshold_sweep(samples, ram::SweepKind::Angle, ram::default_angle_sweep(), s.criteria, a.top_n);
    const std::string tmd = ram::render_sweep_markdown(t, model);
    md += "\n" + tmd;
    write_file(dir / "sweep_angle.md", tmd);
    write_file(dir / "sweep_angle.csv", ram::render_sweep_csv(t));
  }
  if (a.sweep_iou) {
    const auto t = ram::threshold_sweep(samples, ram::SweepKind::Iou, ram::default_iou_sweep(), s.criteria, a.top_n);
    const std::string tmd = ram::render_sweep_markdown(t, model);
    md += "\n" + tmd;
    write_file(dir / "sweep_iou.md", tmd);
    write_file(dir / "sweep_iou.csv", ram::render_sweep_csv(t));
  }
  write_file(dir / "results.md", md);
  if (a.overlay) {
    ram::parallel_for(images.size(), s.threads, [&](std::size_t i) {
      const auto& img = images[i];
      write_file(dir / "overlays" / (img.image_id + ".svg"),
                 ram::render_overlay_svg(img.image_id, img.width, img.height, img.boxes, report.per_image[i].verdict));
    });
  }
  out << md;
  return kExitOk;
}

// ---------------------------------------------------------------- fit-demo

struct FitDemoArgs {
  std::size_t steps = 2000;
  double lr = 1e-2;
  std::size_t scenes = 500;
  std::size_t held_out = 200;
  double lambda1 = 2.0;
  double lambda2 = 0.024;
  double lambda3 = 10.0;
  std::string out_dir = ".";
};

inline int cmd_fit_demo(const Settings& s, const FitDemoArgs& a, std::ostream& out) {
  ram::toy::DemoRunOptions o;
  o.seed = s.seed;
  o.criteria = s.criteria;
  o.steps = a.steps;
  o.learning_rate = a.lr;
  o.train_scenes = a.scenes;
  o.held_out_scenes = a.held_out;
  o.weights = {a.lambda1, a.lambda2, a.lambda3};
  const ram::toy::DemoRun run = ram::toy::run_demo(o);

  const fs::path dir(a.out_dir);
  write_file(dir / "loss_curve.csv", ram::toy::loss_curve_csv(run.training.curve));
  std::ostringstream bin;
  ram::toy::write_predictor(bin, run.training.predictor);
  write_file(dir / "predictor.ramp", bin.str());

  using ram::detail::fixed;
  out << "scenes: " << a.scenes << " training, " << a.held_out << " held out (seed " << s.seed << ")\n";
  out << "initial loss: " << fixed(run.initial_loss(), 4) << '\n';
  out << "final loss: " << fixed(run.final_loss(), 4) << " (ratio " << fixed(run.loss_ratio(), 4) << ", gate < "
      << fixed(ram::toy::kLossRatioGate, 2) << ")\n";
  out << "baseline accuracy: " << fixed(run.baseline.report.accuracy, 4) << '\n';
  out << "accuracy: " << fixed(run.trained.report.accuracy, 4) << " (gate >= " << fixed(ram::toy::kAccuracyGate, 2)
      << ")\n";
  out << "anchor agreement: " << fixed(run.trained.anchor_agreement, 4) << '\n';
  out << "gate: " << (run.gate_met() ? "met" : "not met") << '\n';
  return run.gate_met() ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- entry point

inline int exit_code_for(const ram::Error& e) {
  switch (e.code()) {
    case ram::ErrorCode::Io: return kExitIo;
    default: return kExitFailure;
  }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rotation-anchor grasp detection toolkit", "ramgrasp"};
  app.set_version_flag("--version", "ramgrasp 1.0");
  app.set_config("--config", "", "Read defaults from a key=value file (flags override it)");
  app.require_subcommand(0, 1);

  GlobalFlags g;
  app.add_option("--grid", g.grid, "Grid rows,cols")->delimiter(',')->expected(2)->capture_default_str();
  app.add_option("--anchors", g.anchors, "Anchors (angle bins) per cell")->capture_default_str();
  auto* image_size_opt =
      app.add_option("--image-size", g.image_size, "Image height,width")->delimiter(',')->expected(2);
  app.add_option("--anchor-size", g.anchor_size, "Anchor w,h in pixels")->delimiter(',')->expected(2);
  app.add_option("--angle-thresh", g.angle_thresh, "Angle threshold in degrees")->capture_default_str();
  app.add_option("--iou-thresh", g.iou_thresh, "IoU threshold")->capture_default_str();
  app.add_option("--angle-wrap", g.angle_wrap, "Angle difference: mod180 or literal")
      ->check(CLI::IsMember({"mod180", "literal"}));
  app.add_option("--match-rule", g.match_rule, "Angle-bin rule: one-sided or symmetric")
      ->check(CLI::IsMember({"one-sided", "symmetric"}));
  app.add_option("--xml-angle-convention", g.xml_angle_convention, "rolabelimg angle direction: ccw or cw")
      ->check(CLI::IsMember({"ccw", "cw"}));
  app.add_option("--seed", g.seed, "Seed for splits and synthetic scenes")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--show-config", g.show_config, "Print the effective configuration");

  std::string validate_dir;
  auto* validate = app.add_subcommand("validate", "Check every .xml annotation under a directory");
  validate->add_option("dir", validate_dir, "Annotation directory")->required();

  std::string stats_manifest;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "Dataset statistics and anchor dimensions");
  stats->add_option("manifest", stats_manifest, "Manifest JSON")->required();
  stats->add_flag("--json", stats_json, "Print JSON instead of text");

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Annotation XML to a label tensor");
  encode->add_option("xml", enc.xml, "Annotation XML")->required();
  encode->add_option("-o,--output", enc.output, "Tensor file")->required();
  encode->add_option("--assignment", enc.assignment_json, "Also write the anchor assignment as JSON");
  encode->add_flag("--json", enc.json, "Write the JSON debug form instead of binary");

  DecodeArgs dec;
  auto* decode = app.add_subcommand("decode", "Tensor files to predictions JSONL");
  decode->add_option("tensors", dec.tensors, "Tensor files (binary or JSON)")->required();
  decode->add_option("-o,--output", dec.output, "Output JSONL, - for stdout")->capture_default_str();
  decode->add_option("--image-id", dec.image_id, "Image id (default: file stem)");
  decode->add_flag("--label-tensor", dec.label_tensor, "Confidence channel holds labels, not logits");
  decode->add_option("--min-conf", dec.min_conf, "Drop boxes below this confidence")->capture_default_str();
  decode->add_option("--top", dec.top, "Keep at most this many boxes per image (0 = all)")->capture_default_str();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score predictions against a manifest");
  eval->add_option("predictions", ev.predictions, "Predictions JSONL")->required();
  eval->add_option("manifest", ev.manifest, "Manifest JSON")->required();
  eval->add_option("--out", ev.out_dir, "Report directory")->capture_default_str();
  eval->add_option("--model", ev.model, "Model name in the tables (default: predictions file stem)");
  eval->add_flag("--sweep-angle", ev.sweep_angle, "Angle threshold sweep 30..10");
  eval->add_flag("--sweep-iou", ev.sweep_iou, "IoU threshold sweep 0.25..0.45");
  eval->add_flag("--overlay", ev.overlay, "Write one SVG overlay per image");
  eval->add_flag("--include-mos", ev.include_mos, "Also score MOS images");
  eval->add_option("--top-n", ev.top_n, "Judge the n most confident boxes")->capture_default_str();

  FitDemoArgs fit;
  auto* fit_demo = app.add_subcommand("fit-demo", "Train and score the toy predictor on synthetic scenes");
  fit_demo->add_option("--steps", fit.steps)->capture_default_str();
  fit_demo->add_option("--lr", fit.lr)->capture_default_str();
  fit_demo->add_option("--scenes", fit.scenes, "Training scenes")->capture_default_str();
  fit_demo->add_option("--held-out", fit.held_out, "Held-out scenes")->capture_default_str();
  fit_demo->add_option("--lambda1", fit.lambda1)->capture_default_str();
  fit_demo->add_option("--lambda2", fit.lambda2)->capture_default_str();
  fit_demo->add_option("--lambda3", fit.lambda3)->capture_default_str();
  fit_demo->add_option("--out", fit.out_dir, "Directory for loss_curve.csv and predictor.ramp")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const Settings s = resolve(g, image_size_opt->count() > 0);
    if (g.show_config) out << render_config(g);
    if (*validate) return cmd_validate(s, validate_dir, out);
    if (*stats) {
      const auto st = compute_stats(ram::load_manifest(stats_manifest), s);
      out << (stats_json ? stats_to_json(st).dump(2) + "\n" : render_stats(st));
      return kExitOk;
    }
    if (*encode) return cmd_encode(s, enc, out);
    if (*decode) return cmd_decode(s, dec, out);
    if (*eval) return cmd_eval(s, ev, out);
    if (*fit_demo) return cmd_fit_demo(s, fit, out);
    if (!g.show_config) {
      err << app.help();
      return kExitUsage;
    }
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ram::Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: Io: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace ramcli
