#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ram/anchor_codec.hpp"
#include "ram/assignment.hpp"
#include "ram/error.hpp"
#include "ram/evaluation.hpp"
#include "ram/geometry.hpp"
#include "ram/loss.hpp"
#include "ram/random.hpp"
#include "ram/tensor_io.hpp"
#include "ram/text.hpp"

// Desk-scale demonstration of the full anchor pipeline: synthetic single-object
// scenes, a cell-shared linear predictor, plain gradient descent through the
// three-part loss, then decoding and rectangle-metric evaluation.

namespace ram::toy {

inline constexpr int kFeatureCount = 16;  // 4 x 4 pooled blocks per cell
inline constexpr int kPoolSide = 4;

struct DemoConfig {
  AnchorGridConfig grid{192, 192, 6, 6, 3, 76.0, 14.0};
  // Scene boxes are drawn with w in [min_w, max_w] and h in [min_h, max_h].
  // Thin bars: orientation has to be readable from 16 pooled intensities.
  double min_w = 72.0;
  double max_w = 80.0;
  double min_h = 12.0;
  double max_h = 16.0;
  // Side of the pooled window around each cell center, in cells.
  double receptive_cells = 2.5;
  // Supersampling factor per pixel axis when rendering.
  int supersample = 2;

  void validate() const {
    grid.validate();
    if (!(min_w > 0.0) || max_w < min_w || !(min_h > 0.0) || max_h < min_h) {
      throw Error(ErrorCode::InvalidArgument, "scene box size ranges are invalid");
    }
    if (!(receptive_cells > 0.0) || supersample < 1) {
      throw Error(ErrorCode::InvalidArgument, "receptive field and supersampling must be positive");
    }
  }
};

/// One rendered scene reduced to per-cell features.
struct SyntheticScene {
  std::uint64_t seed = 0;
  std::vector<GraspBox> ground_truths;  // exactly one
  std::vector<double> features;          // rows x cols x kFeatureCount, row-major
};

/// Renders a bright rectangle on a dark background into an image_h x image_w
/// coverage image (values in [0, 1]).
inline std::vector<double> render_image(const DemoConfig& config, const GraspBox& box) {
  const int H = config.grid.image_h;
  const int W = config.grid.image_w;
  const int ss = config.supersample;
  std::vector<double> img(static_cast<std::size_t>(H) * W, 0.0);
  const double r = std::hypot(box.w, box.h) / 2.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x - r)));
  const int x1 = std::min(W - 1, static_cast<int>(std::ceil(box.x + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y - r)));
  const int y1 = std::min(H - 1, static_cast<int>(std::ceil(box.y + r)));
  const double inv = 1.0 / (ss * ss);
  for (int py = y0; py <= y1; ++py) {
    for (int px = x0; px <= x1; ++px) {
      int hits = 0;
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          hits += box_contains(box, {px + (sx + 0.5) / ss, py + (sy + 0.5) / ss});
        }
      }
      img[static_cast<std::size_t>(py) * W + px] = hits * inv;
    }
  }
  return img;
}

/// 4 x 4 mean-pooled intensities over a window of receptive_cells x receptive_cells
/// cells centered on each cell. Pixels outside the image read as background.
inline std::vector<double> cell_features(const DemoConfig& config, std::span<const double> image) {
  const auto& g = config.grid;
  const Margins m = margins(g);
  const double win_w = config.receptive_cells * m.x;
  const double win_h = config.receptive_cells * m.y;
  const double block_w = win_w / kPoolSide;
  const double block_h = win_h / kPoolSide;
  std::vector<double> feats(static_cast<std::size_t>(g.grid_rows) * g.grid_cols * kFeatureCount, 0.0);
  for (int r = 0; r < g.grid_rows; ++r) {
    for (int c = 0; c < g.grid_cols; ++c) {
      const double left = (c + 0.5) * m.x - win_w / 2.0;
      const double top = (r + 0.5) * m.y - win_h / 2.0;
      double* f = feats.data() + (static_cast<std::size_t>(r) * g.grid_cols + c) * kFeatureCount;
      for (int by = 0; by < kPoolSide; ++by) {
        for (int bx = 0; bx < kPoolSide; ++bx) {
          const int px0 = static_cast<int>(std::floor(left + bx * block_w));
          const int py0 = static_cast<int>(std::floor(top + by * block_h));
          const int px1 = static_cast<int>(std::floor(left + (bx + 1) * block_w));
          const int py1 = static_cast<int>(std::floor(top + (by + 1) * block_h));
          double sum = 0.0;
          for (int py = std::max(py0, 0); py < std::min(py1, g.image_h); ++py) {
            for (int px = std::max(px0, 0); px < std::min(px1, g.image_w); ++px) {
              sum += image[static_cast<std::size_t>(py) * g.image_w + px];
            }
          }
          const double n = static_cast<double>(px1 - px0) * (py1 - py0);
          f[by * kPoolSide + bx] = n > 0 ? sum / n : 0.0;
        }
      }
    }
  }
  return feats;
}

/// Deterministic scene for a seed: one box with its whole footprint inside the
/// image, center uniform over that safe region and angle uniform in [0, 180).
inline SyntheticScene render_scene(std::uint64_t seed, const DemoConfig& config) {
  config.validate();
  SplitMix64 rng(seed);
  auto unit = [&rng] { return rng.uniform(); };
  const double w = config.min_w + (config.max_w - config.min_w) * unit();
  const double h = config.min_h + (config.max_h - config.min_h) * unit();
  const double theta = 180.0 * unit();
  const double half_diag = std::hypot(w, h) / 2.0;
  const double W = config.grid.image_w;
  const double H = config.grid.image_h;
  if (2.0 * half_diag >= std::min(W, H)) throw Error(ErrorCode::InvalidArgument, "scene boxes do not fit the image");
  const double x = half_diag + (W - 2.0 * half_diag) * unit();
  const double y = half_diag + (H - 2.0 * half_diag) * unit();

  SyntheticScene scene;
  scene.seed = seed;
  scene.ground_truths.emplace_back(x, y, w, h, theta);
  scene.features = cell_features(config, render_image(config, scene.ground_truths.front()));
  return scene;
}

inline std::vector<SyntheticScene> render_scenes(std::uint64_t first_seed, std::size_t count, const DemoConfig& config) {
  std::vector<SyntheticScene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(render_scene(first_seed + i, config));
  return out;
}

/// Cell-shared linear map from kFeatureCount features to the k x 6 outputs of a cell.
struct LinearPredictor {
  int anchors_per_cell = 3;
  std::vector<double> weights;  // kFeatureCount x outputs(), row-major
  std::vector<double> bias;     // outputs()

  explicit LinearPredictor(int k = 3)
      : anchors_per_cell(k),
        weights(static_cast<std::size_t>(kFeatureCount) * k * kChannelCount, 0.0),
        bias(static_cast<std::size_t>(k) * kChannelCount, 0.0) {}

  std::size_t outputs() const { return static_cast<std::size_t>(anchors_per_cell) * kChannelCount; }
  std::size_t parameter_count() const { return weights.size() + bias.size(); }

  double& parameter(std::size_t i) { return i < weights.size() ? weights[i] : bias[i - weights.size()]; }
  double parameter(std::size_t i) const { return i < weights.size() ? weights[i] : bias[i - weights.size()]; }

  friend bool operator==(const LinearPredictor&, const LinearPredictor&) = default;
};

inline OutputTensor predict(const LinearPredictor& p, const AnchorGridConfig& grid, std::span<const double> features) {
  if (p.anchors_per_cell != grid.anchors_per_cell) {
    throw Error(ErrorCode::ConfigMismatch, "predictor and grid disagree on anchors per cell");
  }
  OutputTensor out(grid);
  auto& v = out.values();
  const std::size_t cells = static_cast<std::size_t>(grid.grid_rows) * grid.grid_cols;
  const std::size_t no = p.outputs();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double* f = features.data() + cell * kFeatureCount;
    double* o = v.data() + cell * no;
    for (std::size_t j = 0; j < no; ++j) o[j] = p.bias[j];
    for (int i = 0; i < kFeatureCount; ++i) {
      const double fi = f[i];
      if (fi == 0.0) continue;
      const double* wrow = p.weights.data() + static_cast<std::size_t>(i) * no;
      for (std::size_t j = 0; j < no; ++j) o[j] += fi * wrow[j];
    }
  }
  return out;
}

/// Scenes paired with their fixed anchor assignments.
struct TrainingSet {
  AnchorGridConfig grid;
  std::vector<const SyntheticScene*> scenes;
  std::vector<Assignment> assignments;
};

inline TrainingSet make_training_set(std::span<const SyntheticScene> scenes, const AnchorGridConfig& grid) {
  TrainingSet set{grid, {}, {}};
  for (const auto& s : scenes) {
    set.scenes.push_back(&s);
    set.assignments.push_back(match(grid, s.ground_truths));
  }
  return set;
}

struct Objective {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  double total = 0.0;
  std::vector<double> gradient;  // parameter order of LinearPredictor::parameter()
};

/// Mean loss over the scenes and its gradient with respect to the predictor's
/// parameters. Tensor gradients come from compute_loss and are pulled back
/// through the linear map.
inline Objective training_objective(const LinearPredictor& p, const TrainingSet& set, const LossWeights& weights) {
  Objective obj;
  obj.gradient.assign(p.parameter_count(), 0.0);
  const std::size_t no = p.outputs();
  const std::size_t cells = static_cast<std::size_t>(set.grid.grid_rows) * set.grid.grid_cols;
  std::vector<double> l1, l2, l3;
  double* gw = obj.gradient.data();
  double* gb = obj.gradient.data() + p.weights.size();
  for (std::size_t s = 0; s < set.scenes.size(); ++s) {
    const auto& feats = set.scenes[s]->features;
    const OutputTensor out = predict(p, set.grid, feats);
    const LossBreakdown b = compute_loss(out, set.assignments[s], weights);
    l1.push_back(b.loss1);
    l2.push_back(b.loss2);
    l3.push_back(b.loss3);
    for (std::size_t cell = 0; cell < cells; ++cell) {
      const double* f = feats.data() + cell * kFeatureCount;
      const double* g = b.gradient.data() + cell * no;
      for (std::size_t j = 0; j < no; ++j) gb[j] += g[j];
      for (int i = 0; i < kFeatureCount; ++i) {
        const double fi = f[i];
        if (fi == 0.0) continue;
        double* row = gw + static_cast<std::size_t>(i) * no;
        for (std::size_t j = 0; j < no; ++j) row[j] += fi * g[j];
      }
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, set.scenes.size()));
  for (double& g : obj.gradient) g /= n;
  obj.loss1 = pairwise_sum(l1) / n;
  obj.loss2 = pairwise_sum(l2) / n;
  obj.loss3 = pairwise_sum(l3) / n;
  obj.total = weights.lambda1 * obj.loss1 + weights.lambda2 * obj.loss2 + weights.lambda3 * obj.loss3;
  return obj;
}

struct LossPoint {
  std::size_t step = 0;
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  double total = 0.0;
};

struct TrainResult {
  LinearPredictor predictor;
  std::vector<LossPoint> curve;  // steps + 1 points: before the first update through after the last
};

/// Full-batch gradient descent from a zero predictor. Throws DivergenceDetected
/// when the loss exceeds 10x its initial value.
inline TrainResult train(std::span<const SyntheticScene> scenes, const DemoConfig& config, const LossWeights& weights,
                         std::size_t steps, double learning_rate) {
  config.validate();
  weights.validate();
  if (scenes.size() < 100) throw Error(ErrorCode::InvalidArgument, "training needs at least 100 scenes");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::InvalidArgument, "learning rate must be finite and >= 0");
  }
  const TrainingSet set = make_training_set(scenes, config.grid);
  TrainResult result{LinearPredictor(config.grid.anchors_per_cell), {}};
  result.curve.reserve(steps + 1);
  double initial = 0.0;
  for (std::size_t step = 0;; ++step) {
    const Objective obj = training_objective(result.predictor, set, weights);
    if (step == 0) initial = obj.total;
    if (!std::isfinite(obj.total) || obj.total > 10.0 * initial) {
      throw Error(ErrorCode::DivergenceDetected,
                  "loss " + detail::shortest(obj.total) + " at step " + std::to_string(step) +
                      " exceeds 10x the initial " + detail::shortest(initial));
    }
    result.curve.push_back({step, obj.loss1, obj.loss2, obj.loss3, obj.total});
    if (step == steps) break;
    for (std::size_t i = 0; i < obj.gradient.size(); ++i) {
      result.predictor.parameter(i) -= learning_rate * obj.gradient[i];
    }
  }
  return result;
}

/// True when, after `warmup` steps, the mean loss of every `window`-step block is
/// no larger than the block before it.
inline bool smoothed_non_increasing(std::span<const LossPoint> curve, std::size_t warmup = 200,
                                    std::size_t window = 100) {
  auto block_mean = [&](std::size_t end) {
    double s = 0.0;
    for (std::size_t i = end - window; i < end; ++i) s += curve[i].total;
    return s / static_cast<double>(window);
  };
  for (std::size_t end = warmup + 2 * window; end <= curve.size(); ++end) {
    if (block_mean(end) > block_mean(end - window) * (1.0 + 1e-12)) return false;
  }
  return true;
}

/// Highest-confidence anchor of a tensor; ties go to the first in tensor order.
inline Anchor top_anchor(const OutputTensor& t) {
  Anchor best{};
  double best_conf = -std::numeric_limits<double>::infinity();
  for_each_anchor(t.config(), [&](const Anchor& a) {
    const double c = t.at(a, kConfidence);
    if (c > best_conf) {
      best_conf = c;
      best = a;
    }
  });
  return best;
}

struct PredictorEvaluation {
  EvalReport report;
  std::vector<Anchor> selected;  // top anchor per scene
  double anchor_agreement = 0.0;  // fraction whose top anchor is the matched positive
};

inline PredictorEvaluation evaluate_predictor(const LinearPredictor& p, std::span<const SyntheticScene> scenes,
                                              const DemoConfig& config, const EvalCriteria& criteria) {
  std::vector<EvalSample> samples;
  PredictorEvaluation ev;
  std::size_t agree = 0;
  for (const auto& s : scenes) {
    const OutputTensor out = predict(p, config.grid, s.features);
    const Anchor a = top_anchor(out);
    ev.selected.push_back(a);
    const GraspBox box = decode(config.grid, a, out.offsets(a));
    const Assignment assigned = match(config.grid, s.ground_truths);
    agree += assigned.is_positive(a);
    samples.push_back({"scene-" + std::to_string(s.seed), SubsetTag::Other,
                       {Prediction{"scene-" + std::to_string(s.seed), box, sigmoid(out.at(a, kConfidence))}},
                       s.ground_truths});
  }
  ev.report = accuracy(samples, criteria);
  ev.anchor_agreement = scenes.empty() ? 0.0 : static_cast<double>(agree) / static_cast<double>(scenes.size());
  return ev;
}

/// Knobs of the reference run; `seed` fixes both the training and held-out scenes.
struct DemoRunOptions {
  DemoConfig config;
  LossWeights weights;
  std::uint64_t seed = 42;
  std::size_t train_scenes = 500;
  std::size_t held_out_scenes = 200;
  std::size_t steps = 2000;
  double learning_rate = 1e-2;
  EvalCriteria criteria;
};

inline constexpr double kLossRatioGate = 0.2;
inline constexpr double kAccuracyGate = 0.90;

struct DemoRun {
  TrainResult training;
  PredictorEvaluation baseline;  // zero predictor
  PredictorEvaluation trained;

  double initial_loss() const { return training.curve.front().total; }
  double final_loss() const { return training.curve.back().total; }
  double loss_ratio() const { return final_loss() / initial_loss(); }
  bool gate_met() const { return loss_ratio() < kLossRatioGate && trained.report.accuracy >= kAccuracyGate; }
};

/// First scene seeds of the training and held-out sets. The two ranges start
/// 2^40 apart so they never overlap at any usable count.
inline std::pair<std::uint64_t, std::uint64_t> demo_scene_seeds(std::uint64_t seed) {
  SplitMix64 rng(seed);
  const std::uint64_t base = rng.next() >> 24;
  return {base, base + (std::uint64_t{1} << 40)};
}

inline DemoRun run_demo(const DemoRunOptions& o) {
  const auto [train_first, held_first] = demo_scene_seeds(o.seed);
  const auto train_set = render_scenes(train_first, o.train_scenes, o.config);
  const auto held_out = render_scenes(held_first, o.held_out_scenes, o.config);
  DemoRun run{train(train_set, o.config, o.weights, o.steps, o.learning_rate), {}, {}};
  run.baseline = evaluate_predictor(LinearPredictor(o.config.grid.anchors_per_cell), held_out, o.config, o.criteria);
  run.trained = evaluate_predictor(run.training.predictor, held_out, o.config, o.criteria);
  return run;
}

inline constexpr std::string_view kPredictorMagic = "RAMP";

/// "RAMP" file: header {features, k, 6, 1} then float32 weights (row-major) and bias.
inline void write_predictor(std::ostream& out, const LinearPredictor& p) {
  FlatHeader h;
  std::memcpy(h.magic.data(), kPredictorMagic.data(), 4);
  h.fields = {static_cast<std::uint32_t>(kFeatureCount), static_cast<std::uint32_t>(p.anchors_per_cell),
              static_cast<std::uint32_t>(kChannelCount), 1u};
  write_flat_header(out, h);
  write_f32_payload(out, p.weights);
  write_f32_payload(out, p.bias);
  if (!out) throw Error(ErrorCode::Io, "failed writing predictor");
}

inline LinearPredictor read_predictor(std::istream& in) {
  const FlatHeader h = read_flat_header(in, kPredictorMagic);
  if (h.fields[0] != static_cast<std::uint32_t>(kFeatureCount) || h.fields[2] != kChannelCount || h.fields[3] != 1u ||
      h.fields[1] == 0) {
    throw Error(ErrorCode::MalformedTensor, "unsupported predictor header");
  }
  LinearPredictor p(static_cast<int>(h.fields[1]));
  p.weights = read_f32_payload(in, p.weights.size());
  p.bias = read_f32_payload(in, p.bias.size());
  return p;
}

inline std::string loss_curve_csv(std::span<const LossPoint> curve) {
  std::string out = "step,total,loss1,loss2,loss3\n";
  for (const auto& pt : curve) {
    out += std::to_string(pt.step) + "," + detail::shortest(pt.total) + "," + detail::shortest(pt.loss1) + "," +
           detail::shortest(pt.loss2) + "," + detail::shortest(pt.loss3) + "\n";
  }
  return out;
}

}  // namespace ram::toy
