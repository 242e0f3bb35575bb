#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "ram/anchor_codec.hpp"
#include "ram/assignment.hpp"
#include "ram/error.hpp"
#include "ram/summation.hpp"

namespace ram {

struct LossWeights {
  double lambda1 = 2.0;    // positive confidence
  double lambda2 = 0.024;  // negative confidence
  double lambda3 = 10.0;   // coordinate regression

  void validate() const {
    for (double l : {lambda1, lambda2, lambda3}) {
      if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorCode::InvalidArgument, "loss weights must be finite and >= 0");
    }
  }
};

struct LossBreakdown {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  double total = 0.0;
  /// d total / d entry, laid out like OutputTensor::values().
  std::vector<double> gradient;
};

/// ln(1 + e^x) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// -ln sigmoid(x)
inline double neg_log_sigmoid(double x) { return softplus(-x); }

/// -ln(1 - sigmoid(x))
inline double neg_log_one_minus_sigmoid(double x) { return softplus(x); }

/// Three-part detection loss summed over the anchors of one image, with its
/// closed-form gradient with respect to every tensor entry.
inline LossBreakdown compute_loss(const OutputTensor& output, const Assignment& assignment, const LossWeights& weights) {
  if (!(output.config() == assignment.config())) {
    throw Error(ErrorCode::ConfigMismatch, "output tensor and assignment use different grid configurations");
  }
  weights.validate();

  const auto& config = output.config();
  const auto& values = output.values();
  LossBreakdown out;
  out.gradient.assign(values.size(), 0.0);

  std::vector<double> pos_terms, neg_terms, reg_terms;
  pos_terms.reserve(assignment.positive_count());
  neg_terms.reserve(config.anchor_count());
  reg_terms.reserve(assignment.positive_count() * 5);

  for (std::size_t a = 0; a < config.anchor_count(); ++a) {
    const std::size_t base = a * kChannelCount;
    const double conf = values[base + kConfidence];
    const auto& label = assignment.at(a);
    if (!label) {
      neg_terms.push_back(neg_log_one_minus_sigmoid(conf));
      out.gradient[base + kConfidence] = weights.lambda2 * sigmoid(conf);
      continue;
    }
    pos_terms.push_back(neg_log_sigmoid(conf));
    out.gradient[base + kConfidence] = weights.lambda1 * (sigmoid(conf) - 1.0);
    const auto target = label->target.as_array();
    for (std::size_t k = 0; k < 5; ++k) {
      const double diff = values[base + kTx + k] - target[k];
      reg_terms.push_back(diff * diff);
      out.gradient[base + kTx + k] = weights.lambda3 * 2.0 * diff;
    }
  }

  out.loss1 = pairwise_sum(pos_terms);
  out.loss2 = pairwise_sum(neg_terms);
  out.loss3 = pairwise_sum(reg_terms);
  out.total = weights.lambda1 * out.loss1 + weights.lambda2 * out.loss2 + weights.lambda3 * out.loss3;
  return out;
}

enum class BatchReduction {
  Sum,   // per-image losses added up
  Mean,  // divided by the number of images
};

/// Loss over a batch of images. Gradients are returned per image.
struct BatchLoss {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  double total = 0.0;
  std::vector<std::vector<double>> gradients;
};

inline BatchLoss compute_batch_loss(std::span<const OutputTensor> outputs, std::span<const Assignment> assignments,
                                    const LossWeights& weights, BatchReduction reduction = BatchReduction::Sum) {
  if (outputs.size() != assignments.size()) {
    throw Error(ErrorCode::ConfigMismatch, "batch has different numbers of outputs and assignments");
  }
  BatchLoss out;
  std::vector<double> l1, l2, l3;
  const double scale =
      reduction == BatchReduction::Mean && !outputs.empty() ? 1.0 / static_cast<double>(outputs.size()) : 1.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    LossBreakdown b = compute_loss(outputs[i], assignments[i], weights);
    l1.push_back(b.loss1);
    l2.push_back(b.loss2);
    l3.push_back(b.loss3);
    if (scale != 1.0) {
      for (double& g : b.gradient) g *= scale;
    }
    out.gradients.push_back(std::move(b.gradient));
  }
  out.loss1 = pairwise_sum(l1) * scale;
  out.loss2 = pairwise_sum(l2) * scale;
  out.loss3 = pairwise_sum(l3) * scale;
  out.total = weights.lambda1 * out.loss1 + weights.lambda2 * out.loss2 + weights.lambda3 * out.loss3;
  return out;
}

inline nlohmann::json loss_to_json(const LossBreakdown& b) {
  return {{"loss1", b.loss1}, {"loss2", b.loss2}, {"loss3", b.loss3}, {"total", b.total}};
}

}  // namespace ram
