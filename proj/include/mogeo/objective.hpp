#pragma once

#include <vector>

#include "mogeo/cvmf.hpp"
#include "mogeo/geometry.hpp"

namespace mogeo {

struct LossBreakdown {
  double l_cn = 0, l_reg = 0, l_s = 0;
  double total = 0;  // l_cn + l_reg + l_s in that summation order
};

// Mean over grid cells of binary cross-entropy between the logistic
// confidence and a target grid that is 1 only at the cell holding the
// ground-truth center. Gradients (scaled by grad_scale) accumulate into
// draw, layout matching GridPrediction::raw.
double confidence_loss(const GridPrediction& pred, const BBox& gt, Tensor* draw = nullptr,
                       double grad_scale = 1.0);

// Squared error at the positive cell: logistic offsets against the
// fractional center position, log-scale sizes against the anchor.
double regression_loss(const GridPrediction& pred, const BBox& gt, Tensor* draw = nullptr,
                       double grad_scale = 1.0);

enum class NegativeMode { mean, hardest };

// Attention-separation loss: per map, softplus(d_pos - d_neg) where d_pos
// is the distance of a map to itself (identically zero) and d_neg
// aggregates the Euclidean distances to every other map in the batch,
// same-image and cross-image alike. Sum over maps; a lone map contributes
// nothing (it has no negatives). Gradients accumulate into dmaps.
double similarity_loss(const std::vector<const AttentionMap*>& maps,
                       const std::vector<int>& image_ids, NegativeMode mode = NegativeMode::mean,
                       std::vector<Tensor>* dmaps = nullptr);

struct ObjectiveConfig {
  bool use_similarity = true;
  NegativeMode negatives = NegativeMode::mean;
  double w_cn = 1.0, w_reg = 1.0, w_s = 1.0;
};

// Batch objective: confidence and regression are means over the objects,
// the similarity term sums over the batch's attention maps. When gradient
// sinks are provided they receive d(total)/d(raw_j) and d(total)/d(att_j).
LossBreakdown total_loss(const std::vector<const GridPrediction*>& preds,
                         const std::vector<BBox>& gts,
                         const std::vector<const AttentionMap*>& attention_maps,
                         const std::vector<int>& image_ids, const ObjectiveConfig& cfg,
                         std::vector<Tensor>* draws = nullptr,
                         std::vector<Tensor>* datts = nullptr);

}  // namespace mogeo
