#include "mogeo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mogeo/kernels.hpp"

namespace mogeo {

using kernels::sigmoid;
using kernels::softplus;

namespace {
// positive cell = grid cell containing the ground-truth center
void gt_cell(const GridPrediction& pred, const BBox& gt, int* ch, int* cw) {
  *ch = std::clamp(static_cast<int>(std::floor(gt.cy / pred.stride)), 0, pred.grid_h() - 1);
  *cw = std::clamp(static_cast<int>(std::floor(gt.cx / pred.stride)), 0, pred.grid_w() - 1);
}
}  // namespace

double confidence_loss(const GridPrediction& pred, const BBox& gt, Tensor* draw,
                       double grad_scale) {
  const double img_w = static_cast<double>(pred.grid_w()) * pred.stride;
  const double img_h = static_cast<double>(pred.grid_h()) * pred.stride;
  if (gt.cx < 0 || gt.cx > img_w || gt.cy < 0 || gt.cy > img_h)
    throw std::invalid_argument("confidence_loss: ground-truth center outside the image");
  int ph = 0, pw = 0;
  gt_cell(pred, gt, &ph, &pw);

  const int cells = pred.grid_h() * pred.grid_w();
  double sum = 0;
  for (int h = 0; h < pred.grid_h(); ++h)
    for (int w = 0; w < pred.grid_w(); ++w) {
      const double z = pred.conf(h, w);
      const double t = (h == ph && w == pw) ? 1.0 : 0.0;
      sum += softplus(z) - t * z;  // stable BCE-with-logits
      if (draw) draw->at(0, h, w) += grad_scale * (sigmoid(z) - t) / cells;
    }
  return sum / cells;
}

double regression_loss(const GridPrediction& pred, const BBox& gt, Tensor* draw,
                       double grad_scale) {
  if (!(gt.w > 0) || !(gt.h > 0))
    throw std::invalid_argument("regression_loss: non-positive ground-truth extent");
  int ph = 0, pw = 0;
  gt_cell(pred, gt, &ph, &pw);
  const double gx = gt.cx / pred.stride - pw;  // fractional offset in the cell
  const double gy = gt.cy / pred.stride - ph;
  const double gw = std::log(gt.w / pred.anchor_w);
  const double gh = std::log(gt.h / pred.anchor_h);

  const double sx = sigmoid(pred.t(0, ph, pw));
  const double sy = sigmoid(pred.t(1, ph, pw));
  const double ew = pred.t(2, ph, pw) - gw;
  const double eh = pred.t(3, ph, pw) - gh;
  const double loss = (sx - gx) * (sx - gx) + (sy - gy) * (sy - gy) + ew * ew + eh * eh;

  if (draw) {
    draw->at(1, ph, pw) += grad_scale * 2.0 * (sx - gx) * sx * (1.0 - sx);
    draw->at(2, ph, pw) += grad_scale * 2.0 * (sy - gy) * sy * (1.0 - sy);
    draw->at(3, ph, pw) += grad_scale * 2.0 * ew;
    draw->at(4, ph, pw) += grad_scale * 2.0 * eh;
  }
  return loss;
}

double similarity_loss(const std::vector<const AttentionMap*>& maps,
                       const std::vector<int>& image_ids, NegativeMode mode,
                       std::vector<Tensor>* dmaps) {
  const size_t n = maps.size();
  if (n == 0) throw std::invalid_argument("similarity_loss: no maps");
  if (image_ids.size() != n)
    throw std::invalid_argument("similarity_loss: image ids misaligned");
  for (size_t i = 1; i < n; ++i)
    if (!maps[i]->values.same_shape(maps[0]->values))
      throw std::invalid_argument("similarity_loss: attention grids differ");
  if (n == 1) return 0.0;  // no negatives exist

  const int64_t L = maps[0]->values.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (size_t a = 0; a < n; ++a)
    for (size_t b = a + 1; b < n; ++b) {
      double s = 0;
      for (int64_t i = 0; i < L; ++i) {
        const double diff = maps[a]->values[i] - maps[b]->values[i];
        s += diff * diff;
      }
      dist[a][b] = dist[b][a] = std::sqrt(s);
    }

  double total = 0;
  for (size_t k = 0; k < n; ++k) {
    const double d_pos = 0.0;  // distance of the map to itself
    double d_neg;
    size_t hardest = n;
    if (mode == NegativeMode::mean) {
      double s = 0;
      for (size_t j = 0; j < n; ++j)
        if (j != k) s += dist[k][j];
      d_neg = s / static_cast<double>(n - 1);
    } else {
      d_neg = std::numeric_limits<double>::infinity();
      for (size_t j = 0; j < n; ++j)
        if (j != k && dist[k][j] < d_neg) {
          d_neg = dist[k][j];
          hardest = j;
        }
    }
    total += softplus(d_pos - d_neg);

    if (dmaps) {
      // d softplus(-d_neg) / d d_neg = -sigmoid(-d_neg)
      const double dterm = -sigmoid(d_pos - d_neg);
      for (size_t j = 0; j < n; ++j) {
        if (j == k) continue;
        double wgt;
        if (mode == NegativeMode::mean)
          wgt = dterm / static_cast<double>(n - 1);
        else
          wgt = (j == hardest) ? dterm : 0.0;
        if (wgt == 0.0 || dist[k][j] <= 0.0) continue;  // coincident maps: flat direction
        const double inv = wgt / dist[k][j];
        Tensor& dk = (*dmaps)[k];
        Tensor& dj = (*dmaps)[j];
        for (int64_t i = 0; i < L; ++i) {
          const double diff = maps[k]->values[i] - maps[j]->values[i];
          dk[i] += inv * diff;
          dj[i] -= inv * diff;
        }
      }
    }
  }
  return total;
}

LossBreakdown total_loss(const std::vector<const GridPrediction*>& preds,
                         const std::vector<BBox>& gts,
                         const std::vector<const AttentionMap*>& attention_maps,
                         const std::vector<int>& image_ids, const ObjectiveConfig& cfg,
                         std::vector<Tensor>* draws, std::vector<Tensor>* datts) {
  const size_t n = preds.size();
  if (n == 0 || gts.size() != n || attention_maps.size() != n || image_ids.size() != n)
    throw std::invalid_argument("total_loss: misaligned object lists");
  if (draws && draws->size() != n) throw std::invalid_argument("total_loss: bad gradient sink");
  if (datts && datts->size() != n) throw std::invalid_argument("total_loss: bad gradient sink");

  LossBreakdown out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    Tensor* sink = draws ? &(*draws)[i] : nullptr;
    out.l_cn += cfg.w_cn * inv_n *
                confidence_loss(*preds[i], gts[i], sink, cfg.w_cn * inv_n);
    out.l_reg += cfg.w_reg * inv_n *
                 regression_loss(*preds[i], gts[i], sink, cfg.w_reg * inv_n);
  }
  if (cfg.use_similarity) {
    double raw = similarity_loss(attention_maps, image_ids, cfg.negatives, datts);
    if (datts && cfg.w_s != 1.0)
      for (Tensor& t : *datts) t.scale_(cfg.w_s);
    out.l_s = cfg.w_s * raw;
  }
  out.total = out.l_cn + out.l_reg + out.l_s;
  return out;
}

}  // namespace mogeo
