#pragma once

#include <vector>

#include "mogeo/encoders.hpp"
#include "mogeo/geometry.hpp"

namespace mogeo {

// Cosine similarity of one query-object vector against every reference
// grid location, reshaped row-major to the grid. Values live in [-1,1].
struct AttentionMap {
  Tensor values;  // (H', W')
  int object_index = 0;
};

struct AttentionTrace {
  Tensor v_hat;                 // normalized query vector
  double v_norm = 0;
  Tensor r_hat;                 // (L,d) normalized rows
  std::vector<double> r_norms;  // per row
};

// Both sides are L2-normalized; zero vectors normalize to zero (their
// attention is zero rather than NaN).
AttentionMap attention(const Tensor& v, const Tensor& v_r, int grid_h, int grid_w,
                       int object_index = 0, AttentionTrace* tr = nullptr);

// d(att) -> d(v), accumulated d(V_r)
void attention_backward(const AttentionTrace& tr, const Tensor& datt, Tensor& dv,
                        Tensor& dvr_accum);

// F'_r(c,h,w) = F_a(h,w) * F_r(c,h,w)
FeatureMap modulate(const AttentionMap& fa, const FeatureMap& fr);

// append the attention map as one extra channel
FeatureMap fuse_and_concat(const FeatureMap& fr_mod, const AttentionMap& fa);

// Per-cell confidence logit and box parameters against a single anchor.
struct GridPrediction {
  Tensor raw;  // (5,H',W'): conf, tx, ty, tw, th
  double anchor_w = 0, anchor_h = 0;
  int stride = 16;

  int grid_h() const { return raw.dim(1); }
  int grid_w() const { return raw.dim(2); }
  double conf(int h, int w) const { return raw.at(0, h, w); }
  double t(int k, int h, int w) const { return raw.at(k + 1, h, w); }
};

// Two padded 3x3 convolutions with SiLU, then 1x1 to the five output
// channels; grid dims are preserved.
struct DetectionHead {
  ConvLayer c1, c2, c3;

  DetectionHead() = default;
  DetectionHead(int in_channels, int hidden)
      : c1(hidden, in_channels, 3, 1, 1), c2(hidden, hidden, 3, 1, 1), c3(5, hidden, 1, 1, 0) {}

  struct Trace {
    Tensor x, pre1, act1, pre2, act2;
  };

  GridPrediction forward(const FeatureMap& fused, double anchor_w, double anchor_h,
                         Trace* tr = nullptr) const;
  // d(raw) -> d(head input); accumulates parameter grads
  Tensor backward(const Trace& tr, const Tensor& draw);

  void zero_grad();
  void init(Rng& rng);
  void visit(const ParamVisitor& fn);
};

// cx = (w + sigmoid(tx))*S, sizes anchor*exp(t), clipped to image bounds
// (image extent = grid * stride)
BBox decode_box(const GridPrediction& pred, int cell_h, int cell_w);

// argmax of the confidence logits (row-major tie-break), decoded
Detection select(const GridPrediction& pred, int object_index);

}  // namespace mogeo
