#pragma once

#include <vector>

#include "mogeo/encoders.hpp"
#include "mogeo/geometry.hpp"

namespace mogeo {

// One-hot impulse mask over the query feature grid: a single 1 at the
// cell containing the click, 0 everywhere else.
struct ImpulseMask {
  int grid_h = 0, grid_w = 0;
  int hot_h = 0, hot_w = 0;

  Tensor values() const {
    Tensor t({grid_h, grid_w});
    t.at2(hot_h, hot_w) = 1.0;
    return t;
  }
};

// hot cell = (floor(y/S), floor(x/S)), clamped to the grid.
ImpulseMask build_mask(const ClickPoint& p, int grid_h, int grid_w, int stride);

// Multi-object position encoding: concat the mask channel, mix with a 1x1
// convolution, re-sharpen by masked multiplication, then project the
// surviving column to the embedding dimension. The projection weight is a
// per-location linear map; with sum pooling the two orders agree, so it is
// applied once to the pooled column and the bias is added once.
struct Mope {
  ConvLayer fuse;    // (C+1) -> C, 1x1
  LinearLayer proj;  // C -> d

  Mope() = default;
  Mope(int channels, int embed_dim)
      : fuse(channels, channels + 1, 1, 1, 0), proj(embed_dim, channels) {}

  struct ObjectTrace {
    ImpulseMask mask;
    Tensor concat_in;   // (C+1,H,W)
    Tensor fused;       // (C,H,W)
    Tensor sharpened;   // (C,H,W), zero off the hot cell
    Tensor pooled;      // (C)
  };

  FeatureMap fuse_position(const FeatureMap& fq, const ImpulseMask& mask,
                           Tensor* concat_in = nullptr) const;
  Tensor encode_one(const FeatureMap& fq, const ClickPoint& p, ObjectTrace* tr) const;
  std::vector<Tensor> encode_objects(const FeatureMap& fq, const std::vector<ClickPoint>& clicks,
                                     std::vector<ObjectTrace>* traces = nullptr) const;

  // dv -> parameter grads plus accumulation into d(F_q)
  void backward_one(const ObjectTrace& tr, const Tensor& dv, Tensor& dfq_accum);

  void zero_grad();
  void init(Rng& rng);
  void visit(const ParamVisitor& fn);
};

FeatureMap sharpen(const FeatureMap& fused, const ImpulseMask& mask);

// projected hot-cell column: W * sum_{h,w} F''(:,h,w) + b
Tensor pool_to_vector(const FeatureMap& sharpened, const LinearLayer& proj,
                      Tensor* pooled_out = nullptr);

}  // namespace mogeo
