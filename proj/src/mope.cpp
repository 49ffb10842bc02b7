#include "mogeo/mope.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace mogeo {

ImpulseMask build_mask(const ClickPoint& p, int grid_h, int grid_w, int stride) {
  if (grid_h < 1 || grid_w < 1 || stride < 1)
    throw std::invalid_argument("build_mask: bad grid");
  ImpulseMask m;
  m.grid_h = grid_h;
  m.grid_w = grid_w;
  m.hot_h = std::clamp(static_cast<int>(std::floor(p.y / stride)), 0, grid_h - 1);
  m.hot_w = std::clamp(static_cast<int>(std::floor(p.x / stride)), 0, grid_w - 1);
  return m;
}

FeatureMap Mope::fuse_position(const FeatureMap& fq, const ImpulseMask& mask,
                               Tensor* concat_in) const {
  if (mask.grid_h != fq.height() || mask.grid_w != fq.width())
    throw std::invalid_argument("fuse_position: mask grid does not match the feature grid");
  const int c = fq.channels(), h = fq.height(), w = fq.width();
  if (fuse.in_channels() != c + 1)
    throw std::invalid_argument("fuse_position: layer built for a different channel count");

  Tensor x({c + 1, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) x.at(ch, y, xx) = fq.values.at(ch, y, xx);
  x.at(c, mask.hot_h, mask.hot_w) = 1.0;

  Tensor y = fuse.forward(x);
  if (concat_in) *concat_in = std::move(x);
  return FeatureMap{std::move(y), fq.stride, fq.frame};
}

FeatureMap sharpen(const FeatureMap& fused, const ImpulseMask& mask) {
  if (mask.grid_h != fused.height() || mask.grid_w != fused.width())
    throw std::invalid_argument("sharpen: grid mismatch");
  Tensor out(fused.values.shape());  // zeros; only the hot column survives
  for (int c = 0; c < fused.channels(); ++c)
    out.at(c, mask.hot_h, mask.hot_w) = fused.values.at(c, mask.hot_h, mask.hot_w);
  return FeatureMap{std::move(out), fused.stride, fused.frame};
}

Tensor pool_to_vector(const FeatureMap& sharpened, const LinearLayer& proj,
                      Tensor* pooled_out) {
  const int c = sharpened.channels();
  if (proj.in_features() != c)
    throw std::invalid_argument("pool_to_vector: projection input mismatch");
  Tensor pooled({c});
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0;
    for (int y = 0; y < sharpened.height(); ++y)
      for (int x = 0; x < sharpened.width(); ++x) acc += sharpened.values.at(ch, y, x);
    pooled[ch] = acc;
  }
  Tensor v = proj.forward(pooled);
  if (pooled_out) *pooled_out = std::move(pooled);
  return v;
}

Tensor Mope::encode_one(const FeatureMap& fq, const ClickPoint& p, ObjectTrace* tr) const {
  ImpulseMask mask = build_mask(p, fq.height(), fq.width(), fq.stride);
  Tensor concat_in;
  FeatureMap fused = fuse_position(fq, mask, tr ? &concat_in : nullptr);
  FeatureMap sharp = sharpen(fused, mask);
  Tensor pooled;
  Tensor v = pool_to_vector(sharp, proj, tr ? &pooled : nullptr);
  if (tr) {
    tr->mask = mask;
    tr->concat_in = std::move(concat_in);
    tr->fused = std::move(fused.values);
    tr->sharpened = std::move(sharp.values);
    tr->pooled = std::move(pooled);
  }
  return v;
}

std::vector<Tensor> Mope::encode_objects(const FeatureMap& fq,
                                         const std::vector<ClickPoint>& clicks,
                                         std::vector<ObjectTrace>* traces) const {
  if (clicks.empty()) throw std::invalid_argument("encode_objects: no clicks");
  std::vector<Tensor> out;
  out.reserve(clicks.size());
  if (traces) traces->resize(clicks.size());
  for (size_t i = 0; i < clicks.size(); ++i)
    out.push_back(encode_one(fq, clicks[i], traces ? &(*traces)[i] : nullptr));
  return out;
}

void Mope::backward_one(const ObjectTrace& tr, const Tensor& dv, Tensor& dfq_accum) {
  Tensor dpooled;
  proj.backward(tr.pooled, dv, &dpooled);

  // sum pooling broadcasts the gradient to every cell; the mask then
  // keeps only the hot column
  const int c = tr.fused.dim(0), h = tr.fused.dim(1), w = tr.fused.dim(2);
  Tensor dfused({c, h, w});
  for (int ch = 0; ch < c; ++ch) dfused.at(ch, tr.mask.hot_h, tr.mask.hot_w) = dpooled[ch];

  Tensor dconcat;
  fuse.backward(tr.concat_in, dfused, &dconcat);
  assert(dfq_accum.dim(0) == c);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) dfq_accum.at(ch, y, x) += dconcat.at(ch, y, x);
}

void Mope::zero_grad() {
  fuse.zero_grad();
  proj.zero_grad();
}

void Mope::init(Rng& rng) {
  fuse.init(rng);
  proj.init(rng);
}

void Mope::visit(const ParamVisitor& fn) {
  fn("mope.fuse.w", fuse.w, fuse.gw);
  fn("mope.fuse.b", fuse.b, fuse.gb);
  fn("mope.proj.w", proj.w, proj.gw);
  fn("mope.proj.b", proj.b, proj.gb);
}

}  // namespace mogeo
