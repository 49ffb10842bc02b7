#include "mogeo/cvmf.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace mogeo {

AttentionMap attention(const Tensor& v, const Tensor& v_r, int grid_h, int grid_w,
                       int object_index, AttentionTrace* tr) {
  if (v.rank() != 1 || v_r.rank() != 2 || v_r.dim(1) != v.dim(0))
    throw std::invalid_argument("attention: dimension mismatch");
  if (v_r.dim(0) != grid_h * grid_w)
    throw std::invalid_argument("attention: location count does not match the grid");
  const int d = v.dim(0), L = v_r.dim(0);

  double vn = 0;
  for (int i = 0; i < d; ++i) vn += v[i] * v[i];
  vn = std::sqrt(vn);
  Tensor v_hat({d});
  if (vn > 0)
    for (int i = 0; i < d; ++i) v_hat[i] = v[i] / vn;

  Tensor r_hat({L, d});
  std::vector<double> r_norms(static_cast<size_t>(L));
  AttentionMap out;
  out.object_index = object_index;
  out.values = Tensor({grid_h, grid_w});
  for (int l = 0; l < L; ++l) {
    double rn = 0;
    for (int i = 0; i < d; ++i) rn += v_r.at2(l, i) * v_r.at2(l, i);
    rn = std::sqrt(rn);
    r_norms[static_cast<size_t>(l)] = rn;
    double dot = 0;
    if (rn > 0)
      for (int i = 0; i < d; ++i) {
        const double r = v_r.at2(l, i) / rn;
        r_hat.at2(l, i) = r;
        dot += v_hat[i] * r;
      }
    // trim floating-point dust beyond the cosine bound
    out.values[l] = std::clamp(dot, -1.0, 1.0);
  }
  assert(out.values.all_finite());

  if (tr) {
    tr->v_hat = std::move(v_hat);
    tr->v_norm = vn;
    tr->r_hat = std::move(r_hat);
    tr->r_norms = std::move(r_norms);
  }
  return out;
}

void attention_backward(const AttentionTrace& tr, const Tensor& datt, Tensor& dv,
                        Tensor& dvr_accum) {
  const int d = tr.v_hat.dim(0);
  const int L = tr.r_hat.dim(0);
  assert(datt.size() == L);

  // d(v_hat) collects over locations; rows are independent
  Tensor dv_hat({d});
  for (int l = 0; l < L; ++l) {
    const double g = datt[l];
    if (g == 0.0) continue;
    for (int i = 0; i < d; ++i) dv_hat[i] += g * tr.r_hat.at2(l, i);

    const double rn = tr.r_norms[static_cast<size_t>(l)];
    if (rn > 0) {
      double dot = 0;
      for (int i = 0; i < d; ++i) dot += tr.r_hat.at2(l, i) * tr.v_hat[i];
      for (int i = 0; i < d; ++i)
        dvr_accum.at2(l, i) += g * (tr.v_hat[i] - dot * tr.r_hat.at2(l, i)) / rn;
    }
  }

  dv = Tensor({d});
  if (tr.v_norm > 0) {
    double dot = 0;
    for (int i = 0; i < d; ++i) dot += tr.v_hat[i] * dv_hat[i];
    for (int i = 0; i < d; ++i) dv[i] = (dv_hat[i] - dot * tr.v_hat[i]) / tr.v_norm;
  }
}

FeatureMap modulate(const AttentionMap& fa, const FeatureMap& fr) {
  if (fa.values.dim(0) != fr.height() || fa.values.dim(1) != fr.width())
    throw std::invalid_argument("modulate: grid mismatch");
  Tensor out(fr.values.shape());
  for (int c = 0; c < fr.channels(); ++c)
    for (int h = 0; h < fr.height(); ++h)
      for (int w = 0; w < fr.width(); ++w)
        out.at(c, h, w) = fa.values.at2(h, w) * fr.values.at(c, h, w);
  return FeatureMap{std::move(out), fr.stride, fr.frame};
}

FeatureMap fuse_and_concat(const FeatureMap& fr_mod, const AttentionMap& fa) {
  if (fa.values.dim(0) != fr_mod.height() || fa.values.dim(1) != fr_mod.width())
    throw std::invalid_argument("fuse_and_concat: grid mismatch");
  const int c = fr_mod.channels();
  Tensor out({c + 1, fr_mod.height(), fr_mod.width()});
  for (int ch = 0; ch < c; ++ch)
    for (int h = 0; h < fr_mod.height(); ++h)
      for (int w = 0; w < fr_mod.width(); ++w) out.at(ch, h, w) = fr_mod.values.at(ch, h, w);
  for (int h = 0; h < fr_mod.height(); ++h)
    for (int w = 0; w < fr_mod.width(); ++w) out.at(c, h, w) = fa.values.at2(h, w);
  return FeatureMap{std::move(out), fr_mod.stride, fr_mod.frame};
}

GridPrediction DetectionHead::forward(const FeatureMap& fused, double anchor_w,
                                      double anchor_h, Trace* tr) const {
  if (fused.channels() != c1.in_channels())
    throw std::invalid_argument("DetectionHead: input channels mismatch");
  if (anchor_w <= 0 || anchor_h <= 0)
    throw std::invalid_argument("DetectionHead: anchor must be positive");
  Tensor pre1 = c1.forward(fused.values);
  Tensor act1;
  kernels::silu_forward(pre1, act1);
  Tensor pre2 = c2.forward(act1);
  Tensor act2;
  kernels::silu_forward(pre2, act2);
  Tensor raw = c3.forward(act2);

  if (tr) {
    tr->x = fused.values;
    tr->pre1 = std::move(pre1);
    tr->act1 = act1;
    tr->pre2 = std::move(pre2);
    tr->act2 = act2;
  }
  GridPrediction pred;
  pred.raw = std::move(raw);
  pred.anchor_w = anchor_w;
  pred.anchor_h = anchor_h;
  pred.stride = fused.stride;
  return pred;
}

Tensor DetectionHead::backward(const Trace& tr, const Tensor& draw) {
  Tensor dact2;
  c3.backward(tr.act2, draw, &dact2);
  Tensor dpre2;
  kernels::silu_backward(tr.pre2, dact2, dpre2);
  Tensor dact1;
  c2.backward(tr.act1, dpre2, &dact1);
  Tensor dpre1;
  kernels::silu_backward(tr.pre1, dact1, dpre1);
  Tensor dx;
  c1.backward(tr.x, dpre1, &dx);
  return dx;
}

void DetectionHead::zero_grad() {
  c1.zero_grad();
  c2.zero_grad();
  c3.zero_grad();
}

void DetectionHead::init(Rng& rng) {
  c1.init(rng);
  c2.init(rng);
  c3.init(rng);
}

void DetectionHead::visit(const ParamVisitor& fn) {
  fn("head.conv1.w", c1.w, c1.gw);
  fn("head.conv1.b", c1.b, c1.gb);
  fn("head.conv2.w", c2.w, c2.gw);
  fn("head.conv2.b", c2.b, c2.gb);
  fn("head.conv3.w", c3.w, c3.gw);
  fn("head.conv3.b", c3.b, c3.gb);
}

BBox decode_box(const GridPrediction& pred, int cell_h, int cell_w) {
  if (cell_h < 0 || cell_h >= pred.grid_h() || cell_w < 0 || cell_w >= pred.grid_w())
    throw std::invalid_argument("decode_box: cell outside the grid");
  const double img_w = static_cast<double>(pred.grid_w()) * pred.stride;
  const double img_h = static_cast<double>(pred.grid_h()) * pred.stride;
  BBox b;
  b.cx = (cell_w + kernels::sigmoid(pred.t(0, cell_h, cell_w))) * pred.stride;
  b.cy = (cell_h + kernels::sigmoid(pred.t(1, cell_h, cell_w))) * pred.stride;
  b.w = pred.anchor_w * std::exp(pred.t(2, cell_h, cell_w));
  b.h = pred.anchor_h * std::exp(pred.t(3, cell_h, cell_w));
  return clip_box(b, img_w, img_h);
}

Detection select(const GridPrediction& pred, int object_index) {
  int best_h = 0, best_w = 0;
  double best = pred.conf(0, 0);
  for (int h = 0; h < pred.grid_h(); ++h)
    for (int w = 0; w < pred.grid_w(); ++w)
      if (pred.conf(h, w) > best) {  // strict: ties go to the smallest row-major index
        best = pred.conf(h, w);
        best_h = h;
        best_w = w;
      }
  Detection det;
  det.box = decode_box(pred, best_h, best_w);
  det.confidence = kernels::sigmoid(best);
  det.object_index = object_index;
  return det;
}

}  // namespace mogeo
