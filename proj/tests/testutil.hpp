#pragma once

#include <functional>
#include <vector>

#include "mogeo/kernels.hpp"
#include "mogeo/model.hpp"
#include "mogeo/objective.hpp"
#include "mogeo/rng.hpp"

namespace testutil {

using namespace mogeo;

inline void fill_random(Tensor& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
}

inline Image random_image(int w, int h, Rng& rng) {
  Image img(w, h);
  for (auto& px : img.pixels) px = static_cast<uint8_t>(rng.uniform_int(0, 255));
  return img;
}

// Micro end-to-end setup used by the gradient checks: 32x32 query,
// 64x64 reference, two objects, < 5000 parameters.
struct TinyCase {
  ModelConfig mc;
  Image query, reference;
  std::vector<ClickPoint> clicks;
  std::vector<BBox> gts;
  ObjectiveConfig oc;
};

inline TinyCase make_tiny_case(uint64_t seed) {
  TinyCase tc;
  tc.mc.encoder = EncoderConfig::tiny();
  tc.mc.head_hidden = 8;
  tc.mc.anchor_w = 16;
  tc.mc.anchor_h = 16;
  Rng rng(seed);
  tc.query = random_image(32, 32, rng);
  tc.reference = random_image(64, 64, rng);
  tc.clicks = {{7.3, 21.0}, {25.1, 9.4}};
  tc.gts = {{18.0, 40.0, 14.0, 20.0}, {49.0, 17.5, 22.0, 12.0}};
  return tc;
}

inline double eval_total_loss(const Model& model, const TinyCase& tc) {
  const Model::PairOutput out = model.forward_pair(tc.query, tc.reference, tc.clicks);
  std::vector<const GridPrediction*> preds;
  std::vector<const AttentionMap*> atts;
  std::vector<int> ids;
  for (size_t j = 0; j < out.preds.size(); ++j) {
    preds.push_back(&out.preds[j]);
    atts.push_back(&out.atts[j]);
    ids.push_back(0);
  }
  return total_loss(preds, tc.gts, atts, ids, tc.oc).total;
}

inline std::vector<double> analytic_grad(Model& model, const TinyCase& tc) {
  model.zero_grads();
  Model::PairTrace trace;
  const Model::PairOutput out =
      model.forward_pair(tc.query, tc.reference, tc.clicks, &trace);
  std::vector<const GridPrediction*> preds;
  std::vector<const AttentionMap*> atts;
  std::vector<int> ids;
  std::vector<Tensor> draws, datts;
  for (size_t j = 0; j < out.preds.size(); ++j) {
    preds.push_back(&out.preds[j]);
    atts.push_back(&out.atts[j]);
    ids.push_back(0);
    draws.emplace_back(out.preds[j].raw.shape());
    datts.emplace_back(out.atts[j].values.shape());
  }
  (void)total_loss(preds, tc.gts, atts, ids, tc.oc, &draws, &datts);
  model.backward_pair(trace, draws, datts);

  std::vector<double> grads;
  model.visit_params([&grads](const std::string&, Tensor&, Tensor& g) {
    for (int64_t i = 0; i < g.size(); ++i) grads.push_back(g[i]);
  });
  return grads;
}

// max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-2)
inline double max_grad_rel_err(Model& model, const TinyCase& tc, double step = 1e-5) {
  const bool was_parallel = kernels::parallel_enabled();
  kernels::set_parallel(false);  // tiny tensors; avoid per-call omp overhead

  const std::vector<double> analytic = analytic_grad(model, tc);

  std::vector<Tensor*> params;
  model.visit_params([&params](const std::string&, Tensor& p, Tensor&) { params.push_back(&p); });

  double worst = 0;
  size_t flat = 0;
  for (Tensor* p : params) {
    for (int64_t i = 0; i < p->size(); ++i, ++flat) {
      const double saved = (*p)[i];
      (*p)[i] = saved + step;
      const double fp = eval_total_loss(model, tc);
      (*p)[i] = saved - step;
      const double fm = eval_total_loss(model, tc);
      (*p)[i] = saved;
      const double numeric = (fp - fm) / (2 * step);
      const double a = analytic[flat];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-2});
      worst = std::max(worst, rel);
    }
  }
  kernels::set_parallel(was_parallel);
  return worst;
}

// generic central-difference gradient for scalar functions of a tensor
inline Tensor numeric_grad(const std::function<double()>& f, Tensor& x, double step = 1e-6) {
  Tensor g(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = f();
    x[i] = saved - step;
    const double fm = f();
    x[i] = saved;
    g[i] = (fp - fm) / (2 * step);
  }
  return g;
}

}  // namespace testutil
