#include "mogeo/model.hpp"

#include <stdexcept>

namespace mogeo {

Model::Model(const ModelConfig& cfg)
    : encoder(cfg.encoder),
      mope(cfg.encoder.query_channels, cfg.encoder.embed_dim),
      head(cfg.head_in_channels(), cfg.head_hidden),
      cfg_(cfg) {}

void Model::init_params(uint64_t seed) {
  // fan-in scaled uniform weights, zero biases, drawn in visitation order
  // so identical configurations reproduce identical parameters
  Rng rng(seed);
  encoder.query_stack.init(rng);
  encoder.reference_stack.init(rng);
  encoder.reference_proj.init(rng);
  mope.init(rng);
  head.init(rng);
}

void Model::zero_grads() {
  visit_params([](const std::string&, Tensor&, Tensor& g) { g.zero(); });
}

int64_t Model::parameter_count() const {
  int64_t n = 0;
  const_cast<Model*>(this)->visit_params(
      [&n](const std::string&, Tensor& p, Tensor&) { n += p.size(); });
  return n;
}

void Model::visit_params(const ParamVisitor& fn) {
  encoder.query_stack.visit("qenc", fn);
  encoder.reference_stack.visit("renc", fn);
  fn("renc.proj.w", encoder.reference_proj.w, encoder.reference_proj.gw);
  fn("renc.proj.b", encoder.reference_proj.b, encoder.reference_proj.gb);
  mope.visit(fn);
  head.visit(fn);
}

namespace {
// w/o MOPE: position-free global average pooling of the query features
Tensor avgpool_vector(const FeatureMap& fq, const LinearLayer& proj, Tensor* pooled_out) {
  const int c = fq.channels();
  Tensor pooled({c});
  const double inv = 1.0 / (fq.height() * fq.width());
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0;
    for (int y = 0; y < fq.height(); ++y)
      for (int x = 0; x < fq.width(); ++x) acc += fq.values.at(ch, y, x);
    pooled[ch] = acc * inv;
  }
  Tensor v = proj.forward(pooled);
  if (pooled_out) *pooled_out = std::move(pooled);
  return v;
}
}  // namespace

Model::PairOutput Model::forward_pair(const Image& query, const Image& reference,
                                      const std::vector<ClickPoint>& clicks,
                                      PairTrace* tr) const {
  if (clicks.empty()) throw std::invalid_argument("forward_pair: no clicks");
  PairTrace local;
  PairTrace& t = tr ? *tr : local;
  t.objects.clear();

  t.fq = encoder.encode_query(query, &t.qtr);
  t.fr = encoder.encode_reference(reference, &t.rtr);
  t.v_r = flatten_reference(t.fr);

  PairOutput out;
  out.preds.reserve(clicks.size());
  out.atts.reserve(clicks.size());
  t.objects.resize(clicks.size());

  for (size_t j = 0; j < clicks.size(); ++j) {
    ObjectTrace& ot = t.objects[j];
    Tensor v;
    if (cfg_.use_mope) {
      v = mope.encode_one(t.fq, clicks[j], &ot.mope);
    } else {
      v = avgpool_vector(t.fq, mope.proj, &ot.mope.pooled);
    }
    AttentionMap att = attention(v, t.v_r, t.fr.height(), t.fr.width(),
                                 static_cast<int>(j), &ot.attention);
    FeatureMap modulated = modulate(att, t.fr);
    FeatureMap head_in =
        cfg_.use_cvmf_concat ? fuse_and_concat(modulated, att) : std::move(modulated);
    GridPrediction pred = head.forward(head_in, cfg_.anchor_w, cfg_.anchor_h, &ot.head);

    ot.att = att;
    ot.head_in = std::move(head_in.values);
    out.atts.push_back(std::move(att));
    out.preds.push_back(std::move(pred));
  }
  return out;
}

void Model::backward_pair(const PairTrace& tr, const std::vector<Tensor>& draws,
                          const std::vector<Tensor>& datts) {
  const size_t m = tr.objects.size();
  if (draws.size() != m || datts.size() != m)
    throw std::invalid_argument("backward_pair: gradient sinks misaligned");
  const int d = tr.fr.channels(), gh = tr.fr.height(), gw = tr.fr.width();

  Tensor dfq(tr.fq.values.shape());
  Tensor dfr(tr.fr.values.shape());
  Tensor dvr(tr.v_r.shape());

  for (size_t j = 0; j < m; ++j) {
    const ObjectTrace& ot = tr.objects[j];
    Tensor dhead_in = head.backward(ot.head, draws[j]);

    // split concat channels back into the modulated part and the map part
    Tensor datt({gh, gw});
    for (int h = 0; h < gh; ++h)
      for (int w = 0; w < gw; ++w) datt.at2(h, w) = datts[j].at2(h, w);
    if (cfg_.use_cvmf_concat)
      for (int h = 0; h < gh; ++h)
        for (int w = 0; w < gw; ++w) datt.at2(h, w) += dhead_in.at(d, h, w);

    // modulate: F'_r = att * F_r
    for (int c = 0; c < d; ++c)
      for (int h = 0; h < gh; ++h)
        for (int w = 0; w < gw; ++w) {
          const double g = dhead_in.at(c, h, w);
          dfr.at(c, h, w) += ot.att.values.at2(h, w) * g;
          datt.at2(h, w) += tr.fr.values.at(c, h, w) * g;
        }

    Tensor dv;
    attention_backward(ot.attention, datt, dv, dvr);

    if (cfg_.use_mope) {
      mope.backward_one(ot.mope, dv, dfq);
    } else {
      Tensor dpooled;
      mope.proj.backward(ot.mope.pooled, dv, &dpooled);
      const double inv = 1.0 / (tr.fq.height() * tr.fq.width());
      for (int c = 0; c < tr.fq.channels(); ++c)
        for (int y = 0; y < tr.fq.height(); ++y)
          for (int x = 0; x < tr.fq.width(); ++x) dfq.at(c, y, x) += dpooled[c] * inv;
    }
  }

  // V_r rows alias the projected reference map
  Tensor dfr_from_rows = unflatten_reference(dvr, gh, gw);
  dfr.add_(dfr_from_rows);

  encoder.backward_reference(tr.rtr, dfr);
  encoder.backward_query(tr.qtr, dfq);
}

std::vector<Detection> Model::localize(const Image& query, const Image& reference,
                                       const std::vector<ClickPoint>& clicks) const {
  PairOutput out = forward_pair(query, reference, clicks);
  std::vector<Detection> dets;
  dets.reserve(out.preds.size());
  for (size_t j = 0; j < out.preds.size(); ++j)
    dets.push_back(select(out.preds[j], static_cast<int>(j)));
  return dets;
}

}  // namespace mogeo
