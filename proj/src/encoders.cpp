#include "mogeo/encoders.hpp"

#include <cassert>
#include <stdexcept>

namespace mogeo {

int EncoderConfig::num_stages() const {
  int s = stride, n = 0;
  while (s > 1) {
    if (s % 2) throw std::invalid_argument("EncoderConfig: stride must be a power of two");
    s /= 2;
    ++n;
  }
  return n;
}

void EncoderConfig::validate() const {
  const int n = num_stages();
  if (n < 1) throw std::invalid_argument("EncoderConfig: stride must be >= 2");
  if (static_cast<int>(query_stage_channels.size()) != n ||
      static_cast<int>(reference_stage_channels.size()) != n)
    throw std::invalid_argument(
        "EncoderConfig: stage channel list must have one entry per stride-2 stage");
  if (query_stage_channels.back() != query_channels)
    throw std::invalid_argument("EncoderConfig: query_channels must match the last stage");
  if (embed_dim <= 0) throw std::invalid_argument("EncoderConfig: embed_dim must be > 0");
  for (int c : query_stage_channels)
    if (c <= 0) throw std::invalid_argument("EncoderConfig: non-positive stage width");
  for (int c : reference_stage_channels)
    if (c <= 0) throw std::invalid_argument("EncoderConfig: non-positive stage width");
}

EncoderConfig EncoderConfig::desk() {
  EncoderConfig cfg;
  cfg.stride = 16;
  cfg.query_stage_channels = {8, 16, 24, 32};
  cfg.reference_stage_channels = {8, 16, 24, 32};
  cfg.query_channels = 32;
  cfg.embed_dim = 48;
  return cfg;
}

EncoderConfig EncoderConfig::tiny() {
  EncoderConfig cfg;
  cfg.stride = 16;
  cfg.query_stage_channels = {4, 6, 8, 8};
  cfg.reference_stage_channels = {4, 6, 8, 8};
  cfg.query_channels = 8;
  cfg.embed_dim = 8;
  return cfg;
}

ConvStack::ConvStack(int in_channels, const std::vector<int>& stage_channels) {
  int c = in_channels;
  for (int out : stage_channels) {
    stages.emplace_back(out, c, 3, 2, 1);
    c = out;
  }
}

Tensor ConvStack::forward(const Tensor& x, Trace* tr) const {
  if (tr) {
    tr->inputs.clear();
    tr->pre.clear();
  }
  Tensor cur = x;
  for (const ConvLayer& layer : stages) {
    if (tr) tr->inputs.push_back(cur);
    Tensor pre = layer.forward(cur);
    if (tr) tr->pre.push_back(pre);
    Tensor act;
    kernels::silu_forward(pre, act);
    cur = std::move(act);
  }
  return cur;
}

Tensor ConvStack::backward(const Trace& tr, const Tensor& dout, bool need_dinput) {
  Tensor grad = dout;
  for (int i = static_cast<int>(stages.size()) - 1; i >= 0; --i) {
    Tensor dpre;
    kernels::silu_backward(tr.pre[static_cast<size_t>(i)], grad, dpre);
    Tensor dx;
    const bool want = need_dinput || i > 0;
    stages[static_cast<size_t>(i)].backward(tr.inputs[static_cast<size_t>(i)], dpre,
                                            want ? &dx : nullptr);
    grad = std::move(dx);
  }
  return grad;
}

void ConvStack::zero_grad() {
  for (auto& s : stages) s.zero_grad();
}

void ConvStack::init(Rng& rng) {
  for (auto& s : stages) s.init(rng);
}

void ConvStack::visit(const std::string& prefix, const ParamVisitor& fn) {
  for (size_t i = 0; i < stages.size(); ++i) {
    const std::string base = prefix + ".stage" + std::to_string(i);
    fn(base + ".w", stages[i].w, stages[i].gw);
    fn(base + ".b", stages[i].b, stages[i].gb);
  }
}

Tensor image_to_tensor(const Image& img) {
  Tensor t({3, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const uint8_t* p = img.px(x, y);
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = p[c] / 255.0;
    }
  return t;
}

DualEncoder::DualEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  query_stack = ConvStack(3, cfg_.query_stage_channels);
  reference_stack = ConvStack(3, cfg_.reference_stage_channels);
  reference_proj = ConvLayer(cfg_.embed_dim, cfg_.reference_stage_channels.back(), 1, 1, 0);
}

namespace {
void check_divisible(const Image& img, int stride, const char* what) {
  if (img.width <= 0 || img.height <= 0)
    throw std::invalid_argument(std::string(what) + ": empty image");
  if (img.width % stride || img.height % stride)
    throw std::invalid_argument(std::string(what) + ": image " + std::to_string(img.width) +
                                "x" + std::to_string(img.height) +
                                " not divisible by stride " + std::to_string(stride));
}
}  // namespace

FeatureMap DualEncoder::encode_query(const Image& img, QueryTrace* tr) const {
  check_divisible(img, cfg_.stride, "encode_query");
  Tensor in = image_to_tensor(img);
  Tensor out = query_stack.forward(in, tr ? &tr->stack : nullptr);
  if (tr) tr->input = std::move(in);
  FeatureMap fm{std::move(out), cfg_.stride, Frame::query};
  assert(fm.values.all_finite());
  assert(fm.height() == img.height / cfg_.stride && fm.width() == img.width / cfg_.stride);
  return fm;
}

FeatureMap DualEncoder::encode_reference(const Image& img, ReferenceTrace* tr) const {
  check_divisible(img, cfg_.stride, "encode_reference");
  Tensor in = image_to_tensor(img);
  Tensor stack_out = reference_stack.forward(in, tr ? &tr->stack : nullptr);
  Tensor projected = reference_proj.forward(stack_out);
  if (tr) {
    tr->input = std::move(in);
    tr->stack_out = std::move(stack_out);
  }
  FeatureMap fm{std::move(projected), cfg_.stride, Frame::reference};
  assert(fm.values.all_finite());
  assert(fm.height() == img.height / cfg_.stride && fm.width() == img.width / cfg_.stride);
  return fm;
}

void DualEncoder::backward_query(const QueryTrace& tr, const Tensor& dout) {
  query_stack.backward(tr.stack, dout, false);
}

void DualEncoder::backward_reference(const ReferenceTrace& tr, const Tensor& dout) {
  Tensor dstack;
  reference_proj.backward(tr.stack_out, dout, &dstack);
  reference_stack.backward(tr.stack, dstack, false);
}

Tensor flatten_reference(const FeatureMap& fr) {
  if (fr.frame != Frame::reference)
    throw std::invalid_argument("flatten_reference: not a reference feature map");
  const int c = fr.channels(), h = fr.height(), w = fr.width();
  Tensor rows({h * w, c});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) rows.at2(y * w + x, ch) = fr.values.at(ch, y, x);
  return rows;
}

Tensor unflatten_reference(const Tensor& rows, int grid_h, int grid_w) {
  if (rows.rank() != 2 || rows.dim(0) != grid_h * grid_w)
    throw std::invalid_argument("unflatten_reference: row count mismatch");
  const int c = rows.dim(1);
  Tensor out({c, grid_h, grid_w});
  for (int y = 0; y < grid_h; ++y)
    for (int x = 0; x < grid_w; ++x)
      for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) = rows.at2(y * grid_w + x, ch);
  return out;
}

}  // namespace mogeo
