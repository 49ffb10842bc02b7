#pragma once

#include <vector>

#include "mogeo/image.hpp"
#include "mogeo/layers.hpp"

namespace mogeo {

enum class Frame { query, reference };

// Feature grid produced by an encoder; dims are input dims divided by the
// stride, exactly.
struct FeatureMap {
  Tensor values;  // (C, H', W')
  int stride = 16;
  Frame frame = Frame::query;

  int channels() const { return values.dim(0); }
  int height() const { return values.dim(1); }
  int width() const { return values.dim(2); }
};

struct EncoderConfig {
  int stride = 16;
  std::vector<int> query_stage_channels = {32, 64, 128, 256};
  std::vector<int> reference_stage_channels = {32, 64, 128, 256};
  int query_channels = 256;  // C, output of the query branch
  int embed_dim = 512;       // d, reference per-location embedding

  int num_stages() const;  // log2(stride)
  void validate() const;

  // small widths for fast CPU runs and gradient checks
  static EncoderConfig desk();
  static EncoderConfig tiny();
};

// Stack of stride-2 3x3 convolutions with SiLU after each; stage strides
// multiply to the configured total stride.
struct ConvStack {
  std::vector<ConvLayer> stages;

  ConvStack() = default;
  ConvStack(int in_channels, const std::vector<int>& stage_channels);

  struct Trace {
    std::vector<Tensor> inputs;  // input to each conv
    std::vector<Tensor> pre;     // conv output before the nonlinearity
  };

  Tensor forward(const Tensor& x, Trace* tr) const;
  // returns d(input) when need_dinput; accumulates stage parameter grads
  Tensor backward(const Trace& tr, const Tensor& dout, bool need_dinput);

  void zero_grad();
  void init(Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

// image as (3,H,W) in [0,1]
Tensor image_to_tensor(const Image& img);

// Dual-branch feature extraction. The query branch maps to
// query_channels; the reference branch additionally applies the
// per-location linear projection to embed_dim.
class DualEncoder {
 public:
  explicit DualEncoder(const EncoderConfig& cfg);

  struct QueryTrace {
    Tensor input;
    ConvStack::Trace stack;
  };
  struct ReferenceTrace {
    Tensor input;
    ConvStack::Trace stack;
    Tensor stack_out;  // projection input
  };

  FeatureMap encode_query(const Image& img, QueryTrace* tr = nullptr) const;
  FeatureMap encode_reference(const Image& img, ReferenceTrace* tr = nullptr) const;

  void backward_query(const QueryTrace& tr, const Tensor& dout);
  void backward_reference(const ReferenceTrace& tr, const Tensor& dout);

  const EncoderConfig& config() const { return cfg_; }

  ConvStack query_stack;
  ConvStack reference_stack;
  ConvLayer reference_proj;  // 1x1, stack channels -> d

 private:
  EncoderConfig cfg_;
};

// (C,H,W) -> (H*W, C) row-major over (h, w); exact inverse pair.
Tensor flatten_reference(const FeatureMap& fr);
Tensor unflatten_reference(const Tensor& rows, int grid_h, int grid_w);

}  // namespace mogeo
