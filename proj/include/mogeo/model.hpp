#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mogeo/cvmf.hpp"
#include "mogeo/encoders.hpp"
#include "mogeo/mope.hpp"

namespace mogeo {

struct ModelConfig {
  EncoderConfig encoder;
  int head_hidden = 24;
  bool use_mope = true;         // off: plain global average pooling of F_q
  bool use_cvmf_concat = true;  // off: the head consumes F'_r without the map channel
  double anchor_w = 24, anchor_h = 24;

  int head_in_channels() const {
    return encoder.embed_dim + (use_cvmf_concat ? 1 : 0);
  }
};

// The full localization network: dual-branch encoders, per-object position
// encoding, cross-view attention fusion and the shared detection head.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  void init_params(uint64_t seed);
  void zero_grads();
  int64_t parameter_count() const;
  void visit_params(const ParamVisitor& fn);

  struct ObjectTrace {
    Mope::ObjectTrace mope;
    AttentionTrace attention;
    AttentionMap att;
    Tensor head_in;  // (C or C+1, H, W)
    DetectionHead::Trace head;
  };

  struct PairTrace {
    DualEncoder::QueryTrace qtr;
    DualEncoder::ReferenceTrace rtr;
    FeatureMap fq;
    FeatureMap fr;
    Tensor v_r;  // (L,d)
    std::vector<ObjectTrace> objects;
  };

  struct PairOutput {
    std::vector<GridPrediction> preds;
    std::vector<AttentionMap> atts;
  };

  PairOutput forward_pair(const Image& query, const Image& reference,
                          const std::vector<ClickPoint>& clicks, PairTrace* tr = nullptr) const;

  // Gradient sinks are per object, aligned with forward_pair's outputs:
  // draw_j over the raw prediction grid, datt_j over the attention map.
  void backward_pair(const PairTrace& tr, const std::vector<Tensor>& draws,
                     const std::vector<Tensor>& datts);

  // full composition, one Detection per click (order preserved)
  std::vector<Detection> localize(const Image& query, const Image& reference,
                                  const std::vector<ClickPoint>& clicks) const;

  const ModelConfig& config() const { return cfg_; }

  DualEncoder encoder;
  Mope mope;
  DetectionHead head;

 private:
  ModelConfig cfg_;
};

}  // namespace mogeo
