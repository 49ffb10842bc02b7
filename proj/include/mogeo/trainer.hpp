#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mogeo/dataset.hpp"
#include "mogeo/model.hpp"
#include "mogeo/objective.hpp"

namespace mogeo {

// Run configuration, parsed from line-oriented `key = value` text.
struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 8;
  int epochs = 24;
  uint64_t seed = 1;

  bool use_mope = true;
  bool use_cvmf_concat = true;
  bool use_similarity_loss = true;
  NegativeMode similarity_negatives = NegativeMode::mean;
  double loss_weight_cn = 1.0, loss_weight_reg = 1.0, loss_weight_s = 1.0;

  bool anchor_auto = true;  // auto: mean ground-truth box size of the train split
  double anchor_w = 0, anchor_h = 0;

  int steps_limit = 0;  // optional cap on total optimizer steps (0 = none)
  int log_every = 10;

  // architecture
  int stride = 16;
  std::vector<int> query_stage_channels = {32, 64, 128, 256};
  std::vector<int> reference_stage_channels = {32, 64, 128, 256};
  int query_channels = 256;
  int embed_dim = 512;
  int head_hidden = 24;

  void validate() const;
  EncoderConfig encoder_config() const;
  ModelConfig model_config(double resolved_anchor_w, double resolved_anchor_h) const;
  ObjectiveConfig objective_config() const;

  std::string to_text() const;
  static TrainConfig from_text(const std::string& text, const std::string& origin = "config");
  static TrainConfig from_file(const std::string& path);

  // small widths for CPU-budget runs
  static TrainConfig desk();
};

// `mogeo-ckpt-v1` archive: config text, step counter, RNG state and every
// parameter tensor keyed by its hierarchical name.
void save_checkpoint(const std::string& path, Model& model, const TrainConfig& cfg,
                     double anchor_w, double anchor_h, int64_t step,
                     const std::string& rng_state);

struct LoadedCheckpoint {
  TrainConfig config;
  double anchor_w = 0, anchor_h = 0;
  int64_t step = 0;
  std::string rng_state;
  std::unique_ptr<Model> model;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  std::vector<LossBreakdown> per_step;
  double anchor_w = 0, anchor_h = 0;
};

// Deterministic training over the dataset's train split: per-epoch order
// is a pure function of the seed, every step logs `step l_cn l_reg l_s
// total`, and the final checkpoint plus log land in out_dir.
TrainResult train(const TrainConfig& cfg, const std::string& dataset_root,
                  const std::string& out_dir);

// Adam with bias correction; default beta/epsilon hyperparameters.
class AdamOptimizer {
 public:
  AdamOptimizer(Model& model, double lr);
  void step();  // consumes the accumulated gradients

 private:
  Model& model_;
  double lr_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// mean ground-truth reference box size over the given pairs
void mean_box_size(const std::vector<AnnotatedPair>& pairs, double* w, double* h);

}  // namespace mogeo
