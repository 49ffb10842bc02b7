#pragma once

#include <string>
#include <vector>

#include "mogeo/geometry.hpp"

namespace mogeo {

struct AnnotatedPair;  // dataset.hpp

// Intersection over union in continuous box coordinates; 0 for disjoint
// boxes, 1 for identical ones.
double iou(const BBox& a, const BBox& b);

// Fraction of objects whose predicted box clears IoU > t (strict).
double acc_at(const std::vector<Detection>& detections, const std::vector<BBox>& gts,
              double t);

// Fraction of images whose objects are ALL localized with IoU > t.
// `literal_formula` flips to the variant where an image counts only when
// every object fails, kept solely for comparison.
double accI_at(const std::vector<std::vector<double>>& per_image_ious, double t,
               bool literal_formula = false);

// Retrieval-style baseline: the reference image is tiled into
// patch_size x patch_size cells; an object counts as localized when one of
// its top-k ranked patches has IoU > t with the ground-truth box.
// ranked_patches[i] lists row-major patch indices, best first.
double retrieval_protocol(const std::vector<std::vector<int>>& ranked_patches,
                          const std::vector<BBox>& gts, int ref_w, int ref_h,
                          int patch_size, double t, int k);

struct DetectionRecord {
  std::string pair_id;
  int obj_index = 0;
  BBox box;
  double confidence = 0;
};

void write_detections(const std::string& path, const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> read_detections(const std::string& path);

struct PerImageEval {
  std::string pair_id;
  std::vector<double> ious;      // per object, annotation order
  bool correct_025 = false;      // all objects above threshold
  bool correct_05 = false;
};

// Accuracy over images binned by query-object count: N <= 3, 3 < N <= 6,
// N > 6.
struct BinnedAcc {
  int n_images = 0, n_objects = 0;
  double acc_025 = 0, acc_05 = 0;
};

struct EvalReport {
  double acc_025 = 0, acc_05 = 0;
  double accI_025 = 0, accI_05 = 0;
  int n_images = 0, n_objects = 0;
  std::vector<PerImageEval> per_image;
  BinnedAcc bins[3];

  // `acc@0.25 acc@0.5 accI@0.25 accI@0.5`, 4-decimal reals
  std::string summary_line() const;
  std::string to_text() const;
};

EvalReport evaluate(const std::vector<AnnotatedPair>& dataset,
                    const std::vector<DetectionRecord>& detections);

int object_count_bin(int n);  // 0: N<=3, 1: 3<N<=6, 2: N>6

}  // namespace mogeo
