#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mogeo/geometry.hpp"
#include "mogeo/image.hpp"
#include "mogeo/rng.hpp"

namespace mogeo {

enum class Alignment { V1, V2 };

// One object of a pair: the click and ground-truth box in the query frame
// plus the ground-truth box in the reference frame. The list index inside
// AnnotatedPair carries the correspondence; `tag` is the generator's
// internal identity (placement order) used by consistency checks and the
// V2 transform bookkeeping.
struct ObjectAnnotation {
  ClickPoint click;
  BBox query_box;
  BBox box;  // reference frame
  int tag = 0;
};

// Exact affine applied by the V2 transform: x' = ax*x + bx, y' = ay*y + by
// on reference-frame coordinates. Pre-clip remapped boxes and their V1
// sources are kept so the transform is fully invertible even after boxes
// were clipped to the output bounds.
struct TransformRecord {
  double ax = 1, bx = 0, ay = 1, by = 0;
  bool flipped = false;

  std::vector<BBox> v1_boxes;   // per retained object
  std::vector<BBox> raw_boxes;  // remapped, before clipping

  struct DroppedObject {
    int v1_index = 0;
    double cx = 0, cy = 0;  // remapped center, outside the crop
  };
  std::vector<DroppedObject> dropped;

  BBox apply_box(const BBox& b) const;
  BBox invert_box(const BBox& b) const;
};

struct AnnotatedPair {
  std::string pair_id;
  Image query_image;
  Image reference_image;
  std::vector<ObjectAnnotation> objects;
  Alignment alignment = Alignment::V1;
  std::optional<TransformRecord> transform;  // present iff alignment == V2
};

// Scene geometry for the synthetic generator. Defaults are desk scale:
// small enough that training-based tests stay in CPU budget, large enough
// for a 16x-downsampling encoder.
struct SceneConfig {
  int query_w = 64, query_h = 64;
  int ref_w = 128, ref_h = 128;
  double obj_min = 14, obj_max = 34;  // reference-side box extent range
  double overlap_limit = 0.1;         // max pairwise IoU between placed boxes
  double noise = 0.06;                // background noise amplitude in [0,1]
  int max_retries = 400;              // placement attempts per object
};

struct TransformConfig {
  double crop_min = 0.7, crop_max = 1.0;  // crop fraction of each side
  double scale_min = 0.75, scale_max = 1.33;
  double flip_prob = 0.5;
  int grid_multiple = 16;  // output dims stay divisible by this
  int max_retries = 20;    // resample attempts when every object drops
};

// Deterministic scene synthesis: a top-down reference canvas with
// `num_objects` textured rectangles and a ground-view style query image
// in which the same objects appear with matching colors, laid out
// horizontally by bearing. Same (seed, config) gives bit-identical pairs.
AnnotatedPair generate_pair(uint64_t seed, int num_objects, const SceneConfig& geometry);

// Uniform point in the interior of the box with a 1 px margin from every
// edge. Requires w >= 2 and h >= 2.
ClickPoint sample_click_point(const BBox& query_box, Rng& rng);

// Random crop / horizontal flip / rescale of the reference side. Retained
// objects (remapped center inside the output grid) get exactly remapped
// boxes, clipped to bounds; the invertible affine plus pre-clip boxes are
// recorded. Resamples when no object survives, then errors.
AnnotatedPair transform_to_v2(const AnnotatedPair& pair, Rng& rng,
                              const TransformConfig& params);

struct DatasetSplit {
  std::vector<std::string> train, validation, test;
  bool contains(const std::string& id) const;
  size_t total() const { return train.size() + validation.size() + test.size(); }
};

// Largest-remainder apportionment of ids into three splits.
DatasetSplit split_by_fractions(const std::vector<std::string>& ids,
                                double f_train, double f_val, double f_test);

struct DatasetManifest {
  int n_train = 0, n_validation = 0, n_test = 0;
};

// Layout under root: manifest.txt, annotations/<id>.txt,
// images/<id>_query.png and images/<id>_reference.png.
DatasetManifest write_dataset(const std::vector<AnnotatedPair>& pairs,
                              const DatasetSplit& split, const std::string& root);

std::pair<std::vector<AnnotatedPair>, DatasetSplit> read_dataset(const std::string& root);

enum class Side { query, reference };

struct SizeHistogram {
  std::vector<double> edges;   // bin edges, ascending, size = bins + 1
  std::vector<int> counts;     // per bin; last bin closed on the right
  double mean = 0, median = 0;
  int total = 0;
};

// Histogram of box areas (px^2) on the chosen side. Bin edges are
// configurable; when omitted, ten equal bins spanning the data are used.
SizeHistogram size_distribution(const std::vector<AnnotatedPair>& pairs, Side side,
                                std::vector<double> edges = {});

// round to 4 decimals, the precision of the annotation format
inline double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace mogeo
