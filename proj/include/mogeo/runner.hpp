#pragma once

#include <map>
#include <string>
#include <vector>

#include "mogeo/dataset.hpp"
#include "mogeo/metrics.hpp"
#include "mogeo/model.hpp"

namespace mogeo {

struct EvalRunResult {
  EvalReport report;
  std::string detections_path;
  std::string report_path;
  // accuracy a uniformly random cell choice (anchor-sized box) would get
  double random_baseline_025 = 0, random_baseline_05 = 0;
  double accI_literal_025 = 0, accI_literal_05 = 0;  // printed-formula variant
};

// Localize every pair of the chosen ids, write detection records and the
// evaluation report under out_dir, and return the report.
EvalRunResult run_evaluation(const Model& model, const std::vector<AnnotatedPair>& pairs,
                             const std::vector<std::string>& ids, const std::string& out_dir);

// Overlay PNG (ground truth green, predictions blue, object indices) plus
// one min-max normalized attention heatmap per query object.
std::vector<std::string> visualize_pair(const Model& model, const AnnotatedPair& pair,
                                        const std::string& out_dir);

struct TimingReport {
  int64_t parameter_count = 0;
  int pairs_timed = 0;
  double mean_pair_seconds = 0;
  std::map<int, double> seconds_by_object_count;  // object count -> mean seconds

  std::string to_text() const;
};

TimingReport timing_report(const Model& model, const std::vector<AnnotatedPair>& pairs,
                           int repetitions = 3);

}  // namespace mogeo
