#include "mogeo/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace mogeo {

namespace {

const AnnotatedPair* find_pair(const std::vector<AnnotatedPair>& pairs, const std::string& id) {
  for (const auto& p : pairs)
    if (p.pair_id == id) return &p;
  return nullptr;
}

// chance that an anchor-sized box decoded at a uniformly random cell
// clears the threshold, averaged over objects
double random_cell_baseline(const Model& model, const std::vector<const AnnotatedPair*>& pairs,
                            double t) {
  const int stride = model.config().encoder.stride;
  const double aw = model.config().anchor_w, ah = model.config().anchor_h;
  double acc = 0;
  int64_t objects = 0;
  for (const auto* p : pairs) {
    const int gh = p->reference_image.height / stride;
    const int gw = p->reference_image.width / stride;
    for (const auto& o : p->objects) {
      int hits = 0;
      for (int h = 0; h < gh; ++h)
        for (int w = 0; w < gw; ++w) {
          BBox b{(w + 0.5) * stride, (h + 0.5) * stride, aw, ah};
          if (iou(b, o.box) > t) ++hits;
        }
      acc += static_cast<double>(hits) / (gh * gw);
      ++objects;
    }
  }
  return objects ? acc / static_cast<double>(objects) : 0.0;
}

}  // namespace

EvalRunResult run_evaluation(const Model& model, const std::vector<AnnotatedPair>& pairs,
                             const std::vector<std::string>& ids, const std::string& out_dir) {
  std::vector<const AnnotatedPair*> selected;
  for (const auto& id : ids) {
    const AnnotatedPair* p = find_pair(pairs, id);
    if (!p) throw std::runtime_error("run_evaluation: unknown pair " + id);
    selected.push_back(p);
  }
  if (selected.empty()) throw std::invalid_argument("run_evaluation: empty split");

  std::vector<DetectionRecord> records;
  std::vector<AnnotatedPair> subset;
  for (const auto* p : selected) {
    subset.push_back(*p);
    std::vector<ClickPoint> clicks;
    for (const auto& o : p->objects) clicks.push_back(o.click);
    const std::vector<Detection> dets = model.localize(p->query_image, p->reference_image, clicks);
    for (const Detection& d : dets)
      records.push_back({p->pair_id, d.object_index, d.box, d.confidence});
  }

  EvalRunResult out;
  out.report = evaluate(subset, records);

  std::vector<std::vector<double>> per_image;
  for (const auto& pe : out.report.per_image) per_image.push_back(pe.ious);
  out.accI_literal_025 = accI_at(per_image, 0.25, /*literal_formula=*/true);
  out.accI_literal_05 = accI_at(per_image, 0.5, true);
  out.random_baseline_025 = random_cell_baseline(model, selected, 0.25);
  out.random_baseline_05 = random_cell_baseline(model, selected, 0.5);

  fs::create_directories(out_dir);
  out.detections_path = (fs::path(out_dir) / "detections.txt").string();
  write_detections(out.detections_path, records);
  out.report_path = (fs::path(out_dir) / "report.txt").string();
  std::ofstream rf(out.report_path);
  if (!rf) throw std::runtime_error("run_evaluation: cannot write " + out.report_path);
  rf << out.report.summary_line() << "\n" << out.report.to_text();
  rf << std::fixed << std::setprecision(4);
  rf << "random_cell_baseline acc@0.25 " << out.random_baseline_025 << " acc@0.5 "
     << out.random_baseline_05 << "\n";
  return out;
}

namespace {
// simple blue -> cyan -> yellow -> red ramp
Rgb heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  double r, g, b;
  if (v < 1.0 / 3) {
    const double t = v * 3;
    r = 0; g = lerp(0, 1, t); b = 1;
  } else if (v < 2.0 / 3) {
    const double t = (v - 1.0 / 3) * 3;
    r = lerp(0, 1, t); g = 1; b = lerp(1, 0, t);
  } else {
    const double t = (v - 2.0 / 3) * 3;
    r = 1; g = lerp(1, 0, t); b = 0;
  }
  return {static_cast<uint8_t>(255 * r), static_cast<uint8_t>(255 * g),
          static_cast<uint8_t>(255 * b)};
}

std::string fmt4s(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}
}  // namespace

std::vector<std::string> visualize_pair(const Model& model, const AnnotatedPair& pair,
                                        const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<ClickPoint> clicks;
  for (const auto& o : pair.objects) clicks.push_back(o.click);

  Model::PairTrace trace;
  const Model::PairOutput fo =
      model.forward_pair(pair.query_image, pair.reference_image, clicks, &trace);

  std::vector<std::string> written;

  Image overlay = pair.reference_image;
  const Rgb green{40, 220, 60}, blue{60, 110, 255};
  for (size_t j = 0; j < pair.objects.size(); ++j) {
    const BBox& gt = pair.objects[j].box;
    draw_rect_outline(overlay, gt.cx, gt.cy, gt.w, gt.h, green, 1);
    draw_digits(overlay, static_cast<int>(gt.x0()) + 2, static_cast<int>(gt.y0()) + 2,
                static_cast<int>(j), green, 1);
    const Detection det = select(fo.preds[j], static_cast<int>(j));
    draw_rect_outline(overlay, det.box.cx, det.box.cy, det.box.w, det.box.h, blue, 1);
    draw_digits(overlay, static_cast<int>(det.box.x0()) + 2,
                static_cast<int>(det.box.y1()) - 7, static_cast<int>(j), blue, 1);
  }
  const std::string overlay_path =
      (fs::path(out_dir) / (pair.pair_id + "_overlay.png")).string();
  write_png(overlay_path, overlay);
  written.push_back(overlay_path);

  const int stride = model.config().encoder.stride;
  for (size_t j = 0; j < fo.atts.size(); ++j) {
    const Tensor& att = fo.atts[j].values;
    double lo = att[0], hi = att[0];
    for (int64_t i = 0; i < att.size(); ++i) {
      lo = std::min(lo, att[i]);
      hi = std::max(hi, att[i]);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    Image heat(att.dim(1) * stride, att.dim(0) * stride);
    for (int y = 0; y < heat.height; ++y)
      for (int x = 0; x < heat.width; ++x) {
        const Rgb c = heat_color((att.at2(y / stride, x / stride) - lo) / span);
        heat.set(x, y, c.r, c.g, c.b);
      }
    const std::string heat_path =
        (fs::path(out_dir) / (pair.pair_id + "_obj" + std::to_string(j) + "_heat_min" +
                              fmt4s(lo) + "_max" + fmt4s(hi) + ".png"))
            .string();
    write_png(heat_path, heat);
    written.push_back(heat_path);
  }
  return written;
}

TimingReport timing_report(const Model& model, const std::vector<AnnotatedPair>& pairs,
                           int repetitions) {
  if (pairs.empty()) throw std::invalid_argument("timing_report: no pairs");
  TimingReport rep;
  rep.parameter_count = model.parameter_count();

  std::map<int, std::pair<double, int>> by_count;
  double total = 0;
  for (const AnnotatedPair& p : pairs) {
    std::vector<ClickPoint> clicks;
    for (const auto& o : p.objects) clicks.push_back(o.click);
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repetitions; ++r)
      (void)model.localize(p.query_image, p.reference_image, clicks);
    const auto t1 = std::chrono::steady_clock::now();
    const double sec =
        std::chrono::duration<double>(t1 - t0).count() / std::max(1, repetitions);
    total += sec;
    auto& slot = by_count[static_cast<int>(p.objects.size())];
    slot.first += sec;
    slot.second += 1;
  }
  rep.pairs_timed = static_cast<int>(pairs.size());
  rep.mean_pair_seconds = total / rep.pairs_timed;
  for (const auto& [count, acc] : by_count)
    rep.seconds_by_object_count[count] = acc.first / acc.second;
  return rep;
}

std::string TimingReport::to_text() const {
  std::ostringstream os;
  os << "parameters " << parameter_count << "\n";
  os << "pairs " << pairs_timed << "\n";
  os << std::scientific << std::setprecision(3);
  os << "mean_pair_seconds " << mean_pair_seconds << "\n";
  for (const auto& [count, sec] : seconds_by_object_count)
    os << "objects " << count << " mean_seconds " << sec << "\n";
  return os.str();
}

}  // namespace mogeo
