#include "mogeo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mogeo/dataset.hpp"

namespace mogeo {

double iou(const BBox& a, const BBox& b) {
  const double ix = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double iy = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  // areas from the same corner coordinates as the intersection, so that
  // identical boxes yield exactly 1
  const double area_a = (a.x1() - a.x0()) * (a.y1() - a.y0());
  const double area_b = (b.x1() - b.x0()) * (b.y1() - b.y0());
  const double uni = area_a + area_b - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double acc_at(const std::vector<Detection>& detections, const std::vector<BBox>& gts,
              double t) {
  if (detections.size() != gts.size())
    throw std::invalid_argument("acc_at: detections and ground truth misaligned");
  if (detections.empty()) throw std::invalid_argument("acc_at: empty input");
  int hits = 0;
  for (size_t i = 0; i < gts.size(); ++i)
    if (iou(detections[i].box, gts[i]) > t) ++hits;
  return static_cast<double>(hits) / static_cast<double>(gts.size());
}

double accI_at(const std::vector<std::vector<double>>& per_image_ious, double t,
               bool literal_formula) {
  if (per_image_ious.empty()) throw std::invalid_argument("accI_at: empty input");
  int correct = 0;
  for (const auto& ious : per_image_ious) {
    if (ious.empty()) throw std::invalid_argument("accI_at: image with no objects");
    bool any_hit = false, all_hit = true;
    for (double v : ious) {
      if (v > t)
        any_hit = true;
      else
        all_hit = false;
    }
    // default: image correct when every object clears the threshold;
    // the literal variant counts an image only when no object does
    const bool ok = literal_formula ? !any_hit : all_hit;
    if (ok) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(per_image_ious.size());
}

double retrieval_protocol(const std::vector<std::vector<int>>& ranked_patches,
                          const std::vector<BBox>& gts, int ref_w, int ref_h,
                          int patch_size, double t, int k) {
  if (k < 1) throw std::invalid_argument("retrieval_protocol: k must be >= 1");
  if (patch_size < 1 || ref_w % patch_size != 0 || ref_h % patch_size != 0)
    throw std::invalid_argument("retrieval_protocol: patches do not tile the image");
  if (ranked_patches.size() != gts.size())
    throw std::invalid_argument("retrieval_protocol: objects misaligned");
  const int nx = ref_w / patch_size, ny = ref_h / patch_size;

  int hits = 0;
  for (size_t i = 0; i < gts.size(); ++i) {
    const auto& ranked = ranked_patches[i];
    const int top = std::min<int>(k, static_cast<int>(ranked.size()));
    bool ok = false;
    for (int r = 0; r < top && !ok; ++r) {
      const int idx = ranked[static_cast<size_t>(r)];
      if (idx < 0 || idx >= nx * ny)
        throw std::invalid_argument("retrieval_protocol: patch index out of range");
      BBox patch;
      patch.w = patch.h = patch_size;
      patch.cx = (idx % nx + 0.5) * patch_size;
      patch.cy = (idx / nx + 0.5) * patch_size;
      ok = iou(patch, gts[i]) > t;
    }
    if (ok) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gts.size());
}

void write_detections(const std::string& path, const std::vector<DetectionRecord>& records) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_detections: cannot open " + path);
  f << std::fixed << std::setprecision(4);
  for (const auto& r : records)
    f << r.pair_id << " " << r.obj_index << " " << r.box.cx << " " << r.box.cy << " "
      << r.box.w << " " << r.box.h << " " << r.confidence << "\n";
}

std::vector<DetectionRecord> read_detections(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_detections: cannot open " + path);
  std::vector<DetectionRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    DetectionRecord r;
    is >> r.pair_id >> r.obj_index >> r.box.cx >> r.box.cy >> r.box.w >> r.box.h >>
        r.confidence;
    if (is.fail())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed detection record");
    out.push_back(r);
  }
  return out;
}

int object_count_bin(int n) { return n <= 3 ? 0 : (n <= 6 ? 1 : 2); }

EvalReport evaluate(const std::vector<AnnotatedPair>& dataset,
                    const std::vector<DetectionRecord>& detections) {
  std::map<std::pair<std::string, int>, BBox> by_key;
  for (const auto& r : detections) {
    auto key = std::make_pair(r.pair_id, r.obj_index);
    if (!by_key.emplace(key, r.box).second)
      throw std::invalid_argument("evaluate: duplicate detection for (" + r.pair_id + ", " +
                                  std::to_string(r.obj_index) + ")");
  }

  EvalReport rep;
  std::string missing;
  int bin_hits_025[3] = {0, 0, 0}, bin_hits_05[3] = {0, 0, 0}, bin_objs[3] = {0, 0, 0},
      bin_imgs[3] = {0, 0, 0};
  int hits_025 = 0, hits_05 = 0, img_ok_025 = 0, img_ok_05 = 0;

  for (const AnnotatedPair& p : dataset) {
    PerImageEval pe;
    pe.pair_id = p.pair_id;
    pe.correct_025 = pe.correct_05 = true;
    const int bin = object_count_bin(static_cast<int>(p.objects.size()));
    bin_imgs[bin]++;
    for (size_t i = 0; i < p.objects.size(); ++i) {
      auto it = by_key.find(std::make_pair(p.pair_id, static_cast<int>(i)));
      if (it == by_key.end()) {
        missing += " (" + p.pair_id + ", " + std::to_string(i) + ")";
        continue;
      }
      const double v = iou(it->second, p.objects[i].box);
      pe.ious.push_back(v);
      rep.n_objects++;
      bin_objs[bin]++;
      if (v > 0.25) {
        hits_025++;
        bin_hits_025[bin]++;
      } else {
        pe.correct_025 = false;
      }
      if (v > 0.5) {
        hits_05++;
        bin_hits_05[bin]++;
      } else {
        pe.correct_05 = false;
      }
    }
    if (pe.correct_025) img_ok_025++;
    if (pe.correct_05) img_ok_05++;
    rep.per_image.push_back(std::move(pe));
    rep.n_images++;
  }
  if (!missing.empty()) throw std::runtime_error("evaluate: missing detections for" + missing);
  if (rep.n_images == 0) throw std::invalid_argument("evaluate: empty dataset");

  rep.acc_025 = static_cast<double>(hits_025) / rep.n_objects;
  rep.acc_05 = static_cast<double>(hits_05) / rep.n_objects;
  rep.accI_025 = static_cast<double>(img_ok_025) / rep.n_images;
  rep.accI_05 = static_cast<double>(img_ok_05) / rep.n_images;
  for (int b = 0; b < 3; ++b) {
    rep.bins[b].n_images = bin_imgs[b];
    rep.bins[b].n_objects = bin_objs[b];
    rep.bins[b].acc_025 = bin_objs[b] ? static_cast<double>(bin_hits_025[b]) / bin_objs[b] : 0;
    rep.bins[b].acc_05 = bin_objs[b] ? static_cast<double>(bin_hits_05[b]) / bin_objs[b] : 0;
  }
  return rep;
}

std::string EvalReport::summary_line() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << acc_025 << " " << acc_05 << " " << accI_025
     << " " << accI_05;
  return os.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "images " << n_images << " objects " << n_objects << "\n";
  os << "acc@0.25 " << acc_025 << "\n";
  os << "acc@0.5 " << acc_05 << "\n";
  os << "accI@0.25 " << accI_025 << "\n";
  os << "accI@0.5 " << accI_05 << "\n";
  static const char* bin_names[3] = {"I(N<=3)", "II(3<N<=6)", "III(N>6)"};
  for (int b = 0; b < 3; ++b)
    os << "bin " << bin_names[b] << " images " << bins[b].n_images << " objects "
       << bins[b].n_objects << " acc@0.25 " << bins[b].acc_025 << " acc@0.5 "
       << bins[b].acc_05 << "\n";
  for (const auto& pe : per_image) {
    os << "image " << pe.pair_id << " ious";
    for (double v : pe.ious) os << " " << v;
    os << " correct@0.25 " << (pe.correct_025 ? 1 : 0) << " correct@0.5 "
       << (pe.correct_05 ? 1 : 0) << "\n";
  }
  return os.str();
}

}  // namespace mogeo
