#include "mogeo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mogeo/metrics.hpp"

namespace fs = std::filesystem;

namespace mogeo {

// ------------------------------------------------------------ transforms

BBox TransformRecord::apply_box(const BBox& b) const {
  BBox out;
  out.cx = ax * b.cx + bx;
  out.cy = ay * b.cy + by;
  out.w = std::abs(ax) * b.w;
  out.h = std::abs(ay) * b.h;
  return out;
}

BBox TransformRecord::invert_box(const BBox& b) const {
  BBox out;
  out.cx = (b.cx - bx) / ax;
  out.cy = (b.cy - by) / ay;
  out.w = b.w / std::abs(ax);
  out.h = b.h / std::abs(ay);
  return out;
}

// ------------------------------------------------------------- rendering

namespace {

// deterministic per-pixel hash for object texturing (no rng stream use)
inline double texel(int x, int y, int salt) {
  uint32_t v = static_cast<uint32_t>(x * 73856093 ^ y * 19349663 ^ salt * 83492791);
  v ^= v >> 13;
  v *= 0x85ebca6bU;
  v ^= v >> 16;
  return static_cast<double>(v & 0xffff) / 65535.0;
}

void paint_rect(Image& img, const BBox& b, Rgb color, int salt) {
  const int x0 = std::max(0, static_cast<int>(std::floor(b.x0())));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(b.x1())) - 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(b.y0())));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(b.y1())) - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double shade = 0.78 + 0.22 * texel(x / 3, y / 3, salt);
      img.set(x, y, static_cast<uint8_t>(color.r * shade),
              static_cast<uint8_t>(color.g * shade),
              static_cast<uint8_t>(color.b * shade));
    }
}

void fill_noise_background(Image& img, Rng& rng, Rgb base, double amplitude,
                           bool vertical_gradient) {
  for (int y = 0; y < img.height; ++y) {
    const double grad = vertical_gradient ? 0.75 + 0.5 * (1.0 - double(y) / img.height) : 1.0;
    for (int x = 0; x < img.width; ++x) {
      auto jitter = [&](double c) {
        const double v = c * grad + 255.0 * amplitude * (rng.uniform() * 2.0 - 1.0);
        return static_cast<uint8_t>(std::min(255.0, std::max(0.0, v)));
      };
      img.set(x, y, jitter(base.r), jitter(base.g), jitter(base.b));
    }
  }
}

}  // namespace

// ------------------------------------------------------------ generation

ClickPoint sample_click_point(const BBox& query_box, Rng& rng) {
  if (!query_box.valid() || query_box.w < 2 || query_box.h < 2)
    throw std::invalid_argument("sample_click_point: degenerate box (needs w,h >= 2)");
  ClickPoint p;
  p.x = rng.uniform(query_box.x0() + 1.0, query_box.x1() - 1.0);
  p.y = rng.uniform(query_box.y0() + 1.0, query_box.y1() - 1.0);
  return p;
}

AnnotatedPair generate_pair(uint64_t seed, int num_objects, const SceneConfig& g) {
  if (num_objects < 1) throw std::invalid_argument("generate_pair: need num_objects >= 1");
  const double slot_w = static_cast<double>(g.query_w) / num_objects;
  if (slot_w - 2.0 < 6.0)
    throw std::runtime_error("generate_pair: query image too narrow for " +
                             std::to_string(num_objects) + " objects");

  Rng root(seed);
  Rng place_rng = root.fork(1);
  Rng color_rng = root.fork(2);
  Rng ref_noise = root.fork(3);
  Rng query_noise = root.fork(4);
  Rng click_rng = root.fork(5);

  // place reference boxes with bounded retries on the overlap limit
  std::vector<BBox> ref_boxes;
  int attempts = 0;
  const int attempt_limit = g.max_retries * num_objects;
  while (static_cast<int>(ref_boxes.size()) < num_objects) {
    if (++attempts > attempt_limit)
      throw std::runtime_error("generate_pair: placement failed after " +
                               std::to_string(attempt_limit) + " attempts (overlap limit " +
                               std::to_string(g.overlap_limit) + ")");
    BBox b;
    b.w = round4(place_rng.uniform(g.obj_min, g.obj_max));
    b.h = round4(place_rng.uniform(g.obj_min, g.obj_max));
    if (b.w / 2 + 2 > g.ref_w - b.w / 2 - 2 || b.h / 2 + 2 > g.ref_h - b.h / 2 - 2)
      throw std::runtime_error("generate_pair: objects larger than reference canvas");
    b.cx = round4(place_rng.uniform(b.w / 2 + 2, g.ref_w - b.w / 2 - 2));
    b.cy = round4(place_rng.uniform(b.h / 2 + 2, g.ref_h - b.h / 2 - 2));
    bool ok = true;
    for (const BBox& other : ref_boxes)
      if (iou(b, other) > g.overlap_limit) {
        ok = false;
        break;
      }
    if (ok) ref_boxes.push_back(b);
  }

  // distinct palette: evenly spaced hues with a random rotation
  const double hue0 = color_rng.uniform();
  std::vector<Rgb> colors(static_cast<size_t>(num_objects));
  for (int i = 0; i < num_objects; ++i) {
    const double h = hue0 + static_cast<double>(i) / num_objects;
    const double s = 0.7 + 0.25 * color_rng.uniform();
    const double v = 0.8 + 0.2 * color_rng.uniform();
    colors[static_cast<size_t>(i)] = hsv_to_rgb(h, s, v);
  }

  AnnotatedPair pair;
  pair.alignment = Alignment::V1;
  pair.reference_image = Image(g.ref_w, g.ref_h);
  fill_noise_background(pair.reference_image, ref_noise, {96, 104, 96}, g.noise, false);
  for (int i = 0; i < num_objects; ++i)
    paint_rect(pair.reference_image, ref_boxes[static_cast<size_t>(i)],
               colors[static_cast<size_t>(i)], i + 1);

  // ground-view layout: horizontal slot order by bearing around the
  // reference center, vertical placement and size by distance
  const double ref_cx = g.ref_w / 2.0, ref_cy = g.ref_h / 2.0;
  std::vector<int> order(static_cast<size_t>(num_objects));
  for (int i = 0; i < num_objects; ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const BBox &ba = ref_boxes[static_cast<size_t>(a)], &bb = ref_boxes[static_cast<size_t>(b)];
    return std::atan2(ba.cy - ref_cy, ba.cx - ref_cx) <
           std::atan2(bb.cy - ref_cy, bb.cx - ref_cx);
  });

  pair.query_image = Image(g.query_w, g.query_h);
  fill_noise_background(pair.query_image, query_noise, {88, 98, 118}, g.noise, true);

  const double qscale = 0.5 * g.query_w / g.ref_w;
  const double rho_max = 0.5 * std::hypot(g.ref_w, g.ref_h);
  pair.objects.resize(static_cast<size_t>(num_objects));
  for (int k = 0; k < num_objects; ++k) {
    const int i = order[static_cast<size_t>(k)];
    const BBox& rb = ref_boxes[static_cast<size_t>(i)];
    const double rho = std::hypot(rb.cx - ref_cx, rb.cy - ref_cy) / rho_max;

    BBox qb;
    qb.w = round4(std::clamp(rb.w * qscale * 2.2, 6.0, slot_w - 2.0));
    qb.h = round4(std::clamp(rb.h * qscale * 1.4, 6.0, 0.42 * g.query_h));
    qb.cx = round4((k + 0.5) * slot_w);
    qb.cy = round4(std::clamp(g.query_h * (0.70 - 0.32 * rho), qb.h / 2 + 1,
                              g.query_h - qb.h / 2 - 1));
    paint_rect(pair.query_image, qb, colors[static_cast<size_t>(i)], i + 1);

    ObjectAnnotation& obj = pair.objects[static_cast<size_t>(k)];
    obj.query_box = qb;
    obj.box = rb;
    obj.tag = i;
    ClickPoint p = sample_click_point(qb, click_rng);
    obj.click = {round4(p.x), round4(p.y)};
  }
  return pair;
}

// ---------------------------------------------------------- V2 transform

AnnotatedPair transform_to_v2(const AnnotatedPair& pair, Rng& rng,
                              const TransformConfig& params) {
  if (pair.alignment != Alignment::V1)
    throw std::invalid_argument("transform_to_v2: input must be V1");
  if (params.crop_min < 0.6 - 1e-12 || params.crop_max > 1.0 + 1e-12 ||
      params.crop_min > params.crop_max)
    throw std::invalid_argument("transform_to_v2: crop fraction out of [0.6, 1.0]");
  const Image& src = pair.reference_image;
  const int W = src.width, H = src.height;
  const int grid = params.grid_multiple;

  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    const double f = rng.uniform(params.crop_min, params.crop_max);
    const int wc = std::max(2, static_cast<int>(std::lround(f * W)));
    const int hc = std::max(2, static_cast<int>(std::lround(f * H)));
    const int x0 = static_cast<int>(rng.uniform_int(0, W - wc));
    const int y0 = static_cast<int>(rng.uniform_int(0, H - hc));
    const bool flip = rng.bernoulli(params.flip_prob);
    const double s = rng.uniform(params.scale_min, params.scale_max);
    const int out_w = std::max(grid, static_cast<int>(std::lround(wc * s / grid)) * grid);
    const int out_h = std::max(grid, static_cast<int>(std::lround(hc * s / grid)) * grid);

    const double kx = static_cast<double>(out_w - 1) / (wc - 1);
    const double ky = static_cast<double>(out_h - 1) / (hc - 1);
    TransformRecord rec;
    rec.flipped = flip;
    rec.ax = flip ? -kx : kx;
    rec.bx = flip ? kx * (wc - 1 + x0) : -kx * x0;
    rec.ay = ky;
    rec.by = -ky * y0;

    // keep rule: remapped center inside the output pixel grid
    std::vector<int> retained;
    for (size_t j = 0; j < pair.objects.size(); ++j) {
      const BBox raw = rec.apply_box(pair.objects[j].box);
      if (raw.cx >= 0 && raw.cx <= out_w - 1 && raw.cy >= 0 && raw.cy <= out_h - 1)
        retained.push_back(static_cast<int>(j));
      else
        rec.dropped.push_back({static_cast<int>(j), raw.cx, raw.cy});
    }
    if (retained.empty()) continue;

    AnnotatedPair out;
    out.pair_id = pair.pair_id;
    out.alignment = Alignment::V2;
    out.query_image = pair.query_image;

    // align-corners bilinear resample of the crop window
    out.reference_image = Image(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
      const double v = std::clamp(y0 + y / ky, 0.0, double(H - 1));
      const int iy = std::min(H - 2, static_cast<int>(v));
      const double ty = v - iy;
      for (int x = 0; x < out_w; ++x) {
        const double u_in = flip ? (wc - 1) - x / kx : x / kx;
        const double u = std::clamp(x0 + u_in, 0.0, double(W - 1));
        const int ix = std::min(W - 2, static_cast<int>(u));
        const double tx = u - ix;
        for (int c = 0; c < 3; ++c) {
          const double p00 = src.px(ix, iy)[c], p10 = src.px(ix + 1, iy)[c];
          const double p01 = src.px(ix, iy + 1)[c], p11 = src.px(ix + 1, iy + 1)[c];
          const double val = (1 - ty) * ((1 - tx) * p00 + tx * p10) +
                             ty * ((1 - tx) * p01 + tx * p11);
          out.reference_image.px(x, y)[c] = static_cast<uint8_t>(std::lround(val));
        }
      }
    }

    for (int j : retained) {
      const ObjectAnnotation& o = pair.objects[static_cast<size_t>(j)];
      const BBox raw = rec.apply_box(o.box);
      ObjectAnnotation kept = o;
      kept.box = clip_box(raw, out_w, out_h);
      out.objects.push_back(kept);
      rec.v1_boxes.push_back(o.box);
      rec.raw_boxes.push_back(raw);
    }
    out.transform = std::move(rec);
    return out;
  }
  throw std::runtime_error("transform_to_v2: no transform retained any object after " +
                           std::to_string(params.max_retries) + " attempts");
}

// ------------------------------------------------------------- splitting

bool DatasetSplit::contains(const std::string& id) const {
  auto in = [&](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), id) != v.end();
  };
  return in(train) || in(validation) || in(test);
}

DatasetSplit split_by_fractions(const std::vector<std::string>& ids,
                                double f_train, double f_val, double f_test) {
  if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
    throw std::invalid_argument("split_by_fractions: fractions must sum to 1");
  const int n = static_cast<int>(ids.size());
  const double quotas[3] = {f_train * n, f_val * n, f_test * n};
  int counts[3];
  double rema[3];
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    counts[i] = static_cast<int>(std::floor(quotas[i]));
    rema[i] = quotas[i] - counts[i];
    assigned += counts[i];
  }
  // hand out the leftovers by largest remainder, ties to the earlier split
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rema[i] > rema[best] + 1e-12) best = i;
    counts[best]++;
    rema[best] = -1;
    assigned++;
  }
  DatasetSplit split;
  int k = 0;
  for (int i = 0; i < counts[0]; ++i) split.train.push_back(ids[static_cast<size_t>(k++)]);
  for (int i = 0; i < counts[1]; ++i) split.validation.push_back(ids[static_cast<size_t>(k++)]);
  for (int i = 0; i < counts[2]; ++i) split.test.push_back(ids[static_cast<size_t>(k++)]);
  return split;
}

// ---------------------------------------------------------- serialization

namespace {

std::string fmt4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

[[noreturn]] void parse_fail(const std::string& file, int line, const std::string& what) {
  throw std::runtime_error(file + ":" + std::to_string(line) + ": " + what);
}

void validate_pair(const AnnotatedPair& p, const std::string& where) {
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(where + ": pair " + p.pair_id + ": " + what);
  };
  if (p.objects.empty()) fail("no objects");
  const double eps = 1e-3;  // 4-decimal serialization slack
  for (size_t i = 0; i < p.objects.size(); ++i) {
    const ObjectAnnotation& o = p.objects[i];
    const std::string oi = "object " + std::to_string(i);
    if (!(o.box.w > 0) || !(o.box.h > 0)) fail(oi + ": reference box w/h <= 0");
    if (!(o.query_box.w > 0) || !(o.query_box.h > 0)) fail(oi + ": query box w/h <= 0");
    if (o.box.x0() < -eps || o.box.x1() > p.reference_image.width + eps ||
        o.box.y0() < -eps || o.box.y1() > p.reference_image.height + eps)
      fail(oi + ": reference box out of bounds");
    if (o.click.x < 0 || o.click.x >= p.query_image.width || o.click.y < 0 ||
        o.click.y >= p.query_image.height)
      fail(oi + ": click outside query image");
    if (o.click.x <= o.query_box.x0() || o.click.x >= o.query_box.x1() ||
        o.click.y <= o.query_box.y0() || o.click.y >= o.query_box.y1())
      fail(oi + ": click not strictly inside its query box");
  }
}

}  // namespace

DatasetManifest write_dataset(const std::vector<AnnotatedPair>& pairs,
                              const DatasetSplit& split, const std::string& root) {
  if (pairs.empty()) throw std::invalid_argument("write_dataset: empty pair list");
  std::set<std::string> pair_ids;
  for (const auto& p : pairs)
    if (!pair_ids.insert(p.pair_id).second)
      throw std::invalid_argument("write_dataset: duplicate pair_id " + p.pair_id);
  if (split.total() != pairs.size())
    throw std::invalid_argument("write_dataset: split does not cover the pair list");
  for (const auto& id : pair_ids)
    if (!split.contains(id))
      throw std::invalid_argument("write_dataset: pair " + id + " missing from split");

  fs::create_directories(fs::path(root) / "images");
  fs::create_directories(fs::path(root) / "annotations");

  for (const AnnotatedPair& p : pairs) {
    validate_pair(p, "write_dataset");
    const std::string qrel = "images/" + p.pair_id + "_query.png";
    const std::string rrel = "images/" + p.pair_id + "_reference.png";
    write_png((fs::path(root) / qrel).string(), p.query_image);
    write_png((fs::path(root) / rrel).string(), p.reference_image);

    std::ofstream f(fs::path(root) / "annotations" / (p.pair_id + ".txt"));
    if (!f) throw std::runtime_error("write_dataset: cannot write annotation for " + p.pair_id);
    f << "pair_id " << p.pair_id << "\n";
    f << "query " << qrel << " " << p.query_image.width << " " << p.query_image.height << "\n";
    f << "reference " << rrel << " " << p.reference_image.width << " "
      << p.reference_image.height << "\n";
    f << "alignment " << (p.alignment == Alignment::V1 ? "V1" : "V2") << "\n";
    for (size_t i = 0; i < p.objects.size(); ++i) {
      const ObjectAnnotation& o = p.objects[i];
      f << "obj " << i << " click " << fmt4(o.click.x) << " " << fmt4(o.click.y) << " box "
        << fmt4(o.box.cx) << " " << fmt4(o.box.cy) << " " << fmt4(o.box.w) << " "
        << fmt4(o.box.h) << "\n";
    }
    for (size_t i = 0; i < p.objects.size(); ++i) {
      const BBox& q = p.objects[i].query_box;
      f << "qbox " << i << " " << fmt4(q.cx) << " " << fmt4(q.cy) << " " << fmt4(q.w) << " "
        << fmt4(q.h) << "\n";
      f << "tag " << i << " " << p.objects[i].tag << "\n";
    }
    if (p.transform) {
      const TransformRecord& t = *p.transform;
      f << "transform " << std::setprecision(17) << t.ax << " " << t.bx << " " << t.ay << " "
        << t.by << " " << (t.flipped ? 1 : 0) << "\n";
      for (size_t i = 0; i < t.v1_boxes.size(); ++i) {
        const BBox& b = t.v1_boxes[i];
        f << "v1box " << i << " " << fmt4(b.cx) << " " << fmt4(b.cy) << " " << fmt4(b.w) << " "
          << fmt4(b.h) << "\n";
      }
      for (size_t i = 0; i < t.raw_boxes.size(); ++i) {
        const BBox& b = t.raw_boxes[i];
        f << "rawbox " << i << " " << fmt4(b.cx) << " " << fmt4(b.cy) << " " << fmt4(b.w) << " "
          << fmt4(b.h) << "\n";
      }
      for (const auto& d : t.dropped)
        f << "dropped " << d.v1_index << " " << fmt4(d.cx) << " " << fmt4(d.cy) << "\n";
    }
  }

  std::ofstream mf(fs::path(root) / "manifest.txt");
  if (!mf) throw std::runtime_error("write_dataset: cannot write manifest");
  mf << "mogeo-dataset-v1\n";
  for (const auto& id : split.train) mf << "train " << id << "\n";
  for (const auto& id : split.validation) mf << "validation " << id << "\n";
  for (const auto& id : split.test) mf << "test " << id << "\n";

  return {static_cast<int>(split.train.size()), static_cast<int>(split.validation.size()),
          static_cast<int>(split.test.size())};
}

namespace {

AnnotatedPair read_annotation(const std::string& root, const std::string& rel) {
  const std::string path = (fs::path(root) / rel).string();
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_dataset: missing annotation file " + path);

  AnnotatedPair p;
  std::map<int, ObjectAnnotation> objs;
  std::map<int, BBox> v1_boxes, raw_boxes;
  bool have_transform = false;
  TransformRecord rec;

  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string key;
    is >> key;
    auto need = [&](bool ok) {
      if (!ok || is.fail()) parse_fail(rel, lineno, "malformed record '" + line + "'");
    };
    if (key == "pair_id") {
      is >> p.pair_id;
      need(!p.pair_id.empty());
    } else if (key == "query" || key == "reference") {
      std::string img_rel;
      int w = 0, h = 0;
      is >> img_rel >> w >> h;
      need(!img_rel.empty() && w > 0 && h > 0);
      Image img = read_png((fs::path(root) / img_rel).string());
      if (img.width != w || img.height != h)
        parse_fail(rel, lineno, "image dimensions disagree with " + img_rel);
      if (key == "query")
        p.query_image = std::move(img);
      else
        p.reference_image = std::move(img);
    } else if (key == "alignment") {
      std::string a;
      is >> a;
      need(a == "V1" || a == "V2");
      p.alignment = a == "V1" ? Alignment::V1 : Alignment::V2;
    } else if (key == "obj") {
      int idx = -1;
      std::string kw1, kw2;
      ObjectAnnotation o;
      is >> idx >> kw1 >> o.click.x >> o.click.y >> kw2 >> o.box.cx >> o.box.cy >> o.box.w >>
          o.box.h;
      need(idx >= 0 && kw1 == "click" && kw2 == "box");
      objs[idx].click = o.click;
      objs[idx].box = o.box;
    } else if (key == "qbox") {
      int idx = -1;
      BBox b;
      is >> idx >> b.cx >> b.cy >> b.w >> b.h;
      need(idx >= 0);
      objs[idx].query_box = b;
    } else if (key == "tag") {
      int idx = -1, tag = 0;
      is >> idx >> tag;
      need(idx >= 0);
      objs[idx].tag = tag;
    } else if (key == "transform") {
      int flip = 0;
      is >> rec.ax >> rec.bx >> rec.ay >> rec.by >> flip;
      need(flip == 0 || flip == 1);
      rec.flipped = flip == 1;
      have_transform = true;
    } else if (key == "v1box" || key == "rawbox") {
      int idx = -1;
      BBox b;
      is >> idx >> b.cx >> b.cy >> b.w >> b.h;
      need(idx >= 0);
      (key == "v1box" ? v1_boxes : raw_boxes)[idx] = b;
    } else if (key == "dropped") {
      TransformRecord::DroppedObject d;
      is >> d.v1_index >> d.cx >> d.cy;
      need(d.v1_index >= 0);
      rec.dropped.push_back(d);
    } else {
      parse_fail(rel, lineno, "unknown record '" + key + "'");
    }
  }
  if (p.pair_id.empty()) parse_fail(rel, lineno, "missing pair_id record");

  for (auto& [idx, o] : objs) {
    if (idx != static_cast<int>(p.objects.size()))
      parse_fail(rel, lineno, "non-contiguous object indices");
    p.objects.push_back(o);
  }
  if (have_transform) {
    for (auto& [idx, b] : v1_boxes) rec.v1_boxes.push_back(b);
    for (auto& [idx, b] : raw_boxes) rec.raw_boxes.push_back(b);
    p.transform = rec;
  }
  validate_pair(p, rel);
  return p;
}

}  // namespace

std::pair<std::vector<AnnotatedPair>, DatasetSplit> read_dataset(const std::string& root) {
  const std::string mpath = (fs::path(root) / "manifest.txt").string();
  std::ifstream mf(mpath);
  if (!mf) throw std::runtime_error("read_dataset: missing manifest " + mpath);
  std::string header;
  std::getline(mf, header);
  if (header != "mogeo-dataset-v1")
    throw std::runtime_error("read_dataset: unrecognized manifest header '" + header + "'");

  DatasetSplit split;
  std::vector<std::string> order;
  std::string line;
  int lineno = 1;
  while (std::getline(mf, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string which, id;
    is >> which >> id;
    if (is.fail() || id.empty()) parse_fail("manifest.txt", lineno, "malformed split record");
    if (which == "train")
      split.train.push_back(id);
    else if (which == "validation")
      split.validation.push_back(id);
    else if (which == "test")
      split.test.push_back(id);
    else
      parse_fail("manifest.txt", lineno, "unknown split '" + which + "'");
    order.push_back(id);
  }

  std::set<std::string> seen;
  for (const auto& id : order)
    if (!seen.insert(id).second)
      throw std::runtime_error("read_dataset: pair " + id + " listed in multiple splits");

  std::vector<AnnotatedPair> pairs;
  pairs.reserve(order.size());
  for (const auto& id : order)
    pairs.push_back(read_annotation(root, "annotations/" + id + ".txt"));
  return {std::move(pairs), std::move(split)};
}

// ------------------------------------------------------------ statistics

SizeHistogram size_distribution(const std::vector<AnnotatedPair>& pairs, Side side,
                                std::vector<double> edges) {
  std::vector<double> areas;
  for (const AnnotatedPair& p : pairs)
    for (const ObjectAnnotation& o : p.objects)
      areas.push_back(side == Side::query ? o.query_box.area() : o.box.area());
  if (areas.empty()) throw std::invalid_argument("size_distribution: no objects");

  SizeHistogram h;
  h.total = static_cast<int>(areas.size());
  double sum = 0;
  for (double a : areas) sum += a;
  h.mean = sum / h.total;
  std::vector<double> sorted = areas;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  h.median = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2;

  if (edges.empty()) {
    const double lo = sorted.front(), hi = sorted.back();
    const double span = hi > lo ? hi - lo : 1.0;
    for (int i = 0; i <= 10; ++i) edges.push_back(lo + span * i / 10.0);
  }
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
    throw std::invalid_argument("size_distribution: bad bin edges");
  h.edges = edges;
  h.counts.assign(edges.size() - 1, 0);
  for (double a : areas) {
    if (a < edges.front() || a > edges.back()) continue;
    size_t bin = static_cast<size_t>(
                     std::upper_bound(edges.begin(), edges.end(), a) - edges.begin()) -
                 1;
    if (bin >= h.counts.size()) bin = h.counts.size() - 1;  // right-closed last bin
    h.counts[bin]++;
  }
  return h;
}

}  // namespace mogeo
