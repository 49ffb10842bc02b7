#include "mogeo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace mogeo {

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("config: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (!anchor_auto && (!(anchor_w > 0) || !(anchor_h > 0)))
    throw std::invalid_argument("config: explicit anchor must be positive");
  encoder_config().validate();
}

EncoderConfig TrainConfig::encoder_config() const {
  EncoderConfig e;
  e.stride = stride;
  e.query_stage_channels = query_stage_channels;
  e.reference_stage_channels = reference_stage_channels;
  e.query_channels = query_channels;
  e.embed_dim = embed_dim;
  return e;
}

ModelConfig TrainConfig::model_config(double aw, double ah) const {
  ModelConfig m;
  m.encoder = encoder_config();
  m.head_hidden = head_hidden;
  m.use_mope = use_mope;
  m.use_cvmf_concat = use_cvmf_concat;
  m.anchor_w = aw;
  m.anchor_h = ah;
  return m;
}

ObjectiveConfig TrainConfig::objective_config() const {
  ObjectiveConfig o;
  o.use_similarity = use_similarity_loss;
  o.negatives = similarity_negatives;
  o.w_cn = loss_weight_cn;
  o.w_reg = loss_weight_reg;
  o.w_s = loss_weight_s;
  return o;
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.query_stage_channels = {8, 16, 24, 32};
  c.reference_stage_channels = {8, 16, 24, 32};
  c.query_channels = 32;
  c.embed_dim = 48;
  c.head_hidden = 24;
  return c;
}

namespace {
std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += " ";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> parse_ints(const std::string& s, const std::string& key) {
  std::istringstream is(s);
  std::vector<int> out;
  int v;
  while (is >> v) out.push_back(v);
  if (out.empty()) throw std::invalid_argument("config: empty int list for " + key);
  return out;
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + s + "' for " + key);
}
}  // namespace

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "learning_rate = " << learning_rate << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "epochs = " << epochs << "\n";
  os << "seed = " << seed << "\n";
  os << "use_mope = " << (use_mope ? "true" : "false") << "\n";
  os << "use_cvmf_concat = " << (use_cvmf_concat ? "true" : "false") << "\n";
  os << "use_similarity_loss = " << (use_similarity_loss ? "true" : "false") << "\n";
  os << "similarity_negatives = "
     << (similarity_negatives == NegativeMode::mean ? "mean" : "hardest") << "\n";
  os << "loss_weight_cn = " << loss_weight_cn << "\n";
  os << "loss_weight_reg = " << loss_weight_reg << "\n";
  os << "loss_weight_s = " << loss_weight_s << "\n";
  if (anchor_auto)
    os << "anchor = auto\n";
  else
    os << "anchor = " << anchor_w << " " << anchor_h << "\n";
  os << "steps_limit = " << steps_limit << "\n";
  os << "log_every = " << log_every << "\n";
  os << "stride = " << stride << "\n";
  os << "query_stage_channels = " << join_ints(query_stage_channels) << "\n";
  os << "reference_stage_channels = " << join_ints(reference_stage_channels) << "\n";
  os << "query_channels = " << query_channels << "\n";
  os << "embed_dim = " << embed_dim << "\n";
  os << "head_hidden = " << head_hidden << "\n";
  return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text, const std::string& origin) {
  TrainConfig c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    auto notspace = [](unsigned char ch) { return !std::isspace(ch); };
    line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
    line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected `key = value`");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
    val.erase(val.begin(), std::find_if(val.begin(), val.end(), notspace));

    try {
      if (key == "learning_rate") c.learning_rate = std::stod(val);
      else if (key == "batch_size") c.batch_size = std::stoi(val);
      else if (key == "epochs") c.epochs = std::stoi(val);
      else if (key == "seed") c.seed = std::stoull(val);
      else if (key == "use_mope") c.use_mope = parse_bool(val, key);
      else if (key == "use_cvmf_concat") c.use_cvmf_concat = parse_bool(val, key);
      else if (key == "use_similarity_loss") c.use_similarity_loss = parse_bool(val, key);
      else if (key == "similarity_negatives") {
        if (val == "mean") c.similarity_negatives = NegativeMode::mean;
        else if (val == "hardest") c.similarity_negatives = NegativeMode::hardest;
        else throw std::invalid_argument("config: similarity_negatives must be mean|hardest");
      } else if (key == "loss_weight_cn") c.loss_weight_cn = std::stod(val);
      else if (key == "loss_weight_reg") c.loss_weight_reg = std::stod(val);
      else if (key == "loss_weight_s") c.loss_weight_s = std::stod(val);
      else if (key == "anchor") {
        if (val == "auto") {
          c.anchor_auto = true;
        } else {
          std::istringstream av(val);
          if (!(av >> c.anchor_w >> c.anchor_h))
            throw std::invalid_argument("config: anchor must be `auto` or `<w> <h>`");
          c.anchor_auto = false;
        }
      } else if (key == "steps_limit") c.steps_limit = std::stoi(val);
      else if (key == "log_every") c.log_every = std::stoi(val);
      else if (key == "stride") c.stride = std::stoi(val);
      else if (key == "query_stage_channels") c.query_stage_channels = parse_ints(val, key);
      else if (key == "reference_stage_channels")
        c.reference_stage_channels = parse_ints(val, key);
      else if (key == "query_channels") c.query_channels = std::stoi(val);
      else if (key == "embed_dim") c.embed_dim = std::stoi(val);
      else if (key == "head_hidden") c.head_hidden = std::stoi(val);
      else
        throw std::invalid_argument("config: unknown key '" + key + "'");
    } catch (const std::exception& ex) {
      // own diagnostics pass through; stoi/stod noise gets the location
      if (std::string(ex.what()).rfind("config:", 0) == 0) throw;
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": bad value '" +
                                  val + "' for " + key);
    }
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str(), path);
}

// ------------------------------------------------------------ checkpoint

namespace {
constexpr const char* kCkptHeader = "mogeo-ckpt-v1";
}

void save_checkpoint(const std::string& path, Model& model, const TrainConfig& cfg,
                     double anchor_w, double anchor_h, int64_t step,
                     const std::string& rng_state) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f << kCkptHeader << "\n";

  const std::string cfg_text = cfg.to_text();
  f << "config " << cfg_text.size() << "\n" << cfg_text;
  f << std::setprecision(17);
  f << "anchor " << anchor_w << " " << anchor_h << "\n";
  f << "step " << step << "\n";
  f << "rng " << rng_state << "\n";

  int64_t count = 0;
  model.visit_params([&count](const std::string&, Tensor&, Tensor&) { ++count; });
  f << "params " << count << "\n";
  model.visit_params([&f](const std::string& name, Tensor& p, Tensor&) {
    f << name << " " << p.rank();
    for (int i = 0; i < p.rank(); ++i) f << " " << p.dim(i);
    f << "\n";
    f.write(reinterpret_cast<const char*>(p.data()),
            static_cast<std::streamsize>(p.size()) * 8);
    f << "\n";
  });
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string header;
  std::getline(f, header);
  if (header != kCkptHeader)
    throw std::runtime_error("load_checkpoint: " + path + ": unrecognized header '" + header +
                             "'");

  LoadedCheckpoint out;
  std::string tok;
  size_t cfg_len = 0;
  f >> tok >> cfg_len;
  if (tok != "config") throw std::runtime_error("load_checkpoint: missing config block");
  f.get();  // newline
  std::string cfg_text(cfg_len, '\0');
  f.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));
  out.config = TrainConfig::from_text(cfg_text, path + "(config)");

  f >> tok >> out.anchor_w >> out.anchor_h;
  if (tok != "anchor") throw std::runtime_error("load_checkpoint: missing anchor record");
  f >> tok >> out.step;
  if (tok != "step") throw std::runtime_error("load_checkpoint: missing step record");
  f >> tok;
  if (tok != "rng") throw std::runtime_error("load_checkpoint: missing rng record");
  std::getline(f, out.rng_state);
  if (!out.rng_state.empty() && out.rng_state.front() == ' ')
    out.rng_state.erase(out.rng_state.begin());

  int64_t count = 0;
  f >> tok >> count;
  if (tok != "params") throw std::runtime_error("load_checkpoint: missing params block");
  f.get();

  out.model = std::make_unique<Model>(out.config.model_config(out.anchor_w, out.anchor_h));

  std::map<std::string, std::vector<double>> blobs;
  std::map<std::string, std::vector<int>> shapes;
  for (int64_t i = 0; i < count; ++i) {
    std::string name;
    int rank = 0;
    f >> name >> rank;
    std::vector<int> shape(static_cast<size_t>(rank));
    int64_t sz = 1;
    for (int r = 0; r < rank; ++r) {
      f >> shape[static_cast<size_t>(r)];
      sz *= shape[static_cast<size_t>(r)];
    }
    f.get();
    std::vector<double> data(static_cast<size_t>(sz));
    f.read(reinterpret_cast<char*>(data.data()), sz * 8);
    f.get();
    if (!f) throw std::runtime_error("load_checkpoint: truncated parameter " + name);
    blobs[name] = std::move(data);
    shapes[name] = std::move(shape);
  }

  out.model->visit_params([&](const std::string& name, Tensor& p, Tensor&) {
    auto it = blobs.find(name);
    if (it == blobs.end())
      throw std::runtime_error("load_checkpoint: checkpoint/config mismatch, missing " + name);
    if (shapes[name] != p.shape())
      throw std::runtime_error("load_checkpoint: checkpoint/config mismatch, shape of " + name);
    for (int64_t i = 0; i < p.size(); ++i) p[i] = it->second[static_cast<size_t>(i)];
    blobs.erase(it);
  });
  if (!blobs.empty())
    throw std::runtime_error("load_checkpoint: checkpoint/config mismatch, extra parameter " +
                             blobs.begin()->first);
  return out;
}

// ------------------------------------------------------------------ Adam

AdamOptimizer::AdamOptimizer(Model& model, double lr) : model_(model), lr_(lr) {
  model_.visit_params([this](const std::string&, Tensor& p, Tensor&) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  });
}

void AdamOptimizer::step() {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  size_t idx = 0;
  model_.visit_params([&](const std::string&, Tensor& p, Tensor& g) {
    Tensor& m = m_[idx];
    Tensor& v = v_[idx];
    for (int64_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
    ++idx;
  });
}

// -------------------------------------------------------------- training

void mean_box_size(const std::vector<AnnotatedPair>& pairs, double* w, double* h) {
  double sw = 0, sh = 0;
  int64_t n = 0;
  for (const auto& p : pairs)
    for (const auto& o : p.objects) {
      sw += o.box.w;
      sh += o.box.h;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("mean_box_size: no objects");
  *w = sw / static_cast<double>(n);
  *h = sh / static_cast<double>(n);
}

TrainResult train(const TrainConfig& cfg, const std::string& dataset_root,
                  const std::string& out_dir) {
  cfg.validate();
  auto [pairs, split] = read_dataset(dataset_root);
  std::map<std::string, const AnnotatedPair*> by_id;
  for (const auto& p : pairs) by_id[p.pair_id] = &p;

  std::vector<const AnnotatedPair*> train_pairs;
  for (const auto& id : split.train) train_pairs.push_back(by_id.at(id));
  if (train_pairs.empty()) throw std::runtime_error("train: empty train split");

  double aw = cfg.anchor_w, ah = cfg.anchor_h;
  if (cfg.anchor_auto) {
    std::vector<AnnotatedPair> tp;
    for (const auto* p : train_pairs) tp.push_back(*p);
    mean_box_size(tp, &aw, &ah);
  }

  Model model(cfg.model_config(aw, ah));
  model.init_params(cfg.seed);
  AdamOptimizer opt(model, cfg.learning_rate);
  const ObjectiveConfig obj_cfg = cfg.objective_config();

  fs::create_directories(out_dir);
  const std::string log_path = (fs::path(out_dir) / "train_log.txt").string();
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("train: cannot open " + log_path);
  log << std::setprecision(17);  // loss lines reparse to the exact doubles

  Rng order_rng(cfg.seed);
  TrainResult result;
  result.anchor_w = aw;
  result.anchor_h = ah;
  int64_t step = 0;
  bool done = false;

  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    // Reference sizes vary across V2 pairs while the similarity loss
    // needs a common attention grid, so batches are drawn within
    // same-shape buckets. V1 datasets collapse to a single bucket.
    std::map<std::pair<int, int>, std::vector<size_t>> buckets;
    for (size_t i = 0; i < train_pairs.size(); ++i)
      buckets[{train_pairs[i]->reference_image.height,
               train_pairs[i]->reference_image.width}]
          .push_back(i);
    Rng epoch_rng = order_rng.fork(static_cast<uint64_t>(epoch) + 1);
    std::vector<size_t> order;
    std::vector<size_t> batch_starts;
    for (auto& [shape, members] : buckets) {
      epoch_rng.shuffle(members);
      for (size_t i = 0; i < members.size(); ++i) {
        if (i % cfg.batch_size == 0) batch_starts.push_back(order.size());
        order.push_back(members[i]);
      }
    }
    batch_starts.push_back(order.size());

    for (size_t bi = 0; bi + 1 < batch_starts.size() && !done; ++bi) {
      const size_t start = batch_starts[bi];
      const size_t end = batch_starts[bi + 1];

      model.zero_grads();
      std::vector<Model::PairTrace> traces(end - start);
      std::vector<Model::PairOutput> outs(end - start);
      std::vector<const GridPrediction*> preds;
      std::vector<const AttentionMap*> atts;
      std::vector<BBox> gts;
      std::vector<int> image_ids;

      for (size_t pi = start; pi < end; ++pi) {
        const AnnotatedPair& p = *train_pairs[order[pi]];
        std::vector<ClickPoint> clicks;
        for (const auto& o : p.objects) clicks.push_back(o.click);
        const size_t t = pi - start;
        outs[t] = model.forward_pair(p.query_image, p.reference_image, clicks, &traces[t]);
        for (size_t j = 0; j < p.objects.size(); ++j) {
          preds.push_back(&outs[t].preds[j]);
          atts.push_back(&outs[t].atts[j]);
          gts.push_back(p.objects[j].box);
          image_ids.push_back(static_cast<int>(t));
        }
      }

      std::vector<Tensor> draws, datts;
      for (const auto* p : preds) draws.emplace_back(p->raw.shape());
      for (const auto* a : atts) datts.emplace_back(a->values.shape());

      const LossBreakdown lb =
          total_loss(preds, gts, atts, image_ids, obj_cfg, &draws, &datts);
      if (!std::isfinite(lb.l_cn) || !std::isfinite(lb.l_reg) || !std::isfinite(lb.l_s)) {
        const char* term = !std::isfinite(lb.l_cn)   ? "l_cn"
                           : !std::isfinite(lb.l_reg) ? "l_reg"
                                                      : "l_s";
        throw std::runtime_error("train: non-finite loss term " + std::string(term) +
                                 " at step " + std::to_string(step));
      }

      size_t obj_cursor = 0;
      for (size_t t = 0; t < traces.size(); ++t) {
        const size_t m = outs[t].preds.size();
        std::vector<Tensor> pair_draws(draws.begin() + obj_cursor,
                                       draws.begin() + obj_cursor + m);
        std::vector<Tensor> pair_datts(datts.begin() + obj_cursor,
                                       datts.begin() + obj_cursor + m);
        model.backward_pair(traces[t], pair_draws, pair_datts);
        obj_cursor += m;
      }

      opt.step();
      ++step;
      result.per_step.push_back(lb);
      log << step << " " << lb.l_cn << " " << lb.l_reg << " " << lb.l_s << " " << lb.total
          << "\n";
      if (cfg.steps_limit > 0 && step >= cfg.steps_limit) done = true;
    }
  }
  log.flush();

  std::ostringstream rng_state;
  order_rng.save(rng_state);
  const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
  save_checkpoint(ckpt, model, cfg, aw, ah, step, rng_state.str());
  result.checkpoint_path = ckpt;
  result.log_path = log_path;
  return result;
}

}  // namespace mogeo
