// Command-line front end: dataset generation, training, evaluation,
// ablation sweeps, visualization and timing.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "mogeo/dataset.hpp"
#include "mogeo/kernels.hpp"
#include "mogeo/runner.hpp"
#include "mogeo/trainer.hpp"

namespace fs = std::filesystem;
using namespace mogeo;

namespace {

struct GenerateArgs {
  uint64_t seed = 1;
  int pairs = 64;
  int objects_min = 2, objects_max = 4;
  bool v2 = false;
  std::string out;
  int query_size = 64, reference_size = 128;
  double noise = 0.06;
  double obj_min = 14, obj_max = 34;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.objects_min < 1 || a.objects_max < a.objects_min)
    throw CLI::ValidationError("--objects-min/--objects-max out of order");
  SceneConfig scene;
  scene.query_w = scene.query_h = a.query_size;
  scene.ref_w = scene.ref_h = a.reference_size;
  scene.noise = a.noise;
  scene.obj_min = a.obj_min;
  scene.obj_max = a.obj_max;
  TransformConfig tc;

  Rng master(a.seed);
  Rng count_rng = master.fork(101);
  Rng v2_rng = master.fork(202);

  std::vector<AnnotatedPair> out_pairs;
  std::vector<std::string> ids;
  for (int i = 0; i < a.pairs; ++i) {
    const int m = static_cast<int>(count_rng.uniform_int(a.objects_min, a.objects_max));
    const uint64_t pair_seed = master.fork(1000 + static_cast<uint64_t>(i)).next_u64();
    AnnotatedPair p = generate_pair(pair_seed, m, scene);
    std::ostringstream id;
    id << "pair_" << std::setw(4) << std::setfill('0') << i;
    p.pair_id = id.str();
    if (a.v2) p = transform_to_v2(p, v2_rng, tc);
    ids.push_back(p.pair_id);
    out_pairs.push_back(std::move(p));
  }

  // split proportions follow the benchmark's published partitioning
  DatasetSplit split = split_by_fractions(ids, 0.656, 0.164, 0.180);
  const DatasetManifest m = write_dataset(out_pairs, split, a.out);
  std::cout << "wrote " << a.out << ": train " << m.n_train << " validation "
            << m.n_validation << " test " << m.n_test << " ("
            << (a.v2 ? "V2" : "V1") << ")\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& out) {
  const TrainConfig cfg = TrainConfig::from_file(config_path);
  const TrainResult r = train(cfg, data, out);
  std::cout << "trained " << r.per_step.size() << " steps, anchor (" << r.anchor_w << ", "
            << r.anchor_h << ")\n";
  if (!r.per_step.empty()) {
    const LossBreakdown& last = r.per_step.back();
    std::cout << "final loss " << last.total << " (cn " << last.l_cn << " reg " << last.l_reg
              << " s " << last.l_s << ")\n";
  }
  std::cout << "checkpoint " << r.checkpoint_path << "\n";
  return 0;
}

std::vector<std::string> split_ids(const DatasetSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "validation") return split.validation;
  if (name == "test") return split.test;
  throw CLI::ValidationError("--split must be train|validation|test");
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& split_name,
             const std::string& out) {
  LoadedCheckpoint lc = load_checkpoint(ckpt);
  auto [pairs, split] = read_dataset(data);
  const EvalRunResult r = run_evaluation(*lc.model, pairs, split_ids(split, split_name), out);
  std::cout << r.report.summary_line() << "\n";
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "accI(literal-formula variant) @0.25 " << r.accI_literal_025 << " @0.5 "
            << r.accI_literal_05 << "\n";
  std::cout << "random-cell baseline @0.25 " << r.random_baseline_025 << " @0.5 "
            << r.random_baseline_05 << "\n";
  std::cout << "report " << r.report_path << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data,
               const std::string& out) {
  const TrainConfig base = TrainConfig::from_file(config_path);
  struct Row {
    const char* name;
    bool mope, cvmf, ls;
  };
  const Row rows[4] = {{"full", true, true, true},
                       {"wo_ls", true, true, false},
                       {"wo_cvmf", true, false, true},
                       {"wo_mope", false, true, true}};
  std::cout << std::left << std::setw(10) << "variant" << std::right << std::setw(10)
            << "acc@0.25" << std::setw(10) << "acc@0.5" << std::setw(11) << "accI@0.25"
            << std::setw(10) << "accI@0.5" << "\n";
  for (const Row& row : rows) {
    TrainConfig cfg = base;
    cfg.use_mope = row.mope;
    cfg.use_cvmf_concat = row.cvmf;
    cfg.use_similarity_loss = row.ls;
    const std::string dir = (fs::path(out) / row.name).string();
    const TrainResult tr = train(cfg, data, dir);
    LoadedCheckpoint lc = load_checkpoint(tr.checkpoint_path);
    auto [pairs, split] = read_dataset(data);
    const EvalRunResult r = run_evaluation(*lc.model, pairs, split.test, dir);
    std::cout << std::left << std::setw(10) << row.name << std::right << std::fixed
              << std::setprecision(4) << std::setw(10) << r.report.acc_025 << std::setw(10)
              << r.report.acc_05 << std::setw(11) << r.report.accI_025 << std::setw(10)
              << r.report.accI_05 << "\n";
  }
  return 0;
}

int cmd_visualize(const std::string& ckpt, const std::string& data, const std::string& pair_id,
                  const std::string& out) {
  LoadedCheckpoint lc = load_checkpoint(ckpt);
  auto [pairs, split] = read_dataset(data);
  for (const AnnotatedPair& p : pairs)
    if (p.pair_id == pair_id) {
      for (const std::string& f : visualize_pair(*lc.model, p, out))
        std::cout << f << "\n";
      return 0;
    }
  throw std::runtime_error("visualize: unknown pair_id " + pair_id);
}

int cmd_timing(const std::string& ckpt, const std::string& data, const std::string& split_name) {
  LoadedCheckpoint lc = load_checkpoint(ckpt);
  auto [pairs, split] = read_dataset(data);
  std::vector<AnnotatedPair> selected;
  for (const std::string& id : split_ids(split, split_name))
    for (const AnnotatedPair& p : pairs)
      if (p.pair_id == id) selected.push_back(p);
  const TimingReport rep = timing_report(*lc.model, selected);
  std::cout << rep.to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-view multi-object geo-localization sandbox"};
  app.require_subcommand(1);

  bool no_parallel = false;
  app.add_flag("--no-parallel", no_parallel, "disable the OpenMP kernels");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "synthesize a dataset");
  g->add_option("--seed", gen.seed);
  g->add_option("--pairs", gen.pairs);
  g->add_option("--objects-min", gen.objects_min);
  g->add_option("--objects-max", gen.objects_max);
  g->add_flag("--v2", gen.v2, "apply the crop/flip/scale transform");
  g->add_option("--out", gen.out)->required();
  g->add_option("--query-size", gen.query_size);
  g->add_option("--reference-size", gen.reference_size);
  g->add_option("--noise", gen.noise);
  g->add_option("--obj-min", gen.obj_min, "reference-side object extent lower bound");
  g->add_option("--obj-max", gen.obj_max, "reference-side object extent upper bound");

  std::string config_path, data, out, ckpt, split_name = "test", pair_id;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--config", config_path)->required();
  t->add_option("--data", data)->required();
  t->add_option("--out", out)->required();

  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--ckpt", ckpt)->required();
  e->add_option("--data", data)->required();
  e->add_option("--split", split_name);
  e->add_option("--out", out);

  auto* a = app.add_subcommand("ablate", "train and evaluate the four ablation rows");
  a->add_option("--config", config_path)->required();
  a->add_option("--data", data)->required();
  a->add_option("--out", out)->required();

  auto* v = app.add_subcommand("visualize", "export overlay and heatmaps for one pair");
  v->add_option("--ckpt", ckpt)->required();
  v->add_option("--data", data)->required();
  v->add_option("--pair", pair_id)->required();
  v->add_option("--out", out);

  auto* tm = app.add_subcommand("timing", "parameter count and inference timing");
  tm->add_option("--ckpt", ckpt)->required();
  tm->add_option("--data", data)->required();
  tm->add_option("--split", split_name);

  CLI11_PARSE(app, argc, argv);
  kernels::set_parallel(!no_parallel);

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(config_path, data, out);
    if (e->parsed()) return cmd_eval(ckpt, data, split_name, out.empty() ? "eval_out" : out);
    if (a->parsed()) return cmd_ablate(config_path, data, out);
    if (v->parsed())
      return cmd_visualize(ckpt, data, pair_id, out.empty() ? "visualize_out" : out);
    if (tm->parsed()) return cmd_timing(ckpt, data, split_name);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
