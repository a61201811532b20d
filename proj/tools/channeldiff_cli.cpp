#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "channeldiff/experiment.hpp"

using namespace channeldiff;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::optional<unsigned long long> seed;
  int threads = 1;
  std::string config;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_pred_csv(const std::vector<std::vector<double>>& preds,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "sample,t,rsrp_dbm\n";
  char buf[64];
  for (size_t i = 0; i < preds.size(); ++i)
    for (size_t t = 0; t < preds[i].size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.17g", preds[i][t]);
      out << i << "," << t << "," << buf << "\n";
    }
}

std::vector<std::vector<double>> load_pred_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> out;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": need 3 columns");
    try {
      size_t s = std::stoul(line.substr(0, c1));
      double v = std::stod(line.substr(c2 + 1));
      if (s >= out.size()) out.resize(s + 1);
      out[s].push_back(v);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

neural::DenoiserConfig model_config_from_json(const json& j) {
  neural::DenoiserConfig c;
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.blocks = j.value("blocks", c.blocks);
  c.condition_channels = j.value("condition_channels", c.condition_channels);
  c.pe_dim = j.value("pe_dim", c.pe_dim);
  if (j.contains("mfen")) {
    const json& m = j["mfen"];
    c.mfen.cnn_hidden = m.value("cnn_hidden", c.mfen.cnn_hidden);
    c.mfen.cnn_layers = m.value("cnn_layers", c.mfen.cnn_layers);
    c.mfen.kernel = m.value("kernel", c.mfen.kernel);
    c.mfen.attn_dim = m.value("attn_dim", c.mfen.attn_dim);
    c.mfen.attn_heads = m.value("attn_heads", c.mfen.attn_heads);
    c.mfen.out_dim = m.value("out_dim", c.mfen.out_dim);
  }
  return c;
}

int cmd_polygonize(const std::string& alt, const std::string& bhgt,
                   const std::string& out, int max_edges, double quantum) {
  auto map = mapio::load_scene(alt, bhgt);
  auto scene = geometry::polygonize(map, max_edges, quantum);
  geometry::write_scene(scene, out);
  std::cout << "buildings: " << scene.buildings.size()
            << " dropped_regions: " << scene.dropped_regions << "\n";
  return 0;
}

int cmd_features(const GlobalOpts& g, const std::string& alt, const std::string& bhgt,
                 const std::string& traj_path, const std::string& bs_path,
                 const std::string& scene_path, const std::string& out,
                 dataset::FeatureParams fp) {
  if (!g.config.empty()) {
    fp.prop = propagation::load_prop_config(g.config);
    json j = json::parse(read_file(g.config));
    fp.occl.L_shadow = j.value("L_shadow_m", fp.occl.L_shadow);
    fp.occl.B_max = j.value("B_max_dB", fp.occl.B_max);
    fp.occl.K_dB = j.value("K_dB", fp.occl.K_dB);
  }
  auto map = mapio::load_scene(alt, bhgt);
  auto traj = mapio::load_trajectory(traj_path, map);
  auto bs = mapio::load_bs_record(bs_path);
  geometry::PolygonScene scene;
  if (!scene_path.empty())
    scene = geometry::load_scene_file(scene_path);
  else
    scene = geometry::polygonize(map, 6, 1.0);
  auto s = dataset::compute_features(map, scene, bs, traj, fp);
  dataset::write_sample(s, out);
  std::cout << "wrote " << out << " (T=" << s.T << ", S=" << s.S << ")\n";
  return 0;
}

int cmd_synth(const GlobalOpts& g, const std::string& config, const std::string& out) {
  dataset::DatasetConfig cfg;
  if (!config.empty()) cfg = dataset::parse_dataset_config(read_file(config));
  if (g.seed) cfg.seed = *g.seed;
  auto ds = dataset::generate_dataset(cfg);
  dataset::write_dataset(ds, out);
  std::cout << "wrote " << ds.samples.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& stage_name,
              const std::string& data_dir, const std::string& config,
              const std::string& ckpt, const std::string& teacher_ckpt) {
  json j = json::object();
  if (!config.empty()) j = json::parse(read_file(config));

  train::Stage stage =
      stage_name == "student" ? train::Stage::Student : train::Stage::Teacher;
  train::TrainConfig tc;
  tc.stage = stage;
  tc.epochs = j.value("epochs", stage == train::Stage::Teacher ? 50 : 320);
  tc.batch_size = j.value("batch_size", tc.batch_size);
  tc.lr = j.value("lr", tc.lr);
  tc.patience = j.value("patience", tc.patience);
  tc.val_fraction = j.value("val_fraction", tc.val_fraction);
  tc.K = j.value("K", tc.K);
  tc.beta_start = j.value("beta_start", tc.beta_start);
  tc.beta_end = j.value("beta_end", tc.beta_end);
  if (j.value("noise_coeff_mode", "linear") == "standard")
    tc.mode = diffusion::NoiseCoeffMode::STANDARD;
  if (g.seed) tc.seed = *g.seed;

  auto ds = dataset::load_dataset(data_dir);

  auto mc = model_config_from_json(j.value("model", json::object()));
  if (stage == train::Stage::Student) {
    mc.with_ere = true;
    mc.with_eof = true;
    mc.with_eme = ds.cfg.feat.with_micromaps && ds.samples.front().S > 0;
  }
  auto model = neural::ChannelModel::build(mc, tc.seed);
  if (!teacher_ckpt.empty()) {
    auto teacher = neural::load_checkpoint(teacher_ckpt);
    size_t n = neural::copy_matching_params(teacher, model);
    std::cout << "initialized " << n << " tensors from " << teacher_ckpt << "\n";
  }

  auto res = train::train_stage(model, ds, tc);
  neural::save_checkpoint(model, ckpt);
  res.trace.write_csv(ckpt + "_trace.csv");
  std::cout << "epochs: " << res.epochs_run << " best_val: " << res.best_val
            << " (epoch " << res.best_epoch << ")\n";
  return 0;
}

int cmd_predict(const GlobalOpts& g, const std::string& ckpt,
                const std::string& features_dir, const std::string& out, int K,
                double beta_start, double beta_end, const std::string& mode) {
  auto model = neural::load_checkpoint(ckpt);
  auto ds = dataset::load_dataset(features_dir);
  auto sched = diffusion::make_schedule(
      K, beta_start, beta_end,
      mode == "standard" ? diffusion::NoiseCoeffMode::STANDARD
                         : diffusion::NoiseCoeffMode::LINEAR);
  std::vector<size_t> idx(ds.samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto preds = train::predict(model, ds, idx, sched, g.seed.value_or(0));
  write_pred_csv(preds, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path,
             const std::string& out) {
  auto preds = load_pred_csv(pred_path);
  auto truth = load_pred_csv(truth_path);
  if (preds.size() != truth.size())
    throw ValidationError("eval: sample counts differ");
  std::vector<double> y, yhat, errs;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != truth[i].size())
      throw ValidationError("eval: lengths differ at sample " + std::to_string(i));
    for (size_t t = 0; t < preds[i].size(); ++t) {
      y.push_back(truth[i][t]);
      yhat.push_back(preds[i][t]);
      errs.push_back(std::abs(truth[i][t] - preds[i][t]));
    }
  }
  metrics::MetricReport r;
  r.jsd = metrics::jsd(y, yhat);
  r.nrmse = metrics::nrmse(y, yhat);
  r.mae = metrics::mae(y, yhat);
  r.n_samples = preds.size();
  r.cdf_9p5_fraction = metrics::cdf_report(errs).fraction_below_threshold;
  std::cout << "jsd: " << r.jsd << "\nnrmse: " << r.nrmse << "\nmae: " << r.mae
            << "\ncdf_9p5_fraction: " << r.cdf_9p5_fraction << "\n";
  if (!out.empty()) {
    json rep = {{"format", "report_v1"},
                {"jsd", r.jsd},
                {"nrmse", r.nrmse},
                {"mae", r.mae},
                {"n_samples", r.n_samples},
                {"cdf_9p5_fraction", r.cdf_9p5_fraction}};
    std::ofstream f(out);
    if (!f) throw Error("cannot open for writing: " + out);
    f << rep.dump(2) << "\n";
  }
  return 0;
}

int cmd_experiment(const GlobalOpts& g, const std::string& config,
                   const std::string& out_dir, bool no_teacher) {
  experiment::ExperimentConfig cfg;
  if (!config.empty()) cfg = experiment::load_experiment_config(config);
  if (g.seed) cfg.seed = *g.seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (no_teacher) cfg.no_teacher = true;
  auto res = experiment::run_experiment(cfg);
  std::cout << "report: " << res.report_path << "\n";
  for (const auto& r : res.ranking)
    std::cout << r.name << ": jsd " << r.jsd << " nrmse " << r.nrmse << " mae "
              << r.mae << " r_avg " << r.r_avg << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale radio channel feature extraction and diffusion model"};
  app.require_subcommand(1);

  GlobalOpts g;
  unsigned long long seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "root random seed");
  app.add_option("--threads", g.threads, "worker threads (computation is single-threaded; accepted for interface stability)");
  app.add_option("--config", g.config, "default config file for the subcommand");

  // polygonize
  auto* poly = app.add_subcommand("polygonize", "raster buildings to polygon scene");
  std::string alt, bhgt, out = "scene.jsonl";
  int max_edges = 6;
  double quantum = 1.0;
  poly->add_option("--alt", alt, "altitude raster (.asc)")->required();
  poly->add_option("--bhgt", bhgt, "building-height raster (.asc)")->required();
  poly->add_option("-o,--out", out, "output scene (JSON lines)");
  poly->add_option("--max-edges", max_edges, "max polygon vertices");
  poly->add_option("--height-quantum", quantum, "height bucket size, meters");

  // features
  auto* feat = app.add_subcommand("features", "compute conditioning features");
  std::string f_traj, f_bs, f_scene, f_out = "features_out";
  dataset::FeatureParams fp;
  bool no_micromaps = false;
  feat->add_option("--alt", alt, "altitude raster")->required();
  feat->add_option("--bhgt", bhgt, "building-height raster")->required();
  feat->add_option("--traj", f_traj, "trajectory CSV (t,x,y)")->required();
  feat->add_option("--bs", f_bs, "base-station JSON")->required();
  feat->add_option("--scene", f_scene, "polygon scene (else derived from rasters)");
  feat->add_option("-o,--out", f_out, "output directory");
  feat->add_option("--fov", fp.fov_l, "micro-map field of view, meters");
  feat->add_option("--n-ref", fp.N_ref, "max reflections per path");
  feat->add_option("--n-nlos", fp.N_NLOS, "NLOS rows in the embedding");
  feat->add_flag("--no-micromaps", no_micromaps, "skip micro-map crops");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string s_out = "dataset";
  synth->add_option("-o,--out", s_out, "output directory");

  // train
  auto* tr = app.add_subcommand("train", "train the teacher or student stage");
  std::string stage = "teacher", data_dir, ckpt = "model.ckpt", teacher_ckpt;
  tr->add_option("--stage", stage, "teacher|student")
      ->check(CLI::IsMember({"teacher", "student"}));
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--ckpt", ckpt, "output checkpoint");
  tr->add_option("--teacher-ckpt", teacher_ckpt, "teacher init (student only)");

  // predict
  auto* pr = app.add_subcommand("predict", "sample RSRP sequences");
  std::string p_ckpt, p_feat, p_out = "pred.csv", p_mode = "linear";
  int p_K = 400;
  double p_bs = 1e-4, p_be = 0.02;
  pr->add_option("--ckpt", p_ckpt, "model checkpoint")->required();
  pr->add_option("--features", p_feat, "features/dataset directory")->required();
  pr->add_option("-o,--out", p_out, "output CSV");
  pr->add_option("--steps", p_K, "diffusion steps");
  pr->add_option("--beta-start", p_bs, "schedule start");
  pr->add_option("--beta-end", p_be, "schedule end");
  pr->add_option("--noise-coeff-mode", p_mode, "linear|standard")
      ->check(CLI::IsMember({"linear", "standard"}));

  // eval
  auto* ev = app.add_subcommand("eval", "metrics between prediction CSVs");
  std::string e_pred, e_truth, e_out;
  ev->add_option("--pred", e_pred, "prediction CSV (sample,t,rsrp_dbm)")->required();
  ev->add_option("--truth", e_truth, "ground-truth CSV, same layout")->required();
  ev->add_option("-o,--out", e_out, "optional JSON report");

  // experiment
  auto* ex = app.add_subcommand("experiment", "full pipeline run");
  std::string x_out;
  bool x_no_teacher = false;
  ex->add_option("-o,--out", x_out, "output directory override");
  ex->add_flag("--no-teacher", x_no_teacher,
               "add a from-scratch student for paired comparison");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) g.seed = seed_val;
  fp.with_micromaps = !no_micromaps;

  try {
    if (poly->parsed()) return cmd_polygonize(alt, bhgt, out, max_edges, quantum);
    if (feat->parsed())
      return cmd_features(g, alt, bhgt, f_traj, f_bs, f_scene, f_out, fp);
    if (synth->parsed()) return cmd_synth(g, g.config, s_out);
    if (tr->parsed())
      return cmd_train(g, stage, data_dir, g.config, ckpt, teacher_ckpt);
    if (pr->parsed())
      return cmd_predict(g, p_ckpt, p_feat, p_out, p_K, p_bs, p_be, p_mode);
    if (ev->parsed()) return cmd_eval(e_pred, e_truth, e_out);
    if (ex->parsed()) return cmd_experiment(g, g.config, x_out, x_no_teacher);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
