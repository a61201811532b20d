#include "channeldiff/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace channeldiff::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

static train::TrainConfig parse_train_config(const json& j, train::Stage stage) {
  train::TrainConfig c;
  c.stage = stage;
  c.epochs = j.value("epochs", stage == train::Stage::Teacher ? 50 : 320);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.patience = j.value("patience", c.patience);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.K = j.value("K", c.K);
  c.beta_start = j.value("beta_start", c.beta_start);
  c.beta_end = j.value("beta_end", c.beta_end);
  if (j.value("noise_coeff_mode", "linear") == "standard")
    c.mode = diffusion::NoiseCoeffMode::STANDARD;
  return c;
}

static neural::DenoiserConfig parse_model_config(const json& j) {
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

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open experiment config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  ExperimentConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.n_eval = j.value("n_eval", cfg.n_eval);
  cfg.run_student = j.value("run_student", cfg.run_student);
  cfg.no_teacher = j.value("no_teacher", cfg.no_teacher);
  cfg.write_features = j.value("write_features", cfg.write_features);
  if (j.contains("data"))
    cfg.data = dataset::parse_dataset_config(j["data"].dump());
  if (j.contains("model")) cfg.model = parse_model_config(j["model"]);
  cfg.teacher = parse_train_config(j.value("teacher", json::object()),
                                   train::Stage::Teacher);
  cfg.student = parse_train_config(j.value("student", json::object()),
                                   train::Stage::Student);
  return cfg;
}

static metrics::MetricReport evaluate(const std::vector<std::vector<double>>& targets,
                                      const std::vector<std::vector<double>>& preds) {
  std::vector<double> y, yhat, errs;
  for (size_t i = 0; i < targets.size(); ++i)
    for (size_t t = 0; t < targets[i].size(); ++t) {
      y.push_back(targets[i][t]);
      yhat.push_back(preds[i][t]);
      errs.push_back(std::abs(targets[i][t] - preds[i][t]));
    }
  metrics::MetricReport r;
  r.jsd = metrics::jsd(y, yhat);
  r.nrmse = metrics::nrmse(y, yhat);
  r.mae = metrics::mae(y, yhat);
  r.n_samples = targets.size();
  r.cdf_9p5_fraction = metrics::cdf_report(errs).fraction_below_threshold;
  return r;
}

static void write_predictions(const std::vector<std::vector<double>>& preds,
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

static json report_json(const metrics::MetricReport& r) {
  return {{"jsd", r.jsd},
          {"nrmse", r.nrmse},
          {"mae", r.mae},
          {"n_samples", r.n_samples},
          {"cdf_9p5_fraction", r.cdf_9p5_fraction}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  auto stage_seed = [&](int counter) { return cfg.seed * 1000 + counter; };
  auto fail = [](const std::string& stage, const std::exception& e) -> Error {
    return Error("experiment stage '" + stage + "' failed: " + e.what());
  };

  fs::create_directories(cfg.out_dir);
  fs::create_directories(cfg.out_dir + "/checkpoints");
  fs::create_directories(cfg.out_dir + "/predictions");

  // --- data ---
  dataset::Dataset pool;
  std::vector<size_t> train_idx, eval_idx;
  try {
    auto data_cfg = cfg.data;
    data_cfg.seed = stage_seed(0);
    data_cfg.n_samples = cfg.data.n_samples + cfg.n_eval;
    pool = dataset::generate_dataset(data_cfg);
    for (size_t i = 0; i < pool.samples.size(); ++i)
      (i < static_cast<size_t>(cfg.data.n_samples) ? train_idx : eval_idx)
          .push_back(i);
    if (cfg.write_features) dataset::write_dataset(pool, cfg.out_dir + "/features");
  } catch (const std::exception& e) {
    throw fail("data", e);
  }

  dataset::Dataset train_ds;
  train_ds.cfg = pool.cfg;
  for (size_t i : train_idx) train_ds.samples.push_back(pool.samples[i]);

  std::vector<std::vector<double>> eval_targets, eval_physics;
  for (size_t i : eval_idx) {
    eval_targets.push_back(pool.samples[i].target);
    eval_physics.push_back(pool.samples[i].rsrp_calc);
  }

  ExperimentResult res;
  res.physics = evaluate(eval_targets, eval_physics);

  auto sched = diffusion::make_schedule(cfg.teacher.K, cfg.teacher.beta_start,
                                        cfg.teacher.beta_end, cfg.teacher.mode);

  // --- teacher ---
  neural::ChannelModel teacher = neural::ChannelModel::build(cfg.model, stage_seed(1));
  train::TrainResult teacher_run;
  try {
    auto tc = cfg.teacher;
    tc.seed = stage_seed(1);
    teacher_run = train::train_stage(teacher, train_ds, tc);
    teacher_run.trace.write_csv(cfg.out_dir + "/checkpoints/teacher_trace.csv");
    neural::save_checkpoint(teacher, cfg.out_dir + "/checkpoints/teacher.ckpt");
  } catch (const std::exception& e) {
    throw fail("teacher", e);
  }

  std::vector<std::vector<double>> teacher_preds;
  try {
    teacher_preds = train::predict(teacher, pool, eval_idx, sched, stage_seed(4));
    write_predictions(teacher_preds, cfg.out_dir + "/predictions/teacher.csv");
  } catch (const std::exception& e) {
    throw fail("teacher-predict", e);
  }
  res.teacher = evaluate(eval_targets, teacher_preds);

  std::vector<metrics::RankRow> rows;
  rows.push_back({"physics", res.physics.jsd, res.physics.nrmse, res.physics.mae, 0, 0});
  rows.push_back({"teacher", res.teacher.jsd, res.teacher.nrmse, res.teacher.mae, 0, 0});

  // --- student ---
  train::TrainResult student_run, scratch_run;
  if (cfg.run_student) {
    auto student_cfg = cfg.model;
    student_cfg.with_ere = true;
    student_cfg.with_eof = true;
    student_cfg.with_eme = cfg.data.feat.with_micromaps;
    try {
      neural::ChannelModel student =
          neural::ChannelModel::build(student_cfg, stage_seed(2));
      neural::copy_matching_params(teacher, student);
      auto sc = cfg.student;
      sc.seed = stage_seed(2);
      student_run = train::train_stage(student, train_ds, sc);
      student_run.trace.write_csv(cfg.out_dir + "/checkpoints/student_trace.csv");
      neural::save_checkpoint(student, cfg.out_dir + "/checkpoints/student.ckpt");

      auto preds = train::predict(student, pool, eval_idx, sched, stage_seed(4));
      write_predictions(preds, cfg.out_dir + "/predictions/student.csv");
      res.student = evaluate(eval_targets, preds);
      rows.push_back(
          {"student", res.student.jsd, res.student.nrmse, res.student.mae, 0, 0});
    } catch (const std::exception& e) {
      throw fail("student", e);
    }

    if (cfg.no_teacher) {
      try {
        neural::ChannelModel scratch =
            neural::ChannelModel::build(student_cfg, stage_seed(3));
        auto sc = cfg.student;
        sc.seed = stage_seed(3);
        scratch_run = train::train_stage(scratch, train_ds, sc);
        auto preds = train::predict(scratch, pool, eval_idx, sched, stage_seed(4));
        write_predictions(preds, cfg.out_dir + "/predictions/student_scratch.csv");
        res.student_scratch = evaluate(eval_targets, preds);
        rows.push_back({"student_scratch", res.student_scratch.jsd,
                        res.student_scratch.nrmse, res.student_scratch.mae, 0, 0});
      } catch (const std::exception& e) {
        throw fail("student-scratch", e);
      }
    }
  }

  res.student_initial_loss = student_run.initial_train_loss;
  res.scratch_initial_loss = scratch_run.initial_train_loss;
  res.ranking = metrics::rank_models(rows);

  // --- report ---
  try {
    json report;
    report["format"] = "report_v1";
    report["seed"] = cfg.seed;
    report["metrics"] = {{"physics", report_json(res.physics)},
                         {"teacher", report_json(res.teacher)}};
    if (cfg.run_student) {
      report["metrics"]["student"] = report_json(res.student);
      report["student_initial_loss"] = student_run.initial_train_loss;
      if (cfg.no_teacher) {
        report["metrics"]["student_scratch"] = report_json(res.student_scratch);
        report["scratch_initial_loss"] = scratch_run.initial_train_loss;
      }
    }
    json rank = json::array();
    for (const auto& r : res.ranking)
      rank.push_back({{"name", r.name},
                      {"jsd", r.jsd},
                      {"nrmse", r.nrmse},
                      {"mae", r.mae},
                      {"r_avg", r.r_avg}});
    report["ranking"] = rank;
    res.report_path = cfg.out_dir + "/report.json";
    std::ofstream out(res.report_path);
    if (!out) throw Error("cannot open for writing: " + res.report_path);
    out << report.dump(2) << "\n";
  } catch (const std::exception& e) {
    throw fail("report", e);
  }
  return res;
}

}  // namespace channeldiff::experiment
