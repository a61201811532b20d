#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"

#include "channeldiff/dataset.hpp"
#include "channeldiff/trainer.hpp"

using namespace channeldiff;
using namespace channeldiff::dataset;

namespace {

std::string tmp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(p);
  return p.string();
}

DatasetConfig tiny_cfg() {
  DatasetConfig cfg;
  cfg.n_samples = 3;
  cfg.T = 12;
  cfg.map_size = 160;
  cfg.cell = 8.0;
  cfg.min_buildings = 3;
  cfg.max_buildings = 5;
  cfg.feat.fov_l = 40.0;  // S = 5
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("generated samples have aligned stream shapes") {
  auto cfg = tiny_cfg();
  auto ds = generate_dataset(cfg);
  REQUIRE(ds.samples.size() == 3);
  int ere_dim = ds.ere_dim();
  CHECK(ere_dim == 25);
  for (const auto& s : ds.samples) {
    CHECK(s.T == 12);
    CHECK(s.S == 5);
    CHECK(s.net_params.size() == 12u * 10);
    CHECK(s.ere.size() == 12u * ere_dim);
    CHECK(s.eof.size() == 12);
    CHECK(s.crops.size() == 12u * 2 * 5 * 5);
    CHECK(s.rsrp_calc.size() == 12);
    CHECK(s.target.size() == 12);
    CHECK(s.flops > 0);
    for (double e : s.eof) {
      CHECK(e >= 0.0);
      CHECK(e <= 1.0);
    }
    for (double v : s.target) CHECK(std::isfinite(v));
    for (double v : s.rsrp_calc) CHECK(std::isfinite(v));
  }
}

TEST_CASE("dataset generation is deterministic in the seed") {
  auto a = generate_dataset(tiny_cfg());
  auto b = generate_dataset(tiny_cfg());
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].target == b.samples[i].target);
    CHECK(a.samples[i].net_params == b.samples[i].net_params);
    CHECK(a.samples[i].eof == b.samples[i].eof);
  }
  auto cfg2 = tiny_cfg();
  cfg2.seed = 18;
  auto c = generate_dataset(cfg2);
  CHECK(c.samples[0].target != a.samples[0].target);
}

TEST_CASE("dataset write/load round trip") {
  auto ds = generate_dataset(tiny_cfg());
  auto dir = tmp_dir("ds_rt");
  write_dataset(ds, dir);
  auto back = load_dataset(dir);
  REQUIRE(back.samples.size() == ds.samples.size());
  CHECK(back.cfg.T == ds.cfg.T);
  CHECK(back.cfg.feat.N_NLOS == ds.cfg.feat.N_NLOS);
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& a = ds.samples[i];
    const auto& b = back.samples[i];
    CHECK(a.T == b.T);
    CHECK(a.S == b.S);
    REQUIRE(a.target.size() == b.target.size());
    for (size_t j = 0; j < a.target.size(); ++j)
      CHECK(b.target[j] == doctest::Approx(a.target[j]).epsilon(1e-12));
    for (size_t j = 0; j < a.eof.size(); ++j)
      CHECK(b.eof[j] == doctest::Approx(a.eof[j]).epsilon(1e-12));
    for (size_t j = 0; j < a.ere.size(); ++j)
      CHECK(b.ere[j] == doctest::Approx(a.ere[j]).epsilon(1e-12));
    // micromap blob is float32
    for (size_t j = 0; j < a.crops.size(); ++j)
      CHECK(b.crops[j] == doctest::Approx(a.crops[j]).epsilon(1e-6));
    CHECK(b.flops == doctest::Approx(a.flops).epsilon(1e-12));
  }
}

TEST_CASE("dataset config JSON round trip") {
  auto cfg = tiny_cfg();
  cfg.noise_sigma_db = 0.75;
  cfg.feat.N_ref = 2;
  cfg.feat.with_micromaps = false;
  auto text = dataset_config_json(cfg);
  auto back = parse_dataset_config(text);
  CHECK(back.T == cfg.T);
  CHECK(back.noise_sigma_db == cfg.noise_sigma_db);
  CHECK(back.feat.N_ref == 2);
  CHECK_FALSE(back.feat.with_micromaps);
  CHECK(back.seed == cfg.seed);
}

TEST_CASE("build_batch produces normalized tensors of the right shapes") {
  auto ds = generate_dataset(tiny_cfg());
  neural::DenoiserConfig mc;
  mc.hidden_size = 16;
  mc.attention_heads = 2;
  mc.blocks = 1;
  mc.condition_channels = 16;
  mc.pe_dim = 8;
  mc.with_ere = true;
  mc.with_eof = true;
  mc.with_eme = true;
  mc.ere_dim = ds.ere_dim();
  mc.mfen.cnn_hidden = 4;
  mc.mfen.cnn_layers = 1;
  mc.mfen.attn_dim = 4;
  mc.mfen.attn_heads = 1;
  mc.mfen.out_dim = 6;
  auto model = neural::ChannelModel::build(mc, 5);
  std::vector<size_t> idx = {0, 1, 2};
  train::fit_preprocess(model, ds, idx, train::Stage::Student);
  auto batch = train::build_batch(model, ds, idx, train::Stage::Student);
  REQUIRE(batch.cond.net_params->shape == std::vector<int>{3, 12, 10});
  REQUIRE(batch.cond.ere->shape == std::vector<int>{3, 12, 25});
  REQUIRE(batch.cond.eof->shape == std::vector<int>{3, 12, 1});
  REQUIRE(batch.cond.eme->shape == std::vector<int>{3, 12, 6});
  CHECK(batch.x0_norm.size() == 3);
  CHECK(batch.x0_norm[0].size() == 12);
  CHECK(batch.prior_norm.size() == 3);
  CHECK(batch.eof.size() == 3);
  // z-scored conditions should be roughly centred
  double m = 0;
  for (double v : batch.cond.net_params->v) m += v;
  m /= batch.cond.net_params->v.size();
  CHECK(std::abs(m) < 0.5);
}

TEST_CASE("short teacher training run lowers the loss and is deterministic") {
  auto cfg = tiny_cfg();
  cfg.n_samples = 10;
  auto ds = generate_dataset(cfg);

  neural::DenoiserConfig mc;
  mc.hidden_size = 16;
  mc.attention_heads = 2;
  mc.blocks = 1;
  mc.condition_channels = 16;
  mc.pe_dim = 8;

  train::TrainConfig tc;
  tc.stage = train::Stage::Teacher;
  tc.epochs = 3;
  tc.batch_size = 5;
  tc.lr = 1e-3;
  tc.K = 10;
  tc.beta_end = 0.1;
  tc.seed = 3;

  auto m1 = neural::ChannelModel::build(mc, 7);
  auto r1 = train::train_stage(m1, ds, tc);
  CHECK(r1.epochs_run == 3);
  CHECK(r1.best_epoch >= 0);
  CHECK(std::isfinite(r1.best_val));
  CHECK(r1.initial_train_loss > 0);
  REQUIRE(!r1.trace.rows.empty());

  auto m2 = neural::ChannelModel::build(mc, 7);
  auto r2 = train::train_stage(m2, ds, tc);
  REQUIRE(r1.trace.rows.size() == r2.trace.rows.size());
  for (size_t i = 0; i < r1.trace.rows.size(); ++i)
    CHECK(std::get<2>(r1.trace.rows[i]) == std::get<2>(r2.trace.rows[i]));

  // prediction produces finite dBm series of the right length
  auto sched = diffusion::make_schedule(tc.K, tc.beta_start, tc.beta_end, tc.mode);
  auto preds = train::predict(m1, ds, {0, 1}, sched, 11);
  REQUIRE(preds.size() == 2);
  REQUIRE(preds[0].size() == 12);
  for (const auto& p : preds)
    for (double v : p) CHECK(std::isfinite(v));
}
