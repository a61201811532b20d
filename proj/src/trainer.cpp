#include "channeldiff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace channeldiff::train {

using neural::Tensor;
using neural::TensorP;

void LossTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "epoch,split,loss\n";
  char buf[64];
  for (const auto& [epoch, split, loss] : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", loss);
    out << epoch << "," << split << "," << buf << "\n";
  }
}

static void fit_dims(const std::vector<const std::vector<double>*>& rows, size_t dims,
                     std::vector<double>& mean, std::vector<double>& stddev) {
  mean.assign(dims, 0.0);
  stddev.assign(dims, 0.0);
  size_t n = 0;
  for (const auto* r : rows) n += r->size() / dims;
  if (n == 0) throw ValidationError("preprocess: no rows to fit");
  for (const auto* r : rows)
    for (size_t i = 0; i < r->size(); ++i) mean[i % dims] += (*r)[i];
  for (size_t d = 0; d < dims; ++d) mean[d] /= static_cast<double>(n);
  for (const auto* r : rows)
    for (size_t i = 0; i < r->size(); ++i) {
      double c = (*r)[i] - mean[i % dims];
      stddev[i % dims] += c * c;
    }
  for (size_t d = 0; d < dims; ++d) {
    stddev[d] = std::sqrt(stddev[d] / static_cast<double>(n));
    if (stddev[d] < 1e-9) stddev[d] = 1.0;
  }
}

void fit_preprocess(neural::ChannelModel& model, const dataset::Dataset& ds,
                    const std::vector<size_t>& idx, Stage stage) {
  std::vector<const std::vector<double>*> np, ere, crops;
  std::vector<double> targets;
  for (size_t i : idx) {
    const auto& s = ds.samples[i];
    np.push_back(&s.net_params);
    ere.push_back(&s.ere);
    if (s.S > 0) crops.push_back(&s.crops);
    const auto& t = stage == Stage::Teacher ? s.rsrp_calc : s.target;
    if (t.empty()) throw ConfigError("dataset sample missing the stage target");
    targets.insert(targets.end(), t.begin(), t.end());
  }
  fit_dims(np, 10, model.pre.np_mean, model.pre.np_std);
  if (model.cfg.with_ere) {
    size_t d = static_cast<size_t>(model.cfg.ere_dim);
    fit_dims(ere, d, model.pre.ere_mean, model.pre.ere_std);
  }
  if (model.cfg.with_eme) {
    if (crops.empty()) throw ConfigError("dataset has no micro-map crops");
    // channel-major layout: per-timestep [2][S][S] blocks
    int S = 0;
    for (size_t i : idx)
      if (ds.samples[i].S > 0) { S = ds.samples[i].S; break; }
    size_t plane = static_cast<size_t>(S) * S;
    model.pre.crop_mean.assign(2, 0.0);
    model.pre.crop_std.assign(2, 0.0);
    size_t n = 0;
    for (const auto* r : crops) n += r->size() / 2;
    for (const auto* r : crops)
      for (size_t i = 0; i < r->size(); ++i)
        model.pre.crop_mean[(i / plane) % 2] += (*r)[i];
    for (int c = 0; c < 2; ++c) model.pre.crop_mean[c] /= static_cast<double>(n);
    for (const auto* r : crops)
      for (size_t i = 0; i < r->size(); ++i) {
        double d = (*r)[i] - model.pre.crop_mean[(i / plane) % 2];
        model.pre.crop_std[(i / plane) % 2] += d * d;
      }
    for (int c = 0; c < 2; ++c) {
      model.pre.crop_std[c] = std::sqrt(model.pre.crop_std[c] / static_cast<double>(n));
      if (model.pre.crop_std[c] < 1e-9) model.pre.crop_std[c] = 1.0;
    }
  }
  auto tn = diffusion::fit_normalization(targets);
  model.pre.target_mean = tn.mean;
  model.pre.target_std = tn.stddev;
}

BatchData build_batch(const neural::ChannelModel& model, const dataset::Dataset& ds,
                      const std::vector<size_t>& idx, Stage stage) {
  if (idx.empty()) throw ValidationError("build_batch: empty index set");
  int B = static_cast<int>(idx.size());
  int T = static_cast<int>(ds.samples[idx[0]].T);
  for (size_t i : idx)
    if (static_cast<int>(ds.samples[i].T) != T)
      throw ValidationError("build_batch: samples disagree on sequence length");
  if (model.pre.np_mean.size() != 10)
    throw ConfigError("model preprocess not fitted");

  BatchData bd;
  bd.cond.net_params = Tensor::make({B, T, 10});
  for (int b = 0; b < B; ++b) {
    const auto& s = ds.samples[idx[b]];
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < 10; ++d)
        bd.cond.net_params->v[(static_cast<size_t>(b) * T + t) * 10 + d] =
            (s.net_params[static_cast<size_t>(t) * 10 + d] - model.pre.np_mean[d]) /
            model.pre.np_std[d];
  }

  if (model.cfg.with_ere) {
    int E = model.cfg.ere_dim;
    bd.cond.ere = Tensor::make({B, T, E});
    for (int b = 0; b < B; ++b) {
      const auto& s = ds.samples[idx[b]];
      if (static_cast<int>(s.ere.size()) != T * E)
        throw ConfigError("dataset sample missing the reflection embedding");
      for (int t = 0; t < T; ++t)
        for (int d = 0; d < E; ++d)
          bd.cond.ere->v[(static_cast<size_t>(b) * T + t) * E + d] =
              (s.ere[static_cast<size_t>(t) * E + d] - model.pre.ere_mean[d]) /
              model.pre.ere_std[d];
    }
  }
  if (model.cfg.with_eof) {
    bd.cond.eof = Tensor::make({B, T, 1});
    for (int b = 0; b < B; ++b) {
      const auto& s = ds.samples[idx[b]];
      std::copy(s.eof.begin(), s.eof.end(),
                bd.cond.eof->v.begin() + static_cast<size_t>(b) * T);
    }
  }
  if (model.cfg.with_eme) {
    if (!model.mfen) throw ConfigError("model lacks the micro-map encoder");
    int S = ds.samples[idx[0]].S;
    if (S <= 0) throw ConfigError("dataset sample missing micro-map crops");
    size_t plane = static_cast<size_t>(S) * S;
    auto crops = Tensor::make({B * T, 2, S, S});
    for (int b = 0; b < B; ++b) {
      const auto& s = ds.samples[idx[b]];
      if (s.S != S) throw ValidationError("build_batch: crop sizes disagree");
      for (size_t i = 0; i < s.crops.size(); ++i)
        crops->v[static_cast<size_t>(b) * T * 2 * plane + i] =
            (s.crops[i] - model.pre.crop_mean[(i / plane) % 2]) /
            model.pre.crop_std[(i / plane) % 2];
    }
    auto eme = model.mfen->forward(crops, S);  // [B*T, E]
    bd.cond.eme = neural::reshape(eme, {B, T, model.cfg.mfen.out_dim});
  }

  bd.x0_norm.resize(B);
  bd.prior_norm.resize(B);
  bd.eof.resize(B);
  for (int b = 0; b < B; ++b) {
    const auto& s = ds.samples[idx[b]];
    const auto& tgt = stage == Stage::Teacher ? s.rsrp_calc : s.target;
    if (tgt.empty()) throw ConfigError("dataset sample missing the stage target");
    bd.x0_norm[b].resize(T);
    bd.prior_norm[b].resize(T);
    for (int t = 0; t < T; ++t) {
      bd.x0_norm[b][t] = (tgt[t] - model.pre.target_mean) / model.pre.target_std;
      bd.prior_norm[b][t] =
          (s.rsrp_calc[t] - model.pre.target_mean) / model.pre.target_std;
    }
    bd.eof[b] = s.eof;
  }
  return bd;
}

// Shared loss graph for one batch. `ks` and `eps` supply the per-sample step
// and the noise draw; see TrainConfig for the stage semantics.
static TensorP batch_loss(const neural::ChannelModel& model, BatchData& bd,
                          const std::vector<int>& ks,
                          const std::vector<std::vector<double>>& eps,
                          const diffusion::NoiseSchedule& sched, Stage stage) {
  int B = bd.cond.net_params->shape[0], T = bd.cond.net_params->shape[1];
  bd.cond.k = ks;

  auto xk = Tensor::make({B, T, 1});
  auto eps_t = Tensor::make({B, T, 1});
  auto x0_t = Tensor::make({B, T, 1});
  auto bk_t = Tensor::make({B, T, 1});
  auto inv_sa_t = Tensor::make({B, T, 1});
  auto resid_t = Tensor::make({B, T, 1});  // (1-e) * prior coefficient * x0_hat

  for (int b = 0; b < B; ++b) {
    double a = sched.alpha_at(ks[b]);
    double sa = std::sqrt(a), bk = sched.b_at(ks[b]);
    double pc = sa / (1.0 - a);
    for (int t = 0; t < T; ++t) {
      size_t i = static_cast<size_t>(b) * T + t;
      double resid = stage == Stage::Student
                         ? (1.0 - bd.eof[b][t]) * pc * bd.prior_norm[b][t]
                         : 0.0;
      eps_t->v[i] = eps[b][t];
      x0_t->v[i] = bd.x0_norm[b][t];
      xk->v[i] = sa * bd.x0_norm[b][t] + bk * eps[b][t];
      bk_t->v[i] = bk;
      inv_sa_t->v[i] = 1.0 / sa;
      resid_t->v[i] = resid;
    }
  }

  auto pred = model.denoiser->forward(xk, bd.cond);
  if (stage == Stage::Teacher) {
    auto x0_hat = neural::mul(neural::sub(xk, neural::mul(bk_t, pred)), inv_sa_t);
    return neural::add(neural::mse(pred, eps_t), neural::mse(x0_hat, x0_t));
  }
  // student: prediction is delta-eps; recover eps, then x0, loss in x0 space
  auto eps_hat = neural::sub(pred, resid_t);
  auto x0_hat = neural::mul(neural::sub(xk, neural::mul(bk_t, eps_hat)), inv_sa_t);
  return neural::mse(x0_hat, x0_t);
}

static double epoch_loss(const neural::ChannelModel& model,
                         const dataset::Dataset& ds, const std::vector<size_t>& idx,
                         int batch_size, const diffusion::NoiseSchedule& sched,
                         Stage stage, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kdist(1, sched.K);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double total = 0;
  size_t n = 0;
  for (size_t b0 = 0; b0 < idx.size(); b0 += batch_size) {
    std::vector<size_t> batch(idx.begin() + b0,
                              idx.begin() + std::min(idx.size(), b0 + batch_size));
    auto bd = build_batch(model, ds, batch, stage);
    int B = static_cast<int>(batch.size());
    int T = static_cast<int>(ds.samples[batch[0]].T);
    std::vector<int> ks(B);
    std::vector<std::vector<double>> eps(B, std::vector<double>(T));
    for (int b = 0; b < B; ++b) {
      ks[b] = kdist(rng);
      for (int t = 0; t < T; ++t) eps[b][t] = gauss(rng);
    }
    auto loss = batch_loss(model, bd, ks, eps, sched, stage);
    total += loss->v[0] * B;
    n += B;
  }
  return total / static_cast<double>(n);
}

TrainResult train_stage(neural::ChannelModel& model, const dataset::Dataset& ds,
                        const TrainConfig& cfg) {
  if (cfg.stage == Stage::Student &&
      !(model.cfg.with_ere || model.cfg.with_eme || model.cfg.with_eof))
    throw ConfigError("student stage requires at least one student stream");

  size_t N = ds.samples.size();
  if (N < 2) throw ValidationError("train: need at least 2 samples");
  std::mt19937_64 rng(cfg.seed);
  std::vector<size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  size_t n_val = std::max<size_t>(1, static_cast<size_t>(cfg.val_fraction * N));
  std::vector<size_t> val_idx(order.end() - n_val, order.end());
  std::vector<size_t> train_idx(order.begin(), order.end() - n_val);

  fit_preprocess(model, ds, train_idx, cfg.stage);
  auto sched = diffusion::make_schedule(cfg.K, cfg.beta_start, cfg.beta_end, cfg.mode);
  neural::AdamOptimizer opt(model.store.tensors(), cfg.lr);

  TrainResult res;
  std::uniform_int_distribution<int> kdist(1, sched.K);
  std::normal_distribution<double> gauss(0.0, 1.0);

  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_params;
  int since_best = 0;
  bool first_batch = true;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double train_total = 0;
    size_t train_n = 0;
    for (size_t b0 = 0; b0 < train_idx.size(); b0 += cfg.batch_size) {
      std::vector<size_t> batch(
          train_idx.begin() + b0,
          train_idx.begin() + std::min(train_idx.size(), b0 + cfg.batch_size));
      auto bd = build_batch(model, ds, batch, cfg.stage);
      int B = static_cast<int>(batch.size());
      int T = static_cast<int>(ds.samples[batch[0]].T);
      std::vector<int> ks(B);
      std::vector<std::vector<double>> eps(B, std::vector<double>(T));
      for (int b = 0; b < B; ++b) {
        ks[b] = kdist(rng);
        for (int t = 0; t < T; ++t) eps[b][t] = gauss(rng);
      }
      auto loss = batch_loss(model, bd, ks, eps, sched, cfg.stage);
      if (first_batch) {
        res.initial_train_loss = loss->v[0];
        first_batch = false;
      }
      opt.zero_grad();
      neural::backward(loss);
      opt.step();
      train_total += loss->v[0] * B;
      train_n += B;
    }
    double train_loss = train_total / static_cast<double>(train_n);
    res.trace.rows.emplace_back(epoch, "train", train_loss);

    // fixed noise/step draw so validation losses are comparable across epochs
    std::mt19937_64 val_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    double val_loss = epoch_loss(model, ds, val_idx, cfg.batch_size, sched,
                                 cfg.stage, val_rng);
    res.trace.rows.emplace_back(epoch, "val", val_loss);
    res.epochs_run = epoch + 1;

    if (val_loss < best - 1e-12) {
      best = val_loss;
      res.best_epoch = epoch;
      since_best = 0;
      best_params.clear();
      for (const auto& t : model.store.tensors()) best_params.push_back(t->v);
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  if (!best_params.empty()) {
    auto tensors = model.store.tensors();
    for (size_t i = 0; i < tensors.size(); ++i) tensors[i]->v = best_params[i];
  }
  res.best_val = best;
  return res;
}

std::vector<std::vector<double>> predict(const neural::ChannelModel& model,
                                         const dataset::Dataset& ds,
                                         const std::vector<size_t>& idx,
                                         const diffusion::NoiseSchedule& sched,
                                         unsigned long long seed) {
  bool guided = model.cfg.with_eof;
  std::vector<std::vector<double>> out;
  out.reserve(idx.size());
  const size_t chunk = 32;
  for (size_t c0 = 0; c0 < idx.size(); c0 += chunk) {
    std::vector<size_t> part(idx.begin() + c0,
                             idx.begin() + std::min(idx.size(), c0 + chunk));
    auto bd = build_batch(model, ds, part, Stage::Teacher);
    diffusion::SampleConfig sc;
    sc.deterministic = true;
    sc.seed = seed + c0;
    auto norm = diffusion::sample_batch(model, bd.cond, bd.prior_norm,
                                        guided ? bd.eof
                                               : std::vector<std::vector<double>>{},
                                        sched, sc);
    for (auto& row : norm) {
      for (double& v : row)
        v = v * model.pre.target_std + model.pre.target_mean;
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace channeldiff::train
