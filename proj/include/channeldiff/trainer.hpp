#pragma once

#include <string>
#include <tuple>

#include "channeldiff/dataset.hpp"
#include "channeldiff/diffusion.hpp"

namespace channeldiff::train {

enum class Stage { Teacher, Student };

struct TrainConfig {
  Stage stage = Stage::Teacher;
  int epochs = 50;        // teacher default; student cap is 320
  int batch_size = 48;
  double lr = 1e-4;
  int patience = 12;      // early stopping on validation loss
  double val_fraction = 0.1;
  int K = 400;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  diffusion::NoiseCoeffMode mode = diffusion::NoiseCoeffMode::LINEAR;
  unsigned long long seed = 0;
};

struct LossTrace {
  // epoch, split ("train"/"val"), loss
  std::vector<std::tuple<int, std::string, double>> rows;

  void write_csv(const std::string& path) const;
};

struct TrainResult {
  LossTrace trace;
  double best_val = 0;
  int best_epoch = -1;
  int epochs_run = 0;
  double initial_train_loss = 0;  // first optimization batch, before any step
};

// Fits the model's Preprocess block on the given training indices.
void fit_preprocess(neural::ChannelModel& model, const dataset::Dataset& ds,
                    const std::vector<size_t>& idx, Stage stage);

// Normalized batch tensors for a set of samples sharing one T.
struct BatchData {
  neural::CondBatch cond;  // k left empty; caller fills per step/loss
  std::vector<std::vector<double>> x0_norm;     // normalized stage target
  std::vector<std::vector<double>> prior_norm;  // normalized physics prediction
  std::vector<std::vector<double>> eof;
};

BatchData build_batch(const neural::ChannelModel& model, const dataset::Dataset& ds,
                      const std::vector<size_t>& idx, Stage stage);

// In-place training with uniform-k noise-matching objective, Adam, and
// early stopping; returns the loss trace. Restores the best-validation
// parameters before returning.
TrainResult train_stage(neural::ChannelModel& model, const dataset::Dataset& ds,
                        const TrainConfig& cfg);

// Reverse-chain prediction for the given samples; returns denormalized dBm
// series. Teacher-stage models ignore the physics prior guidance.
std::vector<std::vector<double>> predict(const neural::ChannelModel& model,
                                         const dataset::Dataset& ds,
                                         const std::vector<size_t>& idx,
                                         const diffusion::NoiseSchedule& sched,
                                         unsigned long long seed);

}  // namespace channeldiff::train
