#pragma once

#include <functional>
#include <vector>

#include "channeldiff/neural/denoiser.hpp"

namespace channeldiff::diffusion {

// b_k coefficient on the noise term: LINEAR uses (1 - alpha_k),
// STANDARD uses sqrt(1 - alpha_k) (the usual DDPM convention).
enum class NoiseCoeffMode { LINEAR, STANDARD };

struct NoiseSchedule {
  int K = 0;
  std::vector<double> beta;       // beta[k-1] for step k in 1..K
  std::vector<double> alpha_hat;  // 1 - beta_k
  std::vector<double> alpha;      // cumulative product
  NoiseCoeffMode mode = NoiseCoeffMode::LINEAR;

  // alpha_k with alpha_0 = 1 (noiseless endpoint of the reverse chain).
  double alpha_at(int k) const;
  // noise coefficient b_k with b_0 = 0.
  double b_at(int k) const;
};

NoiseSchedule make_schedule(int K, double beta_start, double beta_end,
                            NoiseCoeffMode mode = NoiseCoeffMode::LINEAR);

// x_k = sqrt(alpha_k) * x0 + b_k * eps
std::vector<double> forward_noise(const std::vector<double>& x0, int k,
                                  const std::vector<double>& eps,
                                  const NoiseSchedule& s);

// eps_bar_star = sqrt(alpha_k) * x0_hat / (1 - alpha_k); x0_hat is the
// normalized physics prediction.
std::vector<double> prior_noise(const std::vector<double>& x0_hat, int k,
                                const NoiseSchedule& s);

// delta_eps = eps + (1 - e_of) * eps_bar_star
std::vector<double> delta_target(const std::vector<double>& eps,
                                 const std::vector<double>& e_of,
                                 const std::vector<double>& prior_eps_star);

// z-score of the RSRP target in dBm; the physics prediction shares the same
// statistics so the noise prior lives in the same space.
struct Normalization {
  double mean = 0;
  double stddev = 1;

  double normalize(double x) const { return (x - mean) / stddev; }
  double denormalize(double z) const { return z * stddev + mean; }
  std::vector<double> normalize(const std::vector<double>& xs) const;
  std::vector<double> denormalize(const std::vector<double>& zs) const;
};

Normalization fit_normalization(const std::vector<double>& values);

// One deterministic reverse pass over a single chain driven by a caller
// supplied delta-noise predictor (used by the algebra tests and oracles).
std::vector<double> reverse_chain(
    const std::function<std::vector<double>(const std::vector<double>& xk, int k)>&
        predict_delta,
    const std::function<std::vector<double>(int k)>& prior_at,  // may be null
    const std::vector<double>& e_of,                            // empty => e == 1
    const std::vector<double>& x_K, const NoiseSchedule& s);

// Batched sampler over B chains of length T sharing the step index.
// cond.k is overwritten per step. prior_norm/e_of are [B][T] (normalized
// physics prediction, occlusion factor); pass empty e_of for teacher mode.
struct SampleConfig {
  bool deterministic = true;
  unsigned long long seed = 0;
};

std::vector<std::vector<double>> sample_batch(
    const neural::ChannelModel& model, neural::CondBatch cond,
    const std::vector<std::vector<double>>& prior_norm,
    const std::vector<std::vector<double>>& e_of, const NoiseSchedule& s,
    const SampleConfig& sc);

}  // namespace channeldiff::diffusion
