#include "channeldiff/diffusion.hpp"

#include <cmath>
#include <random>

namespace channeldiff::diffusion {

using neural::Tensor;
using neural::TensorP;

double NoiseSchedule::alpha_at(int k) const {
  if (k < 0 || k > K) throw ValidationError("schedule: step out of range");
  return k == 0 ? 1.0 : alpha[k - 1];
}

double NoiseSchedule::b_at(int k) const {
  double a = alpha_at(k);
  if (k == 0) return 0.0;
  return mode == NoiseCoeffMode::LINEAR ? 1.0 - a : std::sqrt(1.0 - a);
}

NoiseSchedule make_schedule(int K, double beta_start, double beta_end,
                            NoiseCoeffMode mode) {
  if (K < 1) throw ValidationError("schedule: K must be >= 1");
  if (!(beta_start > 0 && beta_start <= beta_end && beta_end < 1))
    throw ValidationError("schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.K = K;
  s.mode = mode;
  s.beta.resize(K);
  s.alpha_hat.resize(K);
  s.alpha.resize(K);
  double prod = 1.0;
  for (int i = 0; i < K; ++i) {
    s.beta[i] = K == 1 ? beta_start
                       : beta_start + (beta_end - beta_start) * i / (K - 1);
    s.alpha_hat[i] = 1.0 - s.beta[i];
    prod *= s.alpha_hat[i];
    s.alpha[i] = prod;
  }
  return s;
}

static void check_lengths(size_t a, size_t b, const char* what) {
  if (a != b) throw ValidationError(std::string(what) + ": length mismatch");
}

std::vector<double> forward_noise(const std::vector<double>& x0, int k,
                                  const std::vector<double>& eps,
                                  const NoiseSchedule& s) {
  if (k < 1 || k > s.K) throw ValidationError("forward_noise: k out of range");
  check_lengths(x0.size(), eps.size(), "forward_noise");
  double sa = std::sqrt(s.alpha_at(k)), b = s.b_at(k);
  std::vector<double> out(x0.size());
  for (size_t i = 0; i < x0.size(); ++i) out[i] = sa * x0[i] + b * eps[i];
  return out;
}

std::vector<double> prior_noise(const std::vector<double>& x0_hat, int k,
                                const NoiseSchedule& s) {
  if (k < 1 || k > s.K) throw ValidationError("prior_noise: k out of range");
  double a = s.alpha_at(k);
  if (a >= 1.0) throw ValidationError("prior_noise: alpha_k must be < 1");
  double c = std::sqrt(a) / (1.0 - a);
  std::vector<double> out(x0_hat.size());
  for (size_t i = 0; i < x0_hat.size(); ++i) out[i] = c * x0_hat[i];
  return out;
}

std::vector<double> delta_target(const std::vector<double>& eps,
                                 const std::vector<double>& e_of,
                                 const std::vector<double>& prior_eps_star) {
  check_lengths(eps.size(), e_of.size(), "delta_target");
  check_lengths(eps.size(), prior_eps_star.size(), "delta_target");
  std::vector<double> out(eps.size());
  for (size_t i = 0; i < eps.size(); ++i)
    out[i] = eps[i] + (1.0 - e_of[i]) * prior_eps_star[i];
  return out;
}

std::vector<double> Normalization::normalize(const std::vector<double>& xs) const {
  std::vector<double> out(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) out[i] = normalize(xs[i]);
  return out;
}

std::vector<double> Normalization::denormalize(const std::vector<double>& zs) const {
  std::vector<double> out(zs.size());
  for (size_t i = 0; i < zs.size(); ++i) out[i] = denormalize(zs[i]);
  return out;
}

Normalization fit_normalization(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("normalization: empty sample");
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  Normalization n;
  n.mean = mean;
  n.stddev = var > 0 ? std::sqrt(var) : 1.0;
  return n;
}

std::vector<double> reverse_chain(
    const std::function<std::vector<double>(const std::vector<double>&, int)>&
        predict_delta,
    const std::function<std::vector<double>(int)>& prior_at,
    const std::vector<double>& e_of, const std::vector<double>& x_K,
    const NoiseSchedule& s) {
  std::vector<double> xk = x_K;
  size_t T = xk.size();
  for (int k = s.K; k >= 1; --k) {
    auto delta = predict_delta(xk, k);
    check_lengths(delta.size(), T, "reverse_chain");
    std::vector<double> eps_hat = delta;
    if (!e_of.empty()) {
      auto prior = prior_at(k);
      for (size_t i = 0; i < T; ++i) eps_hat[i] -= (1.0 - e_of[i]) * prior[i];
    }
    double sa = std::sqrt(s.alpha_at(k)), b = s.b_at(k);
    double sa1 = std::sqrt(s.alpha_at(k - 1)), b1 = s.b_at(k - 1);
    for (size_t i = 0; i < T; ++i) {
      double x0 = (xk[i] - b * eps_hat[i]) / sa;
      xk[i] = sa1 * x0 + b1 * eps_hat[i];
      if (!std::isfinite(xk[i]))
        throw Error("reverse chain: non-finite value at step " + std::to_string(k));
    }
  }
  return xk;
}

std::vector<std::vector<double>> sample_batch(
    const neural::ChannelModel& model, neural::CondBatch cond,
    const std::vector<std::vector<double>>& prior_norm,
    const std::vector<std::vector<double>>& e_of, const NoiseSchedule& s,
    const SampleConfig& sc) {
  if (!cond.net_params || cond.net_params->shape.size() != 3)
    throw ValidationError("sample: net_params must be [B,T,10]");
  int B = cond.net_params->shape[0], T = cond.net_params->shape[1];
  bool guided = !e_of.empty();
  if (guided && static_cast<int>(e_of.size()) != B)
    throw ValidationError("sample: e_of batch mismatch");
  if (guided && static_cast<int>(prior_norm.size()) != B)
    throw ValidationError("sample: prior batch mismatch");

  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> xk(B, std::vector<double>(T));
  for (auto& row : xk)
    for (double& v : row) v = gauss(rng);

  for (int k = s.K; k >= 1; --k) {
    cond.k.assign(B, k);
    auto x_in = Tensor::make({B, T, 1});
    for (int b = 0; b < B; ++b)
      std::copy(xk[b].begin(), xk[b].end(),
                x_in->v.begin() + static_cast<size_t>(b) * T);
    auto pred = model.denoiser->forward(x_in, cond);

    double sa = std::sqrt(s.alpha_at(k)), bk = s.b_at(k);
    double sa1 = std::sqrt(s.alpha_at(k - 1)), bk1 = s.b_at(k - 1);
    double pc = std::sqrt(s.alpha_at(k)) / (1.0 - s.alpha_at(k));
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < T; ++t) {
        double eps_hat = pred->v[static_cast<size_t>(b) * T + t];
        if (guided)
          eps_hat -= (1.0 - e_of[b][t]) * pc * prior_norm[b][t];
        double x0 = (xk[b][t] - bk * eps_hat) / sa;
        double eps_next =
            sc.deterministic ? eps_hat : (k > 1 ? gauss(rng) : eps_hat);
        xk[b][t] = sa1 * x0 + bk1 * eps_next;
        if (!std::isfinite(xk[b][t]))
          throw Error("sample: non-finite value at step " + std::to_string(k));
      }
    }
  }
  return xk;
}

}  // namespace channeldiff::diffusion
