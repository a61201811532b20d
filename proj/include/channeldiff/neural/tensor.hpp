#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "channeldiff/common.hpp"

namespace channeldiff::neural {

class Tensor;
using TensorP = std::shared_ptr<Tensor>;

// Dense N-d tensor with reverse-mode gradients. Graphs are built eagerly;
// backward() walks the tape in reverse topological order.
class Tensor {
 public:
  std::vector<int> shape;
  std::vector<double> v;
  std::vector<double> g;
  bool requires_grad = false;

  std::vector<TensorP> parents;
  std::function<void(Tensor&)> backfn;

  static TensorP make(std::vector<int> shape, bool requires_grad = false);
  static TensorP from(std::vector<int> shape, std::vector<double> values,
                      bool requires_grad = false);

  size_t size() const { return v.size(); }
  int dim(int i) const { return shape[i]; }
  void ensure_grad() { if (g.size() != v.size()) g.assign(v.size(), 0.0); }
  bool has_nan() const;
};

// Backprop from a scalar loss (seeds gradient 1).
void backward(const TensorP& loss);

// ---- graph ops ----
TensorP add(const TensorP& a, const TensorP& b);            // same shape
TensorP sub(const TensorP& a, const TensorP& b);
TensorP mul(const TensorP& a, const TensorP& b);            // elementwise
TensorP scale(const TensorP& a, double s);
TensorP add_scalar(const TensorP& a, double s);

// b has the trailing shape of a and is broadcast over leading dims
// (e.g. bias [C] over [B,T,C], or pe [T,C] over [B,T,C]).
TensorP add_bcast(const TensorP& a, const TensorP& b);
// b is [B,C], broadcast over the token axis of a [B,T,C].
TensorP add_bcast_tokens(const TensorP& a, const TensorP& b);

// a [..., M, K] x w [K, N] -> [..., M, N] (shared weight).
TensorP matmul(const TensorP& a, const TensorP& w);
// a [B, M, K] x b [B, K, N] -> [B, M, N].
TensorP bmm(const TensorP& a, const TensorP& b);
// a [B, M, K] x b [B, N, K]^T -> [B, M, N].
TensorP bmm_nt(const TensorP& a, const TensorP& b);

TensorP softmax_lastdim(const TensorP& a);
TensorP layernorm_lastdim(const TensorP& a, double eps = 1e-5);
TensorP gelu(const TensorP& a);   // tanh approximation
TensorP silu(const TensorP& a);

TensorP slice_lastdim(const TensorP& a, int offset, int len);
TensorP concat_lastdim(const std::vector<TensorP>& parts);
TensorP reshape(const TensorP& a, std::vector<int> shape);  // view copy

// Mean over axis 1 of [B, T, C] -> [B, C].
TensorP mean_tokens(const TensorP& a);

// Zero-padded same-size patch extraction for 1-D conv along the token axis:
// [B, T, C] -> [B, T, k*C].
TensorP im2col_1d(const TensorP& a, int k);
// [N, C, S, S] -> [N, S*S, k*k*C].
TensorP im2col_2d(const TensorP& a, int k);
// Token layout back to channel-major grid: [N, S*S, C] -> [N, C, S, S].
TensorP tokens_to_chw(const TensorP& a, int S);

TensorP sum_all(const TensorP& a);
TensorP mean_all(const TensorP& a);
TensorP mse(const TensorP& a, const TensorP& b);

// ---- parameter utilities ----
void trunc_normal_init(Tensor& t, double sigma, std::mt19937_64& rng);

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<TensorP> params, double lr = 1e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8, double clip_norm = 1.0);
  void step();
  void zero_grad();
  double last_grad_norm() const { return last_grad_norm_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  std::vector<TensorP> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_, clip_norm_;
  long t_ = 0;
  double last_grad_norm_ = 0;
};

// Central finite difference vs reverse-mode directional derivative.
// `forward` rebuilds the loss graph from current parameter values.
double grad_check(const std::function<TensorP()>& forward, const TensorP& param,
                  const std::vector<double>& direction, double h = 1e-4);

}  // namespace channeldiff::neural
