#pragma once

#include <string>

#include "channeldiff/neural/tensor.hpp"

namespace channeldiff::neural {

// Named parameter registry shared by all learned modules.
class ParamStore {
 public:
  TensorP create(const std::string& name, std::vector<int> shape);
  TensorP get(const std::string& name) const;
  const std::vector<std::pair<std::string, TensorP>>& all() const { return params_; }
  std::vector<TensorP> tensors() const;
  size_t param_count() const;

 private:
  std::vector<std::pair<std::string, TensorP>> params_;
};

struct Linear {
  TensorP w, b;

  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out);
  void init_trunc_normal(double sigma, std::mt19937_64& rng);
  void init_zero();
  TensorP operator()(const TensorP& x) const;  // [..., in] -> [..., out]
};

// 1-D conv along the token axis, odd kernel, zero same-padding.
struct Conv1d {
  int k = 3;
  TensorP w, b;  // w: [k*in, out]

  Conv1d() = default;
  Conv1d(ParamStore& store, const std::string& name, int in, int out, int kernel);
  void init_trunc_normal(double sigma, std::mt19937_64& rng);
  void init_zero();
  TensorP operator()(const TensorP& x) const;  // [B,T,in] -> [B,T,out]
};

// 3x3-style 2-D conv over square crops, zero same-padding.
struct Conv2d {
  int k = 3;
  TensorP w, b;  // w: [k*k*in, out]

  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, int in, int out, int kernel);
  void init_trunc_normal(double sigma, std::mt19937_64& rng);
  // [N,in,S,S] -> [N,S*S,out] token layout
  TensorP operator()(const TensorP& x, int S) const;
};

// Multi-head self-attention over the token axis, pre-projected Q/K/V.
struct SelfAttention {
  int heads = 1;
  Linear wq, wk, wv, wo;

  SelfAttention() = default;
  SelfAttention(ParamStore& store, const std::string& name, int dim, int heads);
  void init(double sigma, std::mt19937_64& rng);
  TensorP operator()(const TensorP& x) const;  // [B,T,dim] -> [B,T,dim]
};

// x * (1 + scale) + shift, all [B,T,C].
TensorP modulate(const TensorP& x, const TensorP& shift, const TensorP& scale);

// Transformer block with adaLN conditioning: LN scale/shift/gates are
// regressed from the per-token condition vector; modulation is zero-init so
// the block starts as the identity.
struct AdaLnBlock {
  int hidden = 0;
  SelfAttention attn;
  Linear mlp1, mlp2;
  Linear modulation;  // cond -> 6*hidden

  AdaLnBlock() = default;
  AdaLnBlock(ParamStore& store, const std::string& name, int hidden, int heads,
             int cond_dim);
  void init(double sigma, std::mt19937_64& rng);
  TensorP operator()(const TensorP& x, const TensorP& cond) const;
};

// Sinusoidal positional encoding rows, pe[t][2i] = sin(t / 10^(4*2i/D)),
// pe[t][2i+1] = cos(t / 10^(4*(2i+1)/D)).
TensorP positional_encoding(int T, int D_pe);

// Same encoding evaluated at a single (possibly fractional) position.
std::vector<double> sinusoidal_embed(double pos, int D);

}  // namespace channeldiff::neural
