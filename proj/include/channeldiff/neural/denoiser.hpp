#pragma once

#include <optional>

#include "channeldiff/neural/layers.hpp"

namespace channeldiff::neural {

struct MfenConfig {
  int cnn_hidden = 64;
  int cnn_layers = 3;
  int kernel = 3;
  int attn_dim = 256;
  int attn_heads = 8;
  int out_dim = 256;  // e_ME embedding dimensions
};

struct DenoiserConfig {
  int hidden_size = 256;
  int attention_heads = 6;
  int blocks = 12;
  int condition_channels = 256;
  int pe_dim = 64;

  // Student-stage condition streams; the teacher uses network params only.
  bool with_ere = false;
  bool with_eme = false;
  bool with_eof = false;
  int ere_dim = 25;  // (N_NLOS+1)*(2*N_ref+3) flattened

  MfenConfig mfen;

  void validate() const {
    if (hidden_size % attention_heads != 0)
      throw ConfigError("hidden_size must be divisible by attention_heads");
    if (pe_dim % 2 != 0) throw ConfigError("pe_dim must be even");
  }
};

// One training/inference batch of conditions aligned to the target series.
struct CondBatch {
  TensorP net_params;         // [B,T,10], required
  TensorP ere;                // [B,T,ere_dim], student only
  TensorP eme;                // [B,T,mfen.out_dim], student only
  TensorP eof;                // [B,T,1], student only
  std::vector<int> k;         // per-sample diffusion step, size B
};

// MFEN encoder head: CNN stack + coordinate-aware spatial attention + MLP.
class Mfen {
 public:
  Mfen() = default;
  Mfen(ParamStore& store, const MfenConfig& cfg);
  void init(double sigma, std::mt19937_64& rng);

  // crops [N,2,S,S] -> e_ME [N,out_dim]; pos is the crop-local coordinate
  // grid from micromap::coordinate_encoding(S,S).
  TensorP forward(const TensorP& crops, int S) const;

  MfenConfig cfg;

 private:
  std::vector<Conv2d> convs_;
  Linear token_proj_, pos_proj_, mlp1_, mlp2_;
  SelfAttention attn_;
};

class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(ParamStore& store, const DenoiserConfig& cfg);
  void init(unsigned long long seed);

  // xk [B,T,1] -> prediction [B,T,1] (eps-hat teacher, delta-eps-hat student).
  TensorP forward(const TensorP& xk, const CondBatch& cond) const;

  DenoiserConfig cfg;

 private:
  Conv1d params_conv_, ere_conv_, eof_conv_, eme_conv_;
  Linear k_proj_, pe_proj_, x_proj_;
  std::vector<AdaLnBlock> blocks_;
  Linear final_mod_, head_;
};

// Input/target statistics fitted on the training split and frozen into the
// checkpoint so prediction reuses the exact same scaling.
struct Preprocess {
  std::vector<double> np_mean, np_std;    // network params, 10 dims
  std::vector<double> ere_mean, ere_std;  // flattened reflection embedding
  std::vector<double> crop_mean, crop_std;  // micro-map channels, 2 dims
  double target_mean = 0, target_std = 1;   // RSRP z-score (shared with prior)
};

// The full trainable model: denoiser plus optional MFEN, one parameter store.
struct ChannelModel {
  DenoiserConfig cfg;
  ParamStore store;
  std::unique_ptr<Denoiser> denoiser;
  std::unique_ptr<Mfen> mfen;
  Preprocess pre;

  static ChannelModel build(const DenoiserConfig& cfg, unsigned long long seed);
};

// ckpt_v1: JSON manifest (config + parameter names/shapes) + float32 blob.
void save_checkpoint(const ChannelModel& model, const std::string& path);
ChannelModel load_checkpoint(const std::string& path);

// Copies every parameter whose name and shape match; returns count copied.
size_t copy_matching_params(const ChannelModel& src, ChannelModel& dst);

}  // namespace channeldiff::neural
