#include "channeldiff/neural/denoiser.hpp"

#include <cmath>
#include <fstream>

#include "channeldiff/micromap.hpp"
#include "json.hpp"

namespace channeldiff::neural {

using nlohmann::json;

Mfen::Mfen(ParamStore& store, const MfenConfig& cfg_) : cfg(cfg_) {
  if (cfg.cnn_layers < 1) throw ConfigError("mfen: cnn_layers must be >= 1");
  for (int i = 0; i < cfg.cnn_layers; ++i) {
    int in = i == 0 ? 2 : cfg.cnn_hidden;
    convs_.emplace_back(store, "mfen.conv" + std::to_string(i), in, cfg.cnn_hidden,
                        cfg.kernel);
  }
  token_proj_ = Linear(store, "mfen.token_proj", cfg.cnn_hidden, cfg.attn_dim);
  pos_proj_ = Linear(store, "mfen.pos_proj", 2, cfg.attn_dim);
  attn_ = SelfAttention(store, "mfen.attn", cfg.attn_dim, cfg.attn_heads);
  mlp1_ = Linear(store, "mfen.mlp1", cfg.attn_dim, cfg.attn_dim);
  mlp2_ = Linear(store, "mfen.mlp2", cfg.attn_dim, cfg.out_dim);
}

void Mfen::init(double sigma, std::mt19937_64& rng) {
  for (auto& c : convs_) c.init_trunc_normal(sigma, rng);
  token_proj_.init_trunc_normal(sigma, rng);
  pos_proj_.init_trunc_normal(sigma, rng);
  attn_.init(sigma, rng);
  mlp1_.init_trunc_normal(sigma, rng);
  mlp2_.init_trunc_normal(sigma, rng);
}

TensorP Mfen::forward(const TensorP& crops, int S) const {
  if (crops->shape.size() != 4 || crops->shape[1] != 2 || crops->shape[2] != S ||
      crops->shape[3] != S)
    throw ValidationError("mfen: crops must be [N,2,S,S]");

  TensorP x = crops;
  TensorP tok;
  for (size_t i = 0; i < convs_.size(); ++i) {
    tok = gelu(convs_[i](x, S));        // [N, S*S, hidden]
    if (i + 1 < convs_.size()) x = tokens_to_chw(tok, S);
  }

  // Crop-local coordinate encoding added to every token before attention.
  auto enc = micromap::coordinate_encoding(S, S);  // [c][y][x], c in {x-enc,y-enc}
  auto pos = Tensor::make({S * S, 2});
  for (int p = 0; p < S * S; ++p) {
    pos->v[static_cast<size_t>(p) * 2 + 0] = enc[p];
    pos->v[static_cast<size_t>(p) * 2 + 1] = enc[static_cast<size_t>(S) * S + p];
  }

  auto tokens = add_bcast(token_proj_(tok), pos_proj_(pos));  // [N, S*S, attn_dim]
  auto attended = attn_(tokens);
  auto pooled = mean_tokens(attended);                        // [N, attn_dim]
  return mlp2_(gelu(mlp1_(pooled)));                          // [N, out_dim]
}

Denoiser::Denoiser(ParamStore& store, const DenoiserConfig& cfg_) : cfg(cfg_) {
  cfg.validate();
  int C = cfg.condition_channels;
  params_conv_ = Conv1d(store, "cond.params", 10, C, 3);
  if (cfg.with_ere) ere_conv_ = Conv1d(store, "cond.ere", cfg.ere_dim, C, 3);
  if (cfg.with_eof) eof_conv_ = Conv1d(store, "cond.eof", 1, C, 3);
  if (cfg.with_eme) eme_conv_ = Conv1d(store, "cond.eme", cfg.mfen.out_dim, C, 3);
  k_proj_ = Linear(store, "cond.k_proj", cfg.pe_dim, C);
  pe_proj_ = Linear(store, "cond.pe_proj", cfg.pe_dim, C);
  x_proj_ = Linear(store, "net.x_proj", 1, cfg.hidden_size);
  for (int i = 0; i < cfg.blocks; ++i)
    blocks_.emplace_back(store, "net.block" + std::to_string(i), cfg.hidden_size,
                         cfg.attention_heads, C);
  final_mod_ = Linear(store, "net.final_mod", C, 2 * cfg.hidden_size);
  head_ = Linear(store, "net.head", cfg.hidden_size, 1);
}

void Denoiser::init(unsigned long long seed) {
  std::mt19937_64 rng(seed);
  const double sigma = 0.02;
  params_conv_.init_trunc_normal(sigma, rng);
  if (cfg.with_ere) ere_conv_.init_trunc_normal(sigma, rng);
  if (cfg.with_eof) eof_conv_.init_trunc_normal(sigma, rng);
  if (cfg.with_eme) eme_conv_.init_trunc_normal(sigma, rng);
  k_proj_.init_trunc_normal(sigma, rng);
  pe_proj_.init_trunc_normal(sigma, rng);
  x_proj_.init_trunc_normal(sigma, rng);
  for (auto& b : blocks_) b.init(sigma, rng);
  final_mod_.init_zero();  // identity modulation at start
  head_.init_zero();       // network outputs 0 at init
}

TensorP Denoiser::forward(const TensorP& xk, const CondBatch& cond) const {
  if (xk->shape.size() != 3 || xk->shape[2] != 1)
    throw ValidationError("denoiser: input must be [B,T,1]");
  int B = xk->shape[0], T = xk->shape[1];
  if (!cond.net_params || cond.net_params->shape != std::vector<int>{B, T, 10})
    throw ValidationError("denoiser: net_params must be [B,T,10]");
  if (static_cast<int>(cond.k.size()) != B)
    throw ValidationError("denoiser: one diffusion step per batch sample required");

  auto c = params_conv_(cond.net_params);  // [B,T,C]
  if (cfg.with_ere) {
    if (!cond.ere) throw ValidationError("denoiser: missing reflection embedding");
    c = add(c, ere_conv_(cond.ere));
  }
  if (cfg.with_eof) {
    if (!cond.eof) throw ValidationError("denoiser: missing occlusion factor");
    c = add(c, eof_conv_(cond.eof));
  }
  if (cfg.with_eme) {
    if (!cond.eme) throw ValidationError("denoiser: missing micro-map embedding");
    c = add(c, eme_conv_(cond.eme));
  }

  auto k_embed = Tensor::make({B, cfg.pe_dim});
  for (int b = 0; b < B; ++b) {
    auto row = sinusoidal_embed(static_cast<double>(cond.k[b]), cfg.pe_dim);
    std::copy(row.begin(), row.end(),
              k_embed->v.begin() + static_cast<size_t>(b) * cfg.pe_dim);
  }
  c = add_bcast_tokens(c, k_proj_(k_embed));
  c = add_bcast(c, pe_proj_(positional_encoding(T, cfg.pe_dim)));

  auto h = x_proj_(xk);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    h = blocks_[i](h, c);
    if (h->has_nan())
      throw Error("denoiser: NaN after block " + std::to_string(i));
  }
  auto mod = final_mod_(silu(c));
  auto shift = slice_lastdim(mod, 0, cfg.hidden_size);
  auto sc = slice_lastdim(mod, cfg.hidden_size, cfg.hidden_size);
  return head_(modulate(layernorm_lastdim(h), shift, sc));
}

ChannelModel ChannelModel::build(const DenoiserConfig& cfg, unsigned long long seed) {
  ChannelModel m;
  m.cfg = cfg;
  m.denoiser = std::make_unique<Denoiser>(m.store, cfg);
  if (cfg.with_eme) m.mfen = std::make_unique<Mfen>(m.store, cfg.mfen);
  m.denoiser->init(seed);
  if (m.mfen) {
    std::mt19937_64 rng(seed + 1);
    m.mfen->init(0.02, rng);
  }
  return m;
}

static json config_to_json(const DenoiserConfig& c) {
  json j;
  j["hidden_size"] = c.hidden_size;
  j["attention_heads"] = c.attention_heads;
  j["blocks"] = c.blocks;
  j["condition_channels"] = c.condition_channels;
  j["pe_dim"] = c.pe_dim;
  j["with_ere"] = c.with_ere;
  j["with_eme"] = c.with_eme;
  j["with_eof"] = c.with_eof;
  j["ere_dim"] = c.ere_dim;
  j["mfen"] = {{"cnn_hidden", c.mfen.cnn_hidden}, {"cnn_layers", c.mfen.cnn_layers},
               {"kernel", c.mfen.kernel},         {"attn_dim", c.mfen.attn_dim},
               {"attn_heads", c.mfen.attn_heads}, {"out_dim", c.mfen.out_dim}};
  return j;
}

static DenoiserConfig config_from_json(const json& j) {
  DenoiserConfig c;
  c.hidden_size = j.at("hidden_size").get<int>();
  c.attention_heads = j.at("attention_heads").get<int>();
  c.blocks = j.at("blocks").get<int>();
  c.condition_channels = j.at("condition_channels").get<int>();
  c.pe_dim = j.at("pe_dim").get<int>();
  c.with_ere = j.at("with_ere").get<bool>();
  c.with_eme = j.at("with_eme").get<bool>();
  c.with_eof = j.at("with_eof").get<bool>();
  c.ere_dim = j.at("ere_dim").get<int>();
  const json& m = j.at("mfen");
  c.mfen.cnn_hidden = m.at("cnn_hidden").get<int>();
  c.mfen.cnn_layers = m.at("cnn_layers").get<int>();
  c.mfen.kernel = m.at("kernel").get<int>();
  c.mfen.attn_dim = m.at("attn_dim").get<int>();
  c.mfen.attn_heads = m.at("attn_heads").get<int>();
  c.mfen.out_dim = m.at("out_dim").get<int>();
  return c;
}

void save_checkpoint(const ChannelModel& model, const std::string& path) {
  std::string blob_path = path + ".bin";
  std::ofstream bin(blob_path, std::ios::binary);
  if (!bin) throw Error("cannot open for writing: " + blob_path);

  json manifest;
  manifest["format"] = "ckpt_v1";
  manifest["config"] = config_to_json(model.cfg);
  json plist = json::array();
  size_t offset = 0;
  for (const auto& [name, t] : model.store.all()) {
    plist.push_back({{"name", name}, {"shape", t->shape}, {"offset", offset}});
    for (double d : t->v) {
      float f = static_cast<float>(d);
      bin.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
    offset += t->size();
  }
  manifest["params"] = plist;
  manifest["total"] = offset;
  manifest["preprocess"] = {{"np_mean", model.pre.np_mean},
                            {"np_std", model.pre.np_std},
                            {"ere_mean", model.pre.ere_mean},
                            {"ere_std", model.pre.ere_std},
                            {"crop_mean", model.pre.crop_mean},
                            {"crop_std", model.pre.crop_std},
                            {"target_mean", model.pre.target_mean},
                            {"target_std", model.pre.target_std}};

  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << manifest.dump(2) << "\n";
}

ChannelModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (manifest.value("format", "") != "ckpt_v1")
    throw ParseError(path + ": unsupported checkpoint format");

  auto model = ChannelModel::build(config_from_json(manifest.at("config")), 0);
  if (manifest.contains("preprocess")) {
    const json& p = manifest["preprocess"];
    model.pre.np_mean = p.at("np_mean").get<std::vector<double>>();
    model.pre.np_std = p.at("np_std").get<std::vector<double>>();
    model.pre.ere_mean = p.at("ere_mean").get<std::vector<double>>();
    model.pre.ere_std = p.at("ere_std").get<std::vector<double>>();
    model.pre.crop_mean = p.at("crop_mean").get<std::vector<double>>();
    model.pre.crop_std = p.at("crop_std").get<std::vector<double>>();
    model.pre.target_mean = p.at("target_mean").get<double>();
    model.pre.target_std = p.at("target_std").get<double>();
  }

  std::string blob_path = path + ".bin";
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw ParseError("cannot open checkpoint blob: " + blob_path);

  for (const json& p : manifest.at("params")) {
    auto t = model.store.get(p.at("name").get<std::string>());
    auto shape = p.at("shape").get<std::vector<int>>();
    if (shape != t->shape)
      throw ParseError(path + ": shape mismatch for " + p.at("name").get<std::string>());
    bin.seekg(static_cast<std::streamoff>(p.at("offset").get<size_t>() * sizeof(float)));
    for (double& d : t->v) {
      float f;
      bin.read(reinterpret_cast<char*>(&f), sizeof(f));
      if (!bin) throw ParseError(blob_path + ": truncated blob");
      d = f;
    }
  }
  return model;
}

size_t copy_matching_params(const ChannelModel& src, ChannelModel& dst) {
  size_t copied = 0;
  for (const auto& [name, t] : dst.store.all()) {
    for (const auto& [sname, st] : src.store.all()) {
      if (sname == name && st->shape == t->shape) {
        t->v = st->v;
        ++copied;
        break;
      }
    }
  }
  return copied;
}

}  // namespace channeldiff::neural
