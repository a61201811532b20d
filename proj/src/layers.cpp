#include "channeldiff/neural/layers.hpp"

#include <algorithm>

namespace channeldiff::neural {

TensorP ParamStore::create(const std::string& name, std::vector<int> shape) {
  for (const auto& [n, t] : params_)
    if (n == name) throw ConfigError("duplicate parameter name: " + name);
  auto t = Tensor::make(std::move(shape), /*requires_grad=*/true);
  params_.push_back({name, t});
  return t;
}

TensorP ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw ConfigError("unknown parameter: " + name);
}

std::vector<TensorP> ParamStore::tensors() const {
  std::vector<TensorP> out;
  out.reserve(params_.size());
  for (const auto& [n, t] : params_) out.push_back(t);
  return out;
}

size_t ParamStore::param_count() const {
  size_t n = 0;
  for (const auto& [name, t] : params_) n += t->size();
  return n;
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out) {
  w = store.create(name + ".w", {in, out});
  b = store.create(name + ".b", {out});
}

void Linear::init_trunc_normal(double sigma, std::mt19937_64& rng) {
  trunc_normal_init(*w, sigma, rng);
  std::fill(b->v.begin(), b->v.end(), 0.0);
}

void Linear::init_zero() {
  std::fill(w->v.begin(), w->v.end(), 0.0);
  std::fill(b->v.begin(), b->v.end(), 0.0);
}

TensorP Linear::operator()(const TensorP& x) const {
  return add_bcast(matmul(x, w), b);
}

Conv1d::Conv1d(ParamStore& store, const std::string& name, int in, int out, int kernel)
    : k(kernel) {
  w = store.create(name + ".w", {k * in, out});
  b = store.create(name + ".b", {out});
}

void Conv1d::init_trunc_normal(double sigma, std::mt19937_64& rng) {
  trunc_normal_init(*w, sigma, rng);
  std::fill(b->v.begin(), b->v.end(), 0.0);
}

void Conv1d::init_zero() {
  std::fill(w->v.begin(), w->v.end(), 0.0);
  std::fill(b->v.begin(), b->v.end(), 0.0);
}

TensorP Conv1d::operator()(const TensorP& x) const {
  return add_bcast(matmul(im2col_1d(x, k), w), b);
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in, int out, int kernel)
    : k(kernel) {
  w = store.create(name + ".w", {k * k * in, out});
  b = store.create(name + ".b", {out});
}

void Conv2d::init_trunc_normal(double sigma, std::mt19937_64& rng) {
  trunc_normal_init(*w, sigma, rng);
  std::fill(b->v.begin(), b->v.end(), 0.0);
}

TensorP Conv2d::operator()(const TensorP& x, int S) const {
  (void)S;
  return add_bcast(matmul(im2col_2d(x, k), w), b);
}

SelfAttention::SelfAttention(ParamStore& store, const std::string& name, int dim,
                             int heads_)
    : heads(heads_),
      wq(store, name + ".q", dim, dim),
      wk(store, name + ".k", dim, dim),
      wv(store, name + ".v", dim, dim),
      wo(store, name + ".o", dim, dim) {
  if (dim % heads_ != 0) throw ConfigError("attention dim must divide heads");
}

void SelfAttention::init(double sigma, std::mt19937_64& rng) {
  wq.init_trunc_normal(sigma, rng);
  wk.init_trunc_normal(sigma, rng);
  wv.init_trunc_normal(sigma, rng);
  wo.init_trunc_normal(sigma, rng);
}

TensorP SelfAttention::operator()(const TensorP& x) const {
  int dim = x->shape.back();
  int dh = dim / heads;
  auto q = wq(x), k = wk(x), v = wv(x);
  std::vector<TensorP> outs;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    auto qh = slice_lastdim(q, h * dh, dh);
    auto kh = slice_lastdim(k, h * dh, dh);
    auto vh = slice_lastdim(v, h * dh, dh);
    auto scores = scale(bmm_nt(qh, kh), inv_sqrt);
    auto p = softmax_lastdim(scores);
    outs.push_back(bmm(p, vh));
  }
  return wo(heads == 1 ? outs[0] : concat_lastdim(outs));
}

TensorP modulate(const TensorP& x, const TensorP& shift, const TensorP& scale_t) {
  return add(mul(x, add_scalar(scale_t, 1.0)), shift);
}

AdaLnBlock::AdaLnBlock(ParamStore& store, const std::string& name, int hidden_,
                       int heads, int cond_dim)
    : hidden(hidden_),
      attn(store, name + ".attn", hidden_, heads),
      mlp1(store, name + ".mlp1", hidden_, 4 * hidden_),
      mlp2(store, name + ".mlp2", 4 * hidden_, hidden_),
      modulation(store, name + ".mod", cond_dim, 6 * hidden_) {}

void AdaLnBlock::init(double sigma, std::mt19937_64& rng) {
  attn.init(sigma, rng);
  mlp1.init_trunc_normal(sigma, rng);
  mlp2.init_trunc_normal(sigma, rng);
  modulation.init_zero();  // identity start
}

TensorP AdaLnBlock::operator()(const TensorP& x, const TensorP& cond) const {
  auto mod = modulation(silu(cond));  // [B,T,6H]
  auto shift1 = slice_lastdim(mod, 0, hidden);
  auto scale1 = slice_lastdim(mod, hidden, hidden);
  auto gate1 = slice_lastdim(mod, 2 * hidden, hidden);
  auto shift2 = slice_lastdim(mod, 3 * hidden, hidden);
  auto scale2 = slice_lastdim(mod, 4 * hidden, hidden);
  auto gate2 = slice_lastdim(mod, 5 * hidden, hidden);

  auto h1 = attn(modulate(layernorm_lastdim(x), shift1, scale1));
  auto x1 = add(x, mul(gate1, h1));
  auto h2 = mlp2(gelu(mlp1(modulate(layernorm_lastdim(x1), shift2, scale2))));
  return add(x1, mul(gate2, h2));
}

std::vector<double> sinusoidal_embed(double pos, int D) {
  if (D % 2 != 0) throw ValidationError("positional encoding dim must be even");
  std::vector<double> out(D);
  for (int i = 0; i < D / 2; ++i) {
    double div_sin = std::pow(10.0, 4.0 * (2.0 * i) / D);
    double div_cos = std::pow(10.0, 4.0 * (2.0 * i + 1.0) / D);
    out[2 * i] = std::sin(pos / div_sin);
    out[2 * i + 1] = std::cos(pos / div_cos);
  }
  return out;
}

TensorP positional_encoding(int T, int D_pe) {
  auto pe = Tensor::make({T, D_pe});
  for (int t = 0; t < T; ++t) {
    auto row = sinusoidal_embed(t, D_pe);
    std::copy(row.begin(), row.end(), pe->v.begin() + static_cast<size_t>(t) * D_pe);
  }
  return pe;
}

}  // namespace channeldiff::neural
