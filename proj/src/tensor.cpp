#include "channeldiff/neural/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace channeldiff::neural {

namespace {

size_t shape_size(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 1) throw ValidationError("tensor dims must be >= 1");
    n *= static_cast<size_t>(d);
  }
  return n;
}

}  // namespace

TensorP Tensor::make(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->v.assign(shape_size(t->shape), 0.0);
  t->requires_grad = requires_grad;
  if (requires_grad) t->g.assign(t->v.size(), 0.0);
  return t;
}

TensorP Tensor::from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad) {
  auto t = make(std::move(shape), requires_grad);
  if (values.size() != t->v.size())
    throw ValidationError("value count does not match shape");
  t->v = std::move(values);
  return t;
}

bool Tensor::has_nan() const {
  for (double x : v)
    if (std::isnan(x) || std::isinf(x)) return true;
  return false;
}

void backward(const TensorP& loss) {
  if (loss->size() != 1) throw ValidationError("backward needs a scalar loss");
  // Reverse topological order by iterative DFS.
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> seen;
  std::vector<std::pair<TensorP, size_t>> stack{{loss, 0}};
  std::vector<TensorP> keepalive;
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx == 0 && seen.count(node.get())) {
      stack.pop_back();
      continue;
    }
    if (idx < node->parents.size()) {
      TensorP child = node->parents[idx];
      ++idx;
      if (!seen.count(child.get())) stack.push_back({child, 0});
    } else {
      seen.insert(node.get());
      order.push_back(node.get());
      keepalive.push_back(node);
      stack.pop_back();
    }
  }
  for (Tensor* t : order) t->ensure_grad();
  std::fill(loss->g.begin(), loss->g.end(), 0.0);
  loss->g[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    // Intermediate grads start at zero except the loss seed.
    Tensor* t = *it;
    if (t != loss.get() && !t->requires_grad && t->backfn == nullptr) continue;
    if (t->backfn) t->backfn(*t);
  }
}

namespace {

TensorP unary(const TensorP& a, std::vector<int> shape) {
  auto out = Tensor::make(std::move(shape));
  out->parents = {a};
  return out;
}

void ensure(bool cond, const char* msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace

TensorP add(const TensorP& a, const TensorP& b) {
  ensure(a->shape == b->shape, "add: shape mismatch");
  auto out = unary(a, a->shape);
  out->parents = {a, b};
  for (size_t i = 0; i < a->size(); ++i) out->v[i] = a->v[i] + b->v[i];
  out->backfn = [a, b](Tensor& self) {
    a->ensure_grad();
    b->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) {
      a->g[i] += self.g[i];
      b->g[i] += self.g[i];
    }
  };
  return out;
}

TensorP sub(const TensorP& a, const TensorP& b) {
  ensure(a->shape == b->shape, "sub: shape mismatch");
  auto out = unary(a, a->shape);
  out->parents = {a, b};
  for (size_t i = 0; i < a->size(); ++i) out->v[i] = a->v[i] - b->v[i];
  out->backfn = [a, b](Tensor& self) {
    a->ensure_grad();
    b->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) {
      a->g[i] += self.g[i];
      b->g[i] -= self.g[i];
    }
  };
  return out;
}

TensorP mul(const TensorP& a, const TensorP& b) {
  ensure(a->shape == b->shape, "mul: shape mismatch");
  auto out = unary(a, a->shape);
  out->parents = {a, b};
  for (size_t i = 0; i < a->size(); ++i) out->v[i] = a->v[i] * b->v[i];
  out->backfn = [a, b](Tensor& self) {
    a->ensure_grad();
    b->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) {
      a->g[i] += self.g[i] * b->v[i];
      b->g[i] += self.g[i] * a->v[i];
    }
  };
  return out;
}

TensorP scale(const TensorP& a, double s) {
  auto out = unary(a, a->shape);
  for (size_t i = 0; i < a->size(); ++i) out->v[i] = a->v[i] * s;
  out->backfn = [a, s](Tensor& self) {
    a->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) a->g[i] += self.g[i] * s;
  };
  return out;
}

TensorP add_scalar(const TensorP& a, double s) {
  auto out = unary(a, a->shape);
  for (size_t i = 0; i < a->size(); ++i) out->v[i] = a->v[i] + s;
  out->backfn = [a](Tensor& self) {
    a->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) a->g[i] += self.g[i];
  };
  return out;
}

TensorP add_bcast(const TensorP& a, const TensorP& b) {
  size_t bn = b->size();
  ensure(bn > 0 && a->size() % bn == 0, "add_bcast: trailing size mismatch");
  auto out = unary(a, a->shape);
  out->parents = {a, b};
  for (size_t i = 0; i < a->size(); ++i) out->v[i] = a->v[i] + b->v[i % bn];
  out->backfn = [a, b, bn](Tensor& self) {
    a->ensure_grad();
    b->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) {
      a->g[i] += self.g[i];
      b->g[i % bn] += self.g[i];
    }
  };
  return out;
}

TensorP add_bcast_tokens(const TensorP& a, const TensorP& b) {
  ensure(a->shape.size() == 3 && b->shape.size() == 2, "add_bcast_tokens: need [B,T,C] and [B,C]");
  ensure(a->shape[0] == b->shape[0] && a->shape[2] == b->shape[1],
         "add_bcast_tokens: B/C mismatch");
  int B = a->shape[0], T = a->shape[1], C = a->shape[2];
  auto out = unary(a, a->shape);
  out->parents = {a, b};
  for (int bi = 0; bi < B; ++bi)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) {
        size_t ia = (static_cast<size_t>(bi) * T + t) * C + c;
        out->v[ia] = a->v[ia] + b->v[static_cast<size_t>(bi) * C + c];
      }
  out->backfn = [a, b, B, T, C](Tensor& self) {
    a->ensure_grad();
    b->ensure_grad();
    for (int bi = 0; bi < B; ++bi)
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c) {
          size_t ia = (static_cast<size_t>(bi) * T + t) * C + c;
          a->g[ia] += self.g[ia];
          b->g[static_cast<size_t>(bi) * C + c] += self.g[ia];
        }
  };
  return out;
}

namespace {

// C = A[M,K] x B[K,N] accumulate, row-major.
void mm_acc(const double* A, const double* B, double* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const double* a = A + static_cast<size_t>(i) * K;
    double* c = C + static_cast<size_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      double av = a[k];
      if (av == 0.0) continue;
      const double* b = B + static_cast<size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C = A[M,K] x B[N,K]^T accumulate.
void mm_nt_acc(const double* A, const double* B, double* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const double* a = A + static_cast<size_t>(i) * K;
    double* c = C + static_cast<size_t>(i) * N;
    for (int j = 0; j < N; ++j) {
      const double* b = B + static_cast<size_t>(j) * K;
      double acc = 0;
      for (int k = 0; k < K; ++k) acc += a[k] * b[k];
      c[j] += acc;
    }
  }
}

// C = A[K,M]^T x B[K,N] accumulate.
void mm_tn_acc(const double* A, const double* B, double* C, int M, int K, int N) {
  for (int k = 0; k < K; ++k) {
    const double* a = A + static_cast<size_t>(k) * M;
    const double* b = B + static_cast<size_t>(k) * N;
    for (int i = 0; i < M; ++i) {
      double av = a[i];
      if (av == 0.0) continue;
      double* c = C + static_cast<size_t>(i) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

}  // namespace

TensorP matmul(const TensorP& a, const TensorP& w) {
  ensure(w->shape.size() == 2, "matmul: weight must be 2-D");
  ensure(!a->shape.empty() && a->shape.back() == w->shape[0],
         "matmul: inner dim mismatch");
  int K = w->shape[0], N = w->shape[1];
  int M = static_cast<int>(a->size()) / K;
  std::vector<int> out_shape = a->shape;
  out_shape.back() = N;
  auto out = Tensor::make(out_shape);
  out->parents = {a, w};
  mm_acc(a->v.data(), w->v.data(), out->v.data(), M, K, N);
  out->backfn = [a, w, M, K, N](Tensor& self) {
    a->ensure_grad();
    w->ensure_grad();
    // dA = dC x W^T ; dW = A^T x dC
    mm_nt_acc(self.g.data(), w->v.data(), a->g.data(), M, N, K);
    mm_tn_acc(a->v.data(), self.g.data(), w->g.data(), K, M, N);
  };
  return out;
}

TensorP bmm(const TensorP& a, const TensorP& b) {
  ensure(a->shape.size() == 3 && b->shape.size() == 3, "bmm: need 3-D tensors");
  ensure(a->shape[0] == b->shape[0] && a->shape[2] == b->shape[1], "bmm: shape mismatch");
  int B = a->shape[0], M = a->shape[1], K = a->shape[2], N = b->shape[2];
  auto out = Tensor::make({B, M, N});
  out->parents = {a, b};
  for (int i = 0; i < B; ++i)
    mm_acc(a->v.data() + static_cast<size_t>(i) * M * K,
           b->v.data() + static_cast<size_t>(i) * K * N,
           out->v.data() + static_cast<size_t>(i) * M * N, M, K, N);
  out->backfn = [a, b, B, M, K, N](Tensor& self) {
    a->ensure_grad();
    b->ensure_grad();
    for (int i = 0; i < B; ++i) {
      const double* dc = self.g.data() + static_cast<size_t>(i) * M * N;
      mm_nt_acc(dc, b->v.data() + static_cast<size_t>(i) * K * N,
                a->g.data() + static_cast<size_t>(i) * M * K, M, N, K);
      mm_tn_acc(a->v.data() + static_cast<size_t>(i) * M * K, dc,
                b->g.data() + static_cast<size_t>(i) * K * N, K, M, N);
    }
  };
  return out;
}

TensorP bmm_nt(const TensorP& a, const TensorP& b) {
  ensure(a->shape.size() == 3 && b->shape.size() == 3, "bmm_nt: need 3-D tensors");
  ensure(a->shape[0] == b->shape[0] && a->shape[2] == b->shape[2], "bmm_nt: shape mismatch");
  int B = a->shape[0], M = a->shape[1], K = a->shape[2], N = b->shape[1];
  auto out = Tensor::make({B, M, N});
  out->parents = {a, b};
  for (int i = 0; i < B; ++i)
    mm_nt_acc(a->v.data() + static_cast<size_t>(i) * M * K,
              b->v.data() + static_cast<size_t>(i) * N * K,
              out->v.data() + static_cast<size_t>(i) * M * N, M, K, N);
  out->backfn = [a, b, B, M, K, N](Tensor& self) {
    a->ensure_grad();
    b->ensure_grad();
    for (int i = 0; i < B; ++i) {
      const double* dc = self.g.data() + static_cast<size_t>(i) * M * N;
      // dA = dC x B ; dB = dC^T x A
      mm_acc(dc, b->v.data() + static_cast<size_t>(i) * N * K,
             a->g.data() + static_cast<size_t>(i) * M * K, M, N, K);
      mm_tn_acc(dc, a->v.data() + static_cast<size_t>(i) * M * K,
                b->g.data() + static_cast<size_t>(i) * N * K, N, M, K);
    }
  };
  return out;
}

TensorP softmax_lastdim(const TensorP& a) {
  int C = a->shape.back();
  size_t rows = a->size() / C;
  auto out = unary(a, a->shape);
  for (size_t r = 0; r < rows; ++r) {
    const double* x = a->v.data() + r * C;
    double* y = out->v.data() + r * C;
    double mx = x[0];
    for (int i = 1; i < C; ++i) mx = std::max(mx, x[i]);
    double sum = 0;
    for (int i = 0; i < C; ++i) {
      y[i] = std::exp(x[i] - mx);
      sum += y[i];
    }
    for (int i = 0; i < C; ++i) y[i] /= sum;
  }
  out->backfn = [a, C, rows](Tensor& self) {
    a->ensure_grad();
    for (size_t r = 0; r < rows; ++r) {
      const double* y = self.v.data() + r * C;
      const double* dy = self.g.data() + r * C;
      double* dx = a->g.data() + r * C;
      double dotp = 0;
      for (int i = 0; i < C; ++i) dotp += y[i] * dy[i];
      for (int i = 0; i < C; ++i) dx[i] += y[i] * (dy[i] - dotp);
    }
  };
  return out;
}

TensorP layernorm_lastdim(const TensorP& a, double eps) {
  int C = a->shape.back();
  size_t rows = a->size() / C;
  auto out = unary(a, a->shape);
  auto stats = std::make_shared<std::vector<double>>(rows * 2);
  for (size_t r = 0; r < rows; ++r) {
    const double* x = a->v.data() + r * C;
    double mean = 0;
    for (int i = 0; i < C; ++i) mean += x[i];
    mean /= C;
    double var = 0;
    for (int i = 0; i < C; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= C;
    double inv = 1.0 / std::sqrt(var + eps);
    (*stats)[2 * r] = mean;
    (*stats)[2 * r + 1] = inv;
    double* y = out->v.data() + r * C;
    for (int i = 0; i < C; ++i) y[i] = (x[i] - mean) * inv;
  }
  out->backfn = [a, C, rows, stats](Tensor& self) {
    a->ensure_grad();
    for (size_t r = 0; r < rows; ++r) {
      const double* y = self.v.data() + r * C;
      const double* dy = self.g.data() + r * C;
      double* dx = a->g.data() + r * C;
      double inv = (*stats)[2 * r + 1];
      double mean_dy = 0, mean_ydy = 0;
      for (int i = 0; i < C; ++i) {
        mean_dy += dy[i];
        mean_ydy += y[i] * dy[i];
      }
      mean_dy /= C;
      mean_ydy /= C;
      for (int i = 0; i < C; ++i)
        dx[i] += inv * (dy[i] - mean_dy - y[i] * mean_ydy);
    }
  };
  return out;
}

TensorP gelu(const TensorP& a) {
  auto out = unary(a, a->shape);
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  for (size_t i = 0; i < a->size(); ++i) {
    double x = a->v[i];
    double u = c * (x + 0.044715 * x * x * x);
    out->v[i] = 0.5 * x * (1.0 + std::tanh(u));
  }
  out->backfn = [a, c](Tensor& self) {
    a->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) {
      double x = a->v[i];
      double u = c * (x + 0.044715 * x * x * x);
      double th = std::tanh(u);
      double du = c * (1.0 + 3.0 * 0.044715 * x * x);
      double d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
      a->g[i] += self.g[i] * d;
    }
  };
  return out;
}

TensorP silu(const TensorP& a) {
  auto out = unary(a, a->shape);
  for (size_t i = 0; i < a->size(); ++i) {
    double s = 1.0 / (1.0 + std::exp(-a->v[i]));
    out->v[i] = a->v[i] * s;
  }
  out->backfn = [a](Tensor& self) {
    a->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) {
      double s = 1.0 / (1.0 + std::exp(-a->v[i]));
      a->g[i] += self.g[i] * (s + a->v[i] * s * (1.0 - s));
    }
  };
  return out;
}

TensorP slice_lastdim(const TensorP& a, int offset, int len) {
  int C = a->shape.back();
  ensure(offset >= 0 && len >= 1 && offset + len <= C, "slice_lastdim: out of range");
  size_t rows = a->size() / C;
  std::vector<int> shape = a->shape;
  shape.back() = len;
  auto out = Tensor::make(shape);
  out->parents = {a};
  for (size_t r = 0; r < rows; ++r)
    for (int i = 0; i < len; ++i)
      out->v[r * len + i] = a->v[r * C + offset + i];
  out->backfn = [a, C, rows, offset, len](Tensor& self) {
    a->ensure_grad();
    for (size_t r = 0; r < rows; ++r)
      for (int i = 0; i < len; ++i)
        a->g[r * C + offset + i] += self.g[r * len + i];
  };
  return out;
}

TensorP concat_lastdim(const std::vector<TensorP>& parts) {
  ensure(!parts.empty(), "concat_lastdim: empty");
  int total = 0;
  size_t rows = parts[0]->size() / parts[0]->shape.back();
  for (const auto& p : parts) {
    ensure(p->size() / p->shape.back() == rows, "concat_lastdim: row mismatch");
    total += p->shape.back();
  }
  std::vector<int> shape = parts[0]->shape;
  shape.back() = total;
  auto out = Tensor::make(shape);
  out->parents = parts;
  int off = 0;
  for (const auto& p : parts) {
    int c = p->shape.back();
    for (size_t r = 0; r < rows; ++r)
      for (int i = 0; i < c; ++i)
        out->v[r * total + off + i] = p->v[r * c + i];
    off += c;
  }
  out->backfn = [parts, rows, total](Tensor& self) {
    int off2 = 0;
    for (const auto& p : parts) {
      p->ensure_grad();
      int c = p->shape.back();
      for (size_t r = 0; r < rows; ++r)
        for (int i = 0; i < c; ++i)
          p->g[r * c + i] += self.g[r * total + off2 + i];
      off2 += c;
    }
  };
  return out;
}

TensorP reshape(const TensorP& a, std::vector<int> shape) {
  ensure(shape_size(shape) == a->size(), "reshape: size mismatch");
  auto out = Tensor::make(std::move(shape));
  out->parents = {a};
  out->v = a->v;
  out->backfn = [a](Tensor& self) {
    a->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) a->g[i] += self.g[i];
  };
  return out;
}

TensorP mean_tokens(const TensorP& a) {
  ensure(a->shape.size() == 3, "mean_tokens: need [B,T,C]");
  int B = a->shape[0], T = a->shape[1], C = a->shape[2];
  auto out = Tensor::make({B, C});
  out->parents = {a};
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        out->v[static_cast<size_t>(b) * C + c] +=
            a->v[(static_cast<size_t>(b) * T + t) * C + c] / T;
  out->backfn = [a, B, T, C](Tensor& self) {
    a->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
          a->g[(static_cast<size_t>(b) * T + t) * C + c] +=
              self.g[static_cast<size_t>(b) * C + c] / T;
  };
  return out;
}

TensorP im2col_1d(const TensorP& a, int k) {
  ensure(a->shape.size() == 3, "im2col_1d: need [B,T,C]");
  ensure(k >= 1 && k % 2 == 1, "im2col_1d: odd kernel required");
  int B = a->shape[0], T = a->shape[1], C = a->shape[2];
  int half = k / 2;
  auto out = Tensor::make({B, T, k * C});
  out->parents = {a};
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < k; ++j) {
        int ts = t + j - half;
        if (ts < 0 || ts >= T) continue;  // zero pad
        for (int c = 0; c < C; ++c)
          out->v[((static_cast<size_t>(b) * T + t) * k + j) * C + c] =
              a->v[(static_cast<size_t>(b) * T + ts) * C + c];
      }
  out->backfn = [a, B, T, C, k, half](Tensor& self) {
    a->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t)
        for (int j = 0; j < k; ++j) {
          int ts = t + j - half;
          if (ts < 0 || ts >= T) continue;
          for (int c = 0; c < C; ++c)
            a->g[(static_cast<size_t>(b) * T + ts) * C + c] +=
                self.g[((static_cast<size_t>(b) * T + t) * k + j) * C + c];
        }
  };
  return out;
}

TensorP im2col_2d(const TensorP& a, int k) {
  ensure(a->shape.size() == 4, "im2col_2d: need [N,C,S,S]");
  ensure(k >= 1 && k % 2 == 1, "im2col_2d: odd kernel required");
  int N = a->shape[0], C = a->shape[1], S = a->shape[2];
  ensure(a->shape[3] == S, "im2col_2d: square input required");
  int half = k / 2;
  auto out = Tensor::make({N, S * S, k * k * C});
  out->parents = {a};
  auto src = [C, S](int n, int c, int y, int x) {
    return ((static_cast<size_t>(n) * C + c) * S + y) * S + x;
  };
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        size_t row = (static_cast<size_t>(n) * S * S + static_cast<size_t>(y) * S + x) *
                     (k * k * C);
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) {
            int yy = y + dy - half, xx = x + dx - half;
            if (yy < 0 || yy >= S || xx < 0 || xx >= S) continue;
            for (int c = 0; c < C; ++c)
              out->v[row + (static_cast<size_t>(dy) * k + dx) * C + c] =
                  a->v[src(n, c, yy, xx)];
          }
      }
  out->backfn = [a, N, C, S, k, half, src](Tensor& self) {
    a->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
          size_t row = (static_cast<size_t>(n) * S * S + static_cast<size_t>(y) * S + x) *
                       (k * k * C);
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              int yy = y + dy - half, xx = x + dx - half;
              if (yy < 0 || yy >= S || xx < 0 || xx >= S) continue;
              for (int c = 0; c < C; ++c)
                a->g[src(n, c, yy, xx)] +=
                    self.g[row + (static_cast<size_t>(dy) * k + dx) * C + c];
            }
        }
  };
  return out;
}

TensorP tokens_to_chw(const TensorP& a, int S) {
  ensure(a->shape.size() == 3, "tokens_to_chw: need [N,P,C]");
  ensure(a->shape[1] == S * S, "tokens_to_chw: token count != S*S");
  int N = a->shape[0], P = a->shape[1], C = a->shape[2];
  auto out = Tensor::make({N, C, S, S});
  out->parents = {a};
  for (int n = 0; n < N; ++n)
    for (int p = 0; p < P; ++p)
      for (int c = 0; c < C; ++c)
        out->v[(static_cast<size_t>(n) * C + c) * P + p] =
            a->v[(static_cast<size_t>(n) * P + p) * C + c];
  out->backfn = [a, N, P, C](Tensor& self) {
    a->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int p = 0; p < P; ++p)
        for (int c = 0; c < C; ++c)
          a->g[(static_cast<size_t>(n) * P + p) * C + c] +=
              self.g[(static_cast<size_t>(n) * C + c) * P + p];
  };
  return out;
}

TensorP sum_all(const TensorP& a) {
  auto out = Tensor::make({1});
  out->parents = {a};
  double s = 0;
  for (double x : a->v) s += x;
  out->v[0] = s;
  out->backfn = [a](Tensor& self) {
    a->ensure_grad();
    for (size_t i = 0; i < a->size(); ++i) a->g[i] += self.g[0];
  };
  return out;
}

TensorP mean_all(const TensorP& a) {
  return scale(sum_all(a), 1.0 / a->size());
}

TensorP mse(const TensorP& a, const TensorP& b) {
  auto d = sub(a, b);
  return mean_all(mul(d, d));
}

void trunc_normal_init(Tensor& t, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& x : t.v) {
    double z;
    do {
      z = dist(rng);
    } while (std::abs(z) > 2.0);
    x = z * sigma;
  }
}

AdamOptimizer::AdamOptimizer(std::vector<TensorP> params, double lr, double beta1,
                             double beta2, double eps, double clip_norm)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      clip_norm_(clip_norm) {
  for (const auto& p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) {
    p->ensure_grad();
    std::fill(p->g.begin(), p->g.end(), 0.0);
  }
}

void AdamOptimizer::step() {
  ++t_;
  double norm2 = 0;
  for (auto& p : params_) {
    p->ensure_grad();
    for (double gi : p->g) norm2 += gi * gi;
  }
  last_grad_norm_ = std::sqrt(norm2);
  double clip = 1.0;
  if (clip_norm_ > 0 && last_grad_norm_ > clip_norm_)
    clip = clip_norm_ / last_grad_norm_;
  double bc1 = 1.0 - std::pow(beta1_, t_);
  double bc2 = 1.0 - std::pow(beta2_, t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    for (size_t j = 0; j < p.size(); ++j) {
      double gj = p.g[j] * clip;
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * gj;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * gj * gj;
      double mhat = m_[i][j] / bc1;
      double vhat = v_[i][j] / bc2;
      p.v[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double grad_check(const std::function<TensorP()>& forward, const TensorP& param,
                  const std::vector<double>& direction, double h) {
  if (direction.size() != param->size())
    throw ValidationError("grad_check: direction size mismatch");
  param->ensure_grad();
  std::fill(param->g.begin(), param->g.end(), 0.0);
  auto loss = forward();
  backward(loss);
  double analytic = 0;
  for (size_t i = 0; i < param->size(); ++i) analytic += param->g[i] * direction[i];

  std::vector<double> saved = param->v;
  for (size_t i = 0; i < param->size(); ++i) param->v[i] = saved[i] + h * direction[i];
  double fp = forward()->v[0];
  for (size_t i = 0; i < param->size(); ++i) param->v[i] = saved[i] - h * direction[i];
  double fm = forward()->v[0];
  param->v = saved;

  double numeric = (fp - fm) / (2.0 * h);
  // The central difference cannot resolve derivatives below the rounding
  // noise of the loss divided by the step; flat directions (e.g. softmax
  // shift invariances) would otherwise report noise/noise ~ 1.
  double noise_floor = 1e-9 * std::max(1.0, std::abs(loss->v[0])) / h;
  double denom = std::max({std::abs(analytic), std::abs(numeric), noise_floor});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace channeldiff::neural
