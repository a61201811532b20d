// Acceptance runner for the fast property suites: formula exactness, the
// image-method oracle, occlusion properties, embedding contracts, diffusion
// algebra, gradient checks and the metrics unit cases. Prints one line per
// criterion and exits nonzero when any fails.

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "channeldiff/diffusion.hpp"
#include "channeldiff/metrics.hpp"
#include "channeldiff/multipath.hpp"
#include "channeldiff/occlusion.hpp"

using namespace channeldiff;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool ok) {
  std::printf("criterion %2d  %-58s %s\n", criterion, what.c_str(),
              ok ? "PASS" : "FAIL");
  if (!ok) ++g_failures;
}

bool approx(double a, double b, double tol) { return std::abs(a - b) <= tol; }

bool within_ulp(double a, double b, int ulps) {
  double scale = std::max({std::abs(a), std::abs(b), 1.0});
  return std::abs(a - b) <= ulps * std::numeric_limits<double>::epsilon() * scale;
}

// ---- criterion 1: formula exactness ----
bool formula_exactness() {
  bool ok = true;
  ok &= approx(occlusion::knife_edge_loss(0.0), 6.033, 1e-3);
  ok &= occlusion::knife_edge_loss(-0.7) == 0.0;
  ok &= occlusion::knife_edge_loss(-2.0) == 0.0;
  ok &= approx(geometry::fresnel_radius(0.1, 100, 100), std::sqrt(5.0), 1e-9);
  ok &= approx(propagation::path_loss(propagation::Model::FSPM, 1000, 1e9, 30, 1.5),
               92.45, 0.01);
  ok &= approx(propagation::path_loss(propagation::Model::HATA_URBAN, 1000, 900e6,
                                      50, 1.5),
               123.33, 0.05);
  return ok;
}

// ---- criterion 2: image-method oracle over 500 random single-facade scenes ----
bool image_method_oracle() {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> uy(-60.0, 60.0);
  std::uniform_real_distribution<double> ux(5.0, 80.0);
  std::uniform_real_distribution<double> uz(1.0, 25.0);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    double y0 = -70, y1 = 70, roof = 40.0;
    geometry::PolygonScene scene;
    geometry::Building b;
    b.id = 0;
    b.roof_height = roof;
    b.footprint = {{0, y0}, {5, y0}, {5, y1}, {0, y1}};
    scene.buildings.push_back(b);

    geometry::Vec3 bs{ux(rng), uy(rng), uz(rng)};
    geometry::Vec3 ue{ux(rng), uy(rng), uz(rng)};
    auto paths = multipath::find_paths(scene, bs, ue, 1, 8);
    const multipath::ReflectedPath* facade = nullptr;
    for (const auto& p : paths)
      if (p.order == 1 && p.surfaces[0] == 0) facade = &p;

    for (const auto& p : paths) {
      // angle law on every reflection of every returned path
      for (int j = 0; j < p.order; ++j) {
        geometry::Vec3 in = p.waypoints[j + 1] - p.waypoints[j];
        geometry::Vec3 out = p.waypoints[j + 2] - p.waypoints[j + 1];
        geometry::Vec3 n = p.surfaces[j] == multipath::kGroundSurface
                               ? geometry::Vec3{0, 0, 1}
                               : geometry::Vec3{-1, 0, 0};
        double ci = std::abs(geometry::dot(in, n)) / geometry::norm(in);
        double co = std::abs(geometry::dot(out, n)) / geometry::norm(out);
        if (std::abs(ci - co) > 1e-6) return false;
      }
    }

    // reciprocity
    auto rev = multipath::find_paths(scene, ue, bs, 1, 8);
    if (rev.size() != paths.size()) return false;
    std::vector<double> df, dr;
    for (const auto& p : paths) df.push_back(p.d_ref);
    for (const auto& p : rev) dr.push_back(p.d_ref);
    std::sort(df.begin(), df.end());
    std::sort(dr.begin(), dr.end());
    for (size_t i = 0; i < df.size(); ++i)
      if (std::abs(df[i] - dr[i]) > 1e-9 * std::max(1.0, df[i])) return false;

    if (!facade) continue;
    // brute-force facade discretization: 10^4 sample points
    double best = 1e300;
    for (int i = 0; i < 100; ++i)
      for (int j = 0; j < 100; ++j) {
        geometry::Vec3 q{0.0, y0 + (y1 - y0) * (i + 0.5) / 100.0,
                         roof * (j + 0.5) / 100.0};
        double len = geometry::norm(q - bs) + geometry::norm(ue - q);
        best = std::min(best, len);
      }
    if (facade->d_ref > best * (1 + 1e-3)) return false;
    ++checked;
  }
  return checked > 100;  // most random scenes must actually exercise the facade
}

// ---- criterion 3: occlusion properties ----
double eof_oracle(double x_hi, double roof, double ht, double hr, double d,
                  double f_c, const occlusion::OcclusionConfig& cfg) {
  double lam = 299792458.0 / f_c;
  double d_bs = x_hi, d_ue = d - x_hi;
  double h_ray = ht + (hr - ht) * d_bs / d;
  double dh = roof - h_ray;
  double r = std::sqrt(lam * d_bs * d_ue / (d_bs + d_ue));
  double v = std::sqrt(2.0) * dh / r;
  double ld = (dh <= 0 || v <= -0.7)
                  ? 0.0
                  : 6.9 + 20 * std::log10(std::sqrt((v - 0.1) * (v - 0.1) + 1) + v - 0.1);
  double B = ld * std::exp(-d_ue / cfg.L_shadow);
  return std::exp(-std::min(B, cfg.B_max) / cfg.K_dB);
}

bool occlusion_properties() {
  occlusion::OcclusionConfig cfg;
  mapio::Trajectory traj;
  for (int i = 0; i < 12; ++i) {
    traj.xs.push_back(150.0 + 4.0 * i);
    traj.ys.push_back(10.0 * std::sin(i * 0.4));
  }

  // open scene
  geometry::PolygonScene open;
  auto s_open = occlusion::occlusion_factor(open, {0, 0, 30}, traj, nullptr, 2.6e9, cfg);
  for (const auto& st : s_open.steps)
    if (st.e_of != 1.0) return false;

  // 50-step monotone height sweep
  mapio::Trajectory line;
  line.xs = {220.0, 230.0};
  line.ys = {0.0, 0.0};
  double prev = 2.0;
  for (int step = 0; step < 50; ++step) {
    double roof = 2.0 + step * 1.0;
    geometry::PolygonScene scene;
    geometry::Building b;
    b.id = 0;
    b.roof_height = roof;
    b.footprint = {{90, -20}, {130, -20}, {130, 20}, {90, 20}};
    scene.buildings.push_back(b);
    auto s = occlusion::occlusion_factor(scene, {0, 0, 30}, line, nullptr, 2.6e9, cfg);
    if (s.steps[0].e_of > prev + 1e-12) return false;
    prev = s.steps[0].e_of;
  }

  // scalar oracle to 1e-12
  for (double roof : {8.0, 13.0, 17.0, 22.0, 35.0}) {
    geometry::PolygonScene scene;
    geometry::Building b;
    b.id = 0;
    b.roof_height = roof;
    b.footprint = {{80, -20}, {120, -20}, {120, 20}, {80, 20}};
    scene.buildings.push_back(b);
    mapio::Trajectory t2;
    t2.xs = {200.0, 200.0};
    t2.ys = {0.0, 0.0};
    auto s = occlusion::occlusion_factor(scene, {0, 0, 30}, t2, nullptr, 2.6e9, cfg);
    double expect = eof_oracle(120, roof, 30, 1.5, 200, 2.6e9, cfg);
    if (std::abs(s.steps[0].e_of - expect) > 1e-12) return false;
  }
  return true;
}

// ---- criterion 4: embedding contracts over 1000 random scenes ----
bool embedding_contracts() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> upos(-80.0, 80.0);
  std::uniform_real_distribution<double> usz(6.0, 30.0);
  std::uniform_real_distribution<double> uh(5.0, 35.0);
  std::uniform_int_distribution<int> unb(0, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    geometry::PolygonScene scene;
    int nb = unb(rng);
    for (int i = 0; i < nb; ++i) {
      geometry::Building b;
      b.id = i;
      double x = upos(rng), y = upos(rng), w = usz(rng), h = usz(rng);
      b.roof_height = uh(rng);
      b.footprint = {{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}};
      scene.buildings.push_back(b);
    }
    geometry::Vec3 bs{upos(rng), upos(rng), 30.0};
    geometry::Vec3 ue{upos(rng), upos(rng), 1.5};
    if (std::hypot(bs.x - ue.x, bs.y - ue.y) < 1.0) continue;
    auto paths = multipath::find_paths(scene, bs, ue, 1, 4);
    auto e = multipath::build_embedding(paths, 1, 4);
    if (e.n_rows != 5 || e.n_cols != 5) return false;
    // row 0 is the LOS slot: n = 0, reflection-angle slots zero
    if (e.at(0, 1) != 0.0 || e.at(0, 3) != 0.0 || e.at(0, 4) != 0.0) return false;
    // rows 1.. sorted by (n asc, d_ref asc); zero rows only at the tail
    bool seen_zero = false;
    double prev_d = -1;
    for (int r = 1; r < 5; ++r) {
      bool zero = true;
      for (int c = 0; c < 5; ++c) zero &= e.at(r, c) == 0.0;
      if (zero) {
        seen_zero = true;
        continue;
      }
      if (seen_zero) return false;  // non-zero row after padding began
      if (e.at(r, 0) < prev_d - 1e-12) return false;
      prev_d = e.at(r, 0);
    }
  }
  return true;
}

// ---- criterion 5: diffusion algebra ----
bool diffusion_algebra() {
  auto s = diffusion::make_schedule(100, 1e-4, 0.05);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 2);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> uk(1, 100);
  for (int trial = 0; trial < 100000; ++trial) {
    double x0 = n(rng), eps = n(rng), e = u(rng), x0h = n(rng);
    int k = uk(rng);
    double a = s.alpha_at(k), b = s.b_at(k);
    double xk = diffusion::forward_noise({x0}, k, {eps}, s)[0];
    if (!within_ulp(xk, std::fma(std::sqrt(a), x0, b * eps), 4)) return false;
    double pr = diffusion::prior_noise({x0h}, k, s)[0];
    if (!within_ulp(pr, std::sqrt(a) * x0h / (1.0 - a), 4)) return false;
    double de = diffusion::delta_target({eps}, {e}, {pr})[0];
    if (!within_ulp(de, std::fma(1.0 - e, pr, eps), 4)) return false;
  }

  // oracle reverse chain reconstructs x0 within 1e-6
  std::vector<double> x0(12), eps(12), e_of(12), x0hat(12);
  for (int i = 0; i < 12; ++i) {
    x0[i] = n(rng);
    eps[i] = n(rng);
    e_of[i] = u(rng);
    x0hat[i] = x0[i] + 0.2 * n(rng);
  }
  auto xK = diffusion::forward_noise(x0, s.K, eps, s);
  auto prior_at = [&](int k) { return diffusion::prior_noise(x0hat, k, s); };
  auto predict = [&](const std::vector<double>&, int k) {
    return diffusion::delta_target(eps, e_of, prior_at(k));
  };
  auto rec = diffusion::reverse_chain(predict, prior_at, e_of, xK, s);
  for (int i = 0; i < 12; ++i)
    if (std::abs(rec[i] - x0[i]) > 1e-6) return false;

  // e_of == 1 student chain bit-matches the teacher chain
  std::vector<double> ones(12, 1.0);
  auto pred2 = [&](const std::vector<double>& xk, int k) {
    std::vector<double> d(xk.size());
    for (size_t i = 0; i < xk.size(); ++i) d[i] = 0.2 * xk[i] - 0.01 * k;
    return d;
  };
  auto teacher = diffusion::reverse_chain(pred2, nullptr, {}, xK, s);
  auto student = diffusion::reverse_chain(pred2, prior_at, ones, xK, s);
  for (size_t i = 0; i < teacher.size(); ++i)
    if (teacher[i] != student[i]) return false;
  return true;
}

// ---- criterion 6: gradient checks ----
std::vector<double> rand_dir(size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool gradient_checks() {
  using namespace neural;
  std::mt19937_64 rng(55);
  std::normal_distribution<double> nd(0, 1);
  auto randn = [&](std::vector<int> shape) {
    auto t = Tensor::make(shape);
    for (auto& x : t->v) x = nd(rng);
    return t;
  };

  {  // per-block: linear
    ParamStore store;
    Linear lin(store, "lin", 5, 3);
    lin.init_trunc_normal(0.4, rng);
    auto x = randn({2, 4, 5});
    auto target = randn({2, 4, 3});
    auto fwd = [&]() { return mse(lin(x), target); };
    for (int t = 0; t < 5; ++t)
      for (const auto& p : store.tensors())
        if (double e = grad_check(fwd, p, rand_dir(p->size(), rng)); e >= 1e-4) {
          std::fprintf(stderr, "grad_check failure in %s: err=%g\n", "linear", e);
          return false;
        }
  }
  {  // per-block: attention
    ParamStore store;
    SelfAttention attn(store, "attn", 8, 2);
    attn.init(0.3, rng);
    auto x = randn({2, 5, 8});
    auto target = randn({2, 5, 8});
    auto fwd = [&]() { return mse(attn(x), target); };
    for (int t = 0; t < 5; ++t)
      for (const auto& p : store.tensors())
        if (double e = grad_check(fwd, p, rand_dir(p->size(), rng)); e >= 1e-4) {
          std::fprintf(stderr, "grad_check failure in %s: err=%g\n", "attention", e);
          return false;
        }
  }
  {  // per-block: adaLN transformer block
    ParamStore store;
    AdaLnBlock blk(store, "blk", 8, 2, 6);
    blk.init(0.3, rng);
    // give the zero-init modulation nonzero values so its gradient is live
    for (const auto& p : store.tensors())
      if (p->v == std::vector<double>(p->size(), 0.0))
        for (auto& x : p->v) x = 0.05;
    auto x = randn({2, 5, 8});
    auto cond = randn({2, 5, 6});
    auto target = randn({2, 5, 8});
    auto fwd = [&]() { return mse(blk(x, cond), target); };
    for (int t = 0; t < 5; ++t)
      for (const auto& p : store.tensors())
        if (double e = grad_check(fwd, p, rand_dir(p->size(), rng)); e >= 1e-4) {
          std::fprintf(stderr, "grad_check failure in %s: err=%g\n", "adaln", e);
          return false;
        }
  }
  {  // full model: denoiser + MFEN
    DenoiserConfig cfg;
    cfg.hidden_size = 16;
    cfg.attention_heads = 2;
    cfg.blocks = 2;
    cfg.condition_channels = 16;
    cfg.pe_dim = 8;
    cfg.with_ere = true;
    cfg.with_eof = true;
    cfg.with_eme = true;
    cfg.ere_dim = 5;
    cfg.mfen.cnn_hidden = 6;
    cfg.mfen.cnn_layers = 2;
    cfg.mfen.attn_dim = 6;
    cfg.mfen.attn_heads = 2;
    cfg.mfen.out_dim = 4;
    auto model = ChannelModel::build(cfg, 77);
    int B = 2, T = 5, S = 4;
    CondBatch cond;
    cond.net_params = randn({B, T, 10});
    cond.ere = randn({B, T, 5});
    cond.eof = randn({B, T, 1});
    cond.k = {1, 2};
    auto crops = randn({B * T, 2, S, S});
    auto xk = randn({B, T, 1});
    auto target = randn({B, T, 1});
    auto fwd = [&]() {
      auto eme = reshape(model.mfen->forward(crops, S), {B, T, cfg.mfen.out_dim});
      CondBatch c = cond;
      c.eme = eme;
      return mse(model.denoiser->forward(xk, c), target);
    };
    auto params = model.store.tensors();
    std::uniform_int_distribution<size_t> pick(0, params.size() - 1);
    for (int t = 0; t < 5; ++t) {
      auto p = params[pick(rng)];
      if (grad_check(fwd, p, rand_dir(p->size(), rng)) >= 1e-3) return false;
    }
  }
  return true;
}

// ---- criterion 10: metrics unit suite ----
bool metrics_suite() {
  using namespace metrics;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(-90, 5);
  std::vector<double> p, q;
  for (int i = 0; i < 400; ++i) p.push_back(n(rng));
  for (int i = 0; i < 400; ++i) q.push_back(n(rng) + 3.0);
  if (jsd(p, p) > 1e-12) return false;
  if (std::abs(jsd(p, q) - jsd(q, p)) > 1e-12) return false;
  std::vector<double> far;
  for (int i = 0; i < 400; ++i) far.push_back(n(rng) + 1e4);
  if (std::abs(jsd(p, far) - std::log(2.0)) > 1e-6) return false;

  std::vector<double> y = {-80, -90}, yhat = {-82, -86};
  if (std::abs(nrmse(y, yhat) - 0.31623) > 1e-4) return false;
  if (std::abs(mae(y, yhat) - 3.0) > 1e-12) return false;

  std::vector<RankRow> rows(3);
  rows[0] = {"a", 0.1, 0.01, 1.0, 0, 0};
  rows[1] = {"b", 0.1, 0.02, 2.0, 0, 0};
  rows[2] = {"c", 0.3, 0.03, 3.0, 0, 0};
  auto t = rank_models(rows);
  auto find = [&](const std::string& nm) {
    for (const auto& r : t)
      if (r.name == nm) return r.r_avg;
    return -1;
  };
  if (find("a") != 3 || find("b") != 5 || find("c") != 9) return false;

  if (std::abs(performance_density(0.2, 1e5) - 1.0) > 1e-12) return false;

  if (cdf_report(std::vector<double>(5, 0.0)).fraction_below_threshold != 1.0)
    return false;
  if (std::abs(cdf_report({5.0, 10.0}).fraction_below_threshold - 0.5) > 1e-12)
    return false;
  return true;
}

}  // namespace

int main() {
  report(1, "closed-form hand cases (knife edge, Fresnel, FSPM, Hata)",
         formula_exactness());
  report(2, "image-method brute-force oracle, reciprocity, angle law",
         image_method_oracle());
  report(3, "occlusion factor properties and scalar oracle", occlusion_properties());
  report(4, "reflection embedding shape/sorting/padding contracts",
         embedding_contracts());
  report(5, "diffusion forward/prior/delta algebra and reverse chain",
         diffusion_algebra());
  report(6, "finite-difference gradient checks on all learned blocks",
         gradient_checks());
  report(10, "metrics hand cases, rank ties, performance density, CDF",
         metrics_suite());
  return g_failures == 0 ? 0 : 1;
}
