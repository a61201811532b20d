#include "channeldiff/multipath.hpp"

#include <algorithm>
#include <complex>
#include <random>

namespace channeldiff::multipath {

namespace {

struct Surface {
  int building_id = kGroundSurface;
  bool is_ground = false;
  Vec3 point;   // a point on the plane
  Vec3 normal;  // unit; facades point away from the footprint centroid
  // Facade extent.
  Vec2 a, b;
  double z_lo = 0, z_hi = 0;
};

Vec3 mirror(Vec3 p, const Surface& s) {
  double d = dot(p - s.point, s.normal);
  return p - s.normal * (2.0 * d);
}

double side(Vec3 p, const Surface& s) { return dot(p - s.point, s.normal); }

// Intersection of segment p->q with the plane of s, constrained to the
// facade rectangle (or anywhere on the ground plane).
bool plane_hit(const Surface& s, Vec3 p, Vec3 q, Vec3& out) {
  double dp = dot(q - p, s.normal);
  if (std::abs(dp) < 1e-15) return false;
  double t = dot(s.point - p, s.normal) / dp;
  if (t <= 1e-12 || t >= 1.0 - 1e-12) return false;
  Vec3 r = p + (q - p) * t;
  if (s.is_ground) {
    out = r;
    return true;
  }
  Vec2 e = s.b - s.a;
  double elen2 = dot(e, e);
  double u = dot(Vec2{r.x, r.y} - s.a, e) / elen2;
  if (u < 0.0 || u > 1.0) return false;
  if (r.z < s.z_lo || r.z > s.z_hi) return false;
  out = r;
  return true;
}

std::vector<Surface> collect_surfaces(const geometry::PolygonScene& scene,
                                      double ground_z) {
  std::vector<Surface> out;
  for (const auto& bld : scene.buildings) {
    Vec2 centroid{0, 0};
    for (auto v : bld.footprint) centroid = centroid + v;
    centroid = centroid * (1.0 / bld.footprint.size());
    size_t n = bld.footprint.size();
    for (size_t i = 0; i < n; ++i) {
      Surface s;
      s.building_id = bld.id;
      s.a = bld.footprint[i];
      s.b = bld.footprint[(i + 1) % n];
      Vec2 e = s.b - s.a;
      double len = norm(e);
      if (len < 1e-9) continue;
      Vec2 nrm{e.y / len, -e.x / len};
      Vec2 mid = (s.a + s.b) * 0.5;
      if (dot(nrm, mid - centroid) < 0) nrm = nrm * -1.0;
      s.normal = {nrm.x, nrm.y, 0.0};
      s.point = {s.a.x, s.a.y, 0.0};
      s.z_lo = bld.base_altitude;
      s.z_hi = bld.roof_height;
      out.push_back(s);
    }
  }
  Surface g;
  g.is_ground = true;
  g.point = {0, 0, ground_z};
  g.normal = {0, 0, 1};
  out.push_back(g);
  return out;
}

// A leg is blocked when its 2D footprint penetrates a building footprint and
// the ray height drops below the roof inside the overlap.
bool leg_blocked(const geometry::PolygonScene& scene, Vec3 p, Vec3 q,
                 PathSearchStats* stats) {
  Vec2 a{p.x, p.y}, b{q.x, q.y};
  for (const auto& bld : scene.buildings) {
    if (stats) ++stats->occlusion_checks;
    auto ov = geometry::segment_polygon_overlap(bld.footprint, a, b);
    if (!ov) continue;
    double z_in = p.z + (q.z - p.z) * ov->first;
    double z_out = p.z + (q.z - p.z) * ov->second;
    if (std::min(z_in, z_out) < bld.roof_height - 1e-9) return true;
  }
  return false;
}

void finish_path(ReflectedPath& path, const std::vector<const Surface*>& surfs) {
  path.order = static_cast<int>(path.waypoints.size()) - 2;
  path.d_ref = 0;
  path.cos_aod.clear();
  path.cos_inc.clear();
  path.surfaces.clear();
  for (size_t i = 0; i + 1 < path.waypoints.size(); ++i) {
    Vec3 d = path.waypoints[i + 1] - path.waypoints[i];
    double len = norm(d);
    path.d_ref += len;
    path.cos_aod.push_back(len > 0 ? d.z / len : 0.0);
  }
  for (size_t i = 1; i + 1 < path.waypoints.size(); ++i) {
    Vec3 inc = path.waypoints[i] - path.waypoints[i - 1];
    double len = norm(inc);
    const Surface* s = surfs[i - 1];
    path.cos_inc.push_back(len > 0 ? std::abs(dot(inc, s->normal)) / len : 0.0);
    path.surfaces.push_back(s->building_id);
  }
}

}  // namespace

std::vector<ReflectedPath> find_paths(const geometry::PolygonScene& scene, Vec3 bs,
                                      Vec3 ue, int max_order, int max_paths,
                                      PathSearchStats* stats) {
  if (max_order < 1 || max_order > 2)
    throw ValidationError("max_order must be 1 or 2");
  if (max_paths < 1) throw ValidationError("max_paths must be >= 1");

  double ground_z = scene.ground_at(0.5 * (bs.x + ue.x), 0.5 * (bs.y + ue.y));
  auto surfaces = collect_surfaces(scene, ground_z);

  std::vector<ReflectedPath> los, reflected;

  // LOS
  if (!leg_blocked(scene, bs, ue, stats)) {
    ReflectedPath p;
    p.waypoints = {bs, ue};
    finish_path(p, {});
    los.push_back(p);
  }

  // First order
  for (const auto& s : surfaces) {
    if (stats) ++stats->mirrors;
    if (!s.is_ground && (side(bs, s) <= 0 || side(ue, s) <= 0)) continue;
    Vec3 img = mirror(bs, s);
    Vec3 r;
    if (stats) ++stats->intersection_tests;
    if (!plane_hit(s, img, ue, r)) continue;
    if (leg_blocked(scene, bs, r, stats) || leg_blocked(scene, r, ue, stats)) continue;
    ReflectedPath p;
    p.waypoints = {bs, r, ue};
    finish_path(p, {&s});
    reflected.push_back(p);
  }

  // Second order
  if (max_order >= 2) {
    for (size_t i = 0; i < surfaces.size(); ++i) {
      const Surface& s1 = surfaces[i];
      if (!s1.is_ground && side(bs, s1) <= 0) continue;
      if (stats) ++stats->mirrors;
      Vec3 i1 = mirror(bs, s1);
      for (size_t j = 0; j < surfaces.size(); ++j) {
        if (i == j) continue;
        const Surface& s2 = surfaces[j];
        if (s1.is_ground && s2.is_ground) continue;
        // Prune pairs whose first image lies behind the second plane.
        if (side(i1, s2) <= 0) continue;
        if (!s2.is_ground && side(ue, s2) <= 0) continue;
        if (stats) ++stats->mirrors;
        Vec3 i2 = mirror(i1, s2);
        Vec3 r2;
        if (stats) ++stats->intersection_tests;
        if (!plane_hit(s2, i2, ue, r2)) continue;
        Vec3 r1;
        if (stats) ++stats->intersection_tests;
        if (!plane_hit(s1, i1, r2, r1)) continue;
        if (leg_blocked(scene, bs, r1, stats) || leg_blocked(scene, r1, r2, stats) ||
            leg_blocked(scene, r2, ue, stats))
          continue;
        ReflectedPath p;
        p.waypoints = {bs, r1, r2, ue};
        finish_path(p, {&s1, &s2});
        reflected.push_back(p);
      }
    }
  }

  std::sort(reflected.begin(), reflected.end(),
            [](const ReflectedPath& a, const ReflectedPath& b) {
              if (a.order != b.order) return a.order < b.order;
              return a.d_ref < b.d_ref;
            });
  if (static_cast<int>(reflected.size()) > max_paths) reflected.resize(max_paths);

  std::vector<ReflectedPath> out = std::move(los);
  out.insert(out.end(), reflected.begin(), reflected.end());
  return out;
}

ReflectionEmbedding build_embedding(const std::vector<ReflectedPath>& paths,
                                    int N_ref, int N_NLOS) {
  ReflectionEmbedding e;
  e.n_rows = N_NLOS + 1;
  e.n_cols = 2 * N_ref + 3;
  e.m.assign(static_cast<size_t>(e.n_rows) * e.n_cols, 0.0);

  std::vector<const ReflectedPath*> refl;
  const ReflectedPath* los_path = nullptr;
  for (const auto& p : paths) {
    if (p.order > N_ref)
      throw ValidationError("path order " + std::to_string(p.order) +
                            " exceeds N_ref=" + std::to_string(N_ref));
    if (p.order == 0) {
      los_path = &p;
    } else {
      refl.push_back(&p);
    }
  }
  std::sort(refl.begin(), refl.end(), [](const ReflectedPath* a, const ReflectedPath* b) {
    if (a->order != b->order) return a->order < b->order;
    return a->d_ref < b->d_ref;
  });

  auto fill_row = [&](int row, const ReflectedPath& p) {
    e.at(row, 0) = std::log10(p.d_ref);
    e.at(row, 1) = p.order;
    e.at(row, 2) = p.cos_aod.empty() ? 0.0 : p.cos_aod[0];
    for (int i = 0; i < p.order; ++i) {
      e.at(row, 3 + 2 * i) = p.cos_inc[i];
      e.at(row, 4 + 2 * i) = p.cos_aod[i + 1];
    }
  };

  if (los_path) fill_row(0, *los_path);  // occluded LOS stays a zero row
  for (size_t i = 0; i < refl.size() && static_cast<int>(i) < N_NLOS; ++i)
    fill_row(static_cast<int>(i) + 1, *refl[i]);
  return e;
}

EmbeddingSeries embedding_series(const geometry::PolygonScene& scene, Vec3 bs,
                                 const mapio::Trajectory& traj,
                                 const mapio::MultiAttributeMap* map, int N_ref,
                                 int N_NLOS) {
  EmbeddingSeries out;
  PathSearchStats stats;
  for (size_t i = 0; i < traj.length(); ++i) {
    double ground = scene.default_ground;
    if (map) {
      auto a = map->altitude.sample(traj.xs[i], traj.ys[i]);
      if (!a) throw ValidationError("trajectory point over nodata altitude cell");
      ground = *a;
    }
    Vec3 ue{traj.xs[i], traj.ys[i], ground + traj.ue_height};
    auto paths = find_paths(scene, bs, ue, N_ref, N_NLOS, &stats);
    out.embeddings.push_back(build_embedding(paths, N_ref, N_NLOS));
  }
  out.avg_flops = traj.length() > 0 ? stats.flops() / traj.length() : 0.0;
  return out;
}

std::vector<double> synthesize_rsrp(const std::vector<std::vector<ReflectedPath>>& paths_per_step,
                                    const mapio::NetworkParamsSeries& params,
                                    const propagation::PropagationConfig& prop,
                                    const SyntheticChannelConfig& synth) {
  synth.validate();
  if (paths_per_step.size() != params.length())
    throw ValidationError("paths_per_step length must match params length");
  std::mt19937_64 rng(synth.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> out;
  out.reserve(paths_per_step.size());
  for (size_t t = 0; t < paths_per_step.size(); ++t) {
    const auto& p = params.steps[t];
    double lambda = wavelength(p.f_c);
    double noise = synth.noise_sigma_db > 0 ? gauss(rng) * synth.noise_sigma_db : 0.0;
    if (synth.noise_sigma_db == 0) (void)gauss(rng);  // keep the stream aligned
    if (paths_per_step[t].empty()) {
      out.push_back(kAllOccludedFloorDbm + noise);
      continue;
    }
    std::complex<double> acc{0, 0};
    for (const auto& path : paths_per_step[t]) {
      double amp = std::pow(path.d_ref, -synth.eta) * std::pow(synth.rho, path.order);
      double phase = -2.0 * kPi * path.d_ref / lambda;
      acc += std::polar(amp, phase);
    }
    // FSPM anchor: amplitude 1/D maps to PL = 20log10(4*pi*D*f/c).
    double anchor_db = 20.0 * std::log10(4.0 * kPi * p.f_c / kSpeedOfLight);
    double rsrp = p.P_t + prop.G_t + prop.G_r + 20.0 * std::log10(std::abs(acc)) -
                  anchor_db + noise;
    out.push_back(rsrp);
  }
  return out;
}

}  // namespace channeldiff::multipath
