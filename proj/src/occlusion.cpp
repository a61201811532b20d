#include "channeldiff/occlusion.hpp"

namespace channeldiff::occlusion {

double knife_edge_loss(double v) {
  if (v <= -0.7) return 0.0;
  double u = v - 0.1;
  return 6.9 + 20.0 * std::log10(std::sqrt(u * u + 1.0) + u);
}

double blocker_contribution(double L_d, double d_ue, const OcclusionConfig& cfg) {
  return L_d * std::exp(-d_ue / cfg.L_shadow);
}

OcclusionStep occlusion_step(const geometry::PolygonScene& scene, geometry::Vec3 bs,
                             geometry::Vec3 ue, double f_c_hz,
                             const OcclusionConfig& cfg) {
  cfg.validate();
  OcclusionStep out;
  auto blockers = geometry::los_blockers(scene, bs, ue, f_c_hz);
  out.n_blockers = static_cast<int>(blockers.size());
  double max_b = 0.0;  // max over the empty set is 0
  for (const auto& g : blockers) {
    if (g.delta_h <= 0) continue;  // below the ray, negligible diffraction
    double b = blocker_contribution(knife_edge_loss(g.v), g.d_ue, cfg);
    if (b > max_b) {
      max_b = b;
      out.argmax_building = g.building_id;
    }
  }
  out.max_B = max_b;
  out.e_of = std::exp(-std::min(max_b, cfg.B_max) / cfg.K_dB);
  return out;
}

OcclusionSeries occlusion_factor(const geometry::PolygonScene& scene,
                                 geometry::Vec3 bs, const mapio::Trajectory& traj,
                                 const mapio::MultiAttributeMap* map, double f_c_hz,
                                 const OcclusionConfig& cfg) {
  OcclusionSeries series;
  for (size_t i = 0; i < traj.length(); ++i) {
    double ground = scene.default_ground;
    if (map) {
      auto a = map->altitude.sample(traj.xs[i], traj.ys[i]);
      if (!a) throw ValidationError("trajectory point over nodata altitude cell");
      ground = *a;
    }
    geometry::Vec3 ue{traj.xs[i], traj.ys[i], ground + traj.ue_height};
    series.steps.push_back(occlusion_step(scene, bs, ue, f_c_hz, cfg));
  }
  return series;
}

}  // namespace channeldiff::occlusion
