#pragma once

#include <vector>

#include "channeldiff/geometry.hpp"

namespace channeldiff::occlusion {

struct OcclusionConfig {
  double L_shadow = 50.0;  // m, shadow-fading spatial correlation scale
  double B_max = 40.0;     // dB cap on per-blocker contribution
  double K_dB = 20.0;      // dB normalization scale

  void validate() const {
    if (L_shadow <= 0 || B_max <= 0 || K_dB <= 0)
      throw ValidationError("occlusion config requires L_shadow, B_max, K_dB > 0");
  }
};

struct OcclusionStep {
  double e_of = 1.0;
  int n_blockers = 0;
  double max_B = 0.0;       // dB
  int argmax_building = -1;
};

struct OcclusionSeries {
  std::vector<OcclusionStep> steps;

  std::vector<double> e_of() const {
    std::vector<double> v;
    v.reserve(steps.size());
    for (const auto& s : steps) v.push_back(s.e_of);
    return v;
  }
};

// Knife-edge diffraction loss in dB: 0 for v <= -0.7, else
// 6.9 + 20*log10(sqrt((v-0.1)^2+1) + v - 0.1).
double knife_edge_loss(double v);

// B = L_d * exp(-d_ue / L_shadow).
double blocker_contribution(double L_d, double d_ue, const OcclusionConfig& cfg);

// e_of for a single BS-UE link.
OcclusionStep occlusion_step(const geometry::PolygonScene& scene, geometry::Vec3 bs,
                             geometry::Vec3 ue, double f_c_hz,
                             const OcclusionConfig& cfg);

OcclusionSeries occlusion_factor(const geometry::PolygonScene& scene,
                                 geometry::Vec3 bs, const mapio::Trajectory& traj,
                                 const mapio::MultiAttributeMap* map, double f_c_hz,
                                 const OcclusionConfig& cfg);

}  // namespace channeldiff::occlusion
