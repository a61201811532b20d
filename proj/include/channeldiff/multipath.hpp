#pragma once

#include <vector>

#include "channeldiff/geometry.hpp"
#include "channeldiff/propagation.hpp"

namespace channeldiff::multipath {

using geometry::Vec2;
using geometry::Vec3;

inline constexpr int kGroundSurface = -1;

struct ReflectedPath {
  std::vector<Vec3> waypoints;   // BS, reflection points..., UE
  int order = 0;                 // number of bounces, 0 = LOS
  double d_ref = 0;              // total length
  std::vector<double> cos_aod;   // vertical direction cosine, legs 0..order
  std::vector<double> cos_inc;   // |cos| against surface normal, bounces 1..order
  std::vector<int> surfaces;     // building id per bounce, kGroundSurface for ground
};

// Cost-proxy counters for the e_RE FLOPs estimate.
struct PathSearchStats {
  long mirrors = 0;
  long intersection_tests = 0;
  long occlusion_checks = 0;

  double flops() const {
    // Per-op float cost constants for the m_ef proxy.
    return 9.0 * mirrors + 30.0 * intersection_tests + 30.0 * occlusion_checks;
  }
};

// Image-method path search. Facades are vertical rectangles over polygon
// edges; the ground is one horizontal plane. max_order in {1, 2}.
std::vector<ReflectedPath> find_paths(const geometry::PolygonScene& scene, Vec3 bs,
                                      Vec3 ue, int max_order, int max_paths,
                                      PathSearchStats* stats = nullptr);

struct ReflectionEmbedding {
  int n_rows = 0, n_cols = 0;      // (N_NLOS+1) x (2*N_ref+3)
  std::vector<double> m;           // row-major

  double at(int r, int c) const { return m[static_cast<size_t>(r) * n_cols + c]; }
  double& at(int r, int c) { return m[static_cast<size_t>(r) * n_cols + c]; }
};

ReflectionEmbedding build_embedding(const std::vector<ReflectedPath>& paths,
                                    int N_ref, int N_NLOS);

struct EmbeddingSeries {
  std::vector<ReflectionEmbedding> embeddings;  // one per trajectory step
  double avg_flops = 0;                         // mean cost proxy per step
};

EmbeddingSeries embedding_series(const geometry::PolygonScene& scene, Vec3 bs,
                                 const mapio::Trajectory& traj,
                                 const mapio::MultiAttributeMap* map, int N_ref,
                                 int N_NLOS);

struct SyntheticChannelConfig {
  double eta = 1.0;            // amplitude path-loss exponent
  double rho = 0.3;            // per-bounce amplitude attenuation, (0,1)
  double noise_sigma_db = 0;   // additive dB noise
  unsigned long long seed = 0;

  void validate() const {
    if (eta <= 0) throw ValidationError("eta must be > 0");
    if (rho <= 0 || rho >= 1) throw ValidationError("rho must be in (0,1)");
  }
};

inline constexpr double kAllOccludedFloorDbm = -140.0;

// Coherent phasor sum over paths, anchored so a lone LOS path with eta=1
// reproduces the FSPM decay law.
std::vector<double> synthesize_rsrp(const std::vector<std::vector<ReflectedPath>>& paths_per_step,
                                    const mapio::NetworkParamsSeries& params,
                                    const propagation::PropagationConfig& prop,
                                    const SyntheticChannelConfig& synth);

}  // namespace channeldiff::multipath
