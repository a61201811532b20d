#pragma once

#include <random>
#include <string>
#include <vector>

#include "channeldiff/micromap.hpp"
#include "channeldiff/multipath.hpp"
#include "channeldiff/occlusion.hpp"

namespace channeldiff::dataset {

// Feature-extraction knobs shared by the generator and the `features` verb.
struct FeatureParams {
  int N_ref = 1;
  int N_NLOS = 4;
  double fov_l = 85.0;        // micro-map crop side, meters
  bool with_micromaps = true;
  occlusion::OcclusionConfig occl;
  propagation::PropagationConfig prop;
};

struct DatasetConfig {
  int n_samples = 100;
  int T = 64;

  // synthetic world
  double map_size = 240.0;    // square extent, meters
  double cell = 4.0;          // raster cell, meters
  int min_buildings = 4;
  int max_buildings = 10;
  double min_bheight = 5.0;
  double max_bheight = 25.0;
  double ue_height = 1.5;
  double bs_height = 30.0;
  double P_t_dBm = 43.0;
  double f_c_hz = 2.6e9;

  // channel oracle
  double eta = 1.0;
  double rho = 0.3;
  double noise_sigma_db = 0.5;

  FeatureParams feat;
  unsigned long long seed = 0;
};

// One trajectory worth of aligned streams. Values are raw physical units;
// z-scoring happens in the trainer via the model's Preprocess block.
struct Sample {
  size_t T = 0;
  int S = 0;                       // crop side in pixels, 0 when absent
  std::vector<double> net_params;  // T x 10, row-major
  std::vector<double> ere;         // T x ere_dim
  std::vector<double> eof;         // T
  std::vector<double> eof_nblockers, eof_maxb;  // per-step diagnostics
  std::vector<double> crops;       // T x 2 x S x S
  std::vector<double> rsrp_calc;   // dBm
  std::vector<double> target;      // dBm; empty for feature-only samples
  double flops = 0;                // mean path-search cost proxy per step
};

struct Dataset {
  DatasetConfig cfg;
  std::vector<Sample> samples;

  int ere_dim() const {
    return (cfg.feat.N_NLOS + 1) * (2 * cfg.feat.N_ref + 3);
  }
};

// Self-contained random world: raster pair, polygon scene and one BS.
struct World {
  mapio::MultiAttributeMap map;
  geometry::PolygonScene scene;
  mapio::BsRecord bs;
};

World generate_world(const DatasetConfig& cfg, std::mt19937_64& rng);
mapio::Trajectory generate_trajectory(const DatasetConfig& cfg, std::mt19937_64& rng);

// Features for one trajectory; fills everything but `target`.
// When paths_out is given the per-step image-method paths are returned for
// reuse by the channel oracle.
Sample compute_features(const mapio::MultiAttributeMap& map,
                        const geometry::PolygonScene& scene,
                        const mapio::BsRecord& bs, const mapio::Trajectory& traj,
                        const FeatureParams& fp,
                        std::vector<std::vector<multipath::ReflectedPath>>* paths_out = nullptr,
                        mapio::NetworkParamsSeries* params_out = nullptr);

Sample generate_sample(const DatasetConfig& cfg, std::mt19937_64& rng);
Dataset generate_dataset(const DatasetConfig& cfg);

// Directory layout: manifest.json + sample_%04d/ with per-stream CSVs and
// the micro-map blob.
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

void write_sample(const Sample& s, const std::string& dir);
Sample load_sample(const std::string& dir);

// JSON text round-trip for the config (used by the CLI and experiment files).
DatasetConfig parse_dataset_config(const std::string& json_text);
std::string dataset_config_json(const DatasetConfig& cfg);

}  // namespace channeldiff::dataset
