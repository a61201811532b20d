#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "channeldiff/raster.hpp"

namespace channeldiff::geometry {
class PolygonScene;
}

namespace channeldiff::mapio {

// Paired ground-altitude and building-height rasters on a common grid.
struct MultiAttributeMap {
  Raster altitude;         // meters above sea level
  Raster building_height;  // meters above ground, >= 0

  double cell_size() const { return altitude.cell_size(); }
  int width() const { return altitude.ncols(); }
  int height() const { return altitude.nrows(); }
};

struct Trajectory {
  std::vector<double> xs, ys;  // meters, map frame
  double ue_height = 1.5;      // H_UE, antenna height above ground

  size_t length() const { return xs.size(); }
};

struct BsRecord {
  double x = 0, y = 0;
  double H_BS = 30;        // antenna height above tower base
  double AL_BS = 0;        // tower base altitude
  double P_t_dBm = 43;
  double f_c_Hz = 2.6e9;
  double downtilt_rad = 0;
  double azimuth_rad = 0;

  double h_t() const { return H_BS + AL_BS; }
};

// Per-timestep 10-vector of the large-scale conditioning set.
struct NetworkParams {
  double P_t, f_c, h_t, h_r, L, D, alpha, beta, gamma;
  double N_b;  // integer-valued count
};

struct NetworkParamsSeries {
  std::vector<NetworkParams> steps;
  BsRecord bs;

  size_t length() const { return steps.size(); }
};

MultiAttributeMap load_scene(const std::string& alt_path, const std::string& bhgt_path);
void validate_map(const MultiAttributeMap& m);

Trajectory load_trajectory(const std::string& path, const MultiAttributeMap& map);
void write_trajectory(const Trajectory& t, const std::string& path);

BsRecord load_bs_record(const std::string& path);
void write_bs_record(const BsRecord& bs, const std::string& path);

// Derives L, D, h_r, alpha, beta, gamma, N_b for each trajectory point.
// When `scene` is given N_b is counted by footprint-segment intersection,
// otherwise by a dense cell-walk over labelled building regions.
NetworkParamsSeries derive_network_params(const MultiAttributeMap& map,
                                          const BsRecord& bs,
                                          const Trajectory& traj,
                                          const geometry::PolygonScene* scene = nullptr);

// Cell-walk N_b for one BS-UE segment (also the test oracle).
int count_buildings_cellwalk(const MultiAttributeMap& map, double x1, double y1,
                             double x2, double y2);

struct ManifestEntry {
  std::string trajectory;            // relative path, CSV
  std::string bs;                    // relative path, JSON
  std::string target_rsrp;           // relative path, CSV; may be empty
  std::string features_dir;          // relative path; may be empty
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::string base_dir;  // directory the relative paths resolve against
};

DatasetManifest load_manifest(const std::string& path);
void write_manifest(const DatasetManifest& m, const std::string& path);

std::vector<double> load_series_csv(const std::string& path);
void write_series_csv(const std::vector<double>& v, const std::string& path,
                      const std::string& header = "t,value");

}  // namespace channeldiff::mapio
