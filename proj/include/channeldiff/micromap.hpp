#pragma once

#include <string>
#include <vector>

#include "channeldiff/mapio.hpp"

namespace channeldiff::micromap {

// 2-channel grid (enhanced altitude, enhanced building height) sharing the
// source map's grid metadata.
struct EnhancedMap {
  mapio::Raster altitude;
  mapio::Raster building_height;
};

struct MicroMapSeries {
  size_t T = 0;
  int S = 0;            // crop side, pixels
  double fov_l = 0;     // meters
  double cell_size = 0;
  // row-major [t][c][y][x], c in {0: altitude, 1: building height}
  std::vector<double> data;

  double at(size_t t, int c, int y, int x) const {
    return data[((t * 2 + c) * S + y) * static_cast<size_t>(S) + x];
  }
};

// Residual Hessian edge enhancement: channel + (|dxx| + |dyy| + 2|dxy|).
EnhancedMap hessian_enhance(const mapio::MultiAttributeMap& map,
                            bool fill_nodata = false);

// Single-channel variant used by the grid transforms.
mapio::Raster hessian_enhance_channel(const mapio::Raster& r, bool fill_nodata);

// 2-channel coordinate grid, each axis normalized to [-1, 1].
// Returned row-major [c][y][x]; a unit axis maps to the constant 0.
std::vector<double> coordinate_encoding(int width, int height);

MicroMapSeries serialize(const EnhancedMap& enhanced, const mapio::Trajectory& traj,
                         double fov_l);

// little-endian float32 blob + JSON sidecar {T, C, S, fov_l, cell_size}
void write_micromaps(const MicroMapSeries& s, const std::string& bin_path,
                     const std::string& sidecar_path);
MicroMapSeries load_micromaps(const std::string& bin_path,
                              const std::string& sidecar_path);

}  // namespace channeldiff::micromap
