#pragma once

#include <optional>
#include <string>
#include <vector>

#include "channeldiff/common.hpp"

namespace channeldiff::mapio {

// A single-band grid in the ESRI-ASCII text convention: the first data row is
// the northernmost row, xllcorner/yllcorner give the lower-left map corner.
class Raster {
 public:
  Raster() = default;
  Raster(int ncols, int nrows, double x0, double y0, double cell,
         double nodata = -9999.0)
      : ncols_(ncols), nrows_(nrows), x0_(x0), y0_(y0), cell_(cell),
        nodata_(nodata), values_(static_cast<size_t>(ncols) * nrows, 0.0) {
    if (ncols < 1 || nrows < 1) throw ValidationError("raster dims must be >= 1");
    if (cell <= 0.0) throw ValidationError("cell_size must be > 0");
  }

  int ncols() const { return ncols_; }
  int nrows() const { return nrows_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double cell_size() const { return cell_; }
  double nodata_value() const { return nodata_; }

  // row 0 = top (north), row nrows-1 = bottom (south)
  double at(int row, int col) const { return values_[idx(row, col)]; }
  double& at(int row, int col) { return values_[idx(row, col)]; }
  bool is_nodata(int row, int col) const { return values_[idx(row, col)] == nodata_; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  // Map coordinate of a cell center.
  double cell_x(int col) const { return x0_ + (col + 0.5) * cell_; }
  double cell_y(int row) const { return y0_ + (nrows_ - 1 - row + 0.5) * cell_; }

  // Cell containing a map point (floor), unclamped.
  int col_of(double x) const { return static_cast<int>(std::floor((x - x0_) / cell_)); }
  int row_of(double y) const {
    return nrows_ - 1 - static_cast<int>(std::floor((y - y0_) / cell_));
  }

  bool in_bounds(double x, double y) const {
    return x >= x0_ && x <= x0_ + ncols_ * cell_ && y >= y0_ && y <= y0_ + nrows_ * cell_;
  }

  // Bilinear sample at (x, y); nodata neighbours make the result nullopt.
  std::optional<double> sample(double x, double y) const;

  bool grid_compatible(const Raster& other) const {
    return ncols_ == other.ncols_ && nrows_ == other.nrows_ &&
           x0_ == other.x0_ && y0_ == other.y0_ && cell_ == other.cell_;
  }

  std::string header_string() const;

 private:
  size_t idx(int row, int col) const {
    return static_cast<size_t>(row) * ncols_ + col;
  }

  int ncols_ = 0, nrows_ = 0;
  double x0_ = 0, y0_ = 0, cell_ = 1, nodata_ = -9999.0;
  std::vector<double> values_;
};

Raster load_raster(const std::string& path);
void write_raster(const Raster& r, const std::string& path);

}  // namespace channeldiff::mapio
