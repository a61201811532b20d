#include "channeldiff/micromap.hpp"

#include <cstdint>
#include <fstream>
#include <queue>

#include "json.hpp"

namespace channeldiff::micromap {

using mapio::Raster;
using nlohmann::json;

namespace {

Raster fill_nearest_valid(const Raster& src) {
  Raster out = src;
  int nr = src.nrows(), nc = src.ncols();
  // Multi-source BFS from valid cells.
  std::queue<std::pair<int, int>> q;
  std::vector<char> done(static_cast<size_t>(nr) * nc, 0);
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c)
      if (!src.is_nodata(r, c)) {
        done[r * nc + c] = 1;
        q.push({r, c});
      }
  if (q.empty()) throw ValidationError("raster is entirely nodata");
  while (!q.empty()) {
    auto [r, c] = q.front();
    q.pop();
    const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      int r2 = r + dr[k], c2 = c + dc[k];
      if (r2 < 0 || r2 >= nr || c2 < 0 || c2 >= nc || done[r2 * nc + c2]) continue;
      out.at(r2, c2) = out.at(r, c);
      done[r2 * nc + c2] = 1;
      q.push({r2, c2});
    }
  }
  return out;
}

}  // namespace

Raster hessian_enhance_channel(const Raster& src, bool fill_nodata) {
  const Raster* rp = &src;
  Raster filled;
  for (int r = 0; r < src.nrows(); ++r)
    for (int c = 0; c < src.ncols(); ++c)
      if (src.is_nodata(r, c)) {
        if (!fill_nodata)
          throw ValidationError("nodata cell at row " + std::to_string(r) + " col " +
                                std::to_string(c) + "; enable fill-nodata to proceed");
        filled = fill_nearest_valid(src);
        rp = &filled;
        r = src.nrows();
        break;
      }
  const Raster& v = *rp;
  int nr = v.nrows(), nc = v.ncols();
  // Linear extrapolation beyond the grid keeps affine fields curvature-free
  // at the borders (replicate padding would fake an edge there).
  auto cext = [&](int r, int c) -> double {
    if (c < 0) return nc >= 2 ? 2 * v.at(r, 0) - v.at(r, 1) : v.at(r, 0);
    if (c >= nc) return nc >= 2 ? 2 * v.at(r, nc - 1) - v.at(r, nc - 2) : v.at(r, nc - 1);
    return v.at(r, c);
  };
  auto g = [&](int r, int c) -> double {
    if (r < 0) return nr >= 2 ? 2 * cext(0, c) - cext(1, c) : cext(0, c);
    if (r >= nr) return nr >= 2 ? 2 * cext(nr - 1, c) - cext(nr - 2, c) : cext(nr - 1, c);
    return cext(r, c);
  };

  Raster out = v;
  for (int r = 0; r < nr; ++r) {
    for (int c = 0; c < nc; ++c) {
      double dxx = g(r, c - 1) - 2.0 * g(r, c) + g(r, c + 1);
      double dyy = g(r - 1, c) - 2.0 * g(r, c) + g(r + 1, c);
      double dxy = (g(r - 1, c - 1) + g(r + 1, c + 1) - g(r - 1, c + 1) -
                    g(r + 1, c - 1)) / 4.0;
      double response = std::abs(dxx) + std::abs(dyy) + 2.0 * std::abs(dxy);
      out.at(r, c) = v.at(r, c) + response;
    }
  }
  return out;
}

EnhancedMap hessian_enhance(const mapio::MultiAttributeMap& map, bool fill_nodata) {
  return EnhancedMap{hessian_enhance_channel(map.altitude, fill_nodata),
                     hessian_enhance_channel(map.building_height, fill_nodata)};
}

std::vector<double> coordinate_encoding(int width, int height) {
  if (width < 1 || height < 1) throw ValidationError("grid dims must be >= 1");
  std::vector<double> p(2 * static_cast<size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double nx = width > 1 ? -1.0 + 2.0 * x / (width - 1) : 0.0;
      double ny = height > 1 ? -1.0 + 2.0 * y / (height - 1) : 0.0;
      p[static_cast<size_t>(y) * width + x] = nx;
      p[static_cast<size_t>(width) * height + static_cast<size_t>(y) * width + x] = ny;
    }
  }
  return p;
}

MicroMapSeries serialize(const EnhancedMap& enhanced, const mapio::Trajectory& traj,
                         double fov_l) {
  const Raster& alt = enhanced.altitude;
  double cell = alt.cell_size();
  if (fov_l < cell)
    throw ValidationError("fov_l smaller than one cell (" + std::to_string(fov_l) +
                          " < " + std::to_string(cell) + ")");
  int S = static_cast<int>(std::lround(fov_l / cell));
  if (S < 1) S = 1;

  MicroMapSeries out;
  out.T = traj.length();
  out.S = S;
  out.fov_l = fov_l;
  out.cell_size = cell;
  out.data.resize(out.T * 2 * static_cast<size_t>(S) * S);

  int nr = alt.nrows(), nc = alt.ncols();
  auto clampr = [&](int r) { return r < 0 ? 0 : (r >= nr ? nr - 1 : r); };
  auto clampc = [&](int c) { return c < 0 ? 0 : (c >= nc ? nc - 1 : c); };

  for (size_t t = 0; t < out.T; ++t) {
    int c0 = alt.col_of(traj.xs[t]);
    int r0 = alt.row_of(traj.ys[t]);
    int start_c = c0 - (S - 1) / 2;
    int start_r = r0 - (S - 1) / 2;
    for (int ch = 0; ch < 2; ++ch) {
      const Raster& src = ch == 0 ? enhanced.altitude : enhanced.building_height;
      for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x)
          out.data[((t * 2 + ch) * S + y) * static_cast<size_t>(S) + x] =
              src.at(clampr(start_r + y), clampc(start_c + x));
    }
  }
  return out;
}

void write_micromaps(const MicroMapSeries& s, const std::string& bin_path,
                     const std::string& sidecar_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot open for writing: " + bin_path);
  for (double d : s.data) {
    float f = static_cast<float>(d);
    bin.write(reinterpret_cast<const char*>(&f), sizeof(f));
  }
  json j;
  j["T"] = s.T;
  j["C"] = 2;
  j["S"] = s.S;
  j["fov_l"] = s.fov_l;
  j["cell_size"] = s.cell_size;
  std::ofstream side(sidecar_path);
  if (!side) throw Error("cannot open for writing: " + sidecar_path);
  side << j.dump(2) << "\n";
}

MicroMapSeries load_micromaps(const std::string& bin_path,
                              const std::string& sidecar_path) {
  std::ifstream side(sidecar_path);
  if (!side) throw ParseError("cannot open sidecar: " + sidecar_path);
  json j;
  side >> j;
  MicroMapSeries s;
  s.T = j.at("T").get<size_t>();
  s.S = j.at("S").get<int>();
  s.fov_l = j.at("fov_l").get<double>();
  s.cell_size = j.at("cell_size").get<double>();
  size_t n = s.T * 2 * static_cast<size_t>(s.S) * s.S;
  s.data.resize(n);
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw ParseError("cannot open blob: " + bin_path);
  for (size_t i = 0; i < n; ++i) {
    float f;
    bin.read(reinterpret_cast<char*>(&f), sizeof(f));
    if (!bin) throw ParseError(bin_path + ": truncated blob");
    s.data[i] = f;
  }
  return s;
}

}  // namespace channeldiff::micromap
