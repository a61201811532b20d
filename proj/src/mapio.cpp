#include "channeldiff/mapio.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>

#include "channeldiff/geometry.hpp"
#include "json.hpp"

namespace channeldiff::mapio {

using nlohmann::json;
namespace fs = std::filesystem;

void validate_map(const MultiAttributeMap& m) {
  if (!m.altitude.grid_compatible(m.building_height))
    throw ValidationError("rasters are grid-incompatible: [" + m.altitude.header_string() +
                          "] vs [" + m.building_height.header_string() + "]");
  for (int r = 0; r < m.building_height.nrows(); ++r)
    for (int c = 0; c < m.building_height.ncols(); ++c)
      if (!m.building_height.is_nodata(r, c) && m.building_height.at(r, c) < 0)
        throw ValidationError("negative building height at row " + std::to_string(r) +
                              " col " + std::to_string(c));
}

MultiAttributeMap load_scene(const std::string& alt_path, const std::string& bhgt_path) {
  MultiAttributeMap m{load_raster(alt_path), load_raster(bhgt_path)};
  validate_map(m);
  return m;
}

Trajectory load_trajectory(const std::string& path, const MultiAttributeMap& map) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory file: " + path);
  Trajectory t;
  std::string line;
  int lineno = 0;
  long expect_t = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line.rfind("t,x,y", 0) != 0)
        throw ParseError(path + ":1: expected header 't,x,y'");
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    double vals[3];
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(ls, tok, ','))
        throw ParseError(path + ":" + std::to_string(lineno) + ": expected t,x,y");
      try {
        vals[i] = std::stod(tok);
      } catch (...) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": non-numeric '" + tok + "'");
      }
    }
    if (static_cast<long>(vals[0]) != expect_t)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": t must be strictly increasing from 0");
    ++expect_t;
    if (!map.altitude.in_bounds(vals[1], vals[2]))
      throw ValidationError(path + ": point " + std::to_string(expect_t - 1) +
                            " out of map bounds (" + std::to_string(vals[1]) + ", " +
                            std::to_string(vals[2]) + ")");
    t.xs.push_back(vals[1]);
    t.ys.push_back(vals[2]);
  }
  if (t.length() < 2)
    throw ValidationError(path + ": trajectory needs T >= 2 points, got " +
                          std::to_string(t.length()));
  return t;
}

void write_trajectory(const Trajectory& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "t,x,y\n";
  out.precision(17);
  for (size_t i = 0; i < t.length(); ++i)
    out << i << "," << t.xs[i] << "," << t.ys[i] << "\n";
}

BsRecord load_bs_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open BS record: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  BsRecord bs;
  try {
    bs.x = j.at("x").get<double>();
    bs.y = j.at("y").get<double>();
    bs.H_BS = j.at("H_BS").get<double>();
    bs.AL_BS = j.at("AL_BS").get<double>();
    bs.P_t_dBm = j.at("P_t_dBm").get<double>();
    bs.f_c_Hz = j.at("f_c_Hz").get<double>();
    bs.downtilt_rad = j.at("downtilt_rad").get<double>();
    bs.azimuth_rad = j.at("azimuth_rad").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (bs.f_c_Hz <= 0) throw ValidationError(path + ": f_c_Hz must be > 0");
  return bs;
}

void write_bs_record(const BsRecord& bs, const std::string& path) {
  json j;
  j["x"] = bs.x;
  j["y"] = bs.y;
  j["H_BS"] = bs.H_BS;
  j["AL_BS"] = bs.AL_BS;
  j["P_t_dBm"] = bs.P_t_dBm;
  j["f_c_Hz"] = bs.f_c_Hz;
  j["downtilt_rad"] = bs.downtilt_rad;
  j["azimuth_rad"] = bs.azimuth_rad;
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

namespace {

// Region labels for building cells; -1 elsewhere.
std::vector<int> label_building_regions(const Raster& bh) {
  int nr = bh.nrows(), nc = bh.ncols();
  std::vector<int> label(static_cast<size_t>(nr) * nc, -1);
  int next = 0;
  for (int r = 0; r < nr; ++r) {
    for (int c = 0; c < nc; ++c) {
      if (label[r * nc + c] != -1 || bh.is_nodata(r, c) || bh.at(r, c) <= 0) continue;
      std::queue<std::pair<int, int>> q;
      q.push({r, c});
      label[r * nc + c] = next;
      while (!q.empty()) {
        auto [cr, cc] = q.front();
        q.pop();
        const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          int r2 = cr + dr[k], c2 = cc + dc[k];
          if (r2 < 0 || r2 >= nr || c2 < 0 || c2 >= nc) continue;
          if (label[r2 * nc + c2] != -1 || bh.is_nodata(r2, c2) || bh.at(r2, c2) <= 0)
            continue;
          label[r2 * nc + c2] = next;
          q.push({r2, c2});
        }
      }
      ++next;
    }
  }
  return label;
}

}  // namespace

int count_buildings_cellwalk(const MultiAttributeMap& map, double x1, double y1,
                             double x2, double y2) {
  const auto& bh = map.building_height;
  auto label = label_building_regions(bh);
  int nc = bh.ncols();
  std::vector<int> seen;
  double len = std::hypot(x2 - x1, y2 - y1);
  int steps = std::max(2, static_cast<int>(std::ceil(len / (bh.cell_size() * 0.25))));
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    double x = x1 + (x2 - x1) * t, y = y1 + (y2 - y1) * t;
    int r = bh.row_of(y), c = bh.col_of(x);
    if (r < 0 || r >= bh.nrows() || c < 0 || c >= nc) continue;
    int lb = label[r * nc + c];
    if (lb >= 0 && std::find(seen.begin(), seen.end(), lb) == seen.end())
      seen.push_back(lb);
  }
  return static_cast<int>(seen.size());
}

NetworkParamsSeries derive_network_params(const MultiAttributeMap& map,
                                          const BsRecord& bs,
                                          const Trajectory& traj,
                                          const geometry::PolygonScene* scene) {
  NetworkParamsSeries out;
  out.bs = bs;
  double ht = bs.h_t();
  double cd = std::cos(bs.downtilt_rad), sd = std::sin(bs.downtilt_rad);
  double ca = std::cos(bs.azimuth_rad), sa = std::sin(bs.azimuth_rad);
  geometry::Vec3 bore{cd * ca, cd * sa, -sd};

  std::vector<int> labels;
  if (!scene) labels = label_building_regions(map.building_height);

  for (size_t i = 0; i < traj.length(); ++i) {
    double x = traj.xs[i], y = traj.ys[i];
    auto alt = map.altitude.sample(x, y);
    if (!alt)
      throw ValidationError("trajectory point " + std::to_string(i) +
                            " over nodata altitude cell");
    NetworkParams p{};
    p.P_t = bs.P_t_dBm;
    p.f_c = bs.f_c_Hz;
    p.h_t = ht;
    p.h_r = *alt + traj.ue_height;
    double dx = x - bs.x, dy = y - bs.y, dz = p.h_r - ht;
    p.L = std::hypot(dx, dy);
    p.D = std::sqrt(p.L * p.L + dz * dz);
    geometry::Vec3 los{dx, dy, dz};
    double dn = geometry::norm(los);
    if (dn > 0) {
      double ca3 = geometry::dot(bore, los) / dn;
      p.alpha = std::acos(std::clamp(ca3, -1.0, 1.0));
    }
    if (p.L > 0) {
      double cg = (bore.x * dx + bore.y * dy) /
                  (std::hypot(bore.x, bore.y) * p.L + 1e-300);
      p.gamma = std::acos(std::clamp(cg, -1.0, 1.0));
    }
    // Vertical-plane split of alpha: elevation difference boresight vs LOS.
    double elev_los = std::atan2(dz, p.L);
    p.beta = std::abs(elev_los - (-bs.downtilt_rad));

    if (scene) {
      int nb = 0;
      geometry::Vec2 a{bs.x, bs.y}, b{x, y};
      for (const auto& bld : scene->buildings)
        if (geometry::segment_polygon_overlap(bld.footprint, a, b)) ++nb;
      p.N_b = nb;
    } else {
      const auto& bh = map.building_height;
      int nc = bh.ncols();
      std::vector<int> seen;
      double len = std::hypot(dx, dy);
      int steps = std::max(2, static_cast<int>(std::ceil(len / (bh.cell_size() * 0.25))));
      for (int s = 0; s <= steps; ++s) {
        double t = static_cast<double>(s) / steps;
        double px = bs.x + dx * t, py = bs.y + dy * t;
        int r = bh.row_of(py), c = bh.col_of(px);
        if (r < 0 || r >= bh.nrows() || c < 0 || c >= nc) continue;
        int lb = labels[r * nc + c];
        if (lb >= 0 && std::find(seen.begin(), seen.end(), lb) == seen.end())
          seen.push_back(lb);
      }
      p.N_b = static_cast<double>(seen.size());
    }
    out.steps.push_back(p);
  }
  return out;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  DatasetManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  for (const auto& e : j.at("samples")) {
    ManifestEntry me;
    me.trajectory = e.at("trajectory").get<std::string>();
    me.bs = e.at("bs").get<std::string>();
    me.target_rsrp = e.value("target_rsrp", "");
    me.features_dir = e.value("features_dir", "");
    m.entries.push_back(std::move(me));
  }
  return m;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  json samples = json::array();
  for (const auto& e : m.entries) {
    json je;
    je["trajectory"] = e.trajectory;
    je["bs"] = e.bs;
    if (!e.target_rsrp.empty()) je["target_rsrp"] = e.target_rsrp;
    if (!e.features_dir.empty()) je["features_dir"] = e.features_dir;
    samples.push_back(je);
  }
  json j;
  j["samples"] = samples;
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

std::vector<double> load_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open series CSV: " + path);
  std::vector<double> v;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (!line.empty() && !std::isdigit(line[0]) && line[0] != '-') continue;  // header
    }
    auto comma = line.find(',');
    std::string val = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      v.push_back(std::stod(val));
    } catch (...) {
      throw ParseError(path + ": non-numeric value '" + val + "'");
    }
  }
  return v;
}

void write_series_csv(const std::vector<double>& v, const std::string& path,
                      const std::string& header) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << header << "\n";
  out.precision(17);
  for (size_t i = 0; i < v.size(); ++i) out << i << "," << v[i] << "\n";
}

}  // namespace channeldiff::mapio
