#include "channeldiff/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace channeldiff::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

World generate_world(const DatasetConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  int n_cells = std::max(4, static_cast<int>(std::lround(cfg.map_size / cfg.cell)));
  mapio::Raster alt(n_cells, n_cells, 0.0, 0.0, cfg.cell, -9999.0);
  mapio::Raster bhgt(n_cells, n_cells, 0.0, 0.0, cfg.cell, -9999.0);

  World w;
  std::uniform_int_distribution<int> nb(cfg.min_buildings, cfg.max_buildings);
  int n = nb(rng);
  for (int i = 0; i < n; ++i) {
    double bw = 10.0 + 20.0 * uni(rng);
    double bh = 10.0 + 20.0 * uni(rng);
    double x0 = 5.0 + (cfg.map_size - bw - 10.0) * uni(rng);
    double y0 = 5.0 + (cfg.map_size - bh - 10.0) * uni(rng);
    double height =
        cfg.min_bheight + (cfg.max_bheight - cfg.min_bheight) * uni(rng);

    geometry::Building b;
    b.id = i;
    b.footprint = {{x0, y0}, {x0 + bw, y0}, {x0 + bw, y0 + bh}, {x0, y0 + bh}};
    b.roof_height = height;  // flat terrain: absolute == above ground
    b.base_altitude = 0.0;
    w.scene.buildings.push_back(b);

    for (int r = 0; r < n_cells; ++r)
      for (int c = 0; c < n_cells; ++c) {
        double cx = bhgt.cell_x(c), cy = bhgt.cell_y(r);
        if (cx >= x0 && cx <= x0 + bw && cy >= y0 && cy <= y0 + bh)
          bhgt.at(r, c) = std::max(bhgt.at(r, c), height);
      }
  }
  w.scene.default_ground = 0.0;
  w.map.altitude = std::move(alt);
  w.map.building_height = std::move(bhgt);

  for (int attempt = 0; attempt < 200; ++attempt) {
    double x = 5.0 + (cfg.map_size - 10.0) * uni(rng);
    double y = 5.0 + (cfg.map_size - 10.0) * uni(rng);
    bool inside = false;
    for (const auto& b : w.scene.buildings)
      if (geometry::point_in_polygon(b.footprint, {x, y})) { inside = true; break; }
    if (!inside || attempt == 199) {
      w.bs.x = x;
      w.bs.y = y;
      break;
    }
  }
  w.bs.H_BS = cfg.bs_height;
  w.bs.AL_BS = 0.0;
  w.bs.P_t_dBm = cfg.P_t_dBm;
  w.bs.f_c_Hz = cfg.f_c_hz;
  return w;
}

mapio::Trajectory generate_trajectory(const DatasetConfig& cfg,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> turn(0.0, 0.15);
  double lo = 5.0, hi = cfg.map_size - 5.0;

  mapio::Trajectory t;
  t.ue_height = cfg.ue_height;
  double x = lo + (hi - lo) * uni(rng);
  double y = lo + (hi - lo) * uni(rng);
  double heading = 2.0 * M_PI * uni(rng);
  const double step = 2.5;
  for (int i = 0; i < cfg.T; ++i) {
    t.xs.push_back(x);
    t.ys.push_back(y);
    heading += turn(rng);
    double nx = x + step * std::cos(heading);
    double ny = y + step * std::sin(heading);
    if (nx < lo || nx > hi) { heading = M_PI - heading; nx = x + step * std::cos(heading); }
    if (ny < lo || ny > hi) { heading = -heading; ny = y + step * std::sin(heading); }
    x = std::min(hi, std::max(lo, nx));
    y = std::min(hi, std::max(lo, ny));
  }
  return t;
}

Sample compute_features(const mapio::MultiAttributeMap& map,
                        const geometry::PolygonScene& scene,
                        const mapio::BsRecord& bs, const mapio::Trajectory& traj,
                        const FeatureParams& fp,
                        std::vector<std::vector<multipath::ReflectedPath>>* paths_out,
                        mapio::NetworkParamsSeries* params_out) {
  Sample s;
  s.T = traj.length();

  auto params = mapio::derive_network_params(map, bs, traj, &scene);
  s.net_params.resize(s.T * 10);
  for (size_t t = 0; t < s.T; ++t) {
    const auto& p = params.steps[t];
    double* row = &s.net_params[t * 10];
    row[0] = p.P_t; row[1] = p.f_c; row[2] = p.h_t; row[3] = p.h_r; row[4] = p.L;
    row[5] = p.D;   row[6] = p.alpha; row[7] = p.beta; row[8] = p.gamma;
    row[9] = p.N_b;
  }
  s.rsrp_calc = propagation::rsrp_calc(params, fp.prop);

  geometry::Vec3 bsv{bs.x, bs.y, bs.h_t()};
  auto occl = occlusion::occlusion_factor(scene, bsv, traj, &map, bs.f_c_Hz, fp.occl);
  s.eof = occl.e_of();
  for (const auto& step : occl.steps) {
    s.eof_nblockers.push_back(step.n_blockers);
    s.eof_maxb.push_back(step.max_B);
  }

  int ere_dim = (fp.N_NLOS + 1) * (2 * fp.N_ref + 3);
  int max_order = std::min(fp.N_ref, 2);
  s.ere.resize(s.T * static_cast<size_t>(ere_dim));
  double total_flops = 0;
  if (paths_out) paths_out->resize(s.T);
  for (size_t t = 0; t < s.T; ++t) {
    geometry::Vec3 ue{traj.xs[t], traj.ys[t],
                      scene.ground_at(traj.xs[t], traj.ys[t]) + traj.ue_height};
    multipath::PathSearchStats stats;
    auto paths = multipath::find_paths(scene, bsv, ue, max_order, fp.N_NLOS, &stats);
    total_flops += stats.flops();
    auto emb = multipath::build_embedding(paths, fp.N_ref, fp.N_NLOS);
    std::copy(emb.m.begin(), emb.m.end(),
              s.ere.begin() + t * static_cast<size_t>(ere_dim));
    if (paths_out) (*paths_out)[t] = std::move(paths);
  }
  s.flops = total_flops / static_cast<double>(s.T);

  if (fp.with_micromaps) {
    auto enhanced = micromap::hessian_enhance(map, /*fill_nodata=*/true);
    auto mm = micromap::serialize(enhanced, traj, fp.fov_l);
    s.S = mm.S;
    s.crops = std::move(mm.data);
  }

  if (params_out) *params_out = std::move(params);
  return s;
}

Sample generate_sample(const DatasetConfig& cfg, std::mt19937_64& rng) {
  auto world = generate_world(cfg, rng);
  auto traj = generate_trajectory(cfg, rng);

  std::vector<std::vector<multipath::ReflectedPath>> paths;
  mapio::NetworkParamsSeries params;
  Sample s = compute_features(world.map, world.scene, world.bs, traj, cfg.feat,
                              &paths, &params);

  multipath::SyntheticChannelConfig synth;
  synth.eta = cfg.eta;
  synth.rho = cfg.rho;
  synth.noise_sigma_db = cfg.noise_sigma_db;
  synth.seed = rng();
  s.target = multipath::synthesize_rsrp(paths, params, cfg.feat.prop, synth);
  return s;
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  Dataset ds;
  ds.cfg = cfg;
  std::mt19937_64 rng(cfg.seed);
  ds.samples.reserve(cfg.n_samples);
  for (int i = 0; i < cfg.n_samples; ++i)
    ds.samples.push_back(generate_sample(cfg, rng));
  return ds;
}

// ---- disk layout ----

static void write_matrix_csv(const std::vector<double>& m, size_t rows, size_t cols,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "t";
  for (size_t c = 0; c < cols; ++c) out << ",v" << c;
  out << "\n";
  char buf[64];
  for (size_t r = 0; r < rows; ++r) {
    out << r;
    for (size_t c = 0; c < cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m[r * cols + c]);
      out << "," << buf;
    }
    out << "\n";
  }
}

static std::vector<double> load_matrix_csv(const std::string& path, size_t cols) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  std::vector<double> out;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    size_t i = 0;
    while (std::getline(ss, field, ',')) {
      if (i > 0) {
        try {
          out.push_back(std::stod(field));
        } catch (...) {
          throw ParseError(path + ":" + std::to_string(lineno) + ": bad number");
        }
      }
      ++i;
    }
    if (i != cols + 1)
      throw ParseError(path + ":" + std::to_string(lineno) + ": column count");
  }
  return out;
}

void write_sample(const Sample& s, const std::string& dir) {
  fs::create_directories(dir);
  size_t ere_cols = s.T ? s.ere.size() / s.T : 0;
  write_matrix_csv(s.net_params, s.T, 10, dir + "/net_params.csv");
  write_matrix_csv(s.ere, s.T, ere_cols, dir + "/ere.csv");
  {
    std::ofstream out(dir + "/eof.csv");
    if (!out) throw Error("cannot open for writing: " + dir + "/eof.csv");
    out << "t,e_of,n_blockers,max_B_dB\n";
    char buf[96];
    for (size_t t = 0; t < s.T; ++t) {
      double nb = t < s.eof_nblockers.size() ? s.eof_nblockers[t] : 0;
      double mb = t < s.eof_maxb.size() ? s.eof_maxb[t] : 0;
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%g,%.17g", t, s.eof[t], nb, mb);
      out << buf << "\n";
    }
  }
  mapio::write_series_csv(s.rsrp_calc, dir + "/rsrp_calc.csv", "t,rsrp_dbm");
  if (!s.target.empty())
    mapio::write_series_csv(s.target, dir + "/target.csv", "t,rsrp_dbm");
  if (s.S > 0) {
    micromap::MicroMapSeries mm;
    mm.T = s.T;
    mm.S = s.S;
    mm.fov_l = 0;
    mm.cell_size = 0;
    mm.data = s.crops;
    micromap::write_micromaps(mm, dir + "/micromaps.bin", dir + "/micromaps.json");
  }
  json meta;
  meta["T"] = s.T;
  meta["S"] = s.S;
  meta["ere_cols"] = ere_cols;
  meta["flops"] = s.flops;
  std::ofstream out(dir + "/sample.json");
  out << meta.dump(2) << "\n";
}

Sample load_sample(const std::string& dir) {
  std::ifstream meta_in(dir + "/sample.json");
  if (!meta_in) throw ParseError("cannot open: " + dir + "/sample.json");
  json meta;
  meta_in >> meta;

  Sample s;
  s.T = meta.at("T").get<size_t>();
  s.S = meta.at("S").get<int>();
  s.flops = meta.at("flops").get<double>();
  size_t ere_cols = meta.at("ere_cols").get<size_t>();

  s.net_params = load_matrix_csv(dir + "/net_params.csv", 10);
  s.ere = load_matrix_csv(dir + "/ere.csv", ere_cols);
  {
    auto m = load_matrix_csv(dir + "/eof.csv", 3);
    for (size_t r = 0; r * 3 < m.size(); ++r) {
      s.eof.push_back(m[r * 3]);
      s.eof_nblockers.push_back(m[r * 3 + 1]);
      s.eof_maxb.push_back(m[r * 3 + 2]);
    }
  }
  s.rsrp_calc = mapio::load_series_csv(dir + "/rsrp_calc.csv");
  if (fs::exists(dir + "/target.csv"))
    s.target = mapio::load_series_csv(dir + "/target.csv");
  if (s.S > 0) {
    auto mm = micromap::load_micromaps(dir + "/micromaps.bin", dir + "/micromaps.json");
    s.crops = std::move(mm.data);
  }
  if (s.net_params.size() != s.T * 10 || s.eof.size() != s.T)
    throw ParseError(dir + ": stream lengths disagree");
  return s;
}

static json config_to_json(const DatasetConfig& c) {
  json j;
  j["n_samples"] = c.n_samples;
  j["T"] = c.T;
  j["map_size"] = c.map_size;
  j["cell"] = c.cell;
  j["min_buildings"] = c.min_buildings;
  j["max_buildings"] = c.max_buildings;
  j["min_bheight"] = c.min_bheight;
  j["max_bheight"] = c.max_bheight;
  j["ue_height"] = c.ue_height;
  j["bs_height"] = c.bs_height;
  j["P_t_dBm"] = c.P_t_dBm;
  j["f_c_hz"] = c.f_c_hz;
  j["eta"] = c.eta;
  j["rho"] = c.rho;
  j["noise_sigma_db"] = c.noise_sigma_db;
  j["N_ref"] = c.feat.N_ref;
  j["N_NLOS"] = c.feat.N_NLOS;
  j["fov_l"] = c.feat.fov_l;
  j["with_micromaps"] = c.feat.with_micromaps;
  j["seed"] = c.seed;
  return j;
}

static DatasetConfig config_from_json(const json& j) {
  DatasetConfig c;
  c.n_samples = j.value("n_samples", c.n_samples);
  c.T = j.value("T", c.T);
  c.map_size = j.value("map_size", c.map_size);
  c.cell = j.value("cell", c.cell);
  c.min_buildings = j.value("min_buildings", c.min_buildings);
  c.max_buildings = j.value("max_buildings", c.max_buildings);
  c.min_bheight = j.value("min_bheight", c.min_bheight);
  c.max_bheight = j.value("max_bheight", c.max_bheight);
  c.ue_height = j.value("ue_height", c.ue_height);
  c.bs_height = j.value("bs_height", c.bs_height);
  c.P_t_dBm = j.value("P_t_dBm", c.P_t_dBm);
  c.f_c_hz = j.value("f_c_hz", c.f_c_hz);
  c.eta = j.value("eta", c.eta);
  c.rho = j.value("rho", c.rho);
  c.noise_sigma_db = j.value("noise_sigma_db", c.noise_sigma_db);
  c.feat.N_ref = j.value("N_ref", c.feat.N_ref);
  c.feat.N_NLOS = j.value("N_NLOS", c.feat.N_NLOS);
  c.feat.fov_l = j.value("fov_l", c.feat.fov_l);
  c.feat.with_micromaps = j.value("with_micromaps", c.feat.with_micromaps);
  c.seed = j.value("seed", c.seed);
  return c;
}

DatasetConfig parse_dataset_config(const std::string& json_text) {
  try {
    return config_from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset config: ") + e.what());
  }
}

std::string dataset_config_json(const DatasetConfig& cfg) {
  return config_to_json(cfg).dump(2);
}

void write_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "dataset_v1";
  manifest["config"] = config_to_json(ds.cfg);
  json names = json::array();
  char buf[32];
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "sample_%04zu", i);
    write_sample(ds.samples[i], dir + "/" + buf);
    names.push_back(buf);
  }
  manifest["samples"] = names;
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw Error("cannot open for writing: " + dir + "/manifest.json");
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw ParseError("cannot open: " + dir + "/manifest.json");
  json manifest;
  in >> manifest;
  if (manifest.value("format", "") != "dataset_v1")
    throw ParseError(dir + ": unsupported dataset format");
  Dataset ds;
  ds.cfg = config_from_json(manifest.at("config"));
  for (const auto& name : manifest.at("samples"))
    ds.samples.push_back(load_sample(dir + "/" + name.get<std::string>()));
  return ds;
}

}  // namespace channeldiff::dataset
