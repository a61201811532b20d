#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "channeldiff/geometry.hpp"
#include "channeldiff/mapio.hpp"

using namespace channeldiff;
using namespace channeldiff::mapio;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// Flat map: altitude 0 everywhere, no buildings unless edited.
MultiAttributeMap flat_map(int n = 20, double cell = 5.0, double x0 = 0, double y0 = 0) {
  Raster alt(n, n, x0, y0, cell);
  Raster bh(n, n, x0, y0, cell);
  return MultiAttributeMap{alt, bh};
}

}  // namespace

TEST_CASE("validate_map rejects grid mismatch and negative heights") {
  MultiAttributeMap bad{Raster(4, 4, 0, 0, 5), Raster(4, 4, 0, 0, 4)};
  CHECK_THROWS_AS(validate_map(bad), ValidationError);

  auto m = flat_map(4);
  m.building_height.at(2, 1) = -3.0;
  CHECK_THROWS_AS(validate_map(m), ValidationError);

  auto ok = flat_map(4);
  ok.building_height.at(0, 0) = 12.0;
  CHECK_NOTHROW(validate_map(ok));
}

TEST_CASE("trajectory loader enforces header, index, bounds and length") {
  auto m = flat_map();
  auto p = tmp_path("traj_ok.csv");
  write_file(p, "t,x,y\n0,10,10\n1,12.5,10\n2,15,12\n");
  auto t = load_trajectory(p, m);
  CHECK(t.length() == 3);
  CHECK(t.xs[1] == doctest::Approx(12.5));
  CHECK(t.ys[2] == doctest::Approx(12.0));

  write_file(p, "x,y\n10,10\n12,10\n");
  CHECK_THROWS_AS(load_trajectory(p, m), ParseError);

  write_file(p, "t,x,y\n0,10,10\n2,12,10\n");  // skipped index
  CHECK_THROWS_AS(load_trajectory(p, m), ParseError);

  write_file(p, "t,x,y\n0,10,10\n1,5000,10\n");  // out of bounds
  CHECK_THROWS_AS(load_trajectory(p, m), ValidationError);

  write_file(p, "t,x,y\n0,10,10\n");  // T < 2
  CHECK_THROWS_AS(load_trajectory(p, m), ValidationError);
}

TEST_CASE("trajectory write/load round trip") {
  auto m = flat_map();
  Trajectory t;
  t.xs = {10.0, 20.5, 33.25};
  t.ys = {40.0, 41.0, 42.125};
  auto p = tmp_path("traj_rt.csv");
  write_trajectory(t, p);
  auto t2 = load_trajectory(p, m);
  REQUIRE(t2.length() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(t2.xs[i] == t.xs[i]);
    CHECK(t2.ys[i] == t.ys[i]);
  }
}

TEST_CASE("BS record JSON round trip and validation") {
  BsRecord bs;
  bs.x = 12.0;
  bs.y = 34.0;
  bs.H_BS = 25.0;
  bs.AL_BS = 5.0;
  bs.P_t_dBm = 46.0;
  bs.f_c_Hz = 3.5e9;
  bs.downtilt_rad = 0.1;
  bs.azimuth_rad = 1.2;
  auto p = tmp_path("bs_rt.json");
  write_bs_record(bs, p);
  auto bs2 = load_bs_record(p);
  CHECK(bs2.x == bs.x);
  CHECK(bs2.H_BS == bs.H_BS);
  CHECK(bs2.f_c_Hz == bs.f_c_Hz);
  CHECK(bs2.h_t() == doctest::Approx(30.0));

  write_file(p, "{\"x\":0,\"y\":0,\"H_BS\":30,\"AL_BS\":0,\"P_t_dBm\":43,"
                "\"f_c_Hz\":-1,\"downtilt_rad\":0,\"azimuth_rad\":0}");
  CHECK_THROWS_AS(load_bs_record(p), ValidationError);

  write_file(p, "{\"x\":0,\"y\":0}");  // missing keys
  CHECK_THROWS_AS(load_bs_record(p), ParseError);
}

TEST_CASE("derive_network_params matches the Pythagoras hand case") {
  auto m = flat_map(40, 5.0, -50, -50);
  BsRecord bs;  // at (0,0), H_BS=30, AL_BS=0 -> h_t = 30
  Trajectory traj;
  traj.xs = {40.0, 40.0};
  traj.ys = {0.0, 1.0};
  auto series = derive_network_params(m, bs, traj);
  REQUIRE(series.length() == 2);
  const auto& p0 = series.steps[0];
  CHECK(p0.h_r == doctest::Approx(1.5));
  CHECK(p0.L == doctest::Approx(40.0));
  CHECK(p0.D == doctest::Approx(49.115).epsilon(1e-4));
  CHECK(p0.D == doctest::Approx(std::sqrt(1600.0 + 812.25)));
  CHECK(p0.P_t == bs.P_t_dBm);
  CHECK(p0.f_c == bs.f_c_Hz);
  // zero downtilt, boresight along +x straight at the UE ground direction
  CHECK(p0.gamma == doctest::Approx(0.0).epsilon(1e-9));
  // alpha is the full 3D angle between horizontal boresight and the
  // downward-sloping LOS ray
  double dz = 1.5 - 30.0;
  CHECK(p0.alpha == doctest::Approx(std::atan2(-dz, 40.0)));
}

TEST_CASE("N_b counts intervening buildings; cell-walk agrees with polygons") {
  auto m = flat_map(40, 5.0, 0, 0);
  // one building block straddling the segment from BS (10,100) to UE (190,100)
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c) {
      double x = m.building_height.cell_x(c), y = m.building_height.cell_y(r);
      if (x > 80 && x < 120 && y > 85 && y < 115) m.building_height.at(r, c) = 12.0;
    }
  BsRecord bs;
  bs.x = 10;
  bs.y = 100;
  Trajectory traj;
  traj.xs = {190.0, 10.0};
  traj.ys = {100.0, 60.0};
  auto series = derive_network_params(m, bs, traj);
  CHECK(series.steps[0].N_b == doctest::Approx(1.0));  // crosses the block
  CHECK(series.steps[1].N_b == doctest::Approx(0.0));  // runs south of it

  CHECK(count_buildings_cellwalk(m, 10, 100, 190, 100) == 1);
  CHECK(count_buildings_cellwalk(m, 10, 60, 190, 60) == 0);

  // polygon-scene path must agree with the raster cell-walk
  geometry::PolygonScene scene;
  geometry::Building b;
  b.id = 0;
  b.roof_height = 12.0;
  b.footprint = {{80, 85}, {120, 85}, {120, 115}, {80, 115}};
  scene.buildings.push_back(b);
  auto series_poly = derive_network_params(m, bs, traj, &scene);
  CHECK(series_poly.steps[0].N_b == series.steps[0].N_b);
  CHECK(series_poly.steps[1].N_b == series.steps[1].N_b);
}

TEST_CASE("derive_network_params is translation invariant") {
  double dx = 1000.0, dy = -500.0;
  auto m1 = flat_map(30, 5.0, 0, 0);
  auto m2 = flat_map(30, 5.0, dx, dy);
  for (int r = 10; r < 14; ++r)
    for (int c = 12; c < 16; ++c) {
      m1.building_height.at(r, c) = 9.0;
      m2.building_height.at(r, c) = 9.0;
    }
  BsRecord bs1, bs2;
  bs1.x = 20;
  bs1.y = 20;
  bs1.downtilt_rad = 0.12;
  bs1.azimuth_rad = 0.7;
  bs2 = bs1;
  bs2.x += dx;
  bs2.y += dy;
  Trajectory t1, t2;
  t1.xs = {100.0, 120.0, 60.0};
  t1.ys = {110.0, 70.0, 130.0};
  for (size_t i = 0; i < t1.length(); ++i) {
    t2.xs.push_back(t1.xs[i] + dx);
    t2.ys.push_back(t1.ys[i] + dy);
  }
  auto s1 = derive_network_params(m1, bs1, t1);
  auto s2 = derive_network_params(m2, bs2, t2);
  REQUIRE(s1.length() == s2.length());
  for (size_t i = 0; i < s1.length(); ++i) {
    CHECK(s1.steps[i].L == doctest::Approx(s2.steps[i].L).epsilon(1e-12));
    CHECK(s1.steps[i].D == doctest::Approx(s2.steps[i].D).epsilon(1e-12));
    CHECK(s1.steps[i].alpha == doctest::Approx(s2.steps[i].alpha).epsilon(1e-12));
    CHECK(s1.steps[i].beta == doctest::Approx(s2.steps[i].beta).epsilon(1e-12));
    CHECK(s1.steps[i].gamma == doctest::Approx(s2.steps[i].gamma).epsilon(1e-12));
    CHECK(s1.steps[i].N_b == s2.steps[i].N_b);
  }
}

TEST_CASE("manifest and series CSV round trips") {
  DatasetManifest man;
  man.entries.push_back({"a/traj.csv", "a/bs.json", "a/rsrp.csv", ""});
  man.entries.push_back({"b/traj.csv", "b/bs.json", "", "b/features"});
  auto p = tmp_path("manifest_rt.json");
  write_manifest(man, p);
  auto man2 = load_manifest(p);
  REQUIRE(man2.entries.size() == 2);
  CHECK(man2.entries[0].trajectory == "a/traj.csv");
  CHECK(man2.entries[0].target_rsrp == "a/rsrp.csv");
  CHECK(man2.entries[1].target_rsrp.empty());
  CHECK(man2.entries[1].features_dir == "b/features");
  CHECK(man2.base_dir == std::filesystem::path(p).parent_path().string());

  std::vector<double> v = {-91.5, -92.0, 0.125};
  auto ps = tmp_path("series_rt.csv");
  write_series_csv(v, ps, "t,rsrp_dbm");
  auto v2 = load_series_csv(ps);
  REQUIRE(v2.size() == 3);
  for (size_t i = 0; i < 3; ++i) CHECK(v2[i] == v[i]);
}
