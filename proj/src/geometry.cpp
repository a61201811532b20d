#include "channeldiff/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>

#include "json.hpp"

namespace channeldiff::geometry {

using nlohmann::json;

double PolygonScene::ground_at(double x, double y) const {
  if (altitude) {
    if (auto v = altitude->sample(x, y)) return *v;
  }
  return default_ground;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0;
  size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) a += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * a;
}

bool point_in_polygon(const std::vector<Vec2>& poly, Vec2 p) {
  bool inside = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    if ((poly[i].y > p.y) != (poly[j].y > p.y)) {
      double xint = poly[j].x + (poly[i].x - poly[j].x) * (p.y - poly[j].y) /
                                    (poly[i].y - poly[j].y);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;  // CCW
}

std::vector<Vec2> decimate_hull(std::vector<Vec2> hull, int max_edges) {
  while (static_cast<int>(hull.size()) > max_edges) {
    size_t n = hull.size();
    double best_loss = std::numeric_limits<double>::max();
    size_t best_i = 0;
    for (size_t i = 0; i < n; ++i) {
      Vec2 prev = hull[(i + n - 1) % n], cur = hull[i], next = hull[(i + 1) % n];
      // Removing a convex-hull vertex cuts the triangle (prev, cur, next).
      double loss = std::abs(0.5 * cross(cur - prev, next - prev));
      if (loss < best_loss) {  // ties keep the lowest index
        best_loss = loss;
        best_i = i;
      }
    }
    hull.erase(hull.begin() + best_i);
  }
  return hull;
}

std::optional<std::pair<double, double>> segment_polygon_overlap(
    const std::vector<Vec2>& poly, Vec2 a, Vec2 b) {
  // Collect crossing parameters of a->b against each edge, then add the
  // endpoints when they are interior.
  std::vector<double> ts;
  size_t n = poly.size();
  Vec2 d = b - a;
  for (size_t i = 0; i < n; ++i) {
    Vec2 p = poly[i], q = poly[(i + 1) % n];
    Vec2 e = q - p;
    double denom = cross(d, e);
    if (denom == 0.0) continue;
    double t = cross(p - a, e) / denom;
    double s = cross(p - a, d) / denom;
    if (t >= 0.0 && t <= 1.0 && s >= 0.0 && s <= 1.0) ts.push_back(t);
  }
  if (point_in_polygon(poly, a)) ts.push_back(0.0);
  if (point_in_polygon(poly, b)) ts.push_back(1.0);
  if (ts.empty()) return std::nullopt;
  auto [lo, hi] = std::minmax_element(ts.begin(), ts.end());
  if (*hi - *lo < 1e-12) return std::nullopt;  // grazing contact
  // Require the midpoint to actually be inside (rejects tangent clips).
  Vec2 mid = a + d * (0.5 * (*lo + *hi));
  if (!point_in_polygon(poly, mid)) return std::nullopt;
  return std::make_pair(*lo, *hi);
}

PolygonScene polygonize(const mapio::MultiAttributeMap& map, int max_edges,
                        double height_quantum) {
  if (max_edges < 3 || max_edges > 6)
    throw ValidationError("max_edges must be in 3..6");
  if (height_quantum <= 0) throw ValidationError("height_quantum must be > 0");

  const auto& bh = map.building_height;
  const auto& alt = map.altitude;
  int nr = bh.nrows(), nc = bh.ncols();
  std::vector<int> label(static_cast<size_t>(nr) * nc, -1);
  auto bucket = [&](int r, int c) {
    return static_cast<long>(std::floor(bh.at(r, c) / height_quantum));
  };

  PolygonScene scene;
  if (map.altitude.ncols() > 0) scene.altitude = nullptr;  // scene does not own rasters
  int next_id = 0;
  for (int r = 0; r < nr; ++r) {
    for (int c = 0; c < nc; ++c) {
      if (label[r * nc + c] != -1) continue;
      if (bh.is_nodata(r, c) || bh.at(r, c) <= 0.0) continue;
      // 4-connected flood fill over cells sharing the height bucket.
      long bk = bucket(r, c);
      std::vector<std::pair<int, int>> cells;
      std::queue<std::pair<int, int>> q;
      q.push({r, c});
      label[r * nc + c] = next_id;
      while (!q.empty()) {
        auto [cr, cc] = q.front();
        q.pop();
        cells.push_back({cr, cc});
        const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          int r2 = cr + dr[k], c2 = cc + dc[k];
          if (r2 < 0 || r2 >= nr || c2 < 0 || c2 >= nc) continue;
          if (label[r2 * nc + c2] != -1) continue;
          if (bh.is_nodata(r2, c2) || bh.at(r2, c2) <= 0.0) continue;
          if (bucket(r2, c2) != bk) continue;
          label[r2 * nc + c2] = next_id;
          q.push({r2, c2});
        }
      }
      // Corner points of every cell in the region.
      std::vector<Vec2> corners;
      double cs = bh.cell_size();
      for (auto [cr, cc] : cells) {
        double x = bh.x0() + cc * cs;
        double y = bh.y0() + (nr - 1 - cr) * cs;
        corners.push_back({x, y});
        corners.push_back({x + cs, y});
        corners.push_back({x, y + cs});
        corners.push_back({x + cs, y + cs});
      }
      auto hull = convex_hull(corners);
      if (hull.size() < 3 || std::abs(polygon_area(hull)) < 1e-9) {
        ++scene.dropped_regions;
        continue;
      }
      hull = decimate_hull(hull, max_edges);
      if (hull.size() < 3 || std::abs(polygon_area(hull)) < 1e-9) {
        ++scene.dropped_regions;
        continue;
      }

      double sum_roof = 0, sum_base = 0;
      size_t valid = 0;
      for (auto [cr, cc] : cells) {
        if (alt.is_nodata(cr, cc)) continue;
        sum_roof += alt.at(cr, cc) + bh.at(cr, cc);
        sum_base += alt.at(cr, cc);
        ++valid;
      }
      if (valid == 0) {
        ++scene.dropped_regions;
        continue;
      }
      Building b;
      b.id = next_id;
      b.footprint = hull;
      b.roof_height = sum_roof / valid;
      b.base_altitude = sum_base / valid;
      scene.buildings.push_back(std::move(b));
      ++next_id;
    }
  }
  return scene;
}

double fresnel_radius(double lambda, double d_bs, double d_ue) {
  double total = d_bs + d_ue;
  if (total <= 0) return 0;
  return std::sqrt(lambda * d_bs * d_ue / total);
}

double ray_height_at(Vec3 bs, Vec3 ue, Vec2 point, double tol) {
  Vec2 a{bs.x, bs.y}, b{ue.x, ue.y};
  Vec2 d = b - a;
  double len = norm(d);
  if (len == 0.0) {
    if (norm(point - a) > tol) throw GeometryError("point off degenerate segment");
    return bs.z;
  }
  double t = dot(point - a, d) / (len * len);
  Vec2 proj = a + d * t;
  if (norm(point - proj) > tol || t < -tol / len || t > 1 + tol / len)
    throw GeometryError("point not on BS-UE segment");
  t = std::clamp(t, 0.0, 1.0);
  return bs.z + (ue.z - bs.z) * t;
}

std::vector<FresnelGeometry> los_blockers(const PolygonScene& scene, Vec3 bs,
                                          Vec3 ue, double f_c_hz) {
  std::vector<FresnelGeometry> out;
  Vec2 a{bs.x, bs.y}, b{ue.x, ue.y};
  double seg_len = norm(b - a);
  if (seg_len < 1e-6) return out;  // vertical link, no Fresnel construction
  double lambda = wavelength(f_c_hz);

  for (const auto& bld : scene.buildings) {
    auto ov = segment_polygon_overlap(bld.footprint, a, b);
    if (!ov) continue;
    // Crossing nearer the UE within this building.
    double t = ov->second;
    FresnelGeometry g;
    g.building_id = bld.id;
    g.d_bs = t * seg_len;
    g.d_ue = (1.0 - t) * seg_len;
    g.h_ray = bs.z + (ue.z - bs.z) * t;
    g.h_roof = bld.roof_height;
    g.delta_h = g.h_roof - g.h_ray;
    g.r_f1 = fresnel_radius(lambda, g.d_bs, g.d_ue);
    g.v = g.r_f1 > 0 ? std::sqrt(2.0) * g.delta_h / g.r_f1 : 0.0;
    out.push_back(g);
  }
  std::sort(out.begin(), out.end(),
            [](const FresnelGeometry& x, const FresnelGeometry& y) {
              return x.d_ue < y.d_ue;
            });
  return out;
}

void write_scene(const PolygonScene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  for (const auto& b : scene.buildings) {
    json j;
    j["id"] = b.id;
    j["roof_height"] = b.roof_height;
    j["base_altitude"] = b.base_altitude;
    json verts = json::array();
    for (auto v : b.footprint) verts.push_back({v.x, v.y});
    j["vertices"] = verts;
    out << j.dump() << "\n";
  }
}

PolygonScene load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scene file: " + path);
  PolygonScene scene;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    Building b;
    b.id = j.at("id").get<int>();
    b.roof_height = j.at("roof_height").get<double>();
    b.base_altitude = j.value("base_altitude", 0.0);
    for (const auto& v : j.at("vertices")) {
      b.footprint.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    }
    if (b.footprint.size() < 3 || b.footprint.size() > 6)
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": footprint must have 3..6 vertices");
    if (std::abs(polygon_area(b.footprint)) <= 0)
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": footprint has zero area");
    scene.buildings.push_back(std::move(b));
  }
  return scene;
}

}  // namespace channeldiff::geometry
