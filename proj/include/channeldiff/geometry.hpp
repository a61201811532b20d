#pragma once

#include <optional>
#include <string>
#include <vector>

#include "channeldiff/mapio.hpp"

namespace channeldiff::geometry {

struct Vec2 {
  double x = 0, y = 0;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

struct Building {
  int id = 0;
  std::vector<Vec2> footprint;  // simple polygon, 3..6 vertices, CCW
  double roof_height = 0;       // absolute altitude of the roof
  double base_altitude = 0;     // absolute ground altitude at the footprint
};

class PolygonScene {
 public:
  std::vector<Building> buildings;

  // Mean ground altitude used when no altitude raster is attached.
  double default_ground = 0.0;
  const mapio::Raster* altitude = nullptr;  // optional, non-owning

  double ground_at(double x, double y) const;
  size_t dropped_regions = 0;  // degenerate regions skipped by polygonize
};

struct FresnelGeometry {
  int building_id = -1;
  double d_bs = 0;     // horizontal distance intersection -> BS
  double d_ue = 0;     // horizontal distance intersection -> UE
  double h_ray = 0;    // unobstructed ray height at the intersection
  double h_roof = 0;   // rooftop altitude of the blocker
  double delta_h = 0;  // h_roof - h_ray
  double r_f1 = 0;     // first Fresnel zone radius
  double v = 0;        // knife-edge diffraction parameter
};

// Polygon helpers.
double polygon_area(const std::vector<Vec2>& poly);
bool point_in_polygon(const std::vector<Vec2>& poly, Vec2 p);
std::vector<Vec2> convex_hull(std::vector<Vec2> pts);
// Iterative smallest-area-change vertex removal down to max_edges vertices.
std::vector<Vec2> decimate_hull(std::vector<Vec2> hull, int max_edges);

// Parameter interval [t_in, t_out] of segment a->b inside the polygon;
// nullopt when the overlap is empty or degenerate.
std::optional<std::pair<double, double>> segment_polygon_overlap(
    const std::vector<Vec2>& poly, Vec2 a, Vec2 b);

PolygonScene polygonize(const mapio::MultiAttributeMap& map, int max_edges,
                        double height_quantum);

double fresnel_radius(double lambda, double d_bs, double d_ue);

double ray_height_at(Vec3 bs, Vec3 ue, Vec2 point, double tol = 1e-6);

std::vector<FresnelGeometry> los_blockers(const PolygonScene& scene, Vec3 bs,
                                          Vec3 ue, double f_c_hz);

// JSON Lines scene format, one building per line.
void write_scene(const PolygonScene& scene, const std::string& path);
PolygonScene load_scene_file(const std::string& path);

}  // namespace channeldiff::geometry
