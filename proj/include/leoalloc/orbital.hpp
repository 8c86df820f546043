#pragma once

#include <cmath>
#include <iosfwd>
#include <span>
#include <vector>

namespace leo {

class CellGrid;
struct Cell;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

/// Earth-fixed Cartesian coordinates of a point on a sphere of `radius_m`.
Vec3 to_cartesian(const GeoPoint& p, double radius_m);

/// Parameters of a Walker-delta shell. Defaults are the 550 km Starlink shell.
struct ConstellationConfig {
  int total_satellites = 1584;
  int orbital_planes = 72;
  double altitude_m = 550e3;
  double inclination_deg = 53.0;
  double inter_plane_phasing_deg = 0.0;
  double earth_radius_m = 6371e3;
  double gravitational_parameter = 3.986004418e14;
  double earth_rotation_rate = 7.2921159e-5;  // rad/s

  int satellites_per_plane() const { return total_satellites / orbital_planes; }
  double orbital_radius_m() const { return earth_radius_m + altitude_m; }
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct SatelliteId {
  int plane_index = 0;
  int in_plane_index = 0;
  int flat_id = 0;
};

struct OrbitalElements {
  SatelliteId id;
  double raan_rad = 0.0;
  double anomaly_rad = 0.0;  // argument of latitude at t = 0
  double radius_m = 0.0;
  double inclination_rad = 0.0;
};

/// Circular-orbit constellation with Kepler propagation in an Earth-fixed
/// frame. Immutable after construction.
class Constellation {
 public:
  explicit Constellation(const ConstellationConfig& cfg);

  const ConstellationConfig& config() const { return cfg_; }
  std::span<const OrbitalElements> elements() const { return elements_; }
  int size() const { return static_cast<int>(elements_.size()); }
  double period_s() const;

  std::vector<Vec3> propagate(double t_s) const;

 private:
  ConstellationConfig cfg_;
  std::vector<OrbitalElements> elements_;
  double mean_motion_ = 0.0;  // rad/s
};

/// Elements per plane p: RAAN 360 p / P, anomaly 360 m / (S/P) + p * phasing.
std::vector<OrbitalElements> build_constellation(const ConstellationConfig& cfg);

/// Position of one satellite at time t, Earth-fixed frame.
Vec3 propagate(const OrbitalElements& el, double mean_motion, double earth_rotation_rate, double t_s);

struct GeometrySnapshot {
  int slot_index = 0;
  double epoch_time_s = 0.0;
  std::vector<Vec3> positions;
  std::vector<int> visible_set;  // flat ids, ascending
};

/// Elevation of `sat` above the local horizon of `ground`, in degrees.
/// Throws DomainError when the satellite is below the Earth's surface.
double elevation_angle_deg(const Vec3& sat, const GeoPoint& ground, double earth_radius_m);

/// Satellites whose elevation is at least `mask_deg` at one or more cell
/// centres of the grid. Sorted by flat id.
std::vector<int> visible_satellites(std::span<const Vec3> positions, const CellGrid& grid,
                                    double mask_deg, double earth_radius_m);

/// Worst-case (largest) distance from the satellite to the cell centre and
/// its four corners.
double max_distance_to_cell(const Vec3& sat, const Cell& cell, double earth_radius_m);

/// `slot,flat_id,x_m,y_m,z_m` rows; header written when `header` is set.
void write_ephemeris_csv(std::ostream& os, const GeometrySnapshot& snap, bool header);

}  // namespace leo
