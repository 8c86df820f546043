#include "leoalloc/orbital.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "leoalloc/errors.hpp"
#include "leoalloc/geodata.hpp"

namespace leo {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Largest Earth-central angle between a ground point and the sub-satellite
// point at which the satellite still clears `mask_deg`.
double max_central_angle(double mask_deg, double earth_radius, double orbit_radius) {
  const double e = mask_deg * kDeg;
  return std::acos(std::clamp(earth_radius * std::cos(e) / orbit_radius, -1.0, 1.0)) - e;
}

}  // namespace

Vec3 to_cartesian(const GeoPoint& p, double radius_m) {
  const double lat = p.lat_deg * kDeg;
  const double lon = p.lon_deg * kDeg;
  return {radius_m * std::cos(lat) * std::cos(lon), radius_m * std::cos(lat) * std::sin(lon),
          radius_m * std::sin(lat)};
}

void ConstellationConfig::validate() const {
  if (orbital_planes <= 0 || total_satellites <= 0)
    throw ConfigError("constellation: satellite and plane counts must be positive");
  if (total_satellites % orbital_planes != 0)
    throw ConfigError("constellation: total_satellites (" + std::to_string(total_satellites) +
                      ") not divisible by orbital_planes (" + std::to_string(orbital_planes) + ")");
  if (!(altitude_m > 0.0)) throw ConfigError("constellation: altitude must be positive");
  if (!(inclination_deg >= 0.0 && inclination_deg <= 180.0))
    throw ConfigError("constellation: inclination must lie in [0, 180] degrees");
  if (!(earth_radius_m > 0.0) || !(gravitational_parameter > 0.0))
    throw ConfigError("constellation: earth radius and gravitational parameter must be positive");
}

std::vector<OrbitalElements> build_constellation(const ConstellationConfig& cfg) {
  cfg.validate();
  const int per_plane = cfg.satellites_per_plane();
  std::vector<OrbitalElements> out;
  out.reserve(static_cast<std::size_t>(cfg.total_satellites));
  for (int p = 0; p < cfg.orbital_planes; ++p) {
    for (int m = 0; m < per_plane; ++m) {
      OrbitalElements el;
      el.id = {p, m, p * per_plane + m};
      el.raan_rad = 360.0 * p / cfg.orbital_planes * kDeg;
      el.anomaly_rad = (360.0 * m / per_plane + p * cfg.inter_plane_phasing_deg) * kDeg;
      el.radius_m = cfg.orbital_radius_m();
      el.inclination_rad = cfg.inclination_deg * kDeg;
      out.push_back(el);
    }
  }
  return out;
}

Vec3 propagate(const OrbitalElements& el, double mean_motion, double earth_rotation_rate,
               double t_s) {
  const double u = el.anomaly_rad + mean_motion * t_s;
  const double cu = std::cos(u), su = std::sin(u);
  const double co = std::cos(el.raan_rad), so = std::sin(el.raan_rad);
  const double ci = std::cos(el.inclination_rad), si = std::sin(el.inclination_rad);
  const double xi = el.radius_m * (co * cu - so * su * ci);
  const double yi = el.radius_m * (so * cu + co * su * ci);
  const double zi = el.radius_m * (su * si);
  // inertial -> Earth-fixed: rotate by -omega_E t about the polar axis
  const double th = -earth_rotation_rate * t_s;
  const double ct = std::cos(th), st = std::sin(th);
  return {ct * xi - st * yi, st * xi + ct * yi, zi};
}

Constellation::Constellation(const ConstellationConfig& cfg)
    : cfg_(cfg), elements_(build_constellation(cfg)) {
  const double a = cfg_.orbital_radius_m();
  mean_motion_ = std::sqrt(cfg_.gravitational_parameter / (a * a * a));
}

double Constellation::period_s() const { return 2.0 * std::numbers::pi / mean_motion_; }

std::vector<Vec3> Constellation::propagate(double t_s) const {
  std::vector<Vec3> out;
  out.reserve(elements_.size());
  for (const auto& el : elements_)
    out.push_back(leo::propagate(el, mean_motion_, cfg_.earth_rotation_rate, t_s));
  return out;
}

double elevation_angle_deg(const Vec3& sat, const GeoPoint& ground, double earth_radius_m) {
  if (sat.norm() < earth_radius_m)
    throw DomainError("elevation_angle: satellite position lies below the Earth's surface");
  const Vec3 g = to_cartesian(ground, earth_radius_m);
  const Vec3 up = g * (1.0 / earth_radius_m);
  const Vec3 los = sat - g;
  const double range = los.norm();
  if (range == 0.0) return 90.0;
  return std::asin(std::clamp(los.dot(up) / range, -1.0, 1.0)) / kDeg;
}

std::vector<int> visible_satellites(std::span<const Vec3> positions, const CellGrid& grid,
                                    double mask_deg, double earth_radius_m) {
  std::vector<int> out;
  if (grid.size() == 0) return out;

  const double sin_mask = std::sin(mask_deg * kDeg);
  std::vector<Vec3> ground;
  std::vector<Vec3> up;
  ground.reserve(static_cast<std::size_t>(grid.size()));
  up.reserve(static_cast<std::size_t>(grid.size()));
  Vec3 mean{};
  for (const auto& c : grid.cells()) {
    ground.push_back(to_cartesian(c.center, earth_radius_m));
    up.push_back(ground.back() * (1.0 / earth_radius_m));
    mean = mean + up.back();
  }
  const Vec3 centre_dir = mean * (1.0 / mean.norm());
  double grid_radius = 0.0;  // angular radius of the grid seen from its centre direction
  for (const auto& u : up)
    grid_radius = std::max(grid_radius, std::acos(std::clamp(u.dot(centre_dir), -1.0, 1.0)));

  for (std::size_t s = 0; s < positions.size(); ++s) {
    const Vec3& p = positions[s];
    const double r = p.norm();
    if (r < earth_radius_m)
      throw DomainError("visible_satellites: satellite " + std::to_string(s) +
                        " lies below the Earth's surface");
    // coarse reject on the central angle, with slack so it never excludes a
    // satellite the exact test would accept
    const double reach = max_central_angle(mask_deg, earth_radius_m, r) + grid_radius + 1e-6;
    if (reach < std::numbers::pi) {
      const double ang = std::acos(std::clamp(p.dot(centre_dir) / r, -1.0, 1.0));
      if (ang > reach) continue;
    }
    for (std::size_t c = 0; c < ground.size(); ++c) {
      const Vec3 los = p - ground[c];
      if (los.dot(up[c]) >= sin_mask * los.norm()) {
        out.push_back(static_cast<int>(s));
        break;
      }
    }
  }
  return out;
}

double max_distance_to_cell(const Vec3& sat, const Cell& cell, double earth_radius_m) {
  double d = (sat - to_cartesian(cell.center, earth_radius_m)).norm();
  for (const auto& corner : cell.corners)
    d = std::max(d, (sat - to_cartesian(corner, earth_radius_m)).norm());
  return d;
}

void write_ephemeris_csv(std::ostream& os, const GeometrySnapshot& snap, bool header) {
  if (header) os << "slot,flat_id,x_m,y_m,z_m\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < snap.positions.size(); ++i) {
    const auto& p = snap.positions[i];
    os << snap.slot_index << ',' << i << ',' << p.x << ',' << p.y << ',' << p.z << '\n';
  }
  os.precision(old);
}

}  // namespace leo
