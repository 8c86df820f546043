#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "leoalloc/orbital.hpp"

namespace leo {

/// Geographic bounding box sampled on a regular lattice of cell centres.
/// Both boundary lines carry centres, so 40..55 N x 5..30 E at 0.25 deg
/// gives 61 x 101 cells.
struct GridSpec {
  double lat_min = 40.0;
  double lat_max = 55.0;
  double lon_min = 5.0;
  double lon_max = 30.0;
  double resolution = 0.25;

  int rows() const;
  int cols() const;
  void validate() const;
};

struct Cell {
  int cell_id = 0;
  int row = 0;  // 0 = northernmost
  int col = 0;  // 0 = westernmost
  GeoPoint center;
  std::array<GeoPoint, 4> corners;  // NW, NE, SE, SW
  double area_km2 = 0.0;
  double total_population = 0.0;
  double active_fraction = 0.0;
  double active_users = 0.0;
};

class CellGrid {
 public:
  CellGrid() = default;
  explicit CellGrid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return static_cast<int>(cells_.size()); }
  const Cell& cell(int id) const { return cells_.at(static_cast<std::size_t>(id)); }
  std::span<const Cell> cells() const { return cells_; }
  std::span<const int> populated_ids() const { return populated_; }

  int id_of(int row, int col) const { return row * cols_ + col; }
  double total_active_users() const;

  /// Replaces every cell's population and recomputes active users with a
  /// uniform active fraction. Throws DomainError on negative or non-finite
  /// values.
  void set_population(std::span<const double> total_population, double active_fraction);

 private:
  GridSpec spec_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Cell> cells_;
  std::vector<int> populated_;
};

CellGrid build_grid(const GridSpec& spec);

/// Spherical-Earth area of a lat/lon rectangle.
double spherical_cell_area_km2(double lat_lo, double lat_hi, double dlon_deg,
                               double earth_radius_m = 6371e3);

/// Reads a population source and assigns each cell centre its nearest raster
/// value. Supports ESRI ASCII grids (`.asc`) and `lat,lon,population` CSV.
/// NODATA maps to zero. Throws IngestionError with row/col (or line) context.
CellGrid load_population(const CellGrid& grid, const std::filesystem::path& source,
                         double active_fraction);
CellGrid load_population_asc(const CellGrid& grid, std::istream& in, double active_fraction);
CellGrid load_population_csv(const CellGrid& grid, std::istream& in, double active_fraction);

enum class PopulationModelKind { kUniform, kLogNormal, kClustered };

struct PopulationModel {
  PopulationModelKind kind = PopulationModelKind::kLogNormal;
  // uniform
  double uniform_count = 100.0;
  // log-normal: log(population) is Gaussian with mean `mu` and standard
  // deviation `sigma`; a positive `correlation_cells` smooths the underlying
  // field with a Gaussian kernel of that width (in cells) before rescaling,
  // which gives regional structure instead of white noise.
  double mu = 9.5;
  double sigma = 1.5;
  double correlation_cells = 0.0;
  double zero_fraction = 0.0;  // cells forced to zero population (sea, wilderness)
  // clustered
  int hotspots = 5;
  double peak_population = 1e6;
  double hotspot_radius_cells = 6.0;
  double min_separation_cells = 4.0;
};

PopulationModelKind parse_population_model(const std::string& name);

/// Cells chosen as hotspot centres by the clustered model for `seed`,
/// ascending by id.
std::vector<int> hotspot_cells(const CellGrid& grid, std::uint64_t seed, const PopulationModel& model);

/// Deterministic synthetic population for the given seed.
CellGrid synthesize_population(const CellGrid& grid, std::uint64_t seed,
                               const PopulationModel& model, double active_fraction);

}  // namespace leo
