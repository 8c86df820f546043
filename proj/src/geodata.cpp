#include "leoalloc/geodata.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "leoalloc/errors.hpp"
#include "leoalloc/random.hpp"

namespace leo {

namespace {

constexpr double kEps = 1e-9;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool parse_double(const std::string& tok, double& out) {
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  // from_chars rejects a leading '+', which some raster writers emit
  if (b != e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

std::string where(int row, int col) {
  return "row " + std::to_string(row) + ", col " + std::to_string(col);
}

}  // namespace

int GridSpec::rows() const {
  return static_cast<int>(std::floor((lat_max - lat_min) / resolution + kEps)) + 1;
}

int GridSpec::cols() const {
  return static_cast<int>(std::floor((lon_max - lon_min) / resolution + kEps)) + 1;
}

void GridSpec::validate() const {
  if (!(resolution > 0.0)) throw ConfigError("grid: resolution must be positive");
  if (!(lat_min < lat_max)) throw ConfigError("grid: empty latitude range");
  if (!(lon_min < lon_max)) throw ConfigError("grid: empty longitude range");
  if (lat_min < -90.0 || lat_max > 90.0) throw ConfigError("grid: latitude outside [-90, 90]");
}

double spherical_cell_area_km2(double lat_lo, double lat_hi, double dlon_deg,
                               double earth_radius_m) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double r_km = earth_radius_m / 1000.0;
  lat_lo = std::max(lat_lo, -90.0);
  lat_hi = std::min(lat_hi, 90.0);
  return r_km * r_km * dlon_deg * kDeg * (std::sin(lat_hi * kDeg) - std::sin(lat_lo * kDeg));
}

CellGrid::CellGrid(const GridSpec& spec) : spec_(spec) {
  spec_.validate();
  rows_ = spec_.rows();
  cols_ = spec_.cols();
  const double half = spec_.resolution / 2.0;
  cells_.reserve(static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_));
  for (int r = 0; r < rows_; ++r) {
    const double lat = spec_.lat_max - r * spec_.resolution;
    for (int c = 0; c < cols_; ++c) {
      const double lon = spec_.lon_min + c * spec_.resolution;
      Cell cell;
      cell.cell_id = id_of(r, c);
      cell.row = r;
      cell.col = c;
      cell.center = {lat, lon};
      cell.corners = {GeoPoint{lat + half, lon - half}, GeoPoint{lat + half, lon + half},
                      GeoPoint{lat - half, lon + half}, GeoPoint{lat - half, lon - half}};
      cell.area_km2 = spherical_cell_area_km2(lat - half, lat + half, spec_.resolution);
      cells_.push_back(cell);
    }
  }
}

double CellGrid::total_active_users() const {
  double s = 0.0;
  for (const auto& c : cells_) s += c.active_users;
  return s;
}

void CellGrid::set_population(std::span<const double> total_population, double active_fraction) {
  if (total_population.size() != cells_.size())
    throw DomainError("set_population: expected " + std::to_string(cells_.size()) +
                      " values, got " + std::to_string(total_population.size()));
  if (!(active_fraction >= 0.0 && active_fraction <= 1.0))
    throw DomainError("set_population: active fraction must lie in [0, 1]");
  populated_.clear();
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const double p = total_population[i];
    if (!std::isfinite(p) || p < 0.0)
      throw DomainError("set_population: invalid population at cell " + std::to_string(i));
    cells_[i].total_population = p;
    cells_[i].active_fraction = active_fraction;
    cells_[i].active_users = active_fraction * p;
    if (cells_[i].active_users > 0.0) populated_.push_back(static_cast<int>(i));
  }
}

CellGrid build_grid(const GridSpec& spec) { return CellGrid(spec); }

CellGrid load_population(const CellGrid& grid, const std::filesystem::path& source,
                         double active_fraction) {
  std::ifstream in(source);
  if (!in) throw IngestionError("cannot open population source '" + source.string() + "'");
  const auto ext = lower(source.extension().string());
  if (ext == ".csv") return load_population_csv(grid, in, active_fraction);
  return load_population_asc(grid, in, active_fraction);
}

CellGrid load_population_asc(const CellGrid& grid, std::istream& in, double active_fraction) {
  std::vector<std::string> tokens;
  for (std::string tok; in >> tok;) tokens.push_back(std::move(tok));

  std::map<std::string, double> header;
  bool x_center = false;
  bool y_center = false;
  std::size_t pos = 0;
  while (pos < tokens.size() && std::isalpha(static_cast<unsigned char>(tokens[pos][0]))) {
    const std::string k = lower(tokens[pos]);
    if (pos + 1 >= tokens.size())
      throw IngestionError("raster header: missing value for '" + tokens[pos] + "'");
    double v = 0.0;
    if (!parse_double(tokens[pos + 1], v))
      throw IngestionError("raster header: bad value '" + tokens[pos + 1] + "' for '" + tokens[pos] + "'");
    if (k == "xllcenter") x_center = true;
    if (k == "yllcenter") y_center = true;
    header[k == "xllcenter" ? "xllcorner" : k == "yllcenter" ? "yllcorner" : k] = v;
    pos += 2;
  }
  for (const char* req : {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize"})
    if (!header.count(req)) throw IngestionError(std::string("raster header: missing '") + req + "'");

  const int ncols = static_cast<int>(header["ncols"]);
  const int nrows = static_cast<int>(header["nrows"]);
  const double cs = header["cellsize"];
  if (ncols <= 0 || nrows <= 0 || !(cs > 0.0))
    throw IngestionError("raster header: non-positive dimensions or cellsize");
  double xll = header["xllcorner"];
  double yll = header["yllcorner"];
  if (x_center) xll -= cs / 2.0;
  if (y_center) yll -= cs / 2.0;
  const bool has_nodata = header.count("nodata_value") != 0;
  const double nodata = has_nodata ? header["nodata_value"] : 0.0;

  std::vector<double> raster(static_cast<std::size_t>(nrows) * static_cast<std::size_t>(ncols));
  for (int r = 0; r < nrows; ++r) {
    for (int c = 0; c < ncols; ++c) {
      if (pos >= tokens.size())
        throw IngestionError("raster truncated at " + where(r, c) + " (expected " +
                             std::to_string(nrows) + "x" + std::to_string(ncols) + " values)");
      const std::string& tok = tokens[pos++];
      double v = 0.0;
      if (!parse_double(tok, v))
        throw IngestionError("raster: malformed value '" + tok + "' at " + where(r, c));
      if ((has_nodata && v == nodata) || std::isnan(v)) {
        v = 0.0;
      } else if (v < 0.0) {
        throw IngestionError("raster: negative population " + tok + " at " + where(r, c));
      }
      raster[static_cast<std::size_t>(r) * ncols + c] = v;
    }
  }

  std::vector<double> pop(static_cast<std::size_t>(grid.size()), 0.0);
  for (const auto& cell : grid.cells()) {
    const double fc = (cell.center.lon_deg - xll) / cs;
    const double fr = (cell.center.lat_deg - yll) / cs;
    int col = static_cast<int>(std::floor(fc + kEps));
    int row_up = static_cast<int>(std::floor(fr + kEps));
    // points lying exactly on the top/right edge of the extent belong to the last cell
    if (col == ncols && fc <= ncols + 1e-6) col = ncols - 1;
    if (row_up == nrows && fr <= nrows + 1e-6) row_up = nrows - 1;
    if (fc < -1e-6 || fr < -1e-6 || col < 0 || col >= ncols || row_up < 0 || row_up >= nrows)
      throw IngestionError("raster bounds mismatch: grid cell " + where(cell.row, cell.col) +
                           " centre (" + std::to_string(cell.center.lat_deg) + ", " +
                           std::to_string(cell.center.lon_deg) + ") outside raster extent");
    col = std::max(col, 0);
    row_up = std::max(row_up, 0);
    const int row = nrows - 1 - row_up;
    pop[static_cast<std::size_t>(cell.cell_id)] =
        raster[static_cast<std::size_t>(row) * ncols + col];
  }
  CellGrid out = grid;
  out.set_population(pop, active_fraction);
  return out;
}

CellGrid load_population_csv(const CellGrid& grid, std::istream& in, double active_fraction) {
  const auto& spec = grid.spec();
  std::vector<double> pop(static_cast<std::size_t>(grid.size()), 0.0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) {
      f.erase(0, f.find_first_not_of(" \t"));
      f.erase(f.find_last_not_of(" \t") + 1);
      fields.push_back(f);
    }
    if (line_no == 1 && !fields.empty() && lower(fields[0]) == "lat") continue;
    if (fields.size() != 3)
      throw IngestionError("population csv line " + std::to_string(line_no) +
                           ": expected 3 fields (lat,lon,population)");
    double lat = 0.0, lon = 0.0, p = 0.0;
    if (!parse_double(fields[0], lat) || !parse_double(fields[1], lon) ||
        !parse_double(fields[2], p) || !std::isfinite(p))
      throw IngestionError("population csv line " + std::to_string(line_no) + ": malformed number");
    if (p < 0.0)
      throw IngestionError("population csv line " + std::to_string(line_no) +
                           ": negative population");
    const int row = static_cast<int>(std::lround((spec.lat_max - lat) / spec.resolution));
    const int col = static_cast<int>(std::lround((lon - spec.lon_min) / spec.resolution));
    if (row < 0 || row >= grid.rows() || col < 0 || col >= grid.cols())
      throw IngestionError("population csv line " + std::to_string(line_no) +
                           ": point outside grid bounds");
    pop[static_cast<std::size_t>(grid.id_of(row, col))] += p;
  }
  CellGrid out = grid;
  out.set_population(pop, active_fraction);
  return out;
}

PopulationModelKind parse_population_model(const std::string& name) {
  const auto n = lower(name);
  if (n == "uniform") return PopulationModelKind::kUniform;
  if (n == "lognormal" || n == "log-normal" || n == "log_normal") return PopulationModelKind::kLogNormal;
  if (n == "clustered") return PopulationModelKind::kClustered;
  throw ConfigError("unknown population model '" + name + "'");
}

std::vector<int> hotspot_cells(const CellGrid& grid, std::uint64_t seed,
                               const PopulationModel& model) {
  if (model.hotspots < 0) throw ConfigError("clustered population: negative hotspot count");
  Rng rng(seed);
  std::vector<int> centres;
  const int n = grid.size();
  int attempts = 0;
  while (static_cast<int>(centres.size()) < model.hotspots) {
    if (++attempts > 100000)
      throw ConfigError("clustered population: cannot place " + std::to_string(model.hotspots) +
                        " hotspots with the requested separation");
    const int id = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    const auto& c = grid.cell(id);
    bool ok = true;
    for (int other : centres) {
      const auto& o = grid.cell(other);
      if (std::hypot(c.row - o.row, c.col - o.col) < model.min_separation_cells) {
        ok = false;
        break;
      }
    }
    if (ok) centres.push_back(id);
  }
  std::sort(centres.begin(), centres.end());
  return centres;
}

namespace {

// Separable Gaussian blur on a rows x cols field, clamped at the borders.
std::vector<double> blur(const std::vector<double>& in, int rows, int cols, double width) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * width)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i)
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (width * width));
  auto at = [&](const std::vector<double>& f, int r, int c) {
    r = std::clamp(r, 0, rows - 1);
    c = std::clamp(c, 0, cols - 1);
    return f[static_cast<std::size_t>(r) * cols + c];
  };
  std::vector<double> tmp(in.size()), out(in.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[i + radius] * at(in, r, c + i);
      tmp[static_cast<std::size_t>(r) * cols + c] = s;
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[i + radius] * at(tmp, r + i, c);
      out[static_cast<std::size_t>(r) * cols + c] = s;
    }
  return out;
}

}  // namespace

CellGrid synthesize_population(const CellGrid& grid, std::uint64_t seed,
                               const PopulationModel& model, double active_fraction) {
  const auto n = static_cast<std::size_t>(grid.size());
  std::vector<double> pop(n, 0.0);
  switch (model.kind) {
    case PopulationModelKind::kUniform:
      if (model.uniform_count < 0.0) throw ConfigError("uniform population: negative count");
      std::fill(pop.begin(), pop.end(), std::round(model.uniform_count));
      break;
    case PopulationModelKind::kLogNormal: {
      if (model.sigma < 0.0) throw ConfigError("log-normal population: negative sigma");
      if (model.zero_fraction < 0.0 || model.zero_fraction > 1.0)
        throw ConfigError("log-normal population: zero_fraction outside [0, 1]");
      Rng rng(seed);
      std::vector<double> z(n);
      for (auto& v : z) v = rng.normal();
      if (model.correlation_cells > 0.0) {
        z = blur(z, grid.rows(), grid.cols(), model.correlation_cells);
        const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (auto& v : z) v = sd > 0.0 ? (v - mean) / sd : 0.0;
      }
      for (std::size_t i = 0; i < n; ++i) pop[i] = std::round(std::exp(model.mu + model.sigma * z[i]));
      const auto zeros = static_cast<std::size_t>(std::llround(model.zero_fraction * static_cast<double>(n)));
      if (zeros > 0) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
        for (std::size_t i = 0; i < zeros; ++i) pop[order[i]] = 0.0;
      }
      break;
    }
    case PopulationModelKind::kClustered: {
      if (!(model.hotspot_radius_cells > 0.0))
        throw ConfigError("clustered population: hotspot radius must be positive");
      const auto centres = hotspot_cells(grid, seed, model);
      for (const auto& cell : grid.cells()) {
        double best = std::numeric_limits<double>::infinity();
        for (int id : centres) {
          const auto& h = grid.cell(id);
          best = std::min(best, std::hypot(cell.row - h.row, cell.col - h.col));
        }
        pop[static_cast<std::size_t>(cell.cell_id)] =
            centres.empty() ? 0.0
                            : std::round(model.peak_population * std::exp(-best / model.hotspot_radius_cells));
      }
      break;
    }
  }
  CellGrid out = grid;
  out.set_population(pop, active_fraction);
  return out;
}

}  // namespace leo
