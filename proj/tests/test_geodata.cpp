#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "leoalloc/errors.hpp"
#include "leoalloc/geodata.hpp"

using namespace leo;

namespace {

GridSpec small_spec() {
  GridSpec s;
  s.lat_min = 40.0;
  s.lat_max = 41.0;
  s.lon_min = 5.0;
  s.lon_max = 6.0;
  s.resolution = 0.5;
  return s;  // 3 x 3 centres
}

double band_area_km2(double lat_lo, double lat_hi, double lon_lo, double lon_hi) {
  const double r = 6371.0, d = std::numbers::pi / 180.0;
  return r * r * (lon_hi - lon_lo) * d * (std::sin(lat_hi * d) - std::sin(lat_lo * d));
}

}  // namespace

TEST_CASE("europe grid has 61 x 101 centres") {
  const CellGrid g{GridSpec{}};
  CHECK(g.rows() == 61);
  CHECK(g.cols() == 101);
  CHECK(g.size() == 6161);
  CHECK(g.cell(0).center.lat_deg == doctest::Approx(55.0));
  CHECK(g.cell(0).center.lon_deg == doctest::Approx(5.0));
  const auto& last = g.cell(6160);
  CHECK(last.row == 60);
  CHECK(last.col == 100);
  CHECK(last.center.lat_deg == doctest::Approx(40.0));
  CHECK(last.center.lon_deg == doctest::Approx(30.0));
  CHECK(g.id_of(2, 3) == 2 * 101 + 3);
}

TEST_CASE("cell areas tile the padded box") {
  const CellGrid g{GridSpec{}};
  double sum = 0.0;
  for (const auto& c : g.cells()) sum += c.area_km2;
  CHECK(sum == doctest::Approx(band_area_km2(39.875, 55.125, 4.875, 30.125)).epsilon(1e-9));
  // cells shrink towards the pole
  CHECK(g.cell(g.id_of(0, 0)).area_km2 < g.cell(g.id_of(60, 0)).area_km2);
  CHECK(g.cell(g.id_of(30, 0)).area_km2 == doctest::Approx(27.8 * 27.8 * std::cos(47.5 * std::numbers::pi / 180.0)).epsilon(0.01));
}

TEST_CASE("corners surround the centre") {
  const CellGrid g{GridSpec{}};
  const auto& c = g.cell(g.id_of(10, 20));
  CHECK(c.corners[0].lat_deg == doctest::Approx(c.center.lat_deg + 0.125));
  CHECK(c.corners[0].lon_deg == doctest::Approx(c.center.lon_deg - 0.125));
  CHECK(c.corners[2].lat_deg == doctest::Approx(c.center.lat_deg - 0.125));
  CHECK(c.corners[2].lon_deg == doctest::Approx(c.center.lon_deg + 0.125));
}

TEST_CASE("bad grid specs") {
  GridSpec s;
  s.resolution = 0.0;
  CHECK_THROWS_AS(CellGrid{s}, ConfigError);
  s = {};
  s.lat_max = s.lat_min;
  CHECK_THROWS_AS(CellGrid{s}, ConfigError);
  s = {};
  s.lat_max = 95.0;
  CHECK_THROWS_AS(CellGrid{s}, ConfigError);
}

TEST_CASE("set_population tracks populated cells") {
  CellGrid g{small_spec()};
  std::vector<double> p(9, 0.0);
  p[1] = 1000.0;
  p[7] = 50.0;
  g.set_population(p, 0.1);
  CHECK(std::vector<int>(g.populated_ids().begin(), g.populated_ids().end()) == std::vector<int>{1, 7});
  CHECK(g.total_active_users() == doctest::Approx(105.0));
  p[2] = -1.0;
  CHECK_THROWS_AS(g.set_population(p, 0.1), DomainError);
  CHECK_THROWS_AS(g.set_population(std::vector<double>(3, 1.0), 0.1), DomainError);
}

TEST_CASE("ascii raster maps nearest values and NODATA") {
  // 2 x 2 raster at 1 deg covering 39.5..41.5 N, 4.5..6.5 E; the 0.5 deg
  // grid centres fall in the four quadrants
  std::istringstream in(
      "ncols 2\nnrows 2\nxllcorner 4.5\nyllcorner 39.5\ncellsize 1\nNODATA_value -9999\n"
      "10 20\n-9999 40\n");
  const auto g = load_population_asc(CellGrid{small_spec()}, in, 1.0);
  // row 0 = 41 N lies in the raster's top row
  CHECK(g.cell(g.id_of(0, 0)).total_population == 10.0);  // 41 N, 5 E
  CHECK(g.cell(g.id_of(0, 2)).total_population == 20.0);  // 41 N, 6 E
  CHECK(g.cell(g.id_of(2, 0)).total_population == 0.0);   // NODATA
  CHECK(g.cell(g.id_of(2, 2)).total_population == 40.0);
  // 40.5 N sits on the boundary between raster rows and goes to the upper one
  CHECK(g.cell(g.id_of(1, 0)).total_population == 10.0);
}

TEST_CASE("ascii raster accepts centre-registered headers") {
  std::istringstream corner(
      "ncols 2\nnrows 2\nxllcorner 4.5\nyllcorner 39.5\ncellsize 1\n1 2\n3 4\n");
  std::istringstream centre(
      "ncols 2\nnrows 2\nxllcenter 5\nyllcenter 40\ncellsize 1\n1 2\n3 4\n");
  const auto a = load_population_asc(CellGrid{small_spec()}, corner, 1.0);
  const auto b = load_population_asc(CellGrid{small_spec()}, centre, 1.0);
  for (int i = 0; i < a.size(); ++i) CHECK(a.cell(i).total_population == b.cell(i).total_population);
}

TEST_CASE("ascii raster errors carry context") {
  const CellGrid g{small_spec()};
  auto message = [&](const std::string& text) {
    std::istringstream in(text);
    try {
      load_population_asc(g, in, 1.0);
    } catch (const IngestionError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string head = "ncols 2\nnrows 2\nxllcorner 4.5\nyllcorner 39.5\ncellsize 1\n";
  CHECK(message(head + "1 2\n3\n").find("row 1, col 1") != std::string::npos);
  CHECK(message(head + "1 x\n3 4\n").find("row 0, col 1") != std::string::npos);
  CHECK(message(head + "1 2\n-3 4\n").find("negative") != std::string::npos);
  CHECK(message("ncols 2\nnrows 2\ncellsize 1\n1 2 3 4\n").find("xllcorner") != std::string::npos);
  CHECK(message("ncols 1\nnrows 1\nxllcorner 5.2\nyllcorner 40.2\ncellsize 0.5\n7\n").find("outside") !=
        std::string::npos);
}

TEST_CASE("csv population accumulates points") {
  std::istringstream in("lat,lon,population\n41,5,100\n41,5,20\n40,6,7\n");
  const auto g = load_population_csv(CellGrid{small_spec()}, in, 0.5);
  CHECK(g.cell(g.id_of(0, 0)).total_population == 120.0);
  CHECK(g.cell(g.id_of(2, 2)).active_users == 3.5);
  std::istringstream bad("41,5\n");
  CHECK_THROWS_AS(load_population_csv(CellGrid{small_spec()}, bad, 1.0), IngestionError);
  std::istringstream outside("10,5,1\n");
  CHECK_THROWS_AS(load_population_csv(CellGrid{small_spec()}, outside, 1.0), IngestionError);
}

TEST_CASE("population files dispatch on extension") {
  const auto dir = std::filesystem::temp_directory_path() / "leoalloc_geodata_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "p.csv") << "41,5,9\n";
    std::ofstream(dir / "p.asc") << "ncols 1\nnrows 1\nxllcorner 4\nyllcorner 39\ncellsize 3\n5\n";
  }
  CHECK(load_population(CellGrid{small_spec()}, dir / "p.csv", 1.0).total_active_users() == 9.0);
  CHECK(load_population(CellGrid{small_spec()}, dir / "p.asc", 1.0).total_active_users() == 45.0);
  CHECK_THROWS_AS(load_population(CellGrid{small_spec()}, dir / "missing.asc", 1.0), IngestionError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic populations are deterministic per seed") {
  const CellGrid g{GridSpec{}};
  PopulationModel m;
  m.correlation_cells = 3.0;
  m.zero_fraction = 0.1;
  const auto a = synthesize_population(g, 7, m, 1e-3);
  const auto b = synthesize_population(g, 7, m, 1e-3);
  const auto c = synthesize_population(g, 8, m, 1e-3);
  bool differ = false;
  for (int i = 0; i < g.size(); ++i) {
    CHECK(a.cell(i).total_population == b.cell(i).total_population);
    differ = differ || a.cell(i).total_population != c.cell(i).total_population;
  }
  CHECK(differ);
}

TEST_CASE("log-normal sample matches its parameters") {
  const CellGrid g{GridSpec{}};
  PopulationModel m;
  m.mu = 9.0;
  m.sigma = 1.2;
  const auto p = synthesize_population(g, 3, m, 1.0);
  std::vector<double> logs;
  for (const auto& c : p.cells()) logs.push_back(std::log(c.total_population));
  const double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / logs.size();
  double var = 0.0;
  for (double v : logs) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / logs.size());
  // 6161 samples: standard error of the mean is about 0.015
  CHECK(mean == doctest::Approx(9.0).epsilon(0.01));
  CHECK(sd == doctest::Approx(1.2).epsilon(0.05));
}

TEST_CASE("zero fraction and spatial correlation") {
  const CellGrid g{GridSpec{}};
  PopulationModel m;
  m.zero_fraction = 766.0 / 6161.0;
  m.correlation_cells = 4.0;
  const auto p = synthesize_population(g, 1, m, 1.0);
  CHECK(g.size() - static_cast<int>(p.populated_ids().size()) == 766);
  // neighbouring log-populations are strongly correlated
  double sxy = 0.0, sxx = 0.0, syy = 0.0, sx = 0.0, sy = 0.0;
  int n = 0;
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c + 1 < g.cols(); ++c) {
      const double x = p.cell(g.id_of(r, c)).total_population;
      const double y = p.cell(g.id_of(r, c + 1)).total_population;
      if (x <= 0.0 || y <= 0.0) continue;
      const double lx = std::log(x), ly = std::log(y);
      sx += lx, sy += ly, sxx += lx * lx, syy += ly * ly, sxy += lx * ly;
      ++n;
    }
  const double cov = sxy / n - sx / n * sy / n;
  const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  CHECK(corr > 0.8);
}

TEST_CASE("clustered population peaks at the hotspot centres") {
  const CellGrid g{GridSpec{}};
  PopulationModel m;
  m.kind = PopulationModelKind::kClustered;
  m.hotspots = 6;
  m.min_separation_cells = 15.0;
  const auto centres = hotspot_cells(g, 11, m);
  REQUIRE(centres.size() == 6);
  const auto p = synthesize_population(g, 11, m, 1.0);
  std::vector<int> maxima;
  for (const auto& c : g.cells()) {
    const double v = p.cell(c.cell_id).total_population;
    bool is_max = true;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int r = c.row + dr, k = c.col + dc;
        if ((dr || dc) && r >= 0 && r < g.rows() && k >= 0 && k < g.cols())
          is_max = is_max && v > p.cell(g.id_of(r, k)).total_population;
      }
    if (is_max) maxima.push_back(c.cell_id);
  }
  CHECK(maxima == centres);
  for (int id : centres) CHECK(p.cell(id).total_population == m.peak_population);
  for (std::size_t i = 0; i < centres.size(); ++i)
    for (std::size_t j = i + 1; j < centres.size(); ++j) {
      const auto &a = g.cell(centres[i]), &b = g.cell(centres[j]);
      CHECK(std::hypot(a.row - b.row, a.col - b.col) >= m.min_separation_cells);
    }
}

TEST_CASE("impossible hotspot separation is a config error") {
  const CellGrid g{small_spec()};
  PopulationModel m;
  m.kind = PopulationModelKind::kClustered;
  m.hotspots = 5;
  m.min_separation_cells = 10.0;
  CHECK_THROWS_AS(hotspot_cells(g, 1, m), ConfigError);
}

TEST_CASE("uniform model and name parsing") {
  PopulationModel m;
  m.kind = PopulationModelKind::kUniform;
  m.uniform_count = 40.0;
  const auto p = synthesize_population(CellGrid{small_spec()}, 1, m, 0.25);
  CHECK(p.total_active_users() == doctest::Approx(90.0));
  CHECK(parse_population_model("log-normal") == PopulationModelKind::kLogNormal);
  CHECK(parse_population_model("Clustered") == PopulationModelKind::kClustered);
  CHECK_THROWS_AS(parse_population_model("gaussian"), ConfigError);
}
