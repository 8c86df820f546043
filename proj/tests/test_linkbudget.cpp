#include <cmath>
#include <sstream>

#include "doctest.h"
#include "leoalloc/errors.hpp"
#include "leoalloc/geodata.hpp"
#include "leoalloc/linkbudget.hpp"
#include "leoalloc/orbital.hpp"
#include "oracles.hpp"

using namespace leo;

TEST_CASE("dB conversions") {
  CHECK(db_to_linear(30.0) == doctest::Approx(1000.0));
  CHECK(db_to_linear(-3.0) == doctest::Approx(0.501187).epsilon(1e-6));
  CHECK(linear_to_db(db_to_linear(17.3)) == doctest::Approx(17.3));
}

TEST_CASE("path loss and rate agree with a dB-domain budget") {
  const auto cfg = LinkConfig::from_db({});
  const oracle::DbLink o;
  for (double d : {550e3, 800e3, 1.1e6, 2.0e6}) {
    CHECK(linear_to_db(path_loss(d, cfg)) == doctest::Approx(o.loss(d)).epsilon(1e-10));
    CHECK(nominal_rate(d, cfg) == doctest::Approx(o.rate(d)).epsilon(1e-10));
  }
  CHECK(std::abs(linear_to_db(path_loss(550e3, cfg)) - 156.78) < 0.01);
  CHECK(nominal_rate(550e3, cfg) == doctest::Approx(1.43e8).epsilon(0.01));
}

TEST_CASE("rate falls with distance") {
  const auto cfg = LinkConfig::from_db({});
  double prev = nominal_rate(500e3, cfg);
  for (double d = 600e3; d < 3e6; d += 100e3) {
    const double r = nominal_rate(d, cfg);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("default linear figures equal their dB definitions") {
  const LinkConfig lin;
  const auto db = LinkConfig::from_db({});
  CHECK(lin.sat_antenna_gain == doctest::Approx(db.sat_antenna_gain));
  CHECK(lin.atmospheric_loss == doctest::Approx(db.atmospheric_loss));
  CHECK(lin.pointing_loss == doctest::Approx(db.pointing_loss));
  CHECK(lin.noise_power_w == doctest::Approx(db.noise_power_w));
}

TEST_CASE("link validation") {
  LinkConfig c;
  c.bandwidth_hz = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.noise_power_w = std::nan("");
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("timing") {
  TimingConfig t;
  CHECK(t.frames_per_slot() == 1000);
  CHECK(t.satellite_budget() == 10000);
  CHECK(t.slot_start(3) == doctest::Approx(30.0));
  t.frame_duration_s = 0.003;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = {};
  t.beams_per_satellite = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("per-user throughput and handover penalty") {
  const TimingConfig t;
  // 500 of 1000 frames at 100 Mb/s shared by 10 users
  CHECK(per_user_throughput(500, 1e8, 10.0, t) == doctest::Approx(5e6));
  CHECK_THROWS_AS(per_user_throughput(1, 1e8, 0.0, t), DomainError);
  const HandoverModel h{0.3};
  CHECK(handover_penalty(0.0, h) == 0.3);
  CHECK(handover_penalty(4.0, h) == 0.0);
  CHECK_THROWS_AS(HandoverModel{1.0}.validate(), ConfigError);
  CHECK_THROWS_AS(HandoverModel{-0.1}.validate(), ConfigError);
  CHECK(min_rate(3.0, 2.0) == 2.0);
}

TEST_CASE("edge links and rate tables") {
  GridSpec spec;
  spec.resolution = 1.0;
  CellGrid grid{spec};
  grid.set_population(std::vector<double>(static_cast<std::size_t>(grid.size()), 1000.0), 1e-3);
  const Constellation c{ConstellationConfig{}};
  const auto link = LinkConfig::from_db({});
  const EdgeSettings settings{30.0, 2};
  const auto e0 = compute_edge(c, grid, link, settings, 0, 0.0);
  const auto e1 = compute_edge(c, grid, link, settings, 1, 10.0);
  REQUIRE(!e0.links.empty());

  const auto pos = c.propagate(0.0);
  for (std::size_t i = 0; i < e0.links.size(); ++i) {
    const auto& l = e0.links[i];
    if (i > 0) {
      const auto& p = e0.links[i - 1];
      CHECK((p.cell < l.cell || (p.cell == l.cell && p.sat < l.sat)));
    }
    CHECK(elevation_angle_deg(pos[l.sat], grid.cell(l.cell).center, 6371e3) >= 30.0 - 1e-9);
    CHECK(l.distance_m == doctest::Approx(max_distance_to_cell(pos[l.sat], grid.cell(l.cell), 6371e3)));
    CHECK(l.rate_bps == doctest::Approx(nominal_rate(l.distance_m, link)));
    // a 30 deg mask bounds the centre range; corners add at most ~100 km
    CHECK(l.distance_m < 1.2e6);
  }

  const auto t = build_rate_table(0, e0, e1);
  CHECK(t.entries.size() == e0.links.size());
  std::size_t usable = 0;
  for (const auto& e : t.entries) {
    const EdgeLink* later = nullptr;
    for (const auto& l : e1.links)
      if (l.sat == e.sat && l.cell == e.cell) later = &l;
    CHECK(e.rho_next_bps == (later ? later->rate_bps : 0.0));
    CHECK(e.rho_min_bps == std::min(e.rho_bps, e.rho_next_bps));
    CHECK(t.find(e.sat, e.cell) == &e);
    usable += e.rho_min_bps > 0.0;
  }
  CHECK(t.usable_pairs() == usable);
  CHECK(t.find(-1, 0) == nullptr);

  // thread count does not change the result
  const auto serial = compute_edge(c, grid, link, EdgeSettings{30.0, 1}, 0, 0.0);
  REQUIRE(serial.links.size() == e0.links.size());
  for (std::size_t i = 0; i < serial.links.size(); ++i) CHECK(serial.links[i].rate_bps == e0.links[i].rate_bps);

  std::ostringstream os;
  write_rate_table_csv(os, t, true);
  CHECK(os.str().rfind("slot,sat_id,cell_id,d_m,rho_bps,rho_min_bps\n", 0) == 0);
}

TEST_CASE("unpopulated cells get no links") {
  GridSpec spec;
  spec.resolution = 1.0;
  CellGrid grid{spec};
  const Constellation c{ConstellationConfig{}};
  const auto e = compute_edge(c, grid, LinkConfig{}, EdgeSettings{}, 0, 0.0);
  CHECK(e.links.empty());
  CHECK(!e.visible_set.empty());
}
