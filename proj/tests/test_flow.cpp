#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "ductsr/flow.hpp"

using namespace ductsr;

namespace {

const DuctGeometry kDuct{};  // L=5, H=W=1

std::filesystem::path temp_dir(const char* tag) {
  auto p = std::filesystem::temp_directory_path() / (std::string("ductsr_flow_") + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("series reference vanishes on the walls") {
  const double umax = series_reference(-1000.0, 0.0, 0.0, 50);
  for (double t : {-0.5, -0.25, 0.0, 0.25, 0.5}) {
    CHECK(std::fabs(series_reference(-1000.0, 0.5, t, 50)) < 1e-6 * umax);
    CHECK(std::fabs(series_reference(-1000.0, -0.5, t, 50)) < 1e-6 * umax);
    CHECK(std::fabs(series_reference(-1000.0, t, 0.5, 50)) < 1e-6 * umax);
    CHECK(std::fabs(series_reference(-1000.0, t, -0.5, 50)) < 1e-6 * umax);
  }
}

TEST_CASE("series center value converges to the square-duct constant") {
  const double r25 = series_reference(-1000.0, 0.0, 0.0, 25) / 1000.0;
  const double r50 = series_reference(-1000.0, 0.0, 0.0, 50) / 1000.0;
  const double r100 = series_reference(-1000.0, 0.0, 0.0, 100) / 1000.0;
  CHECK(r50 == doctest::Approx(0.0736713).epsilon(1e-5));
  CHECK(std::fabs(r50 - r25) / r50 < 1e-4);
  CHECK(std::fabs(r100 - r50) / r50 < 1e-6);  // stable to six digits once doubled
}

TEST_CASE("series needs a sensible term count and domain") {
  CHECK_THROWS_AS(series_reference(-1000.0, 0.0, 0.0, 10), Error);
  CHECK_THROWS_AS(series_reference(-1000.0, 0.7, 0.0, 50), Error);
}

TEST_CASE("finite differences agree with the series oracle") {
  const CrossSection cs = solve_cross_section(-1000.0, kDuct, 101, 101);
  double max_err = 0.0;
  for (int j = 0; j < cs.ny; ++j)
    for (int k = 0; k < cs.nz; ++k)
      max_err = std::max(max_err,
                         std::fabs(cs.at(j, k) - series_reference(-1000.0, cs.y_at(j),
                                                                  cs.z_at(k), 50)));
  CHECK(max_err < 0.005 * cs.u_max);
  CHECK(cs.u_max / 1000.0 == doctest::Approx(0.0736713).epsilon(2e-3));
}

TEST_CASE("solver rejects bad arguments") {
  CHECK_THROWS_AS(solve_cross_section(1000.0, kDuct, 33, 33), Error);
  CHECK_THROWS_AS(solve_cross_section(-1000.0, kDuct, 16, 33), Error);
  CHECK_THROWS_AS(solve_cross_section(-1000.0, kDuct, 34, 33), Error);
  CHECK_THROWS_AS(solve_cross_section(-1000.0, kDuct, 33, 33, -1.0), Error);
  CHECK_THROWS_AS(solve_cross_section(-1000.0, DuctGeometry{0.0, 1.0, 1.0}, 33, 33), Error);
}

TEST_CASE("solver reports divergence with the final residual") {
  try {
    solve_cross_section(-1000.0, kDuct, 65, 65, 1e-10, 3);
    FAIL("expected a solver error");
  } catch (const SolverError& e) {
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("solver detects a tolerance below the round-off floor") {
  // 1e-16 * |c| is unattainable in double precision; the solve must fail
  // fast instead of spinning to the iteration cap
  try {
    solve_cross_section(-1000.0, kDuct, 33, 33, 1e-16);
    FAIL("expected a solver error");
  } catch (const SolverError& e) {
    CHECK(e.residual() > 0.0);
    CHECK(std::string(e.what()).find("stagnated") != std::string::npos);
  }
}

TEST_CASE("boundary nodes are exactly zero and the interior is positive") {
  const CrossSection cs = solve_cross_section(-2000.0, kDuct, 33, 33);
  for (int j = 0; j < cs.ny; ++j) {
    CHECK(cs.at(j, 0) == 0.0);
    CHECK(cs.at(j, cs.nz - 1) == 0.0);
  }
  for (int k = 0; k < cs.nz; ++k) {
    CHECK(cs.at(0, k) == 0.0);
    CHECK(cs.at(cs.ny - 1, k) == 0.0);
  }
  for (int j = 1; j < cs.ny - 1; ++j)
    for (int k = 1; k < cs.nz - 1; ++k)
      CHECK(cs.at(j, k) > 0.0);
}

TEST_CASE("linearity in the pressure gradient") {
  const CrossSection a = solve_cross_section(-1000.0, kDuct, 33, 33);
  const CrossSection b = solve_cross_section(-2000.0, kDuct, 33, 33);
  for (int j = 1; j < a.ny - 1; ++j)
    for (int k = 1; k < a.nz - 1; ++k)
      REQUIRE(b.at(j, k) == doctest::Approx(2.0 * a.at(j, k)).epsilon(1e-7));
  CHECK(b.re == doctest::Approx(2.0 * a.re).epsilon(1e-8));
  CHECK(b.u_max == doctest::Approx(2.0 * a.u_max).epsilon(1e-8));
}

TEST_CASE("solution symmetry") {
  const CrossSection cs = solve_cross_section(-3000.0, kDuct, 33, 33);
  for (int j = 0; j < cs.ny; ++j)
    for (int k = 0; k < cs.nz; ++k) {
      REQUIRE(cs.at(j, k) ==
              doctest::Approx(cs.at(cs.ny - 1 - j, k)).epsilon(1e-8).scale(cs.u_max));
      REQUIRE(cs.at(j, k) ==
              doctest::Approx(cs.at(j, cs.nz - 1 - k)).epsilon(1e-8).scale(cs.u_max));
    }
  // the maximum sits on the centerline node
  CHECK(cs.u_max == cs.at((cs.ny - 1) / 2, (cs.nz - 1) / 2));
}

TEST_CASE("quadrature of a unit field is exact") {
  CrossSection cs;
  cs.geometry = kDuct;
  cs.ny = 17;
  cs.nz = 17;
  cs.u.assign(17 * 17, 1.0);
  CHECK(compute_re(cs) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("reynolds number lands in the published window") {
  const CrossSection cs = solve_cross_section(-1000.0, kDuct, 101, 101);
  CHECK(cs.re > 33.0);
  CHECK(cs.re < 36.0);
  CHECK(cs.u_max / cs.re == doctest::Approx(2.109).epsilon(0.01));
}

TEST_CASE("pressure field") {
  CHECK(pressure_field(-1000.0, kDuct, kDuct.length) == 0.0);
  CHECK(pressure_field(-1000.0, kDuct, 0.0) == 5000.0);
  CHECK(pressure_field(-2000.0, kDuct, 2.5) == 5000.0);
  CHECK_THROWS_AS(pressure_field(-1000.0, kDuct, -0.1), Error);
  CHECK_THROWS_AS(pressure_field(-1000.0, kDuct, 5.1), Error);
}

TEST_CASE("dataset assembly") {
  const std::vector<double> train = {-1000.0, -3000.0};
  const std::vector<double> test = {-2000.0, -3000.0};
  const FlowDataset ds = assemble_dataset(kDuct, train, test, 3, 17, 17);

  CHECK(ds.train.size() == 2u * 3u * 17u * 17u);
  CHECK(ds.test.size() == 2u * 3u * 17u * 17u);
  CHECK(ds.cases.size() == 3u);  // -3000 is shared between the sweeps

  // Reynolds numbers increase with |c|
  for (std::size_t i = 1; i < ds.cases.size(); ++i) {
    CHECK(std::fabs(ds.cases[i].c) > std::fabs(ds.cases[i - 1].c));
    CHECK(ds.cases[i].re > ds.cases[i - 1].re);
  }

  // fully developed: u is identical across axial stations
  const std::size_t section = 17u * 17u;
  for (std::size_t i = 0; i < section; ++i) {
    CHECK(ds.train[i].u == ds.train[i + section].u);
    CHECK(ds.train[i].u == ds.train[i + 2 * section].u);
  }

  for (const FlowRecord& r : ds.train) {
    CHECK(r.x >= 0.0);
    CHECK(r.x <= kDuct.length);
    CHECK(std::fabs(r.y) <= kDuct.height / 2);
    CHECK(std::fabs(r.z) <= kDuct.width / 2);
    CHECK(r.u >= 0.0);
    CHECK(r.p >= 0.0);
  }

  // pressure is affine with p(L) = 0
  for (const FlowRecord& r : ds.test)
    if (r.x == kDuct.length) CHECK(r.p == 0.0);
}

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(assemble_dataset(kDuct, {}, {-1000.0}, 3, 17, 17), Error);
  CHECK_THROWS_AS(assemble_dataset(kDuct, {-1000.0}, {-2000.0}, 1, 17, 17), Error);
}

TEST_CASE("csv round trip is bit exact") {
  const FlowDataset ds = assemble_dataset(kDuct, {-1000.0}, {-2000.0}, 2, 17, 17);
  const auto dir = temp_dir("csv");
  write_dataset_csv(ds, dir.string());

  const std::vector<FlowRecord> back = read_records_csv((dir / "train.csv").string());
  REQUIRE(back.size() == ds.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].x == ds.train[i].x);
    REQUIRE(back[i].y == ds.train[i].y);
    REQUIRE(back[i].z == ds.train[i].z);
    REQUIRE(back[i].re == ds.train[i].re);
    REQUIRE(back[i].u == ds.train[i].u);
    REQUIRE(back[i].p == ds.train[i].p);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv edge cases") {
  const auto dir = temp_dir("csv_edge");
  write_records_csv({}, (dir / "empty.csv").string());
  CHECK(read_records_csv((dir / "empty.csv").string()).empty());

  CHECK_THROWS_AS(read_records_csv((dir / "missing.csv").string()), IoError);
  CHECK_THROWS_AS(write_records_csv({}, (dir / "no_such_dir" / "x.csv").string()), IoError);
  std::filesystem::remove_all(dir);
}
