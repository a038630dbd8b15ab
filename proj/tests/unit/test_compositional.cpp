#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cctree/compositional.hpp"
#include "cctree/error.hpp"
#include "cctree/flu.hpp"
#include "cctree/random.hpp"

using namespace cctree;
using namespace std::chrono;
using Catch::Matchers::WithinAbs;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Config;
}

WeeklyRecord record(std::string unit, int year, int week, double h1, double h3, double b,
                    std::string itz = "") {
  return {std::move(unit), year, week, h1, h3, b, std::move(itz)};
}

}  // namespace

TEST_CASE("ILR forward map") {
  const IlrPoint centre = ilr_forward({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  CHECK(std::abs(centre.y1) <= 1e-15);
  CHECK(std::abs(centre.y2) <= 1e-15);

  // y1 = sqrt(2/3) ln(q / p) = 1 when q = p e^{sqrt(3/2)}.
  const double p = 1.0 / (2.0 + std::exp(std::sqrt(1.5)));
  const IlrPoint one = ilr_forward({p, p, p * std::exp(std::sqrt(1.5))});
  CHECK_THAT(one.y1, WithinAbs(1.0, 1e-12));
  CHECK_THAT(one.y2, WithinAbs(0.0, 1e-15));

  const IlrPoint a = ilr_forward({0.2, 0.5, 0.3});
  const IlrPoint b = ilr_forward({0.5, 0.2, 0.3});
  CHECK_THAT(b.y1, WithinAbs(a.y1, 1e-15));
  CHECK_THAT(b.y2, WithinAbs(-a.y2, 1e-15));
  CHECK_THAT(a.y2, WithinAbs(std::sqrt(0.5) * std::log(0.2 / 0.5), 1e-15));

  CHECK(code_of([] { ilr_forward({0.0, 0.5, 0.5}); }) == ErrorCode::Domain);
}

TEST_CASE("ILR inverse") {
  const Composition3 c = ilr_inverse({0.0, 0.0});
  CHECK_THAT(c.p1, WithinAbs(1.0 / 3.0, 1e-15));
  CHECK_THAT(c.p3, WithinAbs(1.0 / 3.0, 1e-15));
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const double w1 = rng.uniform();
    const double w2 = rng.uniform();
    const double w3 = rng.uniform();
    const double s = w1 + w2 + w3;
    const Composition3 in{w1 / s, w2 / s, w3 / s};
    const Composition3 out = ilr_inverse(ilr_forward(in));
    CHECK(std::abs(out.p1 - in.p1) <= 1e-12);
    CHECK(std::abs(out.p2 - in.p2) <= 1e-12);
    CHECK(std::abs(out.p3 - in.p3) <= 1e-12);
  }
  for (double y1 = -3.0; y1 <= 3.0; y1 += 0.5) {
    for (double y2 = -3.0; y2 <= 3.0; y2 += 0.5) {
      const Composition3 c2 = ilr_inverse({y1, y2});
      CHECK(c2.p1 > 0.0);
      CHECK(std::abs(c2.p1 + c2.p2 + c2.p3 - 1.0) <= 1e-12);
      const IlrPoint back = ilr_forward(c2);
      CHECK(std::abs(back.y1 - y1) <= 1e-12);
      CHECK(std::abs(back.y2 - y2) <= 1e-12);
    }
  }
}

TEST_CASE("ISO weeks and seasons") {
  CHECK(parse_iso_week("2015-W53") == std::pair{2015, 53});
  CHECK(!parse_iso_week("2014-W53"));
  CHECK(!parse_iso_week("2014W05"));
  CHECK(!parse_iso_week("2014-W00"));
  CHECK(format_iso_week(2016, 3) == "2016-W03");
  CHECK(iso_week_start(2021, 1) == sys_days{year{2021} / January / 4});
  CHECK(iso_week_of(sys_days{year{2021} / January / 1}) == std::pair{2020, 53});

  // April 1 2015 is a Wednesday in 2015-W14.
  CHECK(season_of(2015, 14) == 2015);
  CHECK(season_of(2015, 13) == 2014);
  CHECK(season_of(2016, 2) == 2015);
  CHECK(season_start(2015) == iso_week_start(2015, 14));
  const SeasonBoundary october{10, 1};
  CHECK(season_of(2015, 39, october) == 2014);
  CHECK(season_of(2015, 40, october) == 2015);
}

TEST_CASE("count aggregation") {
  SECTION("shares") {
    const auto rows = aggregate_counts({record("A", 2015, 20, 4, 10, 30), record("A", 2015, 30, 6, 10, 40)});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].season == 2015);
    CHECK(rows[0].total == 100.0);
    CHECK_THAT(rows[0].composition.p1, WithinAbs(0.1, 1e-15));
    CHECK_THAT(rows[0].composition.p2, WithinAbs(0.2, 1e-15));
    CHECK_THAT(rows[0].composition.p3, WithinAbs(0.7, 1e-15));
  }
  SECTION("fewer than 50 cases are dropped") {
    CHECK(aggregate_counts({record("A", 2015, 20, 9, 20, 20)}).empty());
    CHECK(aggregate_counts({record("A", 2015, 20, 10, 20, 20)}).size() == 1);
  }
  SECTION("zero cells take the pseudo-count") {
    const auto rows = aggregate_counts({record("A", 2015, 20, 0, 50, 50)});
    REQUIRE(rows.size() == 1);
    CHECK_THAT(rows[0].composition.p1, WithinAbs(0.5 / 100.5, 1e-15));
    CHECK_THAT(rows[0].composition.p2, WithinAbs(50.0 / 100.5, 1e-15));
  }
  SECTION("seasons split at the week containing April 1") {
    const auto rows = aggregate_counts({record("A", 2015, 13, 30, 30, 30), record("A", 2015, 14, 30, 30, 30)});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].season == 2014);
    CHECK(rows[1].season == 2015);
  }
  SECTION("order-independent") {
    std::vector<WeeklyRecord> records;
    Rng rng(2);
    for (int k = 0; k < 300; ++k) {
      records.push_back(record("U" + std::to_string(rng.below(6)), 2012 + static_cast<int>(rng.below(3)),
                               1 + static_cast<int>(rng.below(52)), static_cast<double>(rng.below(9)),
                               static_cast<double>(rng.below(9)), static_cast<double>(rng.below(9)), "Z"));
    }
    const auto a = aggregate_counts(records);
    std::reverse(records.begin(), records.end());
    const auto b = aggregate_counts(records);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].unit_id == b[i].unit_id);
      CHECK(a[i].season == b[i].season);
      CHECK(a[i].composition.p1 == b[i].composition.p1);
      CHECK(a[i].composition.p3 == b[i].composition.p3);
    }
    CHECK(std::is_sorted(a.begin(), a.end(), [](const UnitSeason& x, const UnitSeason& y) {
      return std::tie(x.unit_id, x.season) < std::tie(y.unit_id, y.season);
    }));
  }
}

TEST_CASE("weekly CSV ingestion") {
  SECTION("round trip") {
    const std::vector<WeeklyRecord> records{record("A", 2015, 3, 1, 2, 3, "Z1"), record("B", 2016, 52, 0, 7, 0, "Z2")};
    std::stringstream io;
    write_weekly_csv(io, records);
    const auto back = read_weekly_csv(io);
    REQUIRE(back.size() == 2);
    CHECK(back[1].unit_id == "B");
    CHECK(back[1].iso_week == 52);
    CHECK(back[1].count_h3 == 7.0);
    CHECK(back[0].itz == "Z1");
  }
  SECTION("malformed rows name the row") {
    std::istringstream bad("unit_id,iso_week,count_h1,count_h3,count_b\nA,2015-W03,1,2,3\nB,2015-W99,1,2,3\n");
    try {
      read_weekly_csv(bad);
      FAIL("expected an ingestion error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Ingestion);
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
    std::istringstream negative("unit_id,iso_week,count_h1,count_h3,count_b\nA,2015-W03,-1,2,3\n");
    CHECK(code_of([&] { read_weekly_csv(negative); }) == ErrorCode::Ingestion);
    std::istringstream header("unit,week\nA,2015-W03\n");
    CHECK(code_of([&] { read_weekly_csv(header); }) == ErrorCode::Ingestion);
  }
}

TEST_CASE("flu fixture") {
  FluFixtureConfig config;
  config.seed = 5;
  const auto a = generate_flu_fixture(config);
  const auto b = generate_flu_fixture(config);
  REQUIRE(a.size() == b.size());
  CHECK(std::equal(a.begin(), a.end(), b.begin(), [](const WeeklyRecord& x, const WeeklyRecord& y) {
    return x.unit_id == y.unit_id && x.iso_year == y.iso_year && x.iso_week == y.iso_week &&
           x.count_h1 == y.count_h1 && x.count_h3 == y.count_h3 && x.count_b == y.count_b;
  }));
  const auto rows = aggregate_counts(a);
  CHECK(rows.size() > 600);
  CHECK(rows.size() < 80 * 9);
  for (const auto& r : rows) {
    CHECK(r.season >= 2010);
    CHECK(r.season <= 2018);
    CHECK(!r.itz.empty());
  }
  const Dataset d = flu_dataset(rows);
  CHECK(d.rows() == static_cast<Index>(rows.size()));
  CHECK(d.covariates.size() == 2);
  CHECK(d.covariates[0].name == "season");
  CHECK(d.covariates[1].name == "itz");
  CHECK(code_of([] { flu_dataset({}); }) == ErrorCode::NoData);
}

TEST_CASE("flu pipeline") {
  FluFixtureConfig fixture;
  fixture.seed = 9;
  FluConfig config;
  config.cv.seed = 9;
  config.margins.seed = 9;
  const FluResult result = run_flu(generate_flu_fixture(fixture), config);
  CHECK(result.conditional_loglik >= result.benchmark_loglik);
  CHECK(!result.leaves.empty());
  Index total = 0;
  for (const auto& leaf : result.leaves) total += leaf.n;
  CHECK(total == result.data.rows());
  CHECK(splits_on(result.fit.selected, "season"));
  CHECK(!describe_path(result.fit.selected, result.leaves.front().leaf).empty());

  SECTION("nothing left after filtering") {
    CHECK(code_of([&] { run_flu({record("A", 2015, 20, 1, 1, 1)}, config); }) == ErrorCode::NoData);
  }
}
