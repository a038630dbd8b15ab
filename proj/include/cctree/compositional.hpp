#pragma once

#include <chrono>
#include <istream>
#include <ostream>
#include <optional>
#include <string>
#include <vector>

namespace cctree {

/// Shares of A/H1N1pdm, A/H3N2 and B; strictly positive, summing to one.
struct Composition3 {
  double p1 = 0.0;
  double p2 = 0.0;
  double p3 = 0.0;
};

struct IlrPoint {
  double y1 = 0.0;
  double y2 = 0.0;
};

/// y1 = sqrt(2/3) ln(p3 / sqrt(p1 p2)), y2 = sqrt(1/2) ln(p1 / p2).
IlrPoint ilr_forward(const Composition3& c);

/// The positive composition (summing to one) that maps forward to p.
Composition3 ilr_inverse(const IlrPoint& p);

struct WeeklyRecord {
  std::string unit_id;
  int iso_year = 0;
  int iso_week = 0;
  double count_h1 = 0.0;
  double count_h3 = 0.0;
  double count_b = 0.0;
  std::string itz;  // optional grouping, passed through
};

/// Parses "YYYY-Www"; nothing when malformed or the week does not exist.
std::optional<std::pair<int, int>> parse_iso_week(const std::string& text);

/// Monday of an ISO week.
std::chrono::sys_days iso_week_start(int iso_year, int iso_week);

struct SeasonBoundary {
  unsigned month = 4;
  unsigned day = 1;
};

/// ISO (year, week) of the week containing a date.
std::pair<int, int> iso_week_of(std::chrono::sys_days date);

/// Season (labelled by its starting calendar year) of an ISO week: a week
/// belongs to season Y when it is the week containing the boundary date of Y
/// or a later one, and precedes the week containing the boundary of Y + 1.
int season_of(int iso_year, int iso_week, SeasonBoundary boundary = {});

/// Monday of the first week of a season.
std::chrono::sys_days season_start(int season, SeasonBoundary boundary = {});

struct UnitSeason {
  std::string unit_id;
  int season = 0;
  std::string itz;
  double total = 0.0;  // raw classified cases
  Composition3 composition;
};

struct AggregationOptions {
  SeasonBoundary boundary;
  double min_total = 50.0;
  double pseudo_count = 0.5;
};

/// Sums weekly counts per unit and season, drops unit-seasons with fewer than
/// min_total cases and replaces zero cells by pseudo_count before normalizing.
/// Output is sorted by (unit_id, season).
std::vector<UnitSeason> aggregate_counts(const std::vector<WeeklyRecord>& records,
                                         const AggregationOptions& options = {});

/// Reads unit_id, iso_week, count_h1, count_h3, count_b[, itz] with a header
/// row; throws Error(Ingestion) naming the offending data row.
std::vector<WeeklyRecord> read_weekly_csv(std::istream& in);

/// Inverse of read_weekly_csv (the itz column is written when any record has one).
void write_weekly_csv(std::ostream& out, const std::vector<WeeklyRecord>& records);

/// ISO week label "YYYY-Www".
std::string format_iso_week(int iso_year, int iso_week);

}  // namespace cctree
