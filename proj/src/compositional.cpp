#include "cctree/compositional.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <tuple>

#include "cctree/error.hpp"

namespace cctree {

namespace {

const double kSqrt2Over3 = std::sqrt(2.0 / 3.0);
const double kSqrtHalf = std::sqrt(0.5);

std::chrono::sys_days week_one_monday(int iso_year) {
  using namespace std::chrono;
  const sys_days jan4{year{iso_year} / January / 4};
  const unsigned offset = weekday{jan4}.iso_encoding() - 1;
  return jan4 - days{offset};
}

int weeks_in_year(int iso_year) {
  return static_cast<int>((week_one_monday(iso_year + 1) - week_one_monday(iso_year)).count() / 7);
}

std::chrono::sys_days boundary_week_start(int year, SeasonBoundary b) {
  using namespace std::chrono;
  const sys_days date{std::chrono::year{year} / month{b.month} / day{b.day}};
  return date - days{weekday{date}.iso_encoding() - 1};
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

IlrPoint ilr_forward(const Composition3& c) {
  if (!(c.p1 > 0.0 && c.p2 > 0.0 && c.p3 > 0.0)) {
    throw Error(ErrorCode::Domain, "ILR needs strictly positive proportions");
  }
  const double l1 = std::log(c.p1);
  const double l2 = std::log(c.p2);
  const double l3 = std::log(c.p3);
  return {kSqrt2Over3 * (l3 - 0.5 * (l1 + l2)), kSqrtHalf * (l1 - l2)};
}

Composition3 ilr_inverse(const IlrPoint& p) {
  // Log-shares up to a common constant: ln p1 - ln p2 = sqrt(2) y2 and
  // ln p3 - (ln p1 + ln p2) / 2 = sqrt(3/2) y1.
  const double a1 = std::sqrt(0.5) * p.y2;
  const double a2 = -a1;
  const double a3 = std::sqrt(1.5) * p.y1;
  const double m = std::max({a1, a2, a3});
  const double e1 = std::exp(a1 - m);
  const double e2 = std::exp(a2 - m);
  const double e3 = std::exp(a3 - m);
  const double s = e1 + e2 + e3;
  return {e1 / s, e2 / s, e3 / s};
}

std::optional<std::pair<int, int>> parse_iso_week(const std::string& text) {
  const std::string t = trim(text);
  if (t.size() < 7 || t.size() > 8 || t[4] != '-' || t[5] != 'W') return std::nullopt;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i == 4 || i == 5) continue;
    if (!std::isdigit(static_cast<unsigned char>(t[i]))) return std::nullopt;
  }
  const int year = std::stoi(t.substr(0, 4));
  const int week = std::stoi(t.substr(6));
  if (week < 1 || week > weeks_in_year(year)) return std::nullopt;
  return std::pair{year, week};
}

std::chrono::sys_days iso_week_start(int iso_year, int iso_week) {
  return week_one_monday(iso_year) + std::chrono::days{7 * (iso_week - 1)};
}

std::pair<int, int> iso_week_of(std::chrono::sys_days date) {
  using namespace std::chrono;
  const sys_days monday = date - days{weekday{date}.iso_encoding() - 1};
  const int iso_year = static_cast<int>(year_month_day{monday + days{3}}.year());
  const auto week = (monday - week_one_monday(iso_year)).count() / 7 + 1;
  return {iso_year, static_cast<int>(week)};
}

std::chrono::sys_days season_start(int season, SeasonBoundary boundary) {
  return boundary_week_start(season, boundary);
}

int season_of(int iso_year, int iso_week, SeasonBoundary boundary) {
  const auto start = iso_week_start(iso_year, iso_week);
  const int year = static_cast<int>(std::chrono::year_month_day{start}.year());
  return start < boundary_week_start(year, boundary) ? year - 1 : year;
}

std::vector<UnitSeason> aggregate_counts(const std::vector<WeeklyRecord>& records,
                                         const AggregationOptions& options) {
  struct Acc {
    double c[3] = {0.0, 0.0, 0.0};
    std::string itz;
  };
  std::map<std::pair<std::string, int>, Acc> cells;
  for (const auto& r : records) {
    auto& acc = cells[{r.unit_id, season_of(r.iso_year, r.iso_week, options.boundary)}];
    acc.c[0] += r.count_h1;
    acc.c[1] += r.count_h3;
    acc.c[2] += r.count_b;
    if (!r.itz.empty() && (acc.itz.empty() || r.itz < acc.itz)) acc.itz = r.itz;
  }
  std::vector<UnitSeason> out;
  for (const auto& [key, acc] : cells) {
    const double total = acc.c[0] + acc.c[1] + acc.c[2];
    if (total < options.min_total) continue;
    double c[3];
    for (int k = 0; k < 3; ++k) c[k] = acc.c[k] > 0.0 ? acc.c[k] : options.pseudo_count;
    const double s = c[0] + c[1] + c[2];
    out.push_back({key.first, key.second, acc.itz, total, {c[0] / s, c[1] / s, c[2] / s}});
  }
  return out;
}

std::vector<WeeklyRecord> read_weekly_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Ingestion, "empty input, expected a header");
  const auto header = split_csv(line);
  const std::vector<std::string> expected{"unit_id", "iso_week", "count_h1", "count_h3", "count_b"};
  if (header.size() < expected.size() || header.size() > 6 ||
      !std::equal(expected.begin(), expected.end(), header.begin()) ||
      (header.size() == 6 && header[5] != "itz")) {
    throw Error(ErrorCode::Ingestion,
                "header must be unit_id,iso_week,count_h1,count_h3,count_b[,itz]");
  }
  std::vector<WeeklyRecord> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::Ingestion, "row " + std::to_string(row) + ": " + why);
    };
    if (cells.size() != header.size()) fail("expected " + std::to_string(header.size()) + " fields");
    WeeklyRecord r;
    r.unit_id = cells[0];
    if (r.unit_id.empty()) fail("empty unit_id");
    const auto week = parse_iso_week(cells[1]);
    if (!week) fail("bad iso_week '" + cells[1] + "'");
    r.iso_year = week->first;
    r.iso_week = week->second;
    double* counts[3] = {&r.count_h1, &r.count_h3, &r.count_b};
    for (int k = 0; k < 3; ++k) {
      const std::string& s = cells[static_cast<std::size_t>(k) + 2];
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0' || !std::isfinite(v) || v < 0.0) {
        fail("bad count '" + s + "'");
      }
      *counts[k] = v;
    }
    if (header.size() == 6) r.itz = cells[5];
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_iso_week(int iso_year, int iso_week) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-W%02d", iso_year, iso_week);
  return buf;
}

void write_weekly_csv(std::ostream& out, const std::vector<WeeklyRecord>& records) {
  const bool with_itz = std::any_of(records.begin(), records.end(),
                                    [](const WeeklyRecord& r) { return !r.itz.empty(); });
  out << "unit_id,iso_week,count_h1,count_h3,count_b" << (with_itz ? ",itz" : "") << '\n';
  for (const auto& r : records) {
    out << r.unit_id << ',' << format_iso_week(r.iso_year, r.iso_week) << ',' << r.count_h1 << ','
        << r.count_h3 << ',' << r.count_b;
    if (with_itz) out << ',' << r.itz;
    out << '\n';
  }
}

}  // namespace cctree
