#include "netimpute/aggregate.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <map>
#include <utility>

#include "netimpute/error.hpp"

namespace netimpute {
namespace {

int parse_int(std::string_view s, const std::string& whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ValidationError("malformed timestamp '" + whole + "'");
  return v;
}

bool in_band(int hour, HourBand band) {
  switch (band) {
    case HourBand::All: return true;
    case HourBand::T0: return hour >= 22 || hour < 4;
    case HourBand::T1: return hour >= 4 && hour < 10;
    case HourBand::T2: return hour >= 10 && hour < 16;
    case HourBand::T3: return hour >= 16 && hour < 22;
  }
  return false;
}

const char* day_name(DayFilter d) {
  switch (d) {
    case DayFilter::Weekday: return "weekday";
    case DayFilter::Weekend: return "weekend";
    case DayFilter::All: break;
  }
  return "all";
}

const char* band_name(HourBand b) {
  switch (b) {
    case HourBand::T0: return "T0";
    case HourBand::T1: return "T1";
    case HourBand::T2: return "T2";
    case HourBand::T3: return "T3";
    case HourBand::All: break;
  }
  return "all";
}

}  // namespace

int CivilHour::iso_weekday() const {
  using namespace std::chrono;
  const weekday wd{sys_days{year_month_day{std::chrono::year{this->year},
                                           std::chrono::month{static_cast<unsigned>(this->month)},
                                           std::chrono::day{static_cast<unsigned>(this->day)}}}};
  return static_cast<int>(wd.iso_encoding());
}

std::string CivilHour::to_iso() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:00", year, month, day, hour);
  return buf;
}

CivilHour parse_civil_hour(const std::string& s) {
  if (s.size() < 13 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' '))
    throw ValidationError("malformed timestamp '" + s + "'");
  const std::string_view v(s);
  CivilHour t{parse_int(v.substr(0, 4), s), parse_int(v.substr(5, 2), s), parse_int(v.substr(8, 2), s),
              parse_int(v.substr(11, 2), s)};
  if (s.size() > 13 && s[13] != ':') throw ValidationError("malformed timestamp '" + s + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{t.year}, std::chrono::month{static_cast<unsigned>(t.month)},
                                        std::chrono::day{static_cast<unsigned>(t.day)}};
  if (t.month < 1 || t.month > 12 || t.day < 1 || !ymd.ok() || t.hour < 0 || t.hour > 23)
    throw ValidationError("invalid calendar hour '" + s + "'");
  return t;
}

std::string AggregationWindow::label() const {
  return std::string(day_name(day)) + ":" + band_name(hour) + ":" + (month == 0 ? "all" : std::to_string(month));
}

AggregationWindow AggregationWindow::parse(const std::string& label) {
  const auto c1 = label.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : label.find(':', c1 + 1);
  if (c2 == std::string::npos) throw ValidationError("window label '" + label + "' is not day:hour:month");
  const std::string d = label.substr(0, c1), h = label.substr(c1 + 1, c2 - c1 - 1), m = label.substr(c2 + 1);
  AggregationWindow w;
  if (d == "weekday") w.day = DayFilter::Weekday;
  else if (d == "weekend") w.day = DayFilter::Weekend;
  else if (d != "all") throw ValidationError("unknown day filter '" + d + "'");
  if (h == "T0") w.hour = HourBand::T0;
  else if (h == "T1") w.hour = HourBand::T1;
  else if (h == "T2") w.hour = HourBand::T2;
  else if (h == "T3") w.hour = HourBand::T3;
  else if (h != "all") throw ValidationError("unknown hour band '" + h + "'");
  if (m != "all") {
    int v = 0;
    auto [ptr, ec] = std::from_chars(m.data(), m.data() + m.size(), v);
    if (ec != std::errc() || ptr != m.data() + m.size() || v < 1 || v > 12)
      throw ValidationError("unknown month filter '" + m + "'");
    w.month = v;
  }
  return w;
}

bool window_membership(const CivilHour& t, const AggregationWindow& w) {
  if (w.month != 0 && t.month != w.month) return false;
  if (!in_band(t.hour, w.hour)) return false;
  if (w.day != DayFilter::All) {
    const bool weekend = t.iso_weekday() >= 6;
    if ((w.day == DayFilter::Weekend) != weekend) return false;
  }
  return true;
}

const char* to_string(OmissionReason r) {
  return r == OmissionReason::NoHoursInWindow ? "no_hours_in_window" : "zero_total_count";
}

AggregationReport aggregate_records(std::span<const HourlyClassRecord> records, const AggregationWindow& window) {
  struct Accumulator {
    std::array<double, kNumClasses> totals{};
    std::size_t n_hours = 0;
  };
  std::map<std::pair<std::string, int>, Accumulator> groups;
  for (const HourlyClassRecord& r : records) {
    Accumulator& acc = groups[{r.station_id, static_cast<int>(r.direction)}];
    if (!window_membership(r.timestamp, window)) continue;
    for (std::size_t c = 0; c < kNumClasses; ++c) acc.totals[c] += r.counts[c];
    ++acc.n_hours;
  }

  AggregationReport report;
  for (const auto& [key, acc] : groups) {
    const auto direction = static_cast<Direction>(key.second);
    if (acc.n_hours == 0) {
      report.omitted.push_back({key.first, direction, OmissionReason::NoHoursInWindow});
      continue;
    }
    double total = 0.0;
    for (double v : acc.totals) total += v;
    if (total <= 0.0) {
      report.omitted.push_back({key.first, direction, OmissionReason::ZeroTotalCount});
      continue;
    }
    StationObservation obs;
    obs.station_id = key.first;
    obs.direction = direction;
    obs.window = window;
    obs.mean_hourly_volume = total / static_cast<double>(acc.n_hours);
    obs.class_share = ClassShare::from_masses(acc.totals);
    obs.n_hours = acc.n_hours;
    report.observations.push_back(std::move(obs));
  }
  return report;
}

}  // namespace netimpute
