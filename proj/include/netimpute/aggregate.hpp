#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netimpute/class_share.hpp"
#include "netimpute/geomatch.hpp"
#include "netimpute/network.hpp"

namespace netimpute {

/// A station-local calendar hour.
struct CivilHour {
  int year = 1970;
  int month = 1;   // 1..12
  int day = 1;     // 1..31
  int hour = 0;    // 0..23

  /// ISO weekday, Monday = 1 .. Sunday = 7.
  int iso_weekday() const;
  std::string to_iso() const;
  auto operator<=>(const CivilHour&) const = default;
};

/// Accepts "YYYY-MM-DDTHH", "YYYY-MM-DDTHH:MM" and "YYYY-MM-DDTHH:MM:SS"
/// (a space may replace the T). Minutes and seconds are ignored.
CivilHour parse_civil_hour(const std::string& s);

struct HourlyClassRecord {
  std::string station_id;
  Direction direction = Direction::N;
  CivilHour timestamp;
  std::array<double, kNumClasses> counts{};  // vehicles/hour, classes 5..13
};

enum class DayFilter { All, Weekday, Weekend };
enum class HourBand { All, T0, T1, T2, T3 };

/// T0 = [22, 4) wrapping midnight, T1 = [4, 10), T2 = [10, 16), T3 = [16, 22).
struct AggregationWindow {
  DayFilter day = DayFilter::All;
  HourBand hour = HourBand::All;
  int month = 0;  // 0 = all months

  /// "day:hour:month", e.g. "weekday:T1:all" or "all:all:7".
  std::string label() const;
  static AggregationWindow parse(const std::string& label);
  auto operator<=>(const AggregationWindow&) const = default;
};

bool window_membership(const CivilHour& t, const AggregationWindow& w);

struct StationObservation {
  std::string station_id;
  Direction direction = Direction::N;
  AggregationWindow window;
  double mean_hourly_volume = 0.0;  // classes 5..13 total per hour
  ClassShare class_share = ClassShare::uniform();
  std::size_t n_hours = 0;
  std::optional<EdgeId> matched_edge;
};

enum class OmissionReason { NoHoursInWindow, ZeroTotalCount };
const char* to_string(OmissionReason r);

struct Omission {
  std::string station_id;
  Direction direction = Direction::N;
  OmissionReason reason = OmissionReason::NoHoursInWindow;
};

struct AggregationReport {
  std::vector<StationObservation> observations;  // ordered by (station_id, direction)
  std::vector<Omission> omitted;
};

AggregationReport aggregate_records(std::span<const HourlyClassRecord> records, const AggregationWindow& window);

}  // namespace netimpute
