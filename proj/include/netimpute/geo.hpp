#pragma once

#include <span>
#include <vector>

namespace netimpute {

/// WGS84 longitude/latitude in degrees.
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

using Polyline = std::vector<GeoPoint>;

namespace geo {

inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr double kMetersPerMile = 1609.344;

double haversine_m(GeoPoint a, GeoPoint b);

/// Initial great-circle bearing from a to b, degrees in [0, 360).
double initial_bearing_deg(GeoPoint a, GeoPoint b);

/// Smallest absolute difference between two headings, in [0, 180].
double angular_diff_deg(double a, double b);

/// Great-circle distance from p to the minor arc a-b.
double point_segment_distance_m(GeoPoint p, GeoPoint a, GeoPoint b);
double point_polyline_distance_m(GeoPoint p, std::span<const GeoPoint> line);

/// Minimum distance between two polylines; zero when they cross.
double polyline_distance_m(std::span<const GeoPoint> a, std::span<const GeoPoint> b);

double polyline_length_m(std::span<const GeoPoint> line);

/// Point at fraction t in [0, 1] of the polyline's length (linear in lon/lat per vertex span).
GeoPoint interpolate_along(std::span<const GeoPoint> line, double t);

}  // namespace geo
}  // namespace netimpute
