#include "netimpute/geo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace netimpute::geo {
namespace {

using Vec3 = std::array<double, 3>;

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

Vec3 to_unit(GeoPoint p) {
  const double lat = p.lat * kDegToRad;
  const double lon = p.lon * kDegToRad;
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

Vec3 cross(const Vec3& u, const Vec3& v) {
  return {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
}

double dot(const Vec3& u, const Vec3& v) { return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]; }

double norm(const Vec3& u) { return std::sqrt(dot(u, u)); }

Vec3 scaled(const Vec3& u, double s) { return {u[0] * s, u[1] * s, u[2] * s}; }

// Angle between two unit vectors, stable for tiny and near-antipodal angles.
double angle_between(const Vec3& u, const Vec3& v) { return std::atan2(norm(cross(u, v)), dot(u, v)); }

// True when c (on the great circle through a and b) lies on the minor arc a-b.
bool on_minor_arc(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& normal) {
  constexpr double eps = -1e-15;
  return dot(cross(a, c), normal) >= eps && dot(cross(c, b), normal) >= eps;
}

double arc_distance_rad(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 n = cross(a, b);
  const double n_len = norm(n);
  const double to_a = angle_between(p, a);
  if (n_len < 1e-15) return to_a;
  const Vec3 unit_n = scaled(n, 1.0 / n_len);
  const double off_plane = dot(p, unit_n);
  Vec3 c = {p[0] - off_plane * unit_n[0], p[1] - off_plane * unit_n[1], p[2] - off_plane * unit_n[2]};
  const double c_len = norm(c);
  if (c_len > 1e-15) {
    c = scaled(c, 1.0 / c_len);
    if (on_minor_arc(a, b, c, n)) return std::abs(std::asin(std::clamp(off_plane, -1.0, 1.0)));
  }
  return std::min(to_a, angle_between(p, b));
}

bool arcs_cross(const Vec3& a1, const Vec3& b1, const Vec3& a2, const Vec3& b2) {
  const Vec3 n1 = cross(a1, b1);
  const Vec3 n2 = cross(a2, b2);
  const Vec3 line = cross(n1, n2);
  const double len = norm(line);
  if (len < 1e-15) return false;  // co-circular arcs are handled by endpoint distances
  const Vec3 c = scaled(line, 1.0 / len);
  const Vec3 c_neg = scaled(c, -1.0);
  return (on_minor_arc(a1, b1, c, n1) && on_minor_arc(a2, b2, c, n2)) ||
         (on_minor_arc(a1, b1, c_neg, n1) && on_minor_arc(a2, b2, c_neg, n2));
}

}  // namespace

double haversine_m(GeoPoint a, GeoPoint b) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double dlat = lat2 - lat1;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double initial_bearing_deg(GeoPoint a, GeoPoint b) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double y = std::sin(dlon) * std::cos(lat2);
  const double x = std::cos(lat1) * std::sin(lat2) - std::sin(lat1) * std::cos(lat2) * std::cos(dlon);
  double deg = std::atan2(y, x) * kRadToDeg;
  deg = std::fmod(deg + 360.0, 360.0);
  return deg >= 360.0 ? 0.0 : deg;
}

double angular_diff_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

double point_segment_distance_m(GeoPoint p, GeoPoint a, GeoPoint b) {
  return kEarthRadiusM * arc_distance_rad(to_unit(p), to_unit(a), to_unit(b));
}

double point_polyline_distance_m(GeoPoint p, std::span<const GeoPoint> line) {
  if (line.empty()) return std::numeric_limits<double>::infinity();
  if (line.size() == 1) return haversine_m(p, line.front());
  const Vec3 pv = to_unit(p);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i)
    best = std::min(best, arc_distance_rad(pv, to_unit(line[i]), to_unit(line[i + 1])));
  return kEarthRadiusM * best;
}

double polyline_distance_m(std::span<const GeoPoint> a, std::span<const GeoPoint> b) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  if (a.size() >= 2 && b.size() >= 2) {
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
      const Vec3 a1 = to_unit(a[i]), b1 = to_unit(a[i + 1]);
      for (std::size_t j = 0; j + 1 < b.size(); ++j)
        if (arcs_cross(a1, b1, to_unit(b[j]), to_unit(b[j + 1]))) return 0.0;
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (const GeoPoint& p : a) best = std::min(best, point_polyline_distance_m(p, b));
  for (const GeoPoint& p : b) best = std::min(best, point_polyline_distance_m(p, a));
  return best;
}

double polyline_length_m(std::span<const GeoPoint> line) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) total += haversine_m(line[i], line[i + 1]);
  return total;
}

GeoPoint interpolate_along(std::span<const GeoPoint> line, double t) {
  if (line.empty()) return {};
  if (line.size() == 1 || t <= 0.0) return line.front();
  if (t >= 1.0) return line.back();
  const double target = t * polyline_length_m(line);
  double walked = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const double span_len = haversine_m(line[i], line[i + 1]);
    if (walked + span_len >= target && span_len > 0.0) {
      const double f = (target - walked) / span_len;
      return {line[i].lon + f * (line[i + 1].lon - line[i].lon), line[i].lat + f * (line[i + 1].lat - line[i].lat)};
    }
    walked += span_len;
  }
  return line.back();
}

}  // namespace netimpute::geo
