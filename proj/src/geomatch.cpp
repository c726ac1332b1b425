#include "netimpute/geomatch.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <utility>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

namespace netimpute {
namespace {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

using BoxPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using Box = bg::model::box<BoxPoint>;
using BoxEntry = std::pair<Box, std::size_t>;
using BoxTree = bgi::rtree<BoxEntry, bgi::quadratic<16>>;

constexpr double kMetersPerDegree = geo::kEarthRadiusM * std::numbers::pi / 180.0;

Box bounding_box(std::span<const GeoPoint> line) {
  double min_lon = std::numeric_limits<double>::infinity(), min_lat = min_lon;
  double max_lon = -min_lon, max_lat = -min_lon;
  for (const GeoPoint& p : line) {
    min_lon = std::min(min_lon, p.lon);
    max_lon = std::max(max_lon, p.lon);
    min_lat = std::min(min_lat, p.lat);
    max_lat = std::max(max_lat, p.lat);
  }
  return Box(BoxPoint(min_lon, min_lat), BoxPoint(max_lon, max_lat));
}

// Grows a lon/lat box by at least radius_m in every direction.
Box expanded(const Box& b, double radius_m) {
  const double dlat = radius_m / kMetersPerDegree * 1.01 + 1e-9;
  const double worst_lat = std::min(89.9, std::max(std::abs(b.min_corner().get<1>()), std::abs(b.max_corner().get<1>())) + dlat);
  const double dlon = dlat / std::cos(worst_lat * std::numbers::pi / 180.0);
  return Box(BoxPoint(b.min_corner().get<0>() - dlon, b.min_corner().get<1>() - dlat),
             BoxPoint(b.max_corner().get<0>() + dlon, b.max_corner().get<1>() + dlat));
}

std::vector<std::size_t> query(const BoxTree& tree, const Box& box) {
  std::vector<BoxEntry> hits;
  tree.query(bgi::intersects(box), std::back_inserter(hits));
  std::vector<std::size_t> ids;
  ids.reserve(hits.size());
  for (const auto& h : hits) ids.push_back(h.second);
  std::sort(ids.begin(), ids.end());
  return ids;
}

WeightMatch match_one_edge(const Edge& edge, std::span<const DirectedSegment> segments, const BoxTree& tree,
                           const MatchConfig& cfg) {
  WeightMatch out;
  const double bearing = edge_bearing(edge);
  std::vector<double> survivors;
  for (std::size_t s : query(tree, expanded(bounding_box(edge.geometry), cfg.buffer_radius_m))) {
    const DirectedSegment& seg = segments[s];
    if (geo::polyline_distance_m(edge.geometry, seg.geometry) > cfg.buffer_radius_m) continue;
    ++out.n_candidates;
    if (geo::angular_diff_deg(seg.bearing, bearing) > cfg.bearing_tolerance_deg) continue;
    survivors.push_back(seg.aadt);
  }
  out.n_after_bearing_filter = survivors.size();
  if (!survivors.empty()) out.weight = median(std::move(survivors));
  return out;
}

}  // namespace

void MatchConfig::validate() const {
  if (!(buffer_radius_m > 0.0)) throw ValidationError("buffer_radius must be positive");
  if (!(snap_max_distance_m > 0.0)) throw ValidationError("snap_max_distance must be positive");
  if (!(bearing_tolerance_deg > 0.0 && bearing_tolerance_deg < 90.0))
    throw ValidationError("bearing_tolerance must be in (0, 90) degrees");
  if (!(station_bearing_tolerance_deg > 0.0 && station_bearing_tolerance_deg < 90.0))
    throw ValidationError("station_bearing_tolerance must be in (0, 90) degrees");
}

double azimuth_deg(Direction d) { return 45.0 * static_cast<int>(d); }

Direction opposite(Direction d) { return static_cast<Direction>((static_cast<int>(d) + 4) % 8); }

const char* to_string(Direction d) {
  static constexpr std::array<const char*, 8> names = {"N", "NE", "E", "SE", "S", "SW", "W", "NW"};
  return names[static_cast<int>(d)];
}

Direction parse_direction(const std::string& s) {
  for (int i = 0; i < 8; ++i)
    if (s == to_string(static_cast<Direction>(i))) return static_cast<Direction>(i);
  throw ValidationError("unknown direction code '" + s + "'");
}

double polyline_bearing(std::span<const GeoPoint> line) {
  if (line.size() < 2 || geo::haversine_m(line.front(), line.back()) < 1e-6)
    throw ValidationError("degenerate geometry: coincident endpoints");
  return geo::initial_bearing_deg(line.front(), line.back());
}

double edge_bearing(const Edge& e) {
  try {
    return polyline_bearing(e.geometry);
  } catch (const ValidationError&) {
    throw ValidationError("edge '" + e.id.str() + "' has degenerate geometry (coincident endpoints)");
  }
}

std::vector<DirectedSegment> directionalize_and_halve(std::span<const DenseSegment> dense) {
  std::vector<DirectedSegment> out;
  out.reserve(dense.size() * 2);
  for (const DenseSegment& seg : dense) {
    if (!std::isfinite(seg.aadt) || seg.aadt < 0.0)
      throw ValidationError("dense segment '" + seg.id + "' has negative AADT");
    double bearing = 0.0;
    try {
      bearing = polyline_bearing(seg.geometry);
    } catch (const ValidationError&) {
      throw ValidationError("dense segment '" + seg.id + "' has degenerate geometry");
    }
    if (seg.one_way) {
      out.push_back({seg.id, false, seg.aadt, seg.geometry, bearing});
      continue;
    }
    Polyline reversed(seg.geometry.rbegin(), seg.geometry.rend());
    const double half = seg.aadt / 2.0;
    out.push_back({seg.id, false, half, seg.geometry, bearing});
    out.push_back({seg.id, true, half, reversed, polyline_bearing(reversed)});
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::vector<WeightMatch> transfer_weights(const RoadNetwork& target, std::span<const DirectedSegment> segments,
                                          const MatchConfig& cfg, Execution exec) {
  cfg.validate();
  if (target.edge_count() == 0) throw ValidationError("target network has no edges");

  std::vector<BoxEntry> entries;
  entries.reserve(segments.size());
  for (std::size_t s = 0; s < segments.size(); ++s) entries.emplace_back(bounding_box(segments[s].geometry), s);
  const BoxTree tree(entries.begin(), entries.end());

  const auto edges = target.edges();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(edges.size());
  std::vector<WeightMatch> out(edges.size());

  if (exec == Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = match_one_edge(edges[i], segments, tree, cfg);
    return out;
  }

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = match_one_edge(edges[i], segments, tree, cfg);
    } catch (...) {
#pragma omp critical(netimpute_transfer_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

struct EdgeLocator::Index {
  BoxTree tree;
};

EdgeLocator::EdgeLocator(const RoadNetwork& net) : net_(&net), index_(std::make_unique<Index>()) {
  std::vector<BoxEntry> entries;
  entries.reserve(net.edge_count());
  for (EdgeIndex e = 0; e < net.edge_count(); ++e) entries.emplace_back(bounding_box(net.edge(e).geometry), e);
  index_->tree = BoxTree(entries.begin(), entries.end());
}

EdgeLocator::~EdgeLocator() = default;
EdgeLocator::EdgeLocator(EdgeLocator&&) noexcept = default;
EdgeLocator& EdgeLocator::operator=(EdgeLocator&&) noexcept = default;

std::vector<EdgeIndex> EdgeLocator::near(GeoPoint p, double radius_m) const {
  return query(index_->tree, expanded(Box(BoxPoint(p.lon, p.lat), BoxPoint(p.lon, p.lat)), radius_m));
}

SnapResult snap_station(const Station& station, const EdgeLocator& locator, const MatchConfig& cfg) {
  cfg.validate();
  const RoadNetwork& net = locator.network();
  const double azimuth = azimuth_deg(station.direction);
  bool any_nearby = false;
  std::optional<SnapResult> best;
  for (EdgeIndex e : locator.near(station.location, cfg.snap_max_distance_m)) {
    const Edge& edge = net.edge(e);
    const double d = geo::point_polyline_distance_m(station.location, edge.geometry);
    if (d > cfg.snap_max_distance_m) continue;
    any_nearby = true;
    if (geo::angular_diff_deg(edge_bearing(edge), azimuth) > cfg.station_bearing_tolerance_deg) continue;
    // Candidates arrive in EdgeIndex order, so strict < keeps the smallest id on ties.
    if (!best || d < best->distance_m) best = SnapResult{e, d};
  }
  const std::string who = "station '" + station.station_id + "' (" + to_string(station.direction) + ")";
  if (!any_nearby) throw MatchError(SnapFailure::NoEdgeNearby, who + ": no edge within snap distance");
  if (!best) throw MatchError(SnapFailure::NoDirectionMatch, who + ": no edge matches the travel direction");
  return *best;
}

SnapResult snap_station(const Station& station, const RoadNetwork& net, const MatchConfig& cfg) {
  return snap_station(station, EdgeLocator(net), cfg);
}

std::vector<StationMatch> snap_stations(std::span<const Station> stations, const RoadNetwork& net,
                                        const MatchConfig& cfg) {
  cfg.validate();
  const EdgeLocator locator(net);
  std::vector<StationMatch> out;
  out.reserve(stations.size());
  for (const Station& s : stations) {
    StationMatch m{s, std::nullopt, std::nullopt};
    try {
      m.result = snap_station(s, locator, cfg);
    } catch (const MatchError& err) {
      m.failure = err.kind();
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace netimpute
