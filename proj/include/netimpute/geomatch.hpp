#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netimpute/error.hpp"
#include "netimpute/geo.hpp"
#include "netimpute/network.hpp"

namespace netimpute {

struct MatchConfig {
  double buffer_radius_m = 100.0;
  double bearing_tolerance_deg = 15.0;
  double station_bearing_tolerance_deg = 45.0;
  double snap_max_distance_m = 500.0;

  void validate() const;
};

enum class Direction { N, NE, E, SE, S, SW, W, NW };

double azimuth_deg(Direction d);
Direction opposite(Direction d);
const char* to_string(Direction d);
Direction parse_direction(const std::string& s);

/// First-to-last great-circle bearing of an edge. Throws ValidationError when
/// the geometry's ends coincide.
double edge_bearing(const Edge& e);
double polyline_bearing(std::span<const GeoPoint> line);

// Dense (bidirectional) network with AADT per segment.
struct DenseSegment {
  std::string id;
  double aadt = 0.0;
  bool one_way = false;
  Polyline geometry;
};

struct DirectedSegment {
  std::string source_id;
  bool reversed = false;  // true: digitized geometry was flipped
  double aadt = 0.0;      // unidirectional
  Polyline geometry;
  double bearing = 0.0;
};

/// Two-way segments become two opposing segments at AADT/2; one-way segments
/// pass through at full AADT. Throws ValidationError on negative AADT.
std::vector<DirectedSegment> directionalize_and_halve(std::span<const DenseSegment> dense);

struct WeightMatch {
  std::optional<double> weight;
  std::size_t n_candidates = 0;
  std::size_t n_after_bearing_filter = 0;
};

/// Median; the mean of the two middle values for even counts. Empty input is
/// a precondition violation.
double median(std::vector<double> values);

enum class Execution { Serial, Parallel };

/// Buffer each target edge, collect intersecting directed segments, keep those
/// within the bearing tolerance, and assign their median AADT. Results are
/// indexed by EdgeIndex; edges without survivors get an unset weight.
std::vector<WeightMatch> transfer_weights(const RoadNetwork& target, std::span<const DirectedSegment> segments,
                                          const MatchConfig& cfg, Execution exec = Execution::Parallel);

struct Station {
  std::string station_id;
  Direction direction = Direction::N;
  GeoPoint location;
  std::optional<std::string> region_tag;
};

enum class SnapFailure { NoEdgeNearby, NoDirectionMatch };

class MatchError : public ValidationError {
 public:
  MatchError(SnapFailure kind, const std::string& what) : ValidationError(what), kind_(kind) {}
  SnapFailure kind() const { return kind_; }

 private:
  SnapFailure kind_;
};

struct SnapResult {
  EdgeIndex edge = 0;
  double distance_m = 0.0;
};

/// Spatial index over a network's edges for repeated station snapping.
class EdgeLocator {
 public:
  explicit EdgeLocator(const RoadNetwork& net);
  ~EdgeLocator();
  EdgeLocator(EdgeLocator&&) noexcept;
  EdgeLocator& operator=(EdgeLocator&&) noexcept;

  /// Edges whose bounding box lies within radius_m of p, ascending.
  std::vector<EdgeIndex> near(GeoPoint p, double radius_m) const;
  const RoadNetwork& network() const { return *net_; }

 private:
  struct Index;
  const RoadNetwork* net_;
  std::unique_ptr<Index> index_;
};

/// Nearest edge within snap_max_distance whose bearing agrees with the station
/// direction. Ties go to the smaller EdgeId. Throws MatchError.
SnapResult snap_station(const Station& station, const EdgeLocator& locator, const MatchConfig& cfg);
SnapResult snap_station(const Station& station, const RoadNetwork& net, const MatchConfig& cfg);

struct StationMatch {
  Station station;
  std::optional<SnapResult> result;
  std::optional<SnapFailure> failure;
};

/// Snaps every station, recording failures instead of throwing.
std::vector<StationMatch> snap_stations(std::span<const Station> stations, const RoadNetwork& net,
                                        const MatchConfig& cfg);

}  // namespace netimpute
