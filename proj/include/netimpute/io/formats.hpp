#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netimpute/aggregate.hpp"
#include "netimpute/evaluate.hpp"
#include "netimpute/geomatch.hpp"
#include "netimpute/impute.hpp"
#include "netimpute/network.hpp"

namespace netimpute::io {

Polyline parse_wkt_linestring(const std::string& wkt);
std::string format_wkt_linestring(std::span<const GeoPoint> line);

/// A network plus the aadt_truck column as edge weights.
struct NetworkData {
  RoadNetwork network;
  std::vector<std::optional<double>> aadt_truck;  // by EdgeIndex
};

/// GeoJSON (.geojson/.json) or CSV edge list, chosen by extension. Node
/// coordinates come from geometry endpoints.
NetworkData read_network(const std::filesystem::path& path, const BuildOptions& options = {});
NetworkData parse_network_geojson(const std::string& text, const std::string& source, const BuildOptions& options = {});
NetworkData parse_network_csv(const std::string& text, const std::string& source, const BuildOptions& options = {});
std::string network_csv(const RoadNetwork& net, std::span<const std::optional<double>> aadt_truck);
std::string network_geojson(const RoadNetwork& net, std::span<const std::optional<double>> aadt_truck);

std::vector<DenseSegment> read_dense(const std::filesystem::path& path);
std::string dense_csv(std::span<const DenseSegment> dense);

std::vector<Station> read_stations(const std::filesystem::path& path);
std::string stations_csv(std::span<const Station> stations);

struct HourlyData {
  std::vector<HourlyClassRecord> records;
  std::vector<std::string> ignored_columns;  // class columns outside 5..13
};
HourlyData read_hourly(const std::filesystem::path& path);
HourlyData parse_hourly(const std::string& text, const std::string& source);
std::string hourly_csv(std::span<const HourlyClassRecord> records);

// Match reports.
std::string weights_csv(const RoadNetwork& net, std::span<const WeightMatch> matches);
/// Reads a weight report back as per-edge weights (by EdgeIndex).
std::vector<std::optional<double>> read_weights(const std::filesystem::path& path, const RoadNetwork& net);
std::string station_matches_csv(const RoadNetwork& net, std::span<const StationMatch> matches);
struct StationEdge {
  std::string station_id;
  Direction direction = Direction::N;
  std::optional<EdgeId> edge;
};
std::vector<StationEdge> read_station_matches(const std::filesystem::path& path);

std::string observations_csv(std::span<const StationObservation> observations);
std::vector<StationObservation> read_observations(const std::filesystem::path& path);

std::string imputed_csv(const RoadNetwork& net, const StateTable& states);
std::string imputed_geojson(const RoadNetwork& net, const StateTable& states);
std::string trace_csv(std::span<const EpochTrace> trace);

std::string metrics_long_csv(const MetricsReport& report);
std::string metrics_summary_csv(const MetricsReport& report);
std::string predictions_csv(const RoadNetwork& net, const MetricsReport& report);

}  // namespace netimpute::io
