#include "netimpute/io/formats.hpp"

#include <algorithm>
#include <cctype>
#include <array>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "netimpute/error.hpp"
#include "netimpute/io/csv.hpp"

namespace netimpute::io {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string class_column(const char* prefix, std::size_t bin) {
  const int c = kFirstClass + static_cast<int>(bin);
  return std::string(prefix) + (c < 10 ? "0" : "") + std::to_string(c);
}

std::string extension_of(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::optional<double> optional_number(const std::string& s, const std::string& context) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, context);
}

// Infers node coordinates from edge endpoints (first occurrence wins) and
// builds the network.
NetworkData assemble(std::vector<EdgeSpec> edges, std::vector<std::optional<double>> aadt, const BuildOptions& options) {
  std::map<std::string, GeoPoint> coords;
  std::vector<std::string> order;
  for (const EdgeSpec& e : edges) {
    if (e.geometry.size() < 2) throw ValidationError("edge '" + e.id.str() + "' geometry needs at least two points");
    if (coords.emplace(e.tail.str(), e.geometry.front()).second) order.push_back(e.tail.str());
    if (coords.emplace(e.head.str(), e.geometry.back()).second) order.push_back(e.head.str());
  }
  std::vector<NodeSpec> nodes;
  for (const std::string& id : order) nodes.push_back({id, coords[id]});
  std::map<std::string, std::optional<double>> aadt_of;
  for (std::size_t i = 0; i < edges.size(); ++i) aadt_of[edges[i].id.str()] = aadt[i];
  NetworkData data{build_network(std::move(nodes), std::move(edges), options), {}};
  for (const Edge& e : data.network.edges()) data.aadt_truck.push_back(aadt_of[e.id.str()]);
  return data;
}

std::string json_id(const ordered_json& v, const std::string& what) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ValidationError(what + " must be a string or integer");
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json coordinates_json(std::span<const GeoPoint> line) {
  ordered_json coords = ordered_json::array();
  for (const GeoPoint& p : line) coords.push_back({p.lon, p.lat});
  return coords;
}

std::string to_text(const std::ostringstream& ss) { return ss.str(); }

}  // namespace

Polyline parse_wkt_linestring(const std::string& wkt) {
  std::string upper;
  for (char c : wkt) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  const auto open = upper.find('('), close = upper.rfind(')');
  if (upper.find("LINESTRING") == std::string::npos || open == std::string::npos || close == std::string::npos ||
      close < open)
    throw ValidationError("not a WKT LINESTRING: '" + wkt + "'");
  Polyline line;
  std::stringstream body(wkt.substr(open + 1, close - open - 1));
  std::string pair;
  while (std::getline(body, pair, ',')) {
    std::istringstream xy(pair);
    std::string x, y, extra;
    if (!(xy >> x >> y) || (xy >> extra)) throw ValidationError("bad WKT coordinate '" + pair + "'");
    line.push_back({parse_double(x, "WKT longitude"), parse_double(y, "WKT latitude")});
  }
  if (line.size() < 2) throw ValidationError("WKT LINESTRING needs at least two points");
  return line;
}

std::string format_wkt_linestring(std::span<const GeoPoint> line) {
  std::string out = "LINESTRING (";
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (i) out += ", ";
    out += format_double(line[i].lon) + " " + format_double(line[i].lat);
  }
  return out + ")";
}

NetworkData parse_network_geojson(const std::string& text, const std::string& source, const BuildOptions& options) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(source + ": invalid JSON: " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features") || !doc["features"].is_array())
    throw ValidationError(source + ": expected a GeoJSON FeatureCollection");
  std::vector<EdgeSpec> edges;
  std::vector<std::optional<double>> aadt;
  std::size_t k = 0;
  for (const auto& f : doc["features"]) {
    const std::string where = source + ": feature " + std::to_string(k++);
    try {
      const auto& g = f.at("geometry");
      if (g.at("type") != "LineString") throw ValidationError(where + ": geometry is not a LineString");
      Polyline line;
      for (const auto& c : g.at("coordinates")) line.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
      const auto& p = f.at("properties");
      EdgeSpec e{json_id(p.at("edge_id"), where + " edge_id"), json_id(p.at("tail_node"), where + " tail_node"),
                 json_id(p.at("head_node"), where + " head_node"), std::move(line), std::nullopt, std::nullopt};
      if (p.contains("length_mi") && !p["length_mi"].is_null()) e.length_mi = p["length_mi"].get<double>();
      if (p.contains("region_tag") && !p["region_tag"].is_null()) e.region_tag = p["region_tag"].get<std::string>();
      std::optional<double> w;
      if (p.contains("aadt_truck") && !p["aadt_truck"].is_null()) w = p["aadt_truck"].get<double>();
      edges.push_back(std::move(e));
      aadt.push_back(w);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return assemble(std::move(edges), std::move(aadt), options);
}

NetworkData parse_network_csv(const std::string& text, const std::string& source, const BuildOptions& options) {
  const CsvTable t = parse_csv(text, source);
  const std::size_t c_id = t.column("edge_id"), c_tail = t.column("tail"), c_head = t.column("head"),
                    c_wkt = t.column("wkt_geometry");
  const auto c_len = t.find_column("length_mi"), c_aadt = t.find_column("aadt_truck"),
             c_region = t.find_column("region_tag");
  std::vector<EdgeSpec> edges;
  std::vector<std::optional<double>> aadt;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = t.where(r);
    EdgeSpec e{row[c_id], row[c_tail], row[c_head], {}, std::nullopt, std::nullopt};
    try {
      e.geometry = parse_wkt_linestring(row[c_wkt]);
    } catch (const ValidationError& err) {
      throw ValidationError(where + ": " + err.what());
    }
    if (c_len) e.length_mi = optional_number(row[*c_len], where + " length_mi");
    if (c_region && !row[*c_region].empty()) e.region_tag = row[*c_region];
    edges.push_back(std::move(e));
    aadt.push_back(c_aadt ? optional_number(row[*c_aadt], where + " aadt_truck") : std::nullopt);
  }
  return assemble(std::move(edges), std::move(aadt), options);
}

NetworkData read_network(const std::filesystem::path& path, const BuildOptions& options) {
  const std::string text = read_file(path);
  const std::string ext = extension_of(path);
  if (ext == ".geojson" || ext == ".json") return parse_network_geojson(text, path.string(), options);
  return parse_network_csv(text, path.string(), options);
}

std::string network_csv(const RoadNetwork& net, std::span<const std::optional<double>> aadt_truck) {
  std::ostringstream ss;
  CsvWriter w(ss);
  w.row({"edge_id", "tail", "head", "length_mi", "aadt_truck", "wkt_geometry", "region_tag"});
  for (EdgeIndex e = 0; e < net.edge_count(); ++e) {
    const Edge& edge = net.edge(e);
    w.row({edge.id.str(), edge.tail.str(), edge.head.str(), format_double(edge.length_mi),
           e < aadt_truck.size() ? format_optional(aadt_truck[e]) : "", format_wkt_linestring(edge.geometry),
           edge.region_tag.value_or("")});
  }
  return to_text(ss);
}

std::string network_geojson(const RoadNetwork& net, std::span<const std::optional<double>> aadt_truck) {
  ordered_json features = ordered_json::array();
  for (EdgeIndex e = 0; e < net.edge_count(); ++e) {
    const Edge& edge = net.edge(e);
    ordered_json props{{"edge_id", edge.id.str()},
                       {"tail_node", edge.tail.str()},
                       {"head_node", edge.head.str()},
                       {"length_mi", edge.length_mi},
                       {"aadt_truck", e < aadt_truck.size() ? optional_json(aadt_truck[e]) : nullptr}};
    if (edge.region_tag) props["region_tag"] = *edge.region_tag;
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coordinates_json(edge.geometry)}}},
                        {"properties", std::move(props)}});
  }
  ordered_json doc{{"type", "FeatureCollection"}, {"features", std::move(features)}};
  return doc.dump(1) + "\n";
}

std::vector<DenseSegment> read_dense(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t c_id = t.column("segment_id"), c_aadt = t.column("aadt"), c_one = t.column("one_way"),
                    c_wkt = t.column("wkt_geometry");
  std::vector<DenseSegment> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    try {
      out.push_back({row[c_id], parse_double(row[c_aadt], "aadt"), parse_bool01(row[c_one], "one_way"),
                     parse_wkt_linestring(row[c_wkt])});
    } catch (const ValidationError& e) {
      throw ValidationError(t.where(r) + ": " + e.what());
    }
  }
  return out;
}

std::string dense_csv(std::span<const DenseSegment> dense) {
  std::ostringstream ss;
  CsvWriter w(ss);
  w.row({"segment_id", "aadt", "one_way", "wkt_geometry"});
  for (const DenseSegment& d : dense)
    w.row({d.id, format_double(d.aadt), d.one_way ? "1" : "0", format_wkt_linestring(d.geometry)});
  return to_text(ss);
}

std::vector<Station> read_stations(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t c_id = t.column("station_id"), c_dir = t.column("direction"), c_lat = t.column("lat"),
                    c_lon = t.column("lon");
  const auto c_region = t.find_column("region_tag");
  std::vector<Station> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    try {
      Station s{row[c_id], parse_direction(row[c_dir]),
                {parse_double(row[c_lon], "lon"), parse_double(row[c_lat], "lat")}, std::nullopt};
      if (c_region && !row[*c_region].empty()) s.region_tag = row[*c_region];
      out.push_back(std::move(s));
    } catch (const ValidationError& e) {
      throw ValidationError(t.where(r) + ": " + e.what());
    }
  }
  return out;
}

std::string stations_csv(std::span<const Station> stations) {
  std::ostringstream ss;
  CsvWriter w(ss);
  w.row({"station_id", "direction", "lat", "lon", "region_tag"});
  for (const Station& s : stations)
    w.row({s.station_id, to_string(s.direction), format_double(s.location.lat), format_double(s.location.lon),
           s.region_tag.value_or("")});
  return to_text(ss);
}

HourlyData parse_hourly(const std::string& text, const std::string& source) {
  const CsvTable t = parse_csv(text, source);
  const std::size_t c_id = t.column("station_id"), c_dir = t.column("direction"), c_ts = t.column("timestamp");
  std::array<std::size_t, kNumClasses> c_class{};
  for (std::size_t b = 0; b < kNumClasses; ++b) c_class[b] = t.column(class_column("class_", b));
  HourlyData out;
  for (const std::string& h : t.header)
    if (h.rfind("class_", 0) == 0 &&
        std::find_if(c_class.begin(), c_class.end(), [&](std::size_t c) { return t.header[c] == h; }) == c_class.end())
      out.ignored_columns.push_back(h);

  std::set<std::tuple<std::string, Direction, CivilHour>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    try {
      HourlyClassRecord rec{row[c_id], parse_direction(row[c_dir]), parse_civil_hour(row[c_ts]), {}};
      for (std::size_t b = 0; b < kNumClasses; ++b) {
        rec.counts[b] = parse_double(row[c_class[b]], t.header[c_class[b]]);
        if (rec.counts[b] < 0.0) throw ValidationError(t.header[c_class[b]] + " is negative");
      }
      if (!seen.emplace(rec.station_id, rec.direction, rec.timestamp).second)
        throw ValidationError("duplicate record for station " + rec.station_id + " " + to_string(rec.direction) +
                              " at " + rec.timestamp.to_iso());
      out.records.push_back(std::move(rec));
    } catch (const ValidationError& e) {
      throw ValidationError(t.where(r) + ": " + e.what());
    }
  }
  return out;
}

HourlyData read_hourly(const std::filesystem::path& path) { return parse_hourly(read_file(path), path.string()); }

std::string hourly_csv(std::span<const HourlyClassRecord> records) {
  std::ostringstream ss;
  CsvWriter w(ss);
  std::vector<std::string> header{"station_id", "direction", "timestamp"};
  for (std::size_t b = 0; b < kNumClasses; ++b) header.push_back(class_column("class_", b));
  w.row(header);
  for (const HourlyClassRecord& r : records) {
    std::vector<std::string> row{r.station_id, to_string(r.direction), r.timestamp.to_iso()};
    for (double c : r.counts) row.push_back(format_double(c));
    w.row(row);
  }
  return to_text(ss);
}

std::string weights_csv(const RoadNetwork& net, std::span<const WeightMatch> matches) {
  std::ostringstream ss;
  CsvWriter w(ss);
  w.row({"edge_id", "weight", "n_candidates", "n_after_bearing_filter"});
  for (EdgeIndex e = 0; e < matches.size(); ++e)
    w.row({net.edge(e).id.str(), format_optional(matches[e].weight), std::to_string(matches[e].n_candidates),
           std::to_string(matches[e].n_after_bearing_filter)});
  return to_text(ss);
}

std::vector<std::optional<double>> read_weights(const std::filesystem::path& path, const RoadNetwork& net) {
  const CsvTable t = read_csv(path);
  const std::size_t c_id = t.column("edge_id"), c_w = t.column("weight");
  std::vector<std::optional<double>> out(net.edge_count());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto e = net.find_edge(t.rows[r][c_id]);
    if (!e) throw ValidationError(t.where(r) + ": unknown edge '" + t.rows[r][c_id] + "'");
    out[*e] = optional_number(t.rows[r][c_w], t.where(r) + " weight");
  }
  return out;
}

std::string station_matches_csv(const RoadNetwork& net, std::span<const StationMatch> matches) {
  std::ostringstream ss;
  CsvWriter w(ss);
  w.row({"station_id", "direction", "matched_edge_id", "snap_distance_m"});
  for (const StationMatch& m : matches)
    w.row({m.station.station_id, to_string(m.station.direction), m.result ? net.edge(m.result->edge).id.str() : "",
           m.result ? format_double(m.result->distance_m) : ""});
  return to_text(ss);
}

std::vector<StationEdge> read_station_matches(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t c_id = t.column("station_id"), c_dir = t.column("direction"), c_e = t.column("matched_edge_id");
  std::vector<StationEdge> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    StationEdge s{row[c_id], parse_direction(row[c_dir]), std::nullopt};
    if (!row[c_e].empty()) s.edge = EdgeId(row[c_e]);
    out.push_back(std::move(s));
  }
  return out;
}

std::string observations_csv(std::span<const StationObservation> observations) {
  std::ostringstream ss;
  CsvWriter w(ss);
  std::vector<std::string> header{"station_id", "direction", "window", "mean_hourly_volume"};
  for (std::size_t b = 0; b < kNumClasses; ++b) header.push_back(class_column("p_class_", b));
  header.push_back("n_hours");
  w.row(header);
  for (const StationObservation& o : observations) {
    std::vector<std::string> row{o.station_id, to_string(o.direction), o.window.label(),
                                 format_double(o.mean_hourly_volume)};
    for (double p : o.class_share.values()) row.push_back(format_double(p));
    row.push_back(std::to_string(o.n_hours));
    w.row(row);
  }
  return to_text(ss);
}

std::vector<StationObservation> read_observations(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t c_id = t.column("station_id"), c_dir = t.column("direction"), c_win = t.column("window"),
                    c_vol = t.column("mean_hourly_volume"), c_n = t.column("n_hours");
  std::array<std::size_t, kNumClasses> c_p{};
  for (std::size_t b = 0; b < kNumClasses; ++b) c_p[b] = t.column(class_column("p_class_", b));
  std::vector<StationObservation> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    try {
      ClassShare::Vector m{};
      for (std::size_t b = 0; b < kNumClasses; ++b) m[b] = parse_double(row[c_p[b]], t.header[c_p[b]]);
      out.push_back({row[c_id], parse_direction(row[c_dir]), AggregationWindow::parse(row[c_win]),
                     parse_double(row[c_vol], "mean_hourly_volume"), ClassShare::from_masses(m),
                     static_cast<std::size_t>(parse_double(row[c_n], "n_hours")), std::nullopt});
    } catch (const ValidationError& e) {
      throw ValidationError(t.where(r) + ": " + e.what());
    }
  }
  return out;
}

std::string imputed_csv(const RoadNetwork& net, const StateTable& states) {
  std::ostringstream ss;
  CsvWriter w(ss);
  std::vector<std::string> header{"edge_id", "status", "weight", "volume"};
  for (std::size_t b = 0; b < kNumClasses; ++b) header.push_back(class_column("p_class_", b));
  header.push_back("component_id");
  w.row(header);
  for (EdgeIndex e = 0; e < net.edge_count(); ++e) {
    const EdgeState& s = states[e];
    std::vector<std::string> row{net.edge(e).id.str(), to_string(s.status), format_optional(s.weight),
                                 format_optional(s.volume)};
    for (std::size_t b = 0; b < kNumClasses; ++b) row.push_back(s.class_share ? format_double((*s.class_share)[b]) : "");
    row.push_back(std::to_string(net.neighbor_components()[e]));
    w.row(row);
  }
  return to_text(ss);
}

std::string imputed_geojson(const RoadNetwork& net, const StateTable& states) {
  ordered_json features = ordered_json::array();
  for (EdgeIndex e = 0; e < net.edge_count(); ++e) {
    const EdgeState& s = states[e];
    ordered_json props{{"edge_id", net.edge(e).id.str()},
                       {"status", to_string(s.status)},
                       {"weight", optional_json(s.weight)},
                       {"volume", optional_json(s.volume)}};
    for (std::size_t b = 0; b < kNumClasses; ++b)
      props[class_column("p_class_", b)] = s.class_share ? ordered_json((*s.class_share)[b]) : ordered_json(nullptr);
    props["component_id"] = net.neighbor_components()[e];
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coordinates_json(net.edge(e).geometry)}}},
                        {"properties", std::move(props)}});
  }
  ordered_json doc{{"type", "FeatureCollection"}, {"features", std::move(features)}};
  return doc.dump(1) + "\n";
}

std::string trace_csv(std::span<const EpochTrace> trace) {
  std::ostringstream ss;
  CsvWriter w(ss);
  w.row({"epoch", "max_delta", "newly_valued_count"});
  for (const EpochTrace& t : trace)
    w.row({std::to_string(t.epoch), format_double(t.max_delta), std::to_string(t.newly_valued)});
  return to_text(ss);
}

std::string metrics_long_csv(const MetricsReport& report) {
  std::ostringstream ss;
  CsvWriter w(ss);
  w.row({"fold", "region", "class", "window", "metric", "value", "n"});
  for (const MetricCell& c : report.cells) {
    const std::pair<const char*, const std::optional<double>*> metrics[] = {
        {"r2", &c.r2}, {"mae", &c.mae}, {"rmse", &c.rmse}, {"cel", &c.cel}};
    for (const auto& [name, value] : metrics)
      if (*value) w.row({c.fold, c.region, c.vehicle_class, c.window, name, format_double(**value), std::to_string(c.n)});
  }
  return to_text(ss);
}

std::string metrics_summary_csv(const MetricsReport& report) {
  std::ostringstream ss;
  CsvWriter w(ss);
  w.row({"window", "aggregation", "R2", "MAE", "RMSE", "CEL", "n", "n_missing"});
  std::vector<std::string> windows;
  for (const MetricCell& c : report.cells)
    if (std::find(windows.begin(), windows.end(), c.window) == windows.end()) windows.push_back(c.window);
  for (const std::string& win : windows) {
    std::size_t missing = 0;
    for (const CvPrediction& p : report.predictions)
      if (p.window == win && p.missing()) ++missing;
    for (const char* agg : {"pooled", "fold_mean"}) {
      const MetricCell* c = report.find(agg, "all", "all", win);
      if (!c) continue;
      w.row({win, agg, format_optional(c->r2), format_optional(c->mae), format_optional(c->rmse),
             format_optional(c->cel), std::to_string(c->n), std::to_string(missing)});
    }
  }
  return to_text(ss);
}

std::string predictions_csv(const RoadNetwork& net, const MetricsReport& report) {
  std::ostringstream ss;
  CsvWriter w(ss);
  w.row({"fold", "window", "station_id", "direction", "edge_id", "region", "observed_volume", "predicted_volume",
         "cel"});
  for (const CvPrediction& p : report.predictions) {
    std::string c;
    if (p.share) c = format_double(cel(p.observed.share, *p.share));
    w.row({std::to_string(p.fold), p.window, p.observed.station_id, to_string(p.observed.direction),
           net.edge(p.observed.edge).id.str(), p.observed.region, format_double(p.observed.volume),
           format_optional(p.volume), c});
  }
  return to_text(ss);
}

}  // namespace netimpute::io
