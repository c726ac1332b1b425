#include "netimpute/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "netimpute/error.hpp"
#include "netimpute/io/csv.hpp"
#include "netimpute/io/formats.hpp"

namespace netimpute {
namespace {

using ordered_json = nlohmann::ordered_json;

void require_file(const std::filesystem::path& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string("config: no ") + what + " file given");
  if (!std::filesystem::is_regular_file(path))
    throw ValidationError(std::string(what) + " file not found: '" + path.string() + "'");
}

void reject_unknown(const ordered_json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ValidationError("config: unknown key '" + where + key + "'");
}

template <typename T>
void read_key(const ordered_json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config: '" + where + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

struct Inputs {
  io::NetworkData data;
  StateTable base;  // weights only
};

// Transferred weights win; the network's aadt_truck fills edges the transfer
// missed. Anything still unset is left for impute_missing_weights.
Inputs load_network_with_weights(const PipelineConfig& cfg) {
  require_file(cfg.network, "network");
  Inputs in{io::read_network(cfg.network), {}};
  const RoadNetwork& net = in.data.network;
  in.base = make_state_table(net);
  std::vector<std::optional<double>> w = in.data.aadt_truck;
  if (std::filesystem::is_regular_file(paths::weights(cfg))) {
    const auto transferred = io::read_weights(paths::weights(cfg), net);
    for (EdgeIndex e = 0; e < net.edge_count(); ++e)
      if (transferred[e]) w[e] = transferred[e];
  }
  for (EdgeIndex e = 0; e < net.edge_count(); ++e) in.base[e].weight = w[e];
  return in;
}

struct ObservationSet {
  std::map<std::string, std::vector<CvObservation>> by_window;
};

ObservationSet load_observations(const PipelineConfig& cfg, const RoadNetwork& net) {
  require_file(paths::observations(cfg), "observations (run aggregate first)");
  require_file(paths::station_matches(cfg), "station match report (run match first)");
  std::map<std::pair<std::string, Direction>, EdgeIndex> edge_of;
  for (const io::StationEdge& s : io::read_station_matches(paths::station_matches(cfg))) {
    if (!s.edge) continue;
    const auto e = net.find_edge(*s.edge);
    if (!e) throw ValidationError("station match report names unknown edge '" + s.edge->str() + "'");
    edge_of[{s.station_id, s.direction}] = *e;
  }
  std::map<std::string, std::string> region_of;
  if (!cfg.stations.empty() && std::filesystem::is_regular_file(cfg.stations))
    for (const Station& s : io::read_stations(cfg.stations))
      if (s.region_tag) region_of[s.station_id] = *s.region_tag;

  ObservationSet out;
  for (const StationObservation& o : io::read_observations(paths::observations(cfg))) {
    auto it = edge_of.find({o.station_id, o.direction});
    if (it == edge_of.end()) continue;  // unmatched station
    CvObservation c{o.station_id, o.direction, it->second, o.mean_hourly_volume, o.class_share, "unknown"};
    if (auto r = region_of.find(o.station_id); r != region_of.end()) c.region = r->second;
    else if (net.edge(it->second).region_tag) c.region = *net.edge(it->second).region_tag;
    out.by_window[o.window.label()].push_back(std::move(c));
  }
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  match.validate();
  impute.validate();
  if (windows.empty()) throw ValidationError("config: at least one aggregation window is required");
  std::set<std::string> labels;
  for (const AggregationWindow& w : windows)
    if (!labels.insert(w.label()).second) throw ValidationError("config: duplicate window '" + w.label() + "'");
  if (cv.k < 2) throw ValidationError("config: cv.k must be at least 2");
  if (output_dir.empty()) throw ValidationError("config: output_dir is empty");
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown(doc, {"network", "dense", "stations", "hourly", "output_dir", "match", "impute", "windows", "cv"}, "");
  PipelineConfig cfg;
  std::string s;
  for (auto [key, dest] : {std::pair{"network", &cfg.network}, std::pair{"dense", &cfg.dense},
                           std::pair{"stations", &cfg.stations}, std::pair{"hourly", &cfg.hourly},
                           std::pair{"output_dir", &cfg.output_dir}}) {
    if (!doc.contains(key)) continue;
    s.clear();
    read_key(doc, key, s, "");
    *dest = resolve(base_dir, s);
  }
  if (!doc.contains("output_dir")) cfg.output_dir = resolve(base_dir, "out");
  if (doc.contains("match")) {
    const auto& m = doc["match"];
    reject_unknown(m, {"buffer_radius_m", "bearing_tolerance_deg", "station_bearing_tolerance_deg", "snap_max_distance_m"},
                   "match.");
    read_key(m, "buffer_radius_m", cfg.match.buffer_radius_m, "match.");
    read_key(m, "bearing_tolerance_deg", cfg.match.bearing_tolerance_deg, "match.");
    read_key(m, "station_bearing_tolerance_deg", cfg.match.station_bearing_tolerance_deg, "match.");
    read_key(m, "snap_max_distance_m", cfg.match.snap_max_distance_m, "match.");
  }
  if (doc.contains("impute")) {
    const auto& m = doc["impute"];
    reject_unknown(m, {"max_epochs", "tolerance", "deferral_grace", "payload", "scheme", "parallel"}, "impute.");
    read_key(m, "max_epochs", cfg.impute.max_epochs, "impute.");
    read_key(m, "tolerance", cfg.impute.tolerance, "impute.");
    read_key(m, "deferral_grace", cfg.impute.deferral_grace, "impute.");
    read_key(m, "parallel", cfg.impute.parallel, "impute.");
    std::string v;
    read_key(m, "payload", v, "impute.");
    if (!v.empty()) cfg.impute.payload = parse_payload(v);
    v.clear();
    read_key(m, "scheme", v, "impute.");
    if (!v.empty()) cfg.impute.scheme = parse_update_scheme(v);
  }
  if (doc.contains("windows")) {
    std::vector<std::string> labels;
    read_key(doc, "windows", labels, "");
    cfg.windows.clear();
    for (const std::string& l : labels) cfg.windows.push_back(AggregationWindow::parse(l));
  }
  if (doc.contains("cv")) {
    const auto& m = doc["cv"];
    reject_unknown(m, {"k", "seed", "pinned_stations"}, "cv.");
    read_key(m, "k", cfg.cv.k, "cv.");
    read_key(m, "seed", cfg.cv.seed, "cv.");
    read_key(m, "pinned_stations", cfg.cv.pinned_stations, "cv.");
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  require_file(path, "config");
  return parse_config(io::read_file(path), path.parent_path());
}

std::string dump_config(const PipelineConfig& cfg) {
  ordered_json windows = ordered_json::array();
  for (const AggregationWindow& w : cfg.windows) windows.push_back(w.label());
  ordered_json doc{
      {"network", cfg.network.string()},
      {"dense", cfg.dense.string()},
      {"stations", cfg.stations.string()},
      {"hourly", cfg.hourly.string()},
      {"output_dir", cfg.output_dir.string()},
      {"match",
       {{"buffer_radius_m", cfg.match.buffer_radius_m},
        {"bearing_tolerance_deg", cfg.match.bearing_tolerance_deg},
        {"station_bearing_tolerance_deg", cfg.match.station_bearing_tolerance_deg},
        {"snap_max_distance_m", cfg.match.snap_max_distance_m}}},
      {"impute",
       {{"max_epochs", cfg.impute.max_epochs},
        {"tolerance", cfg.impute.tolerance},
        {"deferral_grace", cfg.impute.deferral_grace},
        {"payload", to_string(cfg.impute.payload)},
        {"scheme", to_string(cfg.impute.scheme)},
        {"parallel", cfg.impute.parallel}}},
      {"windows", windows},
      {"cv", {{"k", cfg.cv.k}, {"seed", cfg.cv.seed}, {"pinned_stations", cfg.cv.pinned_stations}}}};
  return doc.dump(2) + "\n";
}

namespace paths {
std::filesystem::path weights(const PipelineConfig& cfg) { return cfg.output_dir / "weights.csv"; }
std::filesystem::path station_matches(const PipelineConfig& cfg) { return cfg.output_dir / "station_matches.csv"; }
std::filesystem::path observations(const PipelineConfig& cfg) { return cfg.output_dir / "observations.csv"; }
std::filesystem::path imputed_dir(const PipelineConfig& cfg) { return cfg.output_dir / "imputed"; }
std::string window_slug(const AggregationWindow& w) {
  std::string s = w.label();
  std::replace(s.begin(), s.end(), ':', '_');
  return s;
}
}  // namespace paths

MatchSummary cmd_match(const PipelineConfig& cfg) {
  cfg.validate();
  require_file(cfg.network, "network");
  require_file(cfg.dense, "dense network");
  require_file(cfg.stations, "stations");
  const io::NetworkData data = io::read_network(cfg.network);
  const RoadNetwork& net = data.network;
  const std::vector<DenseSegment> dense = io::read_dense(cfg.dense);
  const std::vector<Station> stations = io::read_stations(cfg.stations);

  const std::vector<DirectedSegment> directed = directionalize_and_halve(dense);
  const std::vector<WeightMatch> weights = transfer_weights(net, directed, cfg.match);
  const std::vector<StationMatch> snapped = snap_stations(stations, net, cfg.match);
  io::write_file(paths::weights(cfg), io::weights_csv(net, weights));
  io::write_file(paths::station_matches(cfg), io::station_matches_csv(net, snapped));

  MatchSummary out;
  out.n_edges = net.edge_count();
  out.n_weighted = static_cast<std::size_t>(
      std::count_if(weights.begin(), weights.end(), [](const WeightMatch& m) { return m.weight.has_value(); }));
  out.n_stations = stations.size();
  for (const StationMatch& m : snapped)
    if (!m.result)
      out.unmatched.push_back(m.station.station_id + " " + to_string(m.station.direction) + ": " +
                              (m.failure == SnapFailure::NoDirectionMatch ? "no edge with a matching direction"
                                                                          : "no edge within snap distance"));
  return out;
}

AggregateSummary cmd_aggregate(const PipelineConfig& cfg) {
  cfg.validate();
  require_file(cfg.hourly, "hourly records");
  const io::HourlyData hourly = io::read_hourly(cfg.hourly);
  AggregateSummary out;
  out.n_records = hourly.records.size();
  out.ignored_columns = hourly.ignored_columns;
  std::vector<StationObservation> all;
  std::ostringstream omitted;
  io::CsvWriter w(omitted);
  w.row({"station_id", "direction", "window", "reason"});
  for (const AggregationWindow& window : cfg.windows) {
    AggregationReport r = aggregate_records(hourly.records, window);
    out.n_omitted += r.omitted.size();
    for (const Omission& o : r.omitted) w.row({o.station_id, to_string(o.direction), window.label(), to_string(o.reason)});
    for (StationObservation& o : r.observations) all.push_back(std::move(o));
  }
  out.n_observations = all.size();
  io::write_file(paths::observations(cfg), io::observations_csv(all));
  io::write_file(cfg.output_dir / "omitted.csv", omitted.str());
  return out;
}

ImputeSummary cmd_impute(const PipelineConfig& cfg) {
  cfg.validate();
  const Inputs in = load_network_with_weights(cfg);
  const RoadNetwork& net = in.data.network;
  const ObservationSet obs = load_observations(cfg, net);
  const WeightImputation weights = impute_missing_weights(net, in.base, cfg.impute);

  ImputeSummary out;
  for (const AggregationWindow& window : cfg.windows) {
    const std::string label = window.label();
    auto it = obs.by_window.find(label);
    if (it == obs.by_window.end() || it->second.empty()) {
      out.skipped.push_back(label);
      continue;
    }
    const StateTable pinned = pin_observations(weights.states, it->second);
    WindowImputation wi{label, it->second.size(), run_imputation(net, pinned, cfg.impute), weights.fallback_count};
    const std::filesystem::path dir = paths::imputed_dir(cfg);
    const std::string slug = paths::window_slug(window);
    io::write_file(dir / (slug + ".csv"), io::imputed_csv(net, wi.result.states));
    io::write_file(dir / (slug + ".geojson"), io::imputed_geojson(net, wi.result.states));
    io::write_file(dir / (slug + "_trace.csv"), io::trace_csv(wi.result.trace));
    out.windows.push_back(std::move(wi));
  }
  return out;
}

EvaluateSummary cmd_evaluate(const PipelineConfig& cfg) {
  cfg.validate();
  const Inputs in = load_network_with_weights(cfg);
  const RoadNetwork& net = in.data.network;
  const ObservationSet obs = load_observations(cfg, net);
  const WeightImputation weights = impute_missing_weights(net, in.base, cfg.impute);
  const std::set<std::string> pinned_ids(cfg.cv.pinned_stations.begin(), cfg.cv.pinned_stations.end());

  std::vector<std::string> station_ids;
  for (const auto& [label, list] : obs.by_window)
    for (const CvObservation& o : list)
      if (!pinned_ids.count(o.station_id)) station_ids.push_back(o.station_id);

  EvaluateSummary out;
  out.folds = make_folds(station_ids, cfg.cv.k, cfg.cv.seed);
  for (const AggregationWindow& window : cfg.windows) {
    auto it = obs.by_window.find(window.label());
    if (it == obs.by_window.end()) continue;
    std::vector<CvObservation> pinned, scored;
    for (const CvObservation& o : it->second) (pinned_ids.count(o.station_id) ? pinned : scored).push_back(o);
    const StateTable base = pin_observations(weights.states, pinned);
    out.report.append(run_cross_validation(net, base, scored, out.folds, cfg.impute, window.label()));
  }

  std::ostringstream folds;
  io::CsvWriter w(folds);
  w.row({"station_id", "fold"});
  for (const auto& [id, f] : out.folds.fold_of) w.row({id, std::to_string(f)});
  io::write_file(cfg.output_dir / "folds.csv", folds.str());
  io::write_file(cfg.output_dir / "metrics_long.csv", io::metrics_long_csv(out.report));
  io::write_file(cfg.output_dir / "metrics_summary.csv", io::metrics_summary_csv(out.report));
  io::write_file(cfg.output_dir / "predictions.csv", io::predictions_csv(net, out.report));
  return out;
}

void cmd_export(const PipelineConfig& cfg) {
  cfg.validate();
  const Inputs in = load_network_with_weights(cfg);
  const RoadNetwork& net = in.data.network;
  const WeightImputation weights = impute_missing_weights(net, in.base, cfg.impute);
  std::vector<std::optional<double>> w;
  for (const EdgeState& s : weights.states) w.push_back(s.weight);
  io::write_file(cfg.output_dir / "export" / "network.geojson", io::network_geojson(net, w));
  io::write_file(cfg.output_dir / "export" / "network.csv", io::network_csv(net, w));
}

GridDemoSummary cmd_grid_demo(const GridSpec& spec, const ImputeConfig& impute, const std::filesystem::path& out_dir) {
  impute.validate();
  const GridFixture fx = make_grid(spec);
  GridDemoSummary out{run_imputation(fx.network, fx.states, impute), out_dir / "grid.geojson"};
  io::write_file(out.geojson, io::imputed_geojson(fx.network, out.result.states));
  io::write_file(out_dir / "grid.csv", io::imputed_csv(fx.network, out.result.states));
  io::write_file(out_dir / "grid_trace.csv", io::trace_csv(out.result.trace));
  return out;
}

PipelineConfig cmd_synth(const SyntheticDatasetSpec& spec, const ImputeConfig& impute,
                         const std::filesystem::path& out_dir) {
  impute.validate();
  const SyntheticDataset ds = make_synthetic_dataset(spec, impute);
  const std::vector<std::optional<double>> no_weights(ds.fixture.network.edge_count());
  io::write_file(out_dir / "network.geojson", io::network_geojson(ds.fixture.network, no_weights));
  io::write_file(out_dir / "network.csv", io::network_csv(ds.fixture.network, no_weights));
  io::write_file(out_dir / "dense.csv", io::dense_csv(ds.dense));
  io::write_file(out_dir / "stations.csv", io::stations_csv(ds.stations));
  io::write_file(out_dir / "hourly.csv", io::hourly_csv(ds.records));

  std::ostringstream truth;
  io::CsvWriter w(truth);
  std::vector<std::string> header{"edge_id", "role", "volume"};
  for (int c = kFirstClass; c <= kLastClass; ++c) header.push_back(std::string("p_class_") + (c < 10 ? "0" : "") + std::to_string(c));
  w.row(header);
  std::set<EdgeIndex> anchors(ds.fixture.anchors.begin(), ds.fixture.anchors.end());
  std::set<EdgeIndex> stations(ds.fixture.stations.begin(), ds.fixture.stations.end());
  for (EdgeIndex e = 0; e < ds.fixture.network.edge_count(); ++e) {
    const EdgeTruth& t = ds.fixture.ground_truth[e];
    std::vector<std::string> row{ds.fixture.network.edge(e).id.str(),
                                 anchors.count(e) ? "anchor" : stations.count(e) ? "station" : "hidden",
                                 io::format_double(t.volume)};
    for (double p : t.share.values()) row.push_back(io::format_double(p));
    w.row(row);
  }
  io::write_file(out_dir / "truth.csv", truth.str());

  PipelineConfig cfg;
  cfg.network = "network.geojson";
  cfg.dense = "dense.csv";
  cfg.stations = "stations.csv";
  cfg.hourly = "hourly.csv";
  cfg.output_dir = "out";
  cfg.impute = impute;
  cfg.windows = {AggregationWindow{}, AggregationWindow::parse("weekday:all:all"), AggregationWindow::parse("all:T1:all")};
  cfg.cv.pinned_stations = ds.pinned_stations;
  io::write_file(out_dir / "config.json", dump_config(cfg));
  return parse_config(dump_config(cfg), out_dir);
}

}  // namespace netimpute
