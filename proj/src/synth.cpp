#include "netimpute/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include <Eigen/Dense>

#include "netimpute/error.hpp"
#include "netimpute/random.hpp"

namespace netimpute {
namespace {

std::string idx(std::size_t i) { return std::to_string(i); }

// Solves one channel. known[e] holds the pinned payload of an observed edge;
// participating edges are unknowns plus valued knowns.
Eigen::MatrixXd solve_channel(const RoadNetwork& net, const StateTable& states,
                              const std::vector<std::optional<std::vector<double>>>& known,
                              const std::vector<std::uint8_t>& unknown, std::size_t dim, std::size_t max_unknowns,
                              std::vector<std::size_t>& unknown_slot) {
  const std::size_t n_edges = net.edge_count();
  unknown_slot.assign(n_edges, static_cast<std::size_t>(-1));
  std::size_t n_unknown = 0;
  for (EdgeIndex e = 0; e < n_edges; ++e)
    if (unknown[e]) unknown_slot[e] = n_unknown++;
  if (n_unknown > max_unknowns)
    throw ValidationError("oracle system has " + std::to_string(n_unknown) + " unknowns; dense solve capped at " +
                          std::to_string(max_unknowns));

  // Reachability: every unknown must connect to a valued known edge.
  std::vector<std::uint8_t> reached(n_edges, 0);
  std::vector<EdgeIndex> stack;
  for (EdgeIndex e = 0; e < n_edges; ++e)
    if (known[e]) {
      reached[e] = 1;
      stack.push_back(e);
    }
  while (!stack.empty()) {
    const EdgeIndex e = stack.back();
    stack.pop_back();
    for (EdgeIndex f : net.neighbor_edges(e))
      if (unknown[f] && !reached[f]) {
        reached[f] = 1;
        stack.push_back(f);
      }
  }
  std::size_t stranded = 0;
  for (EdgeIndex e = 0; e < n_edges; ++e)
    if (unknown[e] && !reached[e]) ++stranded;
  if (stranded > 0)
    throw NumericalError("singular oracle system: " + std::to_string(stranded) +
                         " unknown edges cannot reach any observation");

  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_unknown), static_cast<Eigen::Index>(n_unknown));
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_unknown), static_cast<Eigen::Index>(dim));
  for (EdgeIndex e = 0; e < n_edges; ++e) {
    if (!unknown[e]) continue;
    const auto row = static_cast<Eigen::Index>(unknown_slot[e]);
    std::vector<EdgeIndex> participants;
    double weight_sum = 0.0;
    for (EdgeIndex f : net.neighbor_edges(e)) {
      if (!unknown[f] && !known[f]) continue;
      if (!states[f].weight) throw ValidationError("edge '" + net.edge(f).id.str() + "' has no weight");
      participants.push_back(f);
      weight_sum += *states[f].weight;
    }
    const bool uniform = !(weight_sum > 0.0);
    for (EdgeIndex f : participants) {
      const double p = uniform ? 1.0 / static_cast<double>(participants.size()) : *states[f].weight / weight_sum;
      if (unknown[f]) {
        a(row, static_cast<Eigen::Index>(unknown_slot[f])) -= p;
      } else {
        for (std::size_t k = 0; k < dim; ++k) b(row, static_cast<Eigen::Index>(k)) += p * (*known[f])[k];
      }
    }
  }
  Eigen::MatrixXd y = a.partialPivLu().solve(b);
  if (!y.allFinite()) throw NumericalError("oracle solve produced non-finite values");
  return y;
}

Direction quantize_bearing(double bearing) {
  return static_cast<Direction>(static_cast<int>(std::lround(bearing / 45.0)) % 8);
}

}  // namespace

void GridSpec::validate() const {
  if (rows < 2 || cols < 2) throw ValidationError("grid needs at least 2 rows and 2 columns");
  if (!(uniform_weight > 0.0)) throw ValidationError("grid weight must be positive");
  if (!(spacing_deg > 0.0)) throw ValidationError("grid spacing must be positive");
  if (!std::isfinite(source_value) || !std::isfinite(sink_value)) throw ValidationError("grid values must be finite");
}

GridFixture make_grid(const GridSpec& spec) {
  spec.validate();
  const std::size_t rows = spec.rows, cols = spec.cols;
  auto node_id = [&](std::size_t i, std::size_t j) { return idx(j * cols + i); };
  std::vector<NodeSpec> nodes;
  for (std::size_t j = 0; j < rows; ++j)
    for (std::size_t i = 0; i < cols; ++i)
      nodes.push_back({node_id(i, j), {spec.origin.lon + static_cast<double>(i) * spec.spacing_deg,
                                       spec.origin.lat + static_cast<double>(j) * spec.spacing_deg}});
  std::vector<EdgeSpec> edges;
  const std::size_t n_horizontal = rows * (cols - 1);
  for (std::size_t j = 0; j < rows; ++j)
    for (std::size_t i = 0; i + 1 < cols; ++i)
      edges.push_back({idx(j * (cols - 1) + i), node_id(i, j), node_id(i + 1, j), {}, std::nullopt, std::nullopt});
  for (std::size_t j = 0; j + 1 < rows; ++j)
    for (std::size_t i = 0; i < cols; ++i)
      edges.push_back({idx(n_horizontal + j * cols + i), node_id(i, j), node_id(i, j + 1), {}, std::nullopt, std::nullopt});

  GridFixture fx{build_network(std::move(nodes), std::move(edges)), {}, 0, 0};
  fx.source_edge = fx.network.edge_index(EdgeId(idx(0)));
  fx.sink_edge = fx.network.edge_index(EdgeId(idx(n_horizontal - 1)));
  fx.states = make_state_table(fx.network);
  for (EdgeState& s : fx.states) s.weight = spec.uniform_weight;

  const bool as_share = spec.source_value >= 0.0 && spec.source_value <= 1.0 && spec.sink_value >= 0.0 &&
                        spec.sink_value <= 1.0;
  auto pin = [&](EdgeIndex e, double v) {
    EdgeState& s = fx.states[e];
    s.status = EdgeStatus::Observed;
    s.volume = v;
    if (as_share) {
      ClassShare::Vector m{};
      m[class_bin(9)] = v;
      m[class_bin(5)] = 1.0 - v;
      s.class_share = ClassShare::from_masses(m);
    }
  };
  pin(fx.source_edge, spec.source_value);
  pin(fx.sink_edge, spec.sink_value);
  return fx;
}

OracleSolution fixed_point_oracle(const RoadNetwork& net, const StateTable& states, Payload payload,
                                  std::size_t max_unknowns) {
  if (states.size() != net.edge_count()) throw ValidationError("state table does not match the network");
  const std::size_t n_edges = net.edge_count();
  OracleSolution out;
  out.volume.assign(n_edges, std::nullopt);
  out.class_share.assign(n_edges, std::nullopt);

  std::vector<std::uint8_t> unknown(n_edges, 0);
  for (EdgeIndex e = 0; e < n_edges; ++e) unknown[e] = states[e].status != EdgeStatus::Observed;
  out.unknowns = static_cast<std::size_t>(std::count(unknown.begin(), unknown.end(), 1));

  std::vector<std::size_t> slot;
  if (payload != Payload::ClassShare) {
    std::vector<std::optional<std::vector<double>>> known(n_edges);
    for (EdgeIndex e = 0; e < n_edges; ++e)
      if (!unknown[e] && states[e].volume) known[e] = std::vector<double>{*states[e].volume};
    const Eigen::MatrixXd y = solve_channel(net, states, known, unknown, 1, max_unknowns, slot);
    for (EdgeIndex e = 0; e < n_edges; ++e) {
      if (unknown[e]) out.volume[e] = y(static_cast<Eigen::Index>(slot[e]), 0);
      else if (known[e]) out.volume[e] = (*known[e])[0];
    }
  }
  if (payload != Payload::Volume) {
    std::vector<std::optional<std::vector<double>>> known(n_edges);
    for (EdgeIndex e = 0; e < n_edges; ++e)
      if (!unknown[e] && states[e].class_share) {
        const auto& v = states[e].class_share->values();
        known[e] = std::vector<double>(v.begin(), v.end());
      }
    const Eigen::MatrixXd y = solve_channel(net, states, known, unknown, kNumClasses, max_unknowns, slot);
    for (EdgeIndex e = 0; e < n_edges; ++e) {
      if (unknown[e]) {
        ClassShare::Vector m{};
        for (std::size_t k = 0; k < kNumClasses; ++k)
          m[k] = std::max(0.0, y(static_cast<Eigen::Index>(slot[e]), static_cast<Eigen::Index>(k)));
        out.class_share[e] = ClassShare::from_masses(m);
      } else if (known[e]) {
        out.class_share[e] = states[e].class_share;
      }
    }
  }
  return out;
}

RandomFixture make_random_fixture(const RandomFixtureSpec& spec) {
  if (spec.n_edges < 2) throw ValidationError("random fixture needs at least 2 edges");
  if (!(spec.observation_fraction > 0.0 && spec.observation_fraction < 1.0))
    throw ValidationError("observation_fraction must be in (0, 1)");
  if (!(spec.anchor_share > 0.0 && spec.anchor_share <= 1.0)) throw ValidationError("anchor_share must be in (0, 1]");

  Rng rng(spec.seed);
  const std::size_t side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(spec.n_edges) / 2.0))) + 2;
  std::vector<GeoPoint> lattice(side * side);
  for (std::size_t j = 0; j < side; ++j)
    for (std::size_t i = 0; i < side; ++i)
      lattice[j * side + i] = {spec.origin.lon + (static_cast<double>(i) + rng.uniform(-0.2, 0.2)) * spec.spacing_deg,
                               spec.origin.lat + (static_cast<double>(j) + rng.uniform(-0.2, 0.2)) * spec.spacing_deg};
  auto lattice_neighbors = [&](std::size_t v) {
    std::vector<std::size_t> out;
    const std::size_t i = v % side, j = v / side;
    if (i > 0) out.push_back(v - 1);
    if (i + 1 < side) out.push_back(v + 1);
    if (j > 0) out.push_back(v - side);
    if (j + 1 < side) out.push_back(v + side);
    return out;
  };

  // Random walks: each walk starts at the head of an existing edge and never
  // steps straight back, so consecutive edges are neighbours and the
  // neighbour relation stays connected.
  std::vector<std::pair<std::size_t, std::size_t>> walk_edges;
  std::set<std::pair<std::size_t, std::size_t>> present;
  std::size_t attempts = 0;
  while (walk_edges.size() < spec.n_edges) {
    if (++attempts > 100 * spec.n_edges) throw ValidationError("random fixture generation stalled");
    std::size_t cur, prev;
    if (walk_edges.empty()) {
      cur = (side / 2) * side + side / 2;
      prev = static_cast<std::size_t>(-1);
    } else {
      const auto& g = walk_edges[rng.below(walk_edges.size())];
      cur = g.second;
      prev = g.first;
    }
    const std::size_t length = 3 + rng.below(10);
    for (std::size_t step = 0; step < length && walk_edges.size() < spec.n_edges; ++step) {
      std::vector<std::size_t> options;
      for (std::size_t next : lattice_neighbors(cur))
        if (next != prev && !present.count({cur, next})) options.push_back(next);
      if (options.empty()) break;
      const std::size_t next = options[rng.below(options.size())];
      present.insert({cur, next});
      walk_edges.emplace_back(cur, next);
      prev = cur;
      cur = next;
    }
  }

  std::set<std::size_t> used;
  for (const auto& [u, v] : walk_edges) {
    used.insert(u);
    used.insert(v);
  }
  const double mid_lon = spec.origin.lon + static_cast<double>(side) * spec.spacing_deg / 2.0;
  std::vector<NodeSpec> nodes;
  for (std::size_t v : used) nodes.push_back({idx(v), lattice[v]});
  std::vector<EdgeSpec> edges;
  std::map<std::pair<std::size_t, std::size_t>, double> weight_of;
  std::vector<double> weights;
  for (std::size_t k = 0; k < walk_edges.size(); ++k) {
    const auto [u, v] = walk_edges[k];
    const std::string region = (lattice[u].lon + lattice[v].lon) / 2.0 < mid_lon ? "R1" : "R2";
    edges.push_back({idx(k), idx(u), idx(v), {}, std::nullopt, region});
    // Opposing directions of one road share a prior.
    auto twin = weight_of.find({v, u});
    const double w = twin != weight_of.end() ? twin->second : rng.uniform(spec.min_weight, spec.max_weight);
    weight_of[{u, v}] = w;
    weights.push_back(w);
  }

  RandomFixture fx{build_network(std::move(nodes), std::move(edges)), {}, {}, {}, {}, {}};
  const std::size_t n = fx.network.edge_count();
  fx.states = make_state_table(fx.network);
  for (std::size_t k = 0; k < n; ++k) fx.states[fx.network.edge_index(EdgeId(idx(k)))].weight = weights[k];

  const auto n_obs = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(spec.observation_fraction * static_cast<double>(n))), 1, n - 1);
  const auto n_anchor = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(spec.anchor_share * static_cast<double>(n_obs))), 1, n_obs);
  std::vector<EdgeIndex> order(n);
  for (EdgeIndex e = 0; e < n; ++e) order[e] = e;
  rng.shuffle(order);
  fx.anchors.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_anchor));
  fx.stations.assign(order.begin() + static_cast<std::ptrdiff_t>(n_anchor), order.begin() + static_cast<std::ptrdiff_t>(n_obs));
  fx.hidden.assign(order.begin() + static_cast<std::ptrdiff_t>(n_obs), order.end());
  std::sort(fx.anchors.begin(), fx.anchors.end());
  std::sort(fx.stations.begin(), fx.stations.end());
  std::sort(fx.hidden.begin(), fx.hidden.end());

  StateTable driving = fx.states;
  for (EdgeIndex e : fx.anchors) {
    ClassShare::Vector mass{};
    for (double& m : mass) m = std::pow(rng.uniform(), 3.0);
    mass[class_bin(9)] += 1.0;
    driving[e].status = EdgeStatus::Observed;
    driving[e].volume = rng.uniform(20.0, 400.0);
    driving[e].class_share = ClassShare::from_masses(mass);
  }
  const OracleSolution truth = fixed_point_oracle(fx.network, driving, Payload::Both, n);
  fx.ground_truth.resize(n);
  for (EdgeIndex e = 0; e < n; ++e) fx.ground_truth[e] = {*truth.volume[e], *truth.class_share[e]};
  for (EdgeIndex e : fx.anchors) fx.states[e] = driving[e];
  for (EdgeIndex e : fx.stations) {
    fx.states[e].status = EdgeStatus::Observed;
    fx.states[e].volume = fx.ground_truth[e].volume;
    fx.states[e].class_share = fx.ground_truth[e].share;
  }
  return fx;
}

RandomFixture make_random_fixture(std::size_t n_edges, double observation_fraction, std::uint64_t seed) {
  RandomFixtureSpec spec;
  spec.n_edges = n_edges;
  spec.observation_fraction = observation_fraction;
  spec.seed = seed;
  return make_random_fixture(spec);
}

SyntheticDataset make_synthetic_dataset(const SyntheticDatasetSpec& spec, const ImputeConfig& cfg) {
  if (spec.days < 1) throw ValidationError("synthetic dataset needs at least one day");
  SyntheticDataset ds;
  ds.fixture = make_random_fixture(spec.fixture);
  RandomFixture& fx = ds.fixture;
  const RoadNetwork& net = fx.network;
  const std::size_t n = net.edge_count();
  Rng rng(spec.fixture.seed ^ 0x9e3779b97f4a7c15ULL);

  // Drop dense coverage for some roads (both directions of a twin pair).
  std::vector<std::uint8_t> uncovered(n, 0);
  for (EdgeIndex e = 0; e < n; ++e) {
    if (uncovered[e] || rng.uniform() >= spec.uncovered_fraction) continue;
    uncovered[e] = 1;
    if (auto t = net.twin(e)) uncovered[*t] = 1;
  }
  StateTable partial = fx.states;
  for (EdgeIndex e = 0; e < n; ++e)
    if (uncovered[e]) {
      partial[e].weight.reset();
      ds.uncovered.push_back(e);
    }
  const WeightImputation resolved = impute_missing_weights(net, partial, cfg);

  // Recompute the truth under the weights the pipeline will see.
  StateTable driving = resolved.states;
  for (EdgeIndex e = 0; e < n; ++e) {
    driving[e].status = EdgeStatus::Unset;
    driving[e].volume.reset();
    driving[e].class_share.reset();
  }
  for (EdgeIndex e : fx.anchors) driving[e] = fx.states[e], driving[e].weight = resolved.states[e].weight;
  const OracleSolution truth = fixed_point_oracle(net, driving, Payload::Both, n);
  for (EdgeIndex e = 0; e < n; ++e) {
    fx.ground_truth[e] = {*truth.volume[e], *truth.class_share[e]};
    fx.states[e].weight = resolved.states[e].weight;
  }
  for (EdgeIndex e : fx.stations) {
    fx.states[e].volume = fx.ground_truth[e].volume;
    fx.states[e].class_share = fx.ground_truth[e].share;
  }

  // Dense network: middle half of each covered road, in two pieces, so no
  // piece reaches another road's buffer near shared nodes.
  for (EdgeIndex e = 0; e < n; ++e) {
    if (uncovered[e]) continue;
    const auto twin = net.twin(e);
    if (twin && *twin < e) continue;
    const Edge& edge = net.edge(e);
    const GeoPoint a = geo::interpolate_along(edge.geometry, 0.25);
    const GeoPoint m = geo::interpolate_along(edge.geometry, 0.5);
    const GeoPoint b = geo::interpolate_along(edge.geometry, 0.75);
    const double w = *fx.states[e].weight;
    const bool one_way = !twin.has_value();
    const double aadt = one_way ? w : 2.0 * w;
    ds.dense.push_back({"D" + edge.id.str() + "a", aadt, one_way, {a, m}});
    ds.dense.push_back({"D" + edge.id.str() + "b", aadt, one_way, {m, b}});
  }

  // Stations at road midpoints. Opposing directions of a two-way road in the
  // same role share one station id.
  std::map<EdgeIndex, std::string> station_of;
  std::set<EdgeIndex> anchor_set(fx.anchors.begin(), fx.anchors.end());
  std::vector<EdgeIndex> observed = fx.anchors;
  observed.insert(observed.end(), fx.stations.begin(), fx.stations.end());
  std::sort(observed.begin(), observed.end());
  std::size_t next_station = 1;
  for (EdgeIndex e : observed) {
    const Edge& edge = net.edge(e);
    std::string id;
    const auto twin = net.twin(e);
    if (twin && station_of.count(*twin) && anchor_set.count(*twin) == anchor_set.count(e)) {
      id = station_of[*twin];
    } else {
      id = "S" + std::to_string(next_station++);
      if (anchor_set.count(e)) ds.pinned_stations.push_back(id);
    }
    station_of[e] = id;
    const GeoPoint location = twin && station_of.count(*twin) && station_of[*twin] == id
                                  ? geo::interpolate_along(net.edge(*twin).geometry, 0.5)
                                  : geo::interpolate_along(edge.geometry, 0.5);
    ds.stations.push_back({id, quantize_bearing(edge_bearing(edge)), location, edge.region_tag});
  }

  // Hourly records: truth x a shared time profile normalized to mean 1, so
  // the all-hours window reproduces the truth and other windows scale it.
  const int hours = spec.days * 24;
  std::vector<CivilHour> stamps;
  std::vector<double> profile;
  std::chrono::sys_days day0 = std::chrono::year{2021} / std::chrono::March / 1;
  for (int d = 0; d < spec.days; ++d) {
    const std::chrono::year_month_day ymd{day0 + std::chrono::days{d}};
    const bool weekend = std::chrono::weekday{day0 + std::chrono::days{d}}.iso_encoding() >= 6;
    for (int h = 0; h < 24; ++h) {
      stamps.push_back({static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
                        static_cast<int>(static_cast<unsigned>(ymd.day())), h});
      profile.push_back((1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * (h - 9) / 24.0)) * (weekend ? 0.6 : 1.0));
    }
  }
  double mean = 0.0;
  for (double p : profile) mean += p;
  mean /= hours;
  for (std::size_t s = 0; s < ds.stations.size(); ++s) {
    const EdgeIndex e = observed[s];
    const EdgeTruth& t = fx.ground_truth[e];
    for (int k = 0; k < hours; ++k) {
      HourlyClassRecord r{ds.stations[s].station_id, ds.stations[s].direction, stamps[k], {}};
      for (std::size_t c = 0; c < kNumClasses; ++c) r.counts[c] = t.volume * t.share[c] * profile[k] / mean;
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

}  // namespace netimpute
