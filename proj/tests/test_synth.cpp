#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "netimpute/error.hpp"
#include "netimpute/synth.hpp"

using namespace netimpute;

TEST_CASE("2x2 grid") {
  GridSpec spec;
  spec.rows = spec.cols = 2;
  const GridFixture fx = make_grid(spec);
  CHECK(fx.network.node_count() == 4);
  CHECK(fx.network.edge_count() == 4);
  std::size_t observed = 0;
  for (const EdgeState& s : fx.states) observed += s.status == EdgeStatus::Observed;
  CHECK(observed == 2);
  CHECK(*fx.states[fx.source_edge].volume == 0.10);
  CHECK(*fx.states[fx.sink_edge].volume == 1.00);
  CHECK(fx.source_edge != fx.sink_edge);
}

TEST_CASE("grid orientation and pins") {
  const GridFixture fx = make_grid(GridSpec{});
  const RoadNetwork& net = fx.network;
  CHECK(net.node_count() == 100);
  CHECK(net.edge_count() == 180);
  for (const Edge& e : net.edges()) {
    const GeoPoint a = e.geometry.front(), b = e.geometry.back();
    CHECK(((b.lon > a.lon && b.lat == a.lat) || (b.lat > a.lat && b.lon == a.lon)));
  }
  // The source leaves the lower-left node; the sink enters the upper-right one.
  const Node& ll = net.node(net.tail(fx.source_edge));
  const Node& ur = net.node(net.head(fx.sink_edge));
  for (const Node& n : net.nodes()) {
    CHECK(n.location.lon >= ll.location.lon);
    CHECK(n.location.lat >= ll.location.lat);
    CHECK(n.location.lon <= ur.location.lon);
    CHECK(n.location.lat <= ur.location.lat);
  }
  CHECK(net.in_edges(net.tail(fx.source_edge)).empty());
  CHECK(net.out_edges(net.head(fx.sink_edge)).empty());
}

TEST_CASE("grid spec validation") {
  GridSpec spec;
  spec.rows = 1;
  CHECK_THROWS_AS(make_grid(spec), ValidationError);
}

TEST_CASE("oracle examples") {
  testing::Sketch sk;
  sk.node("A", 0, 0).node("B", 1, 0).node("C", 2, 0).node("D", 3, 0);
  sk.edge("AB", "A", "B").edge("BC", "B", "C").edge("CD", "C", "D");
  const RoadNetwork net = sk.build();
  StateTable s = make_state_table(net);
  for (EdgeState& e : s) e.weight = 1;
  s[0].status = EdgeStatus::Observed;
  s[0].volume = 7;

  SUBCASE("constant solution") {
    const OracleSolution o = fixed_point_oracle(net, s, Payload::Volume);
    for (EdgeIndex e = 0; e < 3; ++e) CHECK(*o.volume[e] == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(o.unknowns == 2);
  }
  SUBCASE("harmonic midpoint") {
    s[2].status = EdgeStatus::Observed;
    s[2].volume = 1;
    s[0].volume = 0;
    const OracleSolution o = fixed_point_oracle(net, s, Payload::Volume);
    CHECK(*o.volume[1] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("isolated unknowns are singular") {
    testing::Sketch sk2 = sk;
    sk2.node("X", 8, 8).node("Y", 9, 8).edge("XY", "X", "Y");
    const RoadNetwork net2 = sk2.build();
    StateTable s2 = make_state_table(net2);
    for (EdgeState& e : s2) e.weight = 1;
    s2[net2.edge_index("AB")].status = EdgeStatus::Observed;
    s2[net2.edge_index("AB")].volume = 7;
    CHECK_THROWS_AS(fixed_point_oracle(net2, s2, Payload::Volume), NumericalError);
  }
  SUBCASE("size cap") { CHECK_THROWS_AS(fixed_point_oracle(net, s, Payload::Volume, 1), ValidationError); }
}

TEST_CASE("5x5 grid oracle agrees with a tight iterative solve") {
  GridSpec spec;
  spec.rows = spec.cols = 5;
  const GridFixture fx = make_grid(spec);
  const OracleSolution o = fixed_point_oracle(fx.network, fx.states);
  ImputeConfig cfg;
  cfg.tolerance = 1e-13;
  cfg.max_epochs = 100000;
  const ImputeResult r = run_imputation(fx.network, fx.states, cfg);
  REQUIRE(r.converged);
  for (EdgeIndex e = 0; e < fx.network.edge_count(); ++e) {
    CHECK(std::abs(*r.states[e].volume - *o.volume[e]) <= 1e-10);
    CHECK(*o.volume[e] >= 0.10 - 1e-12);
    CHECK(*o.volume[e] <= 1.00 + 1e-12);
  }
}

TEST_CASE("random fixtures") {
  SUBCASE("same seed, same fixture") {
    const RandomFixture a = make_random_fixture(120, 0.1, 9);
    const RandomFixture b = make_random_fixture(120, 0.1, 9);
    REQUIRE(a.network.edge_count() == b.network.edge_count());
    for (EdgeIndex e = 0; e < a.network.edge_count(); ++e) {
      CHECK(a.network.edge(e).geometry == b.network.edge(e).geometry);
      CHECK(a.states[e].weight == b.states[e].weight);
      CHECK(a.states[e].volume == b.states[e].volume);
      CHECK(a.ground_truth[e].volume == b.ground_truth[e].volume);
    }
    CHECK(a.anchors == b.anchors);
  }
  SUBCASE("shape") {
    const RandomFixture fx = make_random_fixture(200, 0.1, 4);
    CHECK(fx.network.edge_count() == 200);
    CHECK(fx.anchors.size() + fx.stations.size() == 20);
    CHECK(fx.hidden.size() == 180);
    // Neighbour relation is connected.
    for (std::size_t c : fx.network.neighbor_components()) CHECK(c == 0);
    for (EdgeIndex e : fx.hidden) CHECK(fx.states[e].status == EdgeStatus::Unset);
  }
  SUBCASE("truth satisfies the weighted-average equation") {
    const RandomFixture fx = make_random_fixture(150, 0.1, 6);
    StateTable truth = fx.states;
    for (EdgeIndex e = 0; e < truth.size(); ++e) {
      truth[e].volume = fx.ground_truth[e].volume;
      truth[e].class_share = fx.ground_truth[e].share;
    }
    for (EdgeIndex e : fx.hidden) {
      CHECK(impute_edge_volume(fx.network, e, truth) ==
            doctest::Approx(fx.ground_truth[e].volume).epsilon(1e-10));
    }
  }
  SUBCASE("one hidden edge is recovered") {
    const RandomFixture fx = make_random_fixture(60, 59.0 / 60.0, 2);
    REQUIRE(fx.hidden.size() == 1);
    const ImputeResult r = run_imputation(fx.network, fx.states, ImputeConfig{});
    const EdgeIndex h = fx.hidden[0];
    CHECK(*r.states[h].volume == doctest::Approx(fx.ground_truth[h].volume).epsilon(1e-8));
  }
  SUBCASE("fraction must be inside (0, 1)") {
    CHECK_THROWS_AS(make_random_fixture(50, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(make_random_fixture(50, 1.0, 1), ValidationError);
  }
}

TEST_CASE("synthetic dataset is internally consistent") {
  SyntheticDatasetSpec spec;
  spec.fixture.n_edges = 120;
  spec.fixture.observation_fraction = 0.15;
  spec.days = 7;
  const SyntheticDataset ds = make_synthetic_dataset(spec, ImputeConfig{});
  CHECK_FALSE(ds.dense.empty());
  CHECK_FALSE(ds.stations.empty());
  CHECK(ds.records.size() == ds.stations.size() * 7 * 24);
  CHECK_FALSE(ds.pinned_stations.empty());
  // Every station snaps back onto its own edge.
  MatchConfig cfg;
  std::vector<EdgeIndex> observed = ds.fixture.anchors;
  observed.insert(observed.end(), ds.fixture.stations.begin(), ds.fixture.stations.end());
  std::sort(observed.begin(), observed.end());
  for (std::size_t i = 0; i < ds.stations.size(); ++i)
    CHECK(snap_station(ds.stations[i], ds.fixture.network, cfg).edge == observed[i]);
}
