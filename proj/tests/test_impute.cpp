#include <doctest.h>

#include <cmath>
#include <limits>

#include <omp.h>

#include "helpers.hpp"
#include "netimpute/error.hpp"
#include "netimpute/impute.hpp"
#include "netimpute/kernels.hpp"
#include "netimpute/synth.hpp"

using namespace netimpute;
using testing::Sketch;

namespace {

StateTable weighted(const RoadNetwork& net, double w = 1.0) {
  StateTable s = make_state_table(net);
  for (EdgeState& e : s) e.weight = w;
  return s;
}

void observe(const RoadNetwork& net, StateTable& s, const std::string& id, double volume) {
  EdgeState& e = s[net.edge_index(id)];
  e.status = EdgeStatus::Observed;
  e.volume = volume;
}

ImputeConfig tight() {
  ImputeConfig cfg;
  cfg.tolerance = 1e-13;
  cfg.max_epochs = 100000;
  return cfg;
}

}  // namespace

TEST_CASE("weighted average examples") {
  const RoadNetwork net = testing::junction_sketch().build();
  StateTable s = weighted(net);
  observe(net, s, "AC", 10);
  observe(net, s, "BC", 100);
  const EdgeIndex cd = net.edge_index("CD");
  CHECK(impute_edge_volume(net, cd, s) == doctest::Approx(55.0).epsilon(1e-15));
  s[net.edge_index("AC")].weight = 3;
  CHECK(impute_edge_volume(net, cd, s) == doctest::Approx(32.5).epsilon(1e-15));

  s[net.edge_index("AC")].class_share = ClassShare::one_hot(5);
  s[net.edge_index("BC")].class_share = ClassShare::one_hot(6);
  s[net.edge_index("AC")].weight = 1;
  const ClassShare p = impute_edge_share(net, cd, s);
  CHECK(p.of_class(5) == doctest::Approx(0.5));
  CHECK(p.of_class(6) == doctest::Approx(0.5));
  for (int c = 7; c <= 13; ++c) CHECK(p.of_class(c) == 0.0);
}

TEST_CASE("zero weights fall back to the unweighted mean") {
  const RoadNetwork net = testing::junction_sketch().build();
  StateTable s = weighted(net, 0.0);
  observe(net, s, "AC", 10);
  observe(net, s, "BC", 30);
  CHECK(impute_edge_volume(net, net.edge_index("CD"), s) == doctest::Approx(20.0));
}

TEST_CASE("impute_edge needs a valued neighbour") {
  const RoadNetwork net = testing::junction_sketch().build();
  const StateTable s = weighted(net);
  CHECK_THROWS_AS(impute_edge_volume(net, net.edge_index("CD"), s), ValidationError);
}

TEST_CASE("merge and diverge deferral") {
  SUBCASE("merge") {
    Sketch sk;
    sk.node("A", -1, 1).node("B", -1, -1).node("C", 0, 0).node("D", 1, 0).node("E", 2, 0);
    sk.edge("AC", "A", "C").edge("BC", "B", "C").edge("CD", "C", "D").edge("DE", "D", "E");
    const RoadNetwork net = sk.build();
    const EdgeIndex cd = net.edge_index("CD");
    CHECK(kernels::classify_junction(net, cd) == kernels::Junction::Merge);
    StateTable s = weighted(net);
    observe(net, s, "AC", 1);
    CHECK_FALSE(valid_to_impute(net, cd, s, Payload::Volume));
    CHECK(valid_to_impute(net, cd, s, Payload::Volume, true));
    observe(net, s, "BC", 2);
    CHECK(valid_to_impute(net, cd, s, Payload::Volume));
  }
  SUBCASE("diverge") {
    Sketch sk;
    sk.node("A", -1, 0).node("C", 0, 0).node("D", 1, 0).node("E", 2, 1).node("F", 2, -1);
    sk.edge("AC", "A", "C").edge("CD", "C", "D").edge("DE", "D", "E").edge("DF", "D", "F");
    const RoadNetwork net = sk.build();
    const EdgeIndex cd = net.edge_index("CD");
    CHECK(kernels::classify_junction(net, cd) == kernels::Junction::Diverge);
    StateTable s = weighted(net);
    observe(net, s, "DE", 1);
    CHECK_FALSE(valid_to_impute(net, cd, s, Payload::Volume));
    observe(net, s, "DF", 1);
    CHECK(valid_to_impute(net, cd, s, Payload::Volume));
  }
  SUBCASE("ordinary") {
    Sketch sk;
    sk.node("A", 0, 0).node("B", 1, 0).node("C", 2, 0);
    sk.edge("AB", "A", "B").edge("BC", "B", "C");
    const RoadNetwork net = sk.build();
    StateTable s = weighted(net);
    CHECK_FALSE(valid_to_impute(net, net.edge_index("BC"), s, Payload::Volume));
    observe(net, s, "AB", 1);
    CHECK(valid_to_impute(net, net.edge_index("BC"), s, Payload::Volume));
  }
  SUBCASE("both in and out degree two is ordinary") {
    const RoadNetwork net = testing::junction_sketch().build();
    CHECK(kernels::classify_junction(net, net.edge_index("CD")) == kernels::Junction::Ordinary);
  }
}

TEST_CASE("chain propagates a constant") {
  Sketch sk;
  sk.node("A", 0, 0).node("B", 1, 0).node("C", 2, 0).node("D", 3, 0);
  sk.edge("AB", "A", "B").edge("BC", "B", "C").edge("CD", "C", "D");
  const RoadNetwork net = sk.build();
  StateTable s = weighted(net);
  observe(net, s, "AB", 7);
  for (UpdateScheme scheme : {UpdateScheme::InPlace, UpdateScheme::Synchronous}) {
    ImputeConfig cfg;
    cfg.payload = Payload::Volume;
    cfg.scheme = scheme;
    const ImputeResult r = run_imputation(net, s, cfg);
    CHECK(r.converged);
    for (const EdgeState& e : r.states) CHECK(*e.volume == 7.0);
    CHECK(r.states[net.edge_index("CD")].status == EdgeStatus::Imputed);
    CHECK(r.unset_count == 0);
  }
}

TEST_CASE("unreachable edges stay unset") {
  Sketch sk;
  sk.node("A", 0, 0).node("B", 1, 0).node("C", 5, 5).node("D", 6, 5);
  sk.edge("AB", "A", "B").edge("CD", "C", "D");
  const RoadNetwork net = sk.build();
  StateTable s = weighted(net);
  observe(net, s, "AB", 3);
  ImputeConfig cfg;
  cfg.payload = Payload::Volume;
  const ImputeResult r = run_imputation(net, s, cfg);
  CHECK(r.unset_count == 1);
  CHECK(r.states[net.edge_index("CD")].status == EdgeStatus::Unset);
  CHECK_FALSE(r.states[net.edge_index("CD")].volume);
}

TEST_CASE("run_imputation preconditions") {
  const RoadNetwork net = testing::junction_sketch().build();
  StateTable s = weighted(net);
  ImputeConfig cfg;
  CHECK_THROWS_AS(run_imputation(net, s, cfg), ValidationError);
  observe(net, s, "AC", 5);
  cfg.payload = Payload::Volume;
  s[net.edge_index("DE")].weight.reset();
  CHECK_THROWS_AS(run_imputation(net, s, cfg), ValidationError);
  s[net.edge_index("DE")].weight = 1;
  cfg.max_epochs = 0;
  CHECK_THROWS_AS(run_imputation(net, s, cfg), ValidationError);
  cfg = {};
  cfg.tolerance = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.deferral_grace = cfg.max_epochs + 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("non-finite updates name the edge") {
  Sketch sk;
  sk.node("A", -1, 1).node("B", -1, -1).node("C", 0, 0).node("D", 1, 0);
  sk.edge("AC", "A", "C").edge("BC", "B", "C").edge("CD", "C", "D");
  const RoadNetwork net = sk.build();
  StateTable s = weighted(net, 1e300);
  observe(net, s, "AC", 1e300);
  observe(net, s, "BC", 1e300);
  ImputeConfig cfg;
  cfg.payload = Payload::Volume;
  try {
    run_imputation(net, s, cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("CD") != std::string::npos);
  }
}

TEST_CASE("weight imputation") {
  SUBCASE("chain middle lies between its ends") {
    Sketch sk;
    sk.node("A", 0, 0).node("B", 1, 0).node("C", 2, 0).node("D", 3, 0);
    sk.edge("AB", "A", "B").edge("BC", "B", "C").edge("CD", "C", "D");
    const RoadNetwork net = sk.build();
    StateTable s = make_state_table(net);
    s[net.edge_index("AB")].weight = 100;
    s[net.edge_index("CD")].weight = 300;
    const WeightImputation w = impute_missing_weights(net, s, ImputeConfig{});
    const double mid = *w.states[net.edge_index("BC")].weight;
    CHECK(mid >= 100);
    CHECK(mid <= 300);
    CHECK(mid == doctest::Approx(200));
    CHECK(w.source[net.edge_index("BC")] == WeightSource::Imputed);
  }
  SUBCASE("all weights set is a no-op") {
    const RoadNetwork net = testing::junction_sketch().build();
    const StateTable s = weighted(net, 5);
    const WeightImputation w = impute_missing_weights(net, s, ImputeConfig{});
    CHECK(w.epochs_run == 0);
    for (EdgeIndex e = 0; e < net.edge_count(); ++e) CHECK(*w.states[e].weight == 5);
  }
  SUBCASE("star with equal leaves") {
    const RoadNetwork net = testing::junction_sketch().build();
    StateTable s = make_state_table(net);
    for (const char* leaf : {"AC", "BC", "DE", "DF"}) s[net.edge_index(leaf)].weight = 60;
    const WeightImputation w = impute_missing_weights(net, s, ImputeConfig{});
    CHECK(*w.states[net.edge_index("CD")].weight == 60);
  }
  SUBCASE("unreachable edges get the median") {
    Sketch sk;
    sk.node("A", 0, 0).node("B", 1, 0).node("C", 2, 0).node("X", 5, 5).node("Y", 6, 5);
    sk.edge("AB", "A", "B").edge("BC", "B", "C").edge("XY", "X", "Y");
    const RoadNetwork net = sk.build();
    StateTable s = make_state_table(net);
    s[net.edge_index("AB")].weight = 10;
    s[net.edge_index("BC")].weight = 30;
    const WeightImputation w = impute_missing_weights(net, s, ImputeConfig{});
    CHECK(*w.states[net.edge_index("XY")].weight == 20);
    CHECK(w.source[net.edge_index("XY")] == WeightSource::Fallback);
    CHECK(w.fallback_count == 1);
  }
  SUBCASE("no weights at all") {
    const RoadNetwork net = testing::junction_sketch().build();
    CHECK_THROWS_AS(impute_missing_weights(net, make_state_table(net), ImputeConfig{}), ValidationError);
  }
}

TEST_CASE("grid converges inside the pinned range") {
  GridSpec spec;
  spec.rows = spec.cols = 6;
  const GridFixture fx = make_grid(spec);
  const ImputeResult r = run_imputation(fx.network, fx.states, ImputeConfig{});
  CHECK(r.converged);
  for (EdgeIndex e = 0; e < fx.network.edge_count(); ++e) {
    if (e == fx.source_edge || e == fx.sink_edge) continue;
    CHECK(*r.states[e].volume > 0.10);
    CHECK(*r.states[e].volume < 1.00);
    CHECK(r.states[e].class_share->of_class(9) == doctest::Approx(*r.states[e].volume).epsilon(1e-9));
  }
}

TEST_CASE("serial and OpenMP synchronous sweeps agree bit for bit") {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    const RandomFixture fx = make_random_fixture(300, 0.1, seed);
    ImputeConfig cfg;
    cfg.scheme = UpdateScheme::Synchronous;
    cfg.parallel = false;
    const ImputeResult serial = run_imputation(fx.network, fx.states, cfg);
    cfg.parallel = true;
    const ImputeResult par = run_imputation(fx.network, fx.states, cfg);
    CHECK(serial.epochs_run == par.epochs_run);
    for (EdgeIndex e = 0; e < fx.network.edge_count(); ++e) {
      CHECK(serial.states[e].volume == par.states[e].volume);
      CHECK(serial.states[e].class_share == par.states[e].class_share);
    }
  }
  omp_set_num_threads(saved);
}

TEST_CASE("both update schemes reach the oracle fixed point") {
  for (std::uint64_t seed = 11; seed <= 14; ++seed) {
    CAPTURE(seed);
    const RandomFixture fx = make_random_fixture(150, 0.1, seed);
    const OracleSolution oracle = fixed_point_oracle(fx.network, fx.states);
    for (UpdateScheme scheme : {UpdateScheme::InPlace, UpdateScheme::Synchronous}) {
      ImputeConfig cfg = tight();
      cfg.scheme = scheme;
      // Jacobi sweeps can settle into a rounding-level cycle a few ulp wide.
      if (scheme == UpdateScheme::Synchronous) cfg.tolerance = 1e-11;
      const ImputeResult r = run_imputation(fx.network, fx.states, cfg);
      REQUIRE(r.converged);
      for (EdgeIndex e = 0; e < fx.network.edge_count(); ++e) {
        CHECK(std::abs(*r.states[e].volume - *oracle.volume[e]) <= 1e-8 * std::abs(*oracle.volume[e]));
        for (std::size_t k = 0; k < kNumClasses; ++k)
          CHECK(std::abs((*r.states[e].class_share)[k] - (*oracle.class_share[e])[k]) <= 1e-8);
      }
    }
  }
}

TEST_CASE("pinning, closure, maximum principle and monotone progress") {
  for (std::uint64_t seed = 21; seed <= 26; ++seed) {
    CAPTURE(seed);
    const RandomFixture fx = make_random_fixture(250, 0.08, seed);
    std::size_t last_valued[3] = {0, 0, 0};
    bool monotone = true, closed = true;
    auto observer = [&](const EpochSnapshot& snap) {
      std::size_t n = 0;
      for (std::size_t e = 0; e < snap.valued.size(); ++e) {
        if (!snap.valued[e]) continue;
        ++n;
        if (snap.channel == Channel::ClassShare) {
          double sum = 0.0;
          for (std::size_t k = 0; k < snap.dim; ++k) sum += snap.values[e * snap.dim + k];
          closed = closed && std::abs(sum - 1.0) <= 1e-9;
        }
      }
      const auto c = static_cast<std::size_t>(snap.channel);
      monotone = monotone && n >= last_valued[c];
      last_valued[c] = n;
    };
    const ImputeResult r = run_imputation(fx.network, fx.states, ImputeConfig{}, observer);
    CHECK(monotone);
    CHECK(closed);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (EdgeIndex e = 0; e < fx.network.edge_count(); ++e) {
      const EdgeState& in = fx.states[e];
      if (in.status != EdgeStatus::Observed) continue;
      lo = std::min(lo, *in.volume);
      hi = std::max(hi, *in.volume);
      // Bit-identical pins.
      CHECK(r.states[e].volume == in.volume);
      CHECK(r.states[e].class_share == in.class_share);
      CHECK(r.states[e].status == EdgeStatus::Observed);
    }
    for (EdgeIndex e = 0; e < fx.network.edge_count(); ++e) {
      CHECK(*r.states[e].volume >= lo - 1e-9);
      CHECK(*r.states[e].volume <= hi + 1e-9);
      CHECK(std::abs(r.states[e].class_share->sum() - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("weight scaling leaves imputed values unchanged") {
  const RandomFixture fx = make_random_fixture(200, 0.1, 31);
  StateTable scaled = fx.states;
  for (EdgeState& s : scaled) *s.weight *= 1000.0;
  const ImputeResult a = run_imputation(fx.network, fx.states, ImputeConfig{});
  const ImputeResult b = run_imputation(fx.network, scaled, ImputeConfig{});
  for (EdgeIndex e = 0; e < fx.network.edge_count(); ++e)
    CHECK(std::abs(*a.states[e].volume - *b.states[e].volume) <= 1e-12 * std::abs(*a.states[e].volume));
}

TEST_CASE("deferral deadlock is waived and logged") {
  // A merge edge whose second upstream link is fed only through itself.
  Sketch sk;
  sk.node("A", -1, 1).node("B", -1, -1).node("C", 0, 0).node("D", 1, 0).node("E", 0, -1);
  sk.edge("AC", "A", "C").edge("BC", "B", "C").edge("CD", "C", "D").edge("DE", "D", "E").edge("EB", "E", "B");
  const RoadNetwork net = sk.build();
  StateTable s = weighted(net);
  observe(net, s, "AC", 4);
  ImputeConfig cfg;
  cfg.payload = Payload::Volume;
  cfg.deferral_grace = 5;
  const ImputeResult r = run_imputation(net, s, cfg);
  CHECK(r.converged);
  REQUIRE(r.waiver_epoch);
  CHECK_FALSE(r.events.empty());
  for (const EdgeState& e : r.states) CHECK(*e.volume == doctest::Approx(4.0));
}

TEST_CASE("imputation is deterministic") {
  const RandomFixture fx = make_random_fixture(200, 0.1, 41);
  const ImputeResult a = run_imputation(fx.network, fx.states, ImputeConfig{});
  const ImputeResult b = run_imputation(fx.network, fx.states, ImputeConfig{});
  CHECK(a.epochs_run == b.epochs_run);
  for (EdgeIndex e = 0; e < fx.network.edge_count(); ++e) {
    CHECK(a.states[e].volume == b.states[e].volume);
    CHECK(a.states[e].class_share == b.states[e].class_share);
  }
}
