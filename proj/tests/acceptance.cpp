// Acceptance checks A1-A8. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "netimpute/evaluate.hpp"
#include "netimpute/geomatch.hpp"
#include "netimpute/impute.hpp"
#include "netimpute/io/csv.hpp"
#include "netimpute/random.hpp"
#include "netimpute/synth.hpp"

using namespace netimpute;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel_err(double a, double b) {
  const double d = std::abs(a - b);
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : d / s;
}

// Watches every epoch of a run: observed edges must keep their exact inputs
// and every valued class share must sum to one.
struct InvariantWatch {
  const StateTable* states = nullptr;
  std::size_t epochs = 0;
  std::size_t violations = 0;
  double worst_sum_error = 0.0;

  void operator()(const EpochSnapshot& s) {
    ++epochs;
    const StateTable& st = *states;
    for (EdgeIndex e = 0; e < st.size(); ++e) {
      const std::span<const double> v = s.values.subspan(e * s.dim, s.dim);
      if (st[e].status == EdgeStatus::Observed) {
        if (s.channel == Channel::Volume && st[e].volume && v[0] != *st[e].volume) ++violations;
        if (s.channel == Channel::ClassShare && st[e].class_share &&
            !std::equal(v.begin(), v.end(), st[e].class_share->values().begin()))
          ++violations;
      }
      if (s.channel == Channel::ClassShare && s.valued[e]) {
        double sum = 0.0;
        for (double p : v) sum += p;
        worst_sum_error = std::max(worst_sum_error, std::abs(sum - 1.0));
        if (std::abs(sum - 1.0) > 1e-9) ++violations;
      }
    }
  }
};

// Final-state check of the same invariants.
std::size_t final_violations(const StateTable& in, const StateTable& out) {
  std::size_t bad = 0;
  for (EdgeIndex e = 0; e < in.size(); ++e) {
    if (in[e].status == EdgeStatus::Observed) {
      if (out[e].status != EdgeStatus::Observed || out[e].volume != in[e].volume) ++bad;
      if (in[e].class_share && (!out[e].class_share || out[e].class_share->values() != in[e].class_share->values()))
        ++bad;
    }
    if (out[e].class_share) {
      double sum = 0.0;
      for (double p : out[e].class_share->values()) sum += p;
      if (std::abs(sum - 1.0) > 1e-9) ++bad;
    }
  }
  return bad;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct A5Tally {
  std::size_t runs = 0;
  std::size_t epochs = 0;
  std::size_t violations = 0;
  double worst_sum_error = 0.0;

  ImputeResult run(const RoadNetwork& net, const StateTable& states, const ImputeConfig& cfg) {
    InvariantWatch w;
    w.states = &states;
    ImputeResult r = run_imputation(net, states, cfg, std::ref(w));
    ++runs;
    epochs += w.epochs;
    violations += w.violations + final_violations(states, r.states);
    worst_sum_error = std::max(worst_sum_error, w.worst_sum_error);
    return r;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome a1(A5Tally& a5) {
  const GridFixture fx = make_grid(GridSpec{});
  ImputeConfig cfg;
  cfg.max_epochs = 1000;
  cfg.tolerance = 1e-6;
  const auto t0 = Clock::now();
  const ImputeResult r = a5.run(fx.network, fx.states, cfg);
  const double secs = seconds_since(t0);
  double lo = INFINITY, hi = -INFINITY;
  bool all_valued = true;
  for (const EdgeState& s : r.states) {
    if (!s.volume) {
      all_valued = false;
      continue;
    }
    lo = std::min(lo, *s.volume);
    hi = std::max(hi, *s.volume);
  }
  const double final_delta = r.trace.empty() ? INFINITY : r.trace.back().max_delta;
  Outcome o;
  o.pass = r.converged && r.epochs_run <= 1000 && final_delta <= 1e-6 && all_valued && lo >= 0.10 && hi <= 1.00 &&
           secs < 1.0;
  o.detail = fmt("epochs=%d max_delta=%.3g range=[%.6f, %.6f] time=%.3fs", r.epochs_run, final_delta, lo, hi, secs);
  return o;
}

Outcome a2(A5Tally& a5) {
  ImputeConfig cfg;
  cfg.tolerance = 1e-13;
  cfg.max_epochs = 200000;
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t fixtures = 0, max_unknowns = 0, failures = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const std::size_t n = 120 + 110 * i;  // up to 2210 edges, about 1990 unknowns
    const RandomFixture fx = make_random_fixture(n, 0.1, 1000 + i);
    const OracleSolution oracle = fixed_point_oracle(fx.network, fx.states);
    const ImputeResult r = a5.run(fx.network, fx.states, cfg);
    ++fixtures;
    max_unknowns = std::max(max_unknowns, oracle.unknowns);
    if (!r.converged) ++failures;
    for (EdgeIndex e = 0; e < fx.network.edge_count(); ++e) {
      const EdgeState& s = r.states[e];
      if (!s.volume || !s.class_share) {
        ++failures;
        continue;
      }
      double err = rel_err(*s.volume, *oracle.volume[e]);
      for (std::size_t c = 0; c < kNumClasses; ++c)
        err = std::max(err, rel_err(s.class_share->values()[c], oracle.class_share[e]->values()[c]));
      worst = std::max(worst, err);
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures == 0 && worst <= 1e-8 && fixtures >= 20 && secs < 30.0;
  o.detail = fmt("fixtures=%zu max_unknowns=%zu worst_rel_err=%.3g time=%.2fs", fixtures, max_unknowns, worst, secs);
  return o;
}

Outcome a3(A5Tally& a5) {
  const auto t0 = Clock::now();
  const RandomFixture fx = make_random_fixture(200, 0.1, 5);
  StateTable base = fx.states;
  std::vector<CvObservation> obs;
  std::vector<std::string> ids;
  for (EdgeIndex e : fx.stations) {
    base[e] = EdgeState{fx.states[e].weight, std::nullopt, std::nullopt, EdgeStatus::Unset};
    obs.push_back({"S" + std::to_string(e), Direction::N, e, fx.ground_truth[e].volume, fx.ground_truth[e].share,
                   fx.network.edge(e).region_tag.value_or("unknown")});
    ids.push_back(obs.back().station_id);
  }
  ImputeConfig cfg;
  cfg.tolerance = 1e-12;
  cfg.max_epochs = 50000;
  const FoldAssignment folds = make_folds(ids, 10, 42);
  const MetricsReport report = run_cross_validation(fx.network, base, obs, folds, cfg);
  const MetricCell* pooled = report.find("pooled", "all", "all", "all:all:all");

  // Same folds again, run one by one under the invariant watch.
  for (std::size_t f = 0; f < folds.k; ++f) {
    std::vector<CvObservation> kept;
    for (const CvObservation& o : obs)
      if (folds.fold_of.at(o.station_id) != f) kept.push_back(o);
    a5.run(fx.network, pin_observations(base, kept), cfg);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = pooled && pooled->mae && *pooled->mae < 1e-6 && report.n_missing == 0 && secs < 10.0;
  o.detail = fmt("edges=%zu stations=%zu folds=%zu pooled_mae=%.3g time=%.2fs", fx.network.edge_count(), obs.size(),
                 folds.k, pooled && pooled->mae ? *pooled->mae : NAN, secs);
  return o;
}

Outcome a4() {
  using V = std::vector<double>;
  std::size_t bad = 0;
  auto near = [&](double a, double b) { bad += !(std::abs(a - b) <= 1e-9); };
  near(mae(V{0, 0}, V{3, 4}), 3.5);
  near(rmse(V{0, 0}, V{3, 4}), 3.5355339059327378);
  near(rmse(V{1, 1, 1, 1}, V{2, 0, 2, 0}), 1.0);
  near(pearson_r2(V{1, 2, 3}, V{5, 7, 9}), 1.0);
  near(pearson_r2(V{1, 2, 3, 4}, V{1, 2, 3, 100}), 0.616266481609993);
  const std::array<double, kNumClasses> half{0, 0, 0, 0, 1, 1, 0, 0, 0};
  near(cel(ClassShare::one_hot(9), ClassShare::from_masses(half)), std::log(2.0));
  near(cel(ClassShare::uniform(), ClassShare::uniform()), std::log(9.0));
  near(cel(ClassShare::one_hot(9), ClassShare::one_hot(5)), -std::log(kCelFloor));

  Rng rng(2024);
  std::size_t order = 0, gibbs = 0, self = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(40);
    V a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(-500, 500);
      b[i] = rng.uniform(-500, 500);
    }
    order += mae(a, b) > rmse(a, b) * (1 + 1e-15);

    std::array<double, kNumClasses> mf{}, mg{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      mf[c] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
      mg[c] = rng.uniform();
    }
    mf[rng.below(kNumClasses)] += 0.1;
    const ClassShare f = ClassShare::from_masses(mf), g = ClassShare::from_masses(mg);
    self += std::abs(cel(f, f) - entropy(f.span())) > 1e-12;
    gibbs += cel(f, g) < cel(f, f) - 1e-12;
  }
  Outcome o;
  o.pass = bad == 0 && order == 0 && gibbs == 0 && self == 0;
  o.detail = fmt("example_mismatches=%zu mae>rmse=%zu cel_self=%zu gibbs=%zu (1000 trials each)", bad, order, self,
                 gibbs);
  return o;
}

Outcome a5(const A5Tally& t) {
  Outcome o;
  o.pass = t.violations == 0 && t.runs > 0;
  o.detail = fmt("runs=%zu epochs_checked=%zu violations=%zu worst_share_sum_err=%.3g", t.runs, t.epochs, t.violations,
                 t.worst_sum_error);
  return o;
}

// Interstate running east-west with a perpendicular arterial crossing it.
Outcome a6() {
  const GeoPoint w{-84.010, 35.0}, e{-83.990, 35.0}, s{-84.0, 34.990}, n{-84.0, 35.010};
  const RoadNetwork net = build_network({{"W", w}, {"E", e}, {"S", s}, {"N", n}},
                                        {{"1", "W", "E", {}, std::nullopt, std::string("R1")},
                                         {"2", "E", "W", {}, std::nullopt, std::string("R1")},
                                         {"3", "S", "N", {}, std::nullopt, std::string("R1")}});
  const std::vector<DenseSegment> dense{
      {"I-a", 6000, false, {{-84.010, 35.0}, {-84.003, 35.0}}},
      {"I-b", 8000, false, {{-84.003, 35.0}, {-83.997, 35.0}}},
      {"I-c", 10000, false, {{-83.997, 35.0}, {-83.990, 35.0}}},
      {"ART", 30000, false, {{-84.0, 34.990}, {-84.0, 35.010}}},
  };
  const MatchConfig cfg;
  const std::vector<WeightMatch> m = transfer_weights(net, directionalize_and_halve(dense), cfg);
  const EdgeIndex east = net.edge_index("1"), west = net.edge_index("2"), art = net.edge_index("3");
  const bool weights_ok = m[east].weight == 4000.0 && m[west].weight == 4000.0 && m[art].weight == 15000.0;
  // The arterial's segments reach the interstate buffer but fail the bearing filter.
  const bool filter_ok = m[east].n_candidates == 8 && m[east].n_after_bearing_filter == 3;

  const Station eb{"T1", Direction::E, {-84.0005, 35.0002}, std::nullopt};
  const Station wb{"T1", Direction::W, {-84.0005, 35.0002}, std::nullopt};
  EdgeIndex se = 99, sw = 99;
  bool snap_ok = true;
  try {
    se = snap_station(eb, net, cfg).edge;
    sw = snap_station(wb, net, cfg).edge;
  } catch (const std::exception&) {
    snap_ok = false;
  }
  snap_ok = snap_ok && se == east && sw == west;
  Outcome o;
  o.pass = weights_ok && filter_ok && snap_ok;
  o.detail = fmt("interstate=%g/%g arterial=%g candidates=%zu kept=%zu twin_snap=%s/%s",
                 m[east].weight.value_or(NAN), m[west].weight.value_or(NAN), m[art].weight.value_or(NAN),
                 m[east].n_candidates, m[east].n_after_bearing_filter, net.edge(se < 3 ? se : 0).id.str().c_str(),
                 net.edge(sw < 3 ? sw : 0).id.str().c_str());
  return o;
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome a7() {
  const fs::path dir = fs::temp_directory_path() / "netimpute_acceptance_a7";
  fs::remove_all(dir);
  const std::string cli = std::string("\"") + NETIMPUTE_CLI_PATH + "\"";
  const std::string quiet = " >/dev/null 2>&1";
  const auto t0 = Clock::now();
  int rc = shell(cli + " synth --edges 200 --fraction 0.15 --days 7 --seed 11 -o \"" + (dir / "data").string() + "\"" +
                 quiet);
  const std::string run = cli + " run -c \"" + (dir / "data" / "config.json").string() + "\" -k 5 -o ";
  if (rc == 0) rc = shell(run + "\"" + (dir / "a").string() + "\"" + quiet);
  if (rc == 0) rc = shell(run + "\"" + (dir / "b").string() + "\"" + quiet);
  std::size_t compared = 0, differing = 0;
  if (rc == 0) {
    for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
      if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
      const fs::path rel = fs::relative(entry.path(), dir / "a");
      ++compared;
      if (!fs::exists(dir / "b" / rel) || io::read_file(entry.path()) != io::read_file(dir / "b" / rel)) ++differing;
    }
  }
  const double secs = seconds_since(t0);
  fs::remove_all(dir);
  Outcome o;
  o.pass = rc == 0 && compared >= 8 && differing == 0;
  o.detail = fmt("exit=%d csv_files=%zu differing=%zu time=%.2fs", rc, compared, differing, secs);
  return o;
}

Outcome a8() {
  double worst = 0.0;
  std::size_t cases = 0, missing = 0;
  auto compare = [&](const RoadNetwork& net, const StateTable& states, const ImputeConfig& cfg) {
    StateTable scaled = states;
    for (EdgeState& s : scaled) *s.weight *= 1000.0;
    const ImputeResult a = run_imputation(net, states, cfg);
    const ImputeResult b = run_imputation(net, scaled, cfg);
    ++cases;
    for (EdgeIndex e = 0; e < states.size(); ++e) {
      const EdgeState &x = a.states[e], &y = b.states[e];
      if (x.volume.has_value() != y.volume.has_value() || x.class_share.has_value() != y.class_share.has_value()) {
        ++missing;
        continue;
      }
      if (x.volume) worst = std::max(worst, rel_err(*x.volume, *y.volume));
      if (x.class_share)
        for (std::size_t c = 0; c < kNumClasses; ++c)
          worst = std::max(worst, rel_err(x.class_share->values()[c], y.class_share->values()[c]));
    }
  };
  ImputeConfig cfg;
  compare(make_grid(GridSpec{}).network, make_grid(GridSpec{}).states, cfg);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RandomFixture fx = make_random_fixture(300, 0.1, seed);
    compare(fx.network, fx.states, cfg);
  }
  Outcome o;
  o.pass = missing == 0 && worst <= 1e-12;
  o.detail = fmt("cases=%zu worst_rel_change=%.3g", cases, worst);
  return o;
}

}  // namespace

int main() {
  A5Tally tally;
  std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"A1", [&] { return a1(tally); }},
      {"A2", [&] { return a2(tally); }},
      {"A3", [&] { return a3(tally); }},
      {"A4", a4},
      {"A5", [&] { return a5(tally); }},
      {"A6", a6},
      {"A7", a7},
      {"A8", a8},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s %s\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
