// Command-line driver: match, aggregate, impute, evaluate, export, run,
// grid-demo, synth.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "netimpute/error.hpp"
#include "netimpute/pipeline.hpp"
#include "netimpute/version.hpp"

namespace ni = netimpute;

namespace {

// Flags that override values from the config file.
struct Overrides {
  std::string config;
  std::optional<std::string> network, dense, stations, hourly, output_dir;
  std::optional<int> max_epochs, deferral_grace;
  std::optional<double> tolerance, buffer_m, bearing_tol, station_bearing_tol, snap_max_m;
  std::optional<std::string> payload, scheme;
  bool serial = false;
  std::vector<std::string> windows;
  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  bool dump = false;
};

void add_impute_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--max-epochs", o.max_epochs, "Epoch cap K");
  cmd->add_option("--tolerance", o.tolerance, "Convergence tolerance on the largest per-edge change");
  cmd->add_option("--deferral-grace", o.deferral_grace, "Stalled epochs before merge/diverge deferral is waived");
  cmd->add_option("--payload", o.payload, "volume, class_share or both");
  cmd->add_option("--scheme", o.scheme, "in_place or synchronous");
  cmd->add_flag("--serial", o.serial, "Run synchronous sweeps and CV folds on one thread");
}

void add_pipeline_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Pipeline config (JSON)");
  cmd->add_option("--network", o.network, "Road network (GeoJSON or CSV)");
  cmd->add_option("--dense", o.dense, "Dense network CSV with AADT");
  cmd->add_option("--stations", o.stations, "Station CSV");
  cmd->add_option("--hourly", o.hourly, "Hourly per-class records CSV");
  cmd->add_option("-o,--output-dir", o.output_dir, "Output directory");
  cmd->add_option("--buffer-m", o.buffer_m, "Weight transfer buffer radius (m)");
  cmd->add_option("--bearing-tol", o.bearing_tol, "Weight transfer bearing tolerance (deg)");
  cmd->add_option("--station-bearing-tol", o.station_bearing_tol, "Station snap bearing tolerance (deg)");
  cmd->add_option("--snap-max-m", o.snap_max_m, "Station snap distance cap (m)");
  cmd->add_option("--window", o.windows, "Aggregation window day:hour:month (repeatable; replaces the config list)");
  cmd->add_option("-k,--folds", o.k, "Cross-validation folds");
  cmd->add_option("--seed", o.seed, "Fold shuffling seed");
  cmd->add_flag("--config-dump", o.dump, "Print the effective config and exit");
  add_impute_flags(cmd, o);
}

void apply_impute(const Overrides& o, ni::ImputeConfig& c) {
  if (o.max_epochs) c.max_epochs = *o.max_epochs;
  if (o.tolerance) c.tolerance = *o.tolerance;
  if (o.deferral_grace) c.deferral_grace = *o.deferral_grace;
  if (o.payload) c.payload = ni::parse_payload(*o.payload);
  if (o.scheme) c.scheme = ni::parse_update_scheme(*o.scheme);
  if (o.serial) c.parallel = false;
}

ni::PipelineConfig effective_config(const Overrides& o) {
  ni::PipelineConfig cfg = o.config.empty() ? ni::parse_config("{}", std::filesystem::current_path())
                                            : ni::load_config(o.config);
  if (o.network) cfg.network = *o.network;
  if (o.dense) cfg.dense = *o.dense;
  if (o.stations) cfg.stations = *o.stations;
  if (o.hourly) cfg.hourly = *o.hourly;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.buffer_m) cfg.match.buffer_radius_m = *o.buffer_m;
  if (o.bearing_tol) cfg.match.bearing_tolerance_deg = *o.bearing_tol;
  if (o.station_bearing_tol) cfg.match.station_bearing_tolerance_deg = *o.station_bearing_tol;
  if (o.snap_max_m) cfg.match.snap_max_distance_m = *o.snap_max_m;
  if (!o.windows.empty()) {
    cfg.windows.clear();
    for (const std::string& w : o.windows) cfg.windows.push_back(ni::AggregationWindow::parse(w));
  }
  if (o.k) cfg.cv.k = *o.k;
  if (o.seed) cfg.cv.seed = *o.seed;
  apply_impute(o, cfg.impute);
  cfg.validate();
  return cfg;
}

void report_match(const ni::MatchSummary& s) {
  std::cout << "match: " << s.n_weighted << "/" << s.n_edges << " edges weighted, "
            << s.n_stations - s.unmatched.size() << "/" << s.n_stations << " stations matched\n";
  for (const std::string& u : s.unmatched) std::cerr << "warning: unmatched station " << u << "\n";
}

void report_aggregate(const ni::AggregateSummary& s) {
  std::cout << "aggregate: " << s.n_records << " hourly records -> " << s.n_observations << " observations, "
            << s.n_omitted << " omitted\n";
  if (!s.ignored_columns.empty())
    std::cerr << "warning: ignored " << s.ignored_columns.size() << " class column(s) outside 5..13\n";
}

void report_impute(const ni::ImputeSummary& s) {
  for (const std::string& w : s.skipped) std::cerr << "warning: window " << w << " has no observations; skipped\n";
  for (const ni::WindowImputation& w : s.windows) {
    std::cout << "impute " << w.window << ": " << w.n_observed << " observations, " << w.result.epochs_run
              << " epochs, " << (w.result.converged ? "converged" : "NOT converged") << ", " << w.result.unset_count
              << " edges unreachable\n";
    for (const std::string& e : w.result.events) std::cerr << "note: " << w.window << ": " << e << "\n";
    if (w.weight_fallbacks > 0)
      std::cerr << "warning: " << w.weight_fallbacks << " edge weights fell back to the median input weight\n";
  }
}

void report_evaluate(const ni::EvaluateSummary& s) {
  std::cout << "evaluate: " << s.folds.k << " folds, seed " << s.folds.seed << ", " << s.report.n_masked
            << " masked predictions, " << s.report.n_missing << " missing\n";
  for (const ni::MetricCell& c : s.report.cells) {
    if (c.fold != "pooled" || c.region != "all" || c.vehicle_class != "all") continue;
    std::printf("  %-20s n=%-5zu", c.window.c_str(), c.n);
    if (c.r2) std::printf(" R2=%.6g", *c.r2);
    if (c.mae) std::printf(" MAE=%.6g", *c.mae);
    if (c.rmse) std::printf(" RMSE=%.6g", *c.rmse);
    if (c.cel) std::printf(" CEL=%.6g", *c.cel);
    std::printf("\n");
  }
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic volume and vehicle-class imputation on directed road networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("netimpute ") + ni::kVersion);

  Overrides o;
  auto* match = app.add_subcommand("match", "Transfer dense AADT onto edges and snap stations");
  auto* aggregate = app.add_subcommand("aggregate", "Aggregate hourly class records per window");
  auto* impute = app.add_subcommand("impute", "Impute volume and class shares per window");
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate the imputation");
  auto* exporter = app.add_subcommand("export", "Export the network with resolved weights");
  auto* run = app.add_subcommand("run", "match, aggregate, impute, evaluate and export in turn");
  for (auto* cmd : {match, aggregate, impute, evaluate, exporter, run}) add_pipeline_flags(cmd, o);

  ni::GridSpec grid;
  std::string grid_out = "grid_demo";
  auto* grid_demo = app.add_subcommand("grid-demo", "Corner-to-corner grid convergence demo");
  grid_demo->add_option("--rows", grid.rows, "Node rows");
  grid_demo->add_option("--cols", grid.cols, "Node columns");
  grid_demo->add_option("--source", grid.source_value, "Pinned value at the lower-left edge");
  grid_demo->add_option("--sink", grid.sink_value, "Pinned value at the upper-right edge");
  grid_demo->add_option("-o,--output-dir", grid_out, "Output directory");
  add_impute_flags(grid_demo, o);

  ni::SyntheticDatasetSpec synth;
  std::string synth_out = "synthetic";
  ni::ImputeConfig synth_impute;
  synth_impute.tolerance = 1e-10;
  synth_impute.max_epochs = 20000;
  synth_impute.deferral_grace = 50;
  auto* synth_cmd = app.add_subcommand("synth", "Write a model-consistent synthetic dataset and config");
  synth_cmd->add_option("--edges", synth.fixture.n_edges, "Number of directed edges");
  synth_cmd->add_option("--fraction", synth.fixture.observation_fraction, "Fraction of edges with stations");
  synth_cmd->add_option("--seed", synth.fixture.seed, "Generator seed");
  synth_cmd->add_option("--days", synth.days, "Days of hourly records");
  synth_cmd->add_option("--uncovered", synth.uncovered_fraction, "Fraction of roads missing from the dense network");
  synth_cmd->add_option("-o,--output-dir", synth_out, "Output directory");
  add_impute_flags(synth_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (grid_demo->parsed()) {
      ni::ImputeConfig cfg;
      apply_impute(o, cfg);
      const ni::GridDemoSummary s = ni::cmd_grid_demo(grid, cfg, grid_out);
      std::cout << "grid-demo: " << s.result.epochs_run << " epochs, "
                << (s.result.converged ? "converged" : "NOT converged") << ", wrote " << s.geojson.string() << "\n";
      for (const std::string& e : s.result.events) std::cerr << "note: " << e << "\n";
      return 0;
    }
    if (synth_cmd->parsed()) {
      apply_impute(o, synth_impute);
      ni::cmd_synth(synth, synth_impute, synth_out);
      std::cout << "synth: wrote dataset and " << (std::filesystem::path(synth_out) / "config.json").string() << "\n";
      return 0;
    }

    const ni::PipelineConfig cfg = effective_config(o);
    if (o.dump) {
      std::cout << ni::dump_config(cfg);
      return 0;
    }
    if (match->parsed() || run->parsed()) report_match(ni::cmd_match(cfg));
    if (aggregate->parsed() || run->parsed()) report_aggregate(ni::cmd_aggregate(cfg));
    if (impute->parsed() || run->parsed()) report_impute(ni::cmd_impute(cfg));
    if (evaluate->parsed() || run->parsed()) report_evaluate(ni::cmd_evaluate(cfg));
    if (exporter->parsed() || run->parsed()) {
      ni::cmd_export(cfg);
      std::cout << "export: wrote " << (cfg.output_dir / "export").string() << "\n";
    }
    return 0;
  } catch (const ni::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
