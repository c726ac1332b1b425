#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "netimpute/aggregate.hpp"
#include "netimpute/evaluate.hpp"
#include "netimpute/geomatch.hpp"
#include "netimpute/impute.hpp"
#include "netimpute/synth.hpp"

namespace netimpute {

struct CvSettings {
  std::size_t k = 10;
  std::uint64_t seed = 42;
  std::vector<std::string> pinned_stations;  // always pinned, never masked
};

struct PipelineConfig {
  std::filesystem::path network;
  std::filesystem::path dense;
  std::filesystem::path stations;
  std::filesystem::path hourly;
  std::filesystem::path output_dir = "out";
  MatchConfig match;
  ImputeConfig impute;
  std::vector<AggregationWindow> windows{AggregationWindow{}};
  CvSettings cv;

  void validate() const;
};

/// JSON config. Relative paths resolve against base_dir; unknown keys are
/// rejected. Values are checked by validate() (every cmd_* calls it), so
/// flag overrides can be applied in between.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
std::string dump_config(const PipelineConfig& cfg);

// Output locations under output_dir.
namespace paths {
std::filesystem::path weights(const PipelineConfig& cfg);
std::filesystem::path station_matches(const PipelineConfig& cfg);
std::filesystem::path observations(const PipelineConfig& cfg);
std::filesystem::path imputed_dir(const PipelineConfig& cfg);
std::string window_slug(const AggregationWindow& w);
}  // namespace paths

struct MatchSummary {
  std::size_t n_edges = 0;
  std::size_t n_weighted = 0;
  std::size_t n_stations = 0;
  std::vector<std::string> unmatched;  // "station_id direction: reason"
};
MatchSummary cmd_match(const PipelineConfig& cfg);

struct AggregateSummary {
  std::size_t n_records = 0;
  std::size_t n_observations = 0;
  std::size_t n_omitted = 0;
  std::vector<std::string> ignored_columns;
};
AggregateSummary cmd_aggregate(const PipelineConfig& cfg);

struct WindowImputation {
  std::string window;
  std::size_t n_observed = 0;
  ImputeResult result;
  std::size_t weight_fallbacks = 0;
};
struct ImputeSummary {
  std::vector<WindowImputation> windows;
  std::vector<std::string> skipped;  // windows without observations
};
ImputeSummary cmd_impute(const PipelineConfig& cfg);

struct EvaluateSummary {
  FoldAssignment folds;
  MetricsReport report;
};
EvaluateSummary cmd_evaluate(const PipelineConfig& cfg);

/// Writes the network in both formats with the resolved edge weights.
void cmd_export(const PipelineConfig& cfg);

struct GridDemoSummary {
  ImputeResult result;
  std::filesystem::path geojson;
};
GridDemoSummary cmd_grid_demo(const GridSpec& spec, const ImputeConfig& impute, const std::filesystem::path& out_dir);

/// Writes a synthetic dataset plus a config.json that runs the pipeline on it.
PipelineConfig cmd_synth(const SyntheticDatasetSpec& spec, const ImputeConfig& impute,
                         const std::filesystem::path& out_dir);

}  // namespace netimpute
