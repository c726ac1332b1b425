#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netimpute/network.hpp"

namespace netimpute {

enum class Payload { Volume, ClassShare, Both };
enum class UpdateScheme { InPlace, Synchronous };

const char* to_string(Payload p);
Payload parse_payload(const std::string& s);
const char* to_string(UpdateScheme s);
UpdateScheme parse_update_scheme(const std::string& s);

struct ImputeConfig {
  int max_epochs = 500;
  double tolerance = 1e-6;   // max absolute per-edge change
  int deferral_grace = 50;   // stalled epochs before junction deferral is waived
  Payload payload = Payload::Both;
  UpdateScheme scheme = UpdateScheme::InPlace;
  bool parallel = true;      // synchronous scheme only

  void validate() const;
};

struct EpochTrace {
  int epoch = 0;
  double max_delta = 0.0;
  std::size_t newly_valued = 0;
  std::size_t deferred = 0;
};

struct ImputeResult {
  StateTable states;
  int epochs_run = 0;
  bool converged = false;
  std::vector<EpochTrace> trace;
  std::size_t unset_count = 0;       // non-observed edges no observation reaches
  std::optional<int> waiver_epoch;   // first epoch at which deferral was waived
  std::vector<std::string> events;
};

enum class Channel { Volume, ClassShare, Weight };
const char* to_string(Channel c);

/// State of one payload channel after an epoch, for tests and diagnostics.
struct EpochSnapshot {
  Channel channel;
  int epoch;
  std::size_t dim;
  std::span<const double> values;
  std::span<const std::uint8_t> valued;
};

using EpochObserver = std::function<void(const EpochSnapshot&)>;

/// Weighted average of the valued neighbours' volumes. Throws ValidationError
/// when no neighbour has a volume.
double impute_edge_volume(const RoadNetwork& net, EdgeIndex e, const StateTable& states);
ClassShare impute_edge_share(const RoadNetwork& net, EdgeIndex e, const StateTable& states);

/// Whether e may be updated given the current state of one channel (Volume or
/// ClassShare). Merge edges wait for every upstream link, diverge edges for
/// every downstream link, unless deferral has been waived.
bool valid_to_impute(const RoadNetwork& net, EdgeIndex e, const StateTable& states, Payload channel,
                     bool deferral_waived = false);

/// Iterates the weighted-average update over all non-observed edges until the
/// largest change is within tolerance (and nothing is still deferred or newly
/// valued) or max_epochs is reached. Every edge needs a weight.
ImputeResult run_imputation(const RoadNetwork& net, const StateTable& states, const ImputeConfig& cfg,
                            const EpochObserver& observer = {});

enum class WeightSource { Input, Imputed, Fallback };
const char* to_string(WeightSource s);

struct WeightImputation {
  StateTable states;
  std::vector<WeightSource> source;
  int epochs_run = 0;
  bool converged = true;
  std::vector<EpochTrace> trace;
  std::size_t fallback_count = 0;
  double fallback_weight = 0.0;
};

/// Fills missing weights with the same propagation, neighbours weighted
/// uniformly. Edges no weighted edge reaches get the median input weight.
WeightImputation impute_missing_weights(const RoadNetwork& net, const StateTable& states, const ImputeConfig& cfg,
                                        const EpochObserver& observer = {});

}  // namespace netimpute
