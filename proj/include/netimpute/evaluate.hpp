#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netimpute/error.hpp"
#include "netimpute/geomatch.hpp"
#include "netimpute/impute.hpp"
#include "netimpute/network.hpp"

namespace netimpute {

struct FoldAssignment {
  std::uint64_t seed = 0;
  std::size_t k = 10;
  std::map<std::string, std::size_t> fold_of;

  std::vector<std::size_t> sizes() const;
  std::vector<std::string> members(std::size_t fold) const;
};

/// Shuffles the distinct station ids with the seed and deals them round-robin
/// into k folds. Throws ValidationError when k < 2 or there are fewer
/// stations than folds.
FoldAssignment make_folds(std::span<const std::string> station_ids, std::size_t k, std::uint64_t seed);

class UndefinedMetricError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

double mae(std::span<const double> observed, std::span<const double> predicted);
double rmse(std::span<const double> observed, std::span<const double> predicted);
/// Squared Pearson correlation. Throws UndefinedMetricError when either
/// series has zero variance or N < 2.
double pearson_r2(std::span<const double> observed, std::span<const double> predicted);
/// -sum f(i) ln(max(g(i), 1e-12)) over classes 5..13; zero-mass f terms are
/// skipped. Throws ValidationError if either input is off the simplex by more
/// than 1e-6.
double cel(std::span<const double> f, std::span<const double> g);
double cel(const ClassShare& f, const ClassShare& g);
double entropy(std::span<const double> f);

inline constexpr double kCelFloor = 1e-12;

/// One station direction's aggregated value, already snapped to an edge.
struct CvObservation {
  std::string station_id;
  Direction direction = Direction::N;
  EdgeIndex edge = 0;
  double volume = 0.0;
  ClassShare share = ClassShare::uniform();
  std::string region = "unknown";
};

/// Pins each observed edge. Several stations on one edge combine into their
/// mean volume and volume-weighted class shares.
StateTable pin_observations(const StateTable& base, std::span<const CvObservation> observations);

struct CvPrediction {
  std::size_t fold = 0;
  std::string window;
  CvObservation observed;
  std::optional<double> volume;
  std::optional<ClassShare> share;
  bool missing() const { return !volume && !share; }
};

/// Metrics for one (fold, region, class, window) cell. fold is a fold index,
/// "pooled" (all masked predictions together) or "fold_mean" (mean of the
/// per-fold values). vehicle_class is "all" (total volume plus CEL) or
/// "05".."13" (per-class volume = share x total).
struct MetricCell {
  std::string fold;
  std::string region;
  std::string vehicle_class;
  std::string window;
  std::size_t n = 0;
  std::optional<double> mae;
  std::optional<double> rmse;
  std::optional<double> r2;
  std::optional<double> cel;
};

struct MetricsReport {
  std::vector<MetricCell> cells;
  std::vector<CvPrediction> predictions;
  std::size_t n_masked = 0;
  std::size_t n_missing = 0;

  bool empty() const { return n_masked == 0; }
  std::size_t n_scored() const { return n_masked - n_missing; }
  const MetricCell* find(const std::string& fold, const std::string& region, const std::string& vehicle_class,
                         const std::string& window) const;
  void append(const MetricsReport& other);
};

/// For each fold, masks that fold's stations, imputes from the remaining
/// ones plus whatever the base table already pins, and scores the masked
/// edges. base supplies weights for every edge. Predictions that stay unset
/// are counted as missing.
MetricsReport run_cross_validation(const RoadNetwork& net, const StateTable& base,
                                   std::span<const CvObservation> observations, const FoldAssignment& folds,
                                   const ImputeConfig& cfg, const std::string& window = "all:all:all",
                                   Execution exec = Execution::Parallel);

}  // namespace netimpute
