#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "netimpute/aggregate.hpp"
#include "netimpute/geomatch.hpp"
#include "netimpute/impute.hpp"
#include "netimpute/network.hpp"

namespace netimpute {

/// Directed grid: edges run right and up, from the lower-left corner to the
/// upper-right corner.
struct GridSpec {
  std::size_t rows = 10;  // node rows
  std::size_t cols = 10;  // node columns
  double source_value = 0.10;
  double sink_value = 1.00;
  double uniform_weight = 1.0;
  GeoPoint origin{-84.0, 35.0};
  double spacing_deg = 0.01;

  void validate() const;
};

struct GridFixture {
  RoadNetwork network;
  StateTable states;
  EdgeIndex source_edge = 0;  // rightward out-edge of the lower-left node
  EdgeIndex sink_edge = 0;    // rightward in-edge of the upper-right node
};

/// Pins the source and sink edges' volume to source_value and sink_value.
/// When both values lie in [0, 1] they also pin a class share with that
/// fraction in class 9 and the rest in class 5.
GridFixture make_grid(const GridSpec& spec);

struct OracleSolution {
  std::vector<std::optional<double>> volume;        // set for every participating edge
  std::vector<std::optional<ClassShare>> class_share;
  std::size_t unknowns = 0;
};

/// Solves the fixed point of the weighted-average update directly:
/// (I - P_uu) y_u = P_uo y_o with P the row-normalized neighbour weights.
/// Throws NumericalError when some unknown edge cannot reach an observation
/// (singular system) and ValidationError when the system is too large for a
/// dense solve (more than max_unknowns).
OracleSolution fixed_point_oracle(const RoadNetwork& net, const StateTable& states, Payload payload = Payload::Both,
                                  std::size_t max_unknowns = 4000);

struct RandomFixtureSpec {
  std::size_t n_edges = 200;
  double observation_fraction = 0.1;
  std::uint64_t seed = 1;
  double anchor_share = 0.25;  // fraction of observed edges that generate the truth
  GeoPoint origin{-90.0, 35.0};
  double spacing_deg = 0.05;
  double min_weight = 200.0;
  double max_weight = 5000.0;
};

struct EdgeTruth {
  double volume = 0.0;
  ClassShare share = ClassShare::uniform();
};

/// Random weakly connected network on a jittered lattice whose neighbour
/// relation is connected. Ground truth is the oracle fixed point driven by
/// the anchor edges, so every non-anchor edge satisfies the weighted-average
/// equation exactly. Anchors and stations are Observed; the rest are Unset.
struct RandomFixture {
  RoadNetwork network;
  StateTable states;
  std::vector<EdgeTruth> ground_truth;
  std::vector<EdgeIndex> anchors;
  std::vector<EdgeIndex> stations;
  std::vector<EdgeIndex> hidden;
};

RandomFixture make_random_fixture(const RandomFixtureSpec& spec);
RandomFixture make_random_fixture(std::size_t n_edges, double observation_fraction, std::uint64_t seed);

/// Every input file of the pipeline, generated from a random fixture.
struct SyntheticDataset {
  RandomFixture fixture;
  std::vector<DenseSegment> dense;
  std::vector<Station> stations;
  std::vector<HourlyClassRecord> records;
  std::vector<std::string> pinned_stations;  // anchor stations, never masked
  std::vector<EdgeIndex> uncovered;          // edges the dense network misses
};

struct SyntheticDatasetSpec {
  RandomFixtureSpec fixture;
  double uncovered_fraction = 0.05;
  int days = 14;
};

/// The truth is recomputed with the weights the pipeline will derive (dense
/// transfer plus impute_missing_weights under cfg), so evaluation on this
/// dataset is model-consistent.
SyntheticDataset make_synthetic_dataset(const SyntheticDatasetSpec& spec, const ImputeConfig& cfg);

}  // namespace netimpute
