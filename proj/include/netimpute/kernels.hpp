#pragma once

// Sweep kernels behind run_imputation. The in-place sweep is sequential by
// contract; the synchronous sweep has a serial reference and an OpenMP
// version that must agree bit for bit.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "netimpute/network.hpp"

namespace netimpute::kernels {

inline constexpr std::size_t kMaxDim = 16;

enum class Junction : std::uint8_t { Ordinary, Merge, Diverge };

/// Merge: two or more upstream links and exactly one downstream link.
/// Diverge: exactly one upstream link and two or more downstream links.
Junction classify_junction(const RoadNetwork& net, EdgeIndex e);
std::vector<Junction> classify_junctions(const RoadNetwork& net);

enum class Readiness { Ready, NoValuedNeighbor, Deferred };

Readiness readiness(const RoadNetwork& net, EdgeIndex e, Junction junction, std::span<const std::uint8_t> valued,
                    bool deferral_waived);

/// Weighted mean of the valued neighbours' payloads (dim values per edge).
/// Falls back to the unweighted mean when the valued weights sum to zero.
/// With simplex set, the result is renormalized if its sum drifts by more
/// than 1e-12. Returns false when no neighbour is valued.
bool weighted_average(std::span<const EdgeIndex> neighbors, std::span<const double> weights,
                      std::span<const double> values, std::span<const std::uint8_t> valued, std::size_t dim,
                      bool simplex, std::span<double> out);

/// One payload channel, edge-major (dim values per edge).
struct ChannelView {
  std::size_t dim = 1;
  bool simplex = false;
  std::span<double> values;
  std::span<std::uint8_t> valued;
  std::span<const std::uint8_t> pinned;
};

struct SweepStats {
  double max_delta = 0.0;        // over edges valued before and after the sweep
  std::size_t newly_valued = 0;
  std::size_t deferred = 0;      // had a valued neighbour but waited on a junction rule
};

/// Gauss-Seidel sweep in ascending EdgeIndex order; later edges see values
/// written earlier in the same sweep. Throws NumericalError on a non-finite
/// update.
SweepStats sweep_in_place(const RoadNetwork& net, std::span<const Junction> junctions,
                          std::span<const double> weights, ChannelView channel, bool deferral_waived);

/// Jacobi sweep: every edge reads prev_* and writes next. next must start as
/// a copy of prev.
SweepStats sweep_synchronous_serial(const RoadNetwork& net, std::span<const Junction> junctions,
                                    std::span<const double> weights, std::span<const double> prev_values,
                                    std::span<const std::uint8_t> prev_valued, ChannelView next,
                                    bool deferral_waived);

SweepStats sweep_synchronous_omp(const RoadNetwork& net, std::span<const Junction> junctions,
                                 std::span<const double> weights, std::span<const double> prev_values,
                                 std::span<const std::uint8_t> prev_valued, ChannelView next,
                                 bool deferral_waived);

}  // namespace netimpute::kernels
