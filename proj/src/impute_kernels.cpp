#include "netimpute/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <string>

#include "netimpute/error.hpp"

namespace netimpute::kernels {
namespace {

[[noreturn]] void throw_non_finite(const RoadNetwork& net, EdgeIndex e) {
  throw NumericalError("non-finite value produced at edge '" + net.edge(e).id.str() + "'");
}

// Shared body of both synchronous kernels for one edge. Returns the change
// kind: 0 untouched, 1 updated, 2 newly valued, 3 deferred.
int update_from_previous(const RoadNetwork& net, EdgeIndex e, Junction junction, std::span<const double> weights,
                         std::span<const double> prev_values, std::span<const std::uint8_t> prev_valued,
                         ChannelView next, bool waived, double& delta) {
  delta = 0.0;
  if (next.pinned[e]) return 0;
  const Readiness r = readiness(net, e, junction, prev_valued, waived);
  if (r == Readiness::Deferred) return 3;
  if (r == Readiness::NoValuedNeighbor) return 0;
  const std::size_t dim = next.dim;
  std::array<double, kMaxDim> tmp{};
  weighted_average(net.neighbor_edges(e), weights, prev_values, prev_valued, dim, next.simplex,
                   std::span<double>(tmp.data(), dim));
  for (std::size_t k = 0; k < dim; ++k)
    if (!std::isfinite(tmp[k])) throw_non_finite(net, e);
  double* slot = next.values.data() + e * dim;
  const bool was_valued = prev_valued[e] != 0;
  if (was_valued)
    for (std::size_t k = 0; k < dim; ++k) delta = std::max(delta, std::abs(tmp[k] - prev_values[e * dim + k]));
  std::copy_n(tmp.data(), dim, slot);
  next.valued[e] = 1;
  return was_valued ? 1 : 2;
}

}  // namespace

Junction classify_junction(const RoadNetwork& net, EdgeIndex e) {
  const std::size_t up = net.upstream(e).size();
  const std::size_t down = net.downstream(e).size();
  if (up >= 2 && down == 1) return Junction::Merge;
  if (up == 1 && down >= 2) return Junction::Diverge;
  return Junction::Ordinary;
}

std::vector<Junction> classify_junctions(const RoadNetwork& net) {
  std::vector<Junction> out(net.edge_count());
  for (EdgeIndex e = 0; e < out.size(); ++e) out[e] = classify_junction(net, e);
  return out;
}

Readiness readiness(const RoadNetwork& net, EdgeIndex e, Junction junction, std::span<const std::uint8_t> valued,
                    bool deferral_waived) {
  const auto nbrs = net.neighbor_edges(e);
  if (std::none_of(nbrs.begin(), nbrs.end(), [&](EdgeIndex f) { return valued[f] != 0; }))
    return Readiness::NoValuedNeighbor;
  if (deferral_waived || junction == Junction::Ordinary) return Readiness::Ready;
  const auto waiting_on = junction == Junction::Merge ? net.upstream(e) : net.downstream(e);
  for (EdgeIndex f : waiting_on)
    if (!valued[f]) return Readiness::Deferred;
  return Readiness::Ready;
}

bool weighted_average(std::span<const EdgeIndex> neighbors, std::span<const double> weights,
                      std::span<const double> values, std::span<const std::uint8_t> valued, std::size_t dim,
                      bool simplex, std::span<double> out) {
  std::array<double, kMaxDim> weighted{};
  std::array<double, kMaxDim> plain{};
  double weight_sum = 0.0;
  std::size_t count = 0;
  for (EdgeIndex f : neighbors) {
    if (!valued[f]) continue;
    const double w = weights[f];
    const double* y = values.data() + f * dim;
    for (std::size_t k = 0; k < dim; ++k) {
      weighted[k] += w * y[k];
      plain[k] += y[k];
    }
    weight_sum += w;
    ++count;
  }
  if (count == 0) return false;
  if (weight_sum > 0.0) {
    for (std::size_t k = 0; k < dim; ++k) out[k] = weighted[k] / weight_sum;
  } else {
    for (std::size_t k = 0; k < dim; ++k) out[k] = plain[k] / static_cast<double>(count);
  }
  if (simplex) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += out[k];
    if (std::abs(s - 1.0) > 1e-12 && s > 0.0)
      for (std::size_t k = 0; k < dim; ++k) out[k] /= s;
  }
  return true;
}

SweepStats sweep_in_place(const RoadNetwork& net, std::span<const Junction> junctions,
                          std::span<const double> weights, ChannelView channel, bool deferral_waived) {
  SweepStats stats;
  const std::size_t dim = channel.dim;
  std::array<double, kMaxDim> tmp{};
  for (EdgeIndex e = 0; e < net.edge_count(); ++e) {
    if (channel.pinned[e]) continue;
    const Readiness r = readiness(net, e, junctions[e], channel.valued, deferral_waived);
    if (r == Readiness::Deferred) {
      ++stats.deferred;
      continue;
    }
    if (r == Readiness::NoValuedNeighbor) continue;
    weighted_average(net.neighbor_edges(e), weights, channel.values, channel.valued, dim, channel.simplex,
                     std::span<double>(tmp.data(), dim));
    for (std::size_t k = 0; k < dim; ++k)
      if (!std::isfinite(tmp[k])) throw_non_finite(net, e);
    double* slot = channel.values.data() + e * dim;
    if (channel.valued[e]) {
      for (std::size_t k = 0; k < dim; ++k) stats.max_delta = std::max(stats.max_delta, std::abs(tmp[k] - slot[k]));
    } else {
      ++stats.newly_valued;
      channel.valued[e] = 1;
    }
    std::copy_n(tmp.data(), dim, slot);
  }
  return stats;
}

SweepStats sweep_synchronous_serial(const RoadNetwork& net, std::span<const Junction> junctions,
                                    std::span<const double> weights, std::span<const double> prev_values,
                                    std::span<const std::uint8_t> prev_valued, ChannelView next,
                                    bool deferral_waived) {
  SweepStats stats;
  for (EdgeIndex e = 0; e < net.edge_count(); ++e) {
    double delta = 0.0;
    const int kind =
        update_from_previous(net, e, junctions[e], weights, prev_values, prev_valued, next, deferral_waived, delta);
    stats.max_delta = std::max(stats.max_delta, delta);
    if (kind == 2) ++stats.newly_valued;
    if (kind == 3) ++stats.deferred;
  }
  return stats;
}

SweepStats sweep_synchronous_omp(const RoadNetwork& net, std::span<const Junction> junctions,
                                 std::span<const double> weights, std::span<const double> prev_values,
                                 std::span<const std::uint8_t> prev_valued, ChannelView next,
                                 bool deferral_waived) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(net.edge_count());
  double max_delta = 0.0;
  std::size_t newly = 0;
  std::size_t deferred = 0;
  std::exception_ptr failure;
#pragma omp parallel for schedule(static) reduction(max : max_delta) reduction(+ : newly, deferred)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      double delta = 0.0;
      const auto e = static_cast<EdgeIndex>(i);
      const int kind =
          update_from_previous(net, e, junctions[e], weights, prev_values, prev_valued, next, deferral_waived, delta);
      max_delta = std::max(max_delta, delta);
      if (kind == 2) ++newly;
      if (kind == 3) ++deferred;
    } catch (...) {
#pragma omp critical(netimpute_sweep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return {max_delta, newly, deferred};
}

}  // namespace netimpute::kernels
