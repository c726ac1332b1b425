// Serial reference vs OpenMP: synchronous imputation sweep and dense weight
// transfer, on square grids of increasing size.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "netimpute/geomatch.hpp"
#include "netimpute/kernels.hpp"
#include "netimpute/synth.hpp"

using namespace netimpute;

namespace {

struct SweepSetup {
  GridFixture grid;
  std::vector<kernels::Junction> junctions;
  std::vector<double> weights;
  std::vector<double> values;
  std::vector<std::uint8_t> valued;
  std::vector<std::uint8_t> pinned;

  explicit SweepSetup(std::size_t side) {
    GridSpec spec;
    spec.rows = spec.cols = side;
    grid = make_grid(spec);
    const std::size_t n = grid.network.edge_count();
    junctions = kernels::classify_junctions(grid.network);
    weights.assign(n, 1.0);
    values.resize(n);
    valued.assign(n, 1);
    pinned.assign(n, 0);
    for (EdgeIndex e = 0; e < n; ++e) {
      values[e] = 0.1 + 0.9 * static_cast<double>(e % 97) / 97.0;
      weights[e] = 100.0 + static_cast<double>(e % 13);
      if (grid.states[e].status == EdgeStatus::Observed) pinned[e] = 1;
    }
  }
};

template <bool Parallel>
void BM_SynchronousSweep(benchmark::State& state) {
  const SweepSetup s(static_cast<std::size_t>(state.range(0)));
  std::vector<double> next = s.values;
  std::vector<std::uint8_t> next_valued = s.valued;
  const kernels::ChannelView view{1, false, next, next_valued, s.pinned};
  for (auto _ : state) {
    std::copy(s.values.begin(), s.values.end(), next.begin());
    const kernels::SweepStats st =
        Parallel ? kernels::sweep_synchronous_omp(s.grid.network, s.junctions, s.weights, s.values, s.valued, view,
                                                  false)
                 : kernels::sweep_synchronous_serial(s.grid.network, s.junctions, s.weights, s.values, s.valued,
                                                     view, false);
    benchmark::DoNotOptimize(st.max_delta);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.values.size()));
  state.counters["threads"] = Parallel ? omp_get_max_threads() : 1;
}

template <Execution Exec>
void BM_TransferWeights(benchmark::State& state) {
  GridSpec spec;
  spec.rows = spec.cols = static_cast<std::size_t>(state.range(0));
  const GridFixture g = make_grid(spec);
  std::vector<DenseSegment> dense;
  for (const Edge& e : g.network.edges()) dense.push_back({e.id.str(), 1000.0, false, e.geometry});
  const std::vector<DirectedSegment> segments = directionalize_and_halve(dense);
  const MatchConfig cfg;
  for (auto _ : state) {
    auto m = transfer_weights(g.network, segments, cfg, Exec);
    benchmark::DoNotOptimize(m.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.network.edge_count()));
}

}  // namespace

BENCHMARK(BM_SynchronousSweep<false>)->Name("sync_sweep/serial")->Arg(50)->Arg(150)->Arg(300);
BENCHMARK(BM_SynchronousSweep<true>)->Name("sync_sweep/omp")->Arg(50)->Arg(150)->Arg(300);
BENCHMARK(BM_TransferWeights<Execution::Serial>)->Name("transfer_weights/serial")->Arg(20)->Arg(60);
BENCHMARK(BM_TransferWeights<Execution::Parallel>)->Name("transfer_weights/omp")->Arg(20)->Arg(60);

BENCHMARK_MAIN();
