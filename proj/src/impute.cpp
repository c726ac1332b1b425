#include "netimpute/impute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netimpute/error.hpp"
#include "netimpute/geomatch.hpp"
#include "netimpute/kernels.hpp"

namespace netimpute {
namespace {

using kernels::ChannelView;
using kernels::Junction;

struct ChannelData {
  Channel kind = Channel::Volume;
  std::size_t dim = 1;
  bool simplex = false;
  std::vector<double> values;
  std::vector<std::uint8_t> valued;
  std::vector<std::uint8_t> pinned;

  ChannelView view() { return {dim, simplex, values, valued, pinned}; }
};

struct ChannelRun {
  int epochs = 0;
  bool converged = false;
  std::vector<EpochTrace> trace;
  std::optional<int> waiver_epoch;
  std::vector<std::string> events;
};

ChannelRun run_channel(const RoadNetwork& net, std::span<const Junction> junctions, std::span<const double> weights,
                       ChannelData& ch, const ImputeConfig& cfg, const EpochObserver& observer) {
  ChannelRun run;
  bool waived = false;
  int stalled = 0;
  std::vector<double> prev_values;
  std::vector<std::uint8_t> prev_valued;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    kernels::SweepStats s;
    if (cfg.scheme == UpdateScheme::InPlace) {
      s = kernels::sweep_in_place(net, junctions, weights, ch.view(), waived);
    } else {
      prev_values = ch.values;
      prev_valued = ch.valued;
      s = cfg.parallel
              ? kernels::sweep_synchronous_omp(net, junctions, weights, prev_values, prev_valued, ch.view(), waived)
              : kernels::sweep_synchronous_serial(net, junctions, weights, prev_values, prev_valued, ch.view(), waived);
    }
    run.trace.push_back({epoch, s.max_delta, s.newly_valued, s.deferred});
    run.epochs = epoch;
    if (observer) observer(EpochSnapshot{ch.kind, epoch, ch.dim, ch.values, ch.valued});

    stalled = s.newly_valued == 0 ? stalled + 1 : 0;
    if (s.deferred > 0 && !waived && stalled >= cfg.deferral_grace) {
      waived = true;
      run.waiver_epoch = epoch;
      run.events.push_back(std::string(to_string(ch.kind)) + ": junction deferral waived at epoch " +
                           std::to_string(epoch) + " (" + std::to_string(s.deferred) + " edges deferred, no progress for " +
                           std::to_string(stalled) + " epochs)");
      continue;
    }
    if (s.newly_valued == 0 && s.deferred == 0 && s.max_delta <= cfg.tolerance) {
      run.converged = true;
      break;
    }
  }
  return run;
}

void merge_run(ImputeResult& result, const ChannelRun& run) {
  for (const EpochTrace& t : run.trace) {
    if (static_cast<std::size_t>(t.epoch) > result.trace.size()) result.trace.push_back({t.epoch, 0.0, 0, 0});
    EpochTrace& merged = result.trace[t.epoch - 1];
    merged.max_delta = std::max(merged.max_delta, t.max_delta);
    merged.newly_valued += t.newly_valued;
    merged.deferred += t.deferred;
  }
  result.epochs_run = std::max(result.epochs_run, run.epochs);
  if (run.waiver_epoch && (!result.waiver_epoch || *run.waiver_epoch < *result.waiver_epoch))
    result.waiver_epoch = run.waiver_epoch;
  result.events.insert(result.events.end(), run.events.begin(), run.events.end());
}

std::vector<double> resolved_weights(const RoadNetwork& net, const StateTable& states) {
  std::vector<double> w(states.size());
  for (EdgeIndex e = 0; e < states.size(); ++e) {
    if (!states[e].weight)
      throw ValidationError("edge '" + net.edge(e).id.str() + "' has no weight; run impute_missing_weights first");
    w[e] = *states[e].weight;
  }
  return w;
}

ChannelData volume_channel(const StateTable& states) {
  ChannelData ch;
  ch.kind = Channel::Volume;
  ch.values.assign(states.size(), 0.0);
  ch.valued.assign(states.size(), 0);
  ch.pinned.assign(states.size(), 0);
  for (EdgeIndex e = 0; e < states.size(); ++e) {
    if (states[e].status != EdgeStatus::Observed) continue;
    ch.pinned[e] = 1;
    if (states[e].volume) {
      ch.values[e] = *states[e].volume;
      ch.valued[e] = 1;
    }
  }
  return ch;
}

ChannelData share_channel(const StateTable& states) {
  ChannelData ch;
  ch.kind = Channel::ClassShare;
  ch.dim = kNumClasses;
  ch.simplex = true;
  ch.values.assign(states.size() * kNumClasses, 0.0);
  ch.valued.assign(states.size(), 0);
  ch.pinned.assign(states.size(), 0);
  for (EdgeIndex e = 0; e < states.size(); ++e) {
    if (states[e].status != EdgeStatus::Observed) continue;
    ch.pinned[e] = 1;
    if (states[e].class_share) {
      std::copy_n(states[e].class_share->values().begin(), kNumClasses, ch.values.begin() + e * kNumClasses);
      ch.valued[e] = 1;
    }
  }
  return ch;
}

// Gathers one edge's neighbourhood into compact arrays for weighted_average.
template <typename Get>
bool neighbourhood_average(const RoadNetwork& net, EdgeIndex e, const StateTable& states, std::size_t dim, bool simplex,
                           Get get, std::span<double> out) {
  const auto nbrs = net.neighbor_edges(e);
  std::vector<EdgeIndex> local(nbrs.size());
  std::iota(local.begin(), local.end(), EdgeIndex{0});
  std::vector<double> w(nbrs.size()), values(nbrs.size() * dim, 0.0);
  std::vector<std::uint8_t> valued(nbrs.size(), 0);
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    const EdgeState& s = states.at(nbrs[i]);
    if (!get(s, values.data() + i * dim)) continue;
    if (!s.weight)
      throw ValidationError("edge '" + net.edge(nbrs[i]).id.str() + "' has no weight; run impute_missing_weights first");
    w[i] = *s.weight;
    valued[i] = 1;
  }
  return kernels::weighted_average(local, w, values, valued, dim, simplex, out);
}

}  // namespace

const char* to_string(Payload p) {
  switch (p) {
    case Payload::Volume: return "volume";
    case Payload::ClassShare: return "class_share";
    case Payload::Both: break;
  }
  return "both";
}

Payload parse_payload(const std::string& s) {
  if (s == "volume") return Payload::Volume;
  if (s == "class_share") return Payload::ClassShare;
  if (s == "both") return Payload::Both;
  throw ValidationError("unknown payload '" + s + "' (volume, class_share, both)");
}

const char* to_string(UpdateScheme s) { return s == UpdateScheme::InPlace ? "in_place" : "synchronous"; }

UpdateScheme parse_update_scheme(const std::string& s) {
  if (s == "in_place") return UpdateScheme::InPlace;
  if (s == "synchronous") return UpdateScheme::Synchronous;
  throw ValidationError("unknown update scheme '" + s + "' (in_place, synchronous)");
}

const char* to_string(Channel c) {
  switch (c) {
    case Channel::Volume: return "volume";
    case Channel::ClassShare: return "class_share";
    case Channel::Weight: break;
  }
  return "weight";
}

const char* to_string(WeightSource s) {
  switch (s) {
    case WeightSource::Input: return "input";
    case WeightSource::Imputed: return "imputed";
    case WeightSource::Fallback: break;
  }
  return "fallback";
}

void ImputeConfig::validate() const {
  if (max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) throw ValidationError("tolerance must be positive");
  if (deferral_grace < 0 || deferral_grace > max_epochs)
    throw ValidationError("deferral_grace must be in [0, max_epochs]");
}

double impute_edge_volume(const RoadNetwork& net, EdgeIndex e, const StateTable& states) {
  double out = 0.0;
  const bool ok = neighbourhood_average(
      net, e, states, 1, false,
      [](const EdgeState& s, double* dst) {
        if (!s.volume) return false;
        *dst = *s.volume;
        return true;
      },
      std::span<double>(&out, 1));
  if (!ok) throw ValidationError("edge '" + net.edge(e).id.str() + "' has no valued neighbour");
  return out;
}

ClassShare impute_edge_share(const RoadNetwork& net, EdgeIndex e, const StateTable& states) {
  ClassShare::Vector out{};
  const bool ok = neighbourhood_average(
      net, e, states, kNumClasses, true,
      [](const EdgeState& s, double* dst) {
        if (!s.class_share) return false;
        std::copy_n(s.class_share->values().begin(), kNumClasses, dst);
        return true;
      },
      out);
  if (!ok) throw ValidationError("edge '" + net.edge(e).id.str() + "' has no valued neighbour");
  return ClassShare::from_masses(out);
}

bool valid_to_impute(const RoadNetwork& net, EdgeIndex e, const StateTable& states, Payload channel,
                     bool deferral_waived) {
  if (channel == Payload::Both) throw ValidationError("valid_to_impute checks one channel at a time");
  std::vector<std::uint8_t> valued(states.size(), 0);
  for (EdgeIndex f = 0; f < states.size(); ++f)
    valued[f] = channel == Payload::Volume ? states[f].volume.has_value() : states[f].class_share.has_value();
  return kernels::readiness(net, e, kernels::classify_junction(net, e), valued, deferral_waived) ==
         kernels::Readiness::Ready;
}

ImputeResult run_imputation(const RoadNetwork& net, const StateTable& states, const ImputeConfig& cfg,
                            const EpochObserver& observer) {
  cfg.validate();
  validate_states(net, states);
  const std::vector<double> weights = resolved_weights(net, states);
  const std::vector<Junction> junctions = kernels::classify_junctions(net);

  ImputeResult result;
  result.states = states;
  std::vector<std::uint8_t> reached(states.size(), 0);
  bool all_converged = true;

  auto run = [&](ChannelData ch, const char* what) {
    if (std::none_of(ch.valued.begin(), ch.valued.end(), [](std::uint8_t v) { return v != 0; }))
      throw ValidationError(std::string("no observed edges carry a ") + what);
    const ChannelRun r = run_channel(net, junctions, weights, ch, cfg, observer);
    merge_run(result, r);
    all_converged = all_converged && r.converged;
    for (EdgeIndex e = 0; e < states.size(); ++e) {
      if (ch.pinned[e]) continue;
      EdgeState& s = result.states[e];
      if (ch.valued[e]) reached[e] = 1;
      if (ch.kind == Channel::Volume) {
        s.volume = ch.valued[e] ? std::optional<double>(ch.values[e]) : std::nullopt;
      } else {
        s.class_share = ch.valued[e] ? std::optional<ClassShare>(ClassShare::from_masses(std::span<const double>(
                                           ch.values.data() + e * kNumClasses, kNumClasses)))
                                     : std::nullopt;
      }
    }
  };

  if (cfg.payload != Payload::ClassShare) run(volume_channel(states), "volume");
  if (cfg.payload != Payload::Volume) run(share_channel(states), "class share");

  result.converged = all_converged;
  for (EdgeIndex e = 0; e < states.size(); ++e) {
    EdgeState& s = result.states[e];
    if (s.status == EdgeStatus::Observed) continue;
    s.status = reached[e] ? EdgeStatus::Imputed : EdgeStatus::Unset;
    if (!reached[e]) ++result.unset_count;
  }
  return result;
}

WeightImputation impute_missing_weights(const RoadNetwork& net, const StateTable& states, const ImputeConfig& cfg,
                                        const EpochObserver& observer) {
  cfg.validate();
  validate_states(net, states);
  WeightImputation out;
  out.states = states;
  out.source.assign(states.size(), WeightSource::Input);

  ChannelData ch;
  ch.kind = Channel::Weight;
  ch.values.assign(states.size(), 0.0);
  ch.valued.assign(states.size(), 0);
  ch.pinned.assign(states.size(), 0);
  std::vector<double> known;
  for (EdgeIndex e = 0; e < states.size(); ++e) {
    if (!states[e].weight) continue;
    ch.values[e] = *states[e].weight;
    ch.valued[e] = ch.pinned[e] = 1;
    known.push_back(*states[e].weight);
  }
  if (known.empty()) throw ValidationError("no edge carries a weight");
  if (known.size() == states.size()) return out;

  const std::vector<double> uniform(states.size(), 1.0);
  const ChannelRun run = run_channel(net, kernels::classify_junctions(net), uniform, ch, cfg, observer);
  out.epochs_run = run.epochs;
  out.converged = run.converged;
  out.trace = run.trace;
  out.fallback_weight = median(known);
  for (EdgeIndex e = 0; e < states.size(); ++e) {
    if (ch.pinned[e]) continue;
    if (ch.valued[e]) {
      out.states[e].weight = ch.values[e];
      out.source[e] = WeightSource::Imputed;
    } else {
      out.states[e].weight = out.fallback_weight;
      out.source[e] = WeightSource::Fallback;
      ++out.fallback_count;
    }
  }
  return out;
}

}  // namespace netimpute
