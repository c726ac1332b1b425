#include "netimpute/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>
#include <tuple>

#include "netimpute/random.hpp"

namespace netimpute {
namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size())
    throw ValidationError("metric inputs differ in length (" + std::to_string(y.size()) + " vs " +
                          std::to_string(yhat.size()) + ")");
  if (y.empty()) throw ValidationError("metric over zero records");
}

void check_simplex(std::span<const double> p, const char* which) {
  if (p.size() != kNumClasses) throw ValidationError(std::string(which) + " must have 9 class components");
  double s = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < -1e-12) throw ValidationError(std::string(which) + " has a negative component");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-6) throw ValidationError(std::string(which) + " is not a probability distribution");
}

std::string class_label(int c) { return (c < 10 ? "0" : "") + std::to_string(c); }

struct Sample {
  std::vector<double> y;
  std::vector<double> yhat;
  std::vector<double> cels;
};

std::optional<double> try_r2(const Sample& s) {
  try {
    return pearson_r2(s.y, s.yhat);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

std::optional<MetricCell> score(const std::string& fold, const std::string& region, const std::string& cls,
                                const std::string& window, const Sample& s) {
  MetricCell cell{fold, region, cls, window, std::max(s.y.size(), s.cels.size()), {}, {}, {}, {}};
  if (cell.n == 0) return std::nullopt;
  if (!s.y.empty()) {
    cell.mae = mae(s.y, s.yhat);
    cell.rmse = rmse(s.y, s.yhat);
    cell.r2 = try_r2(s);
  }
  if (!s.cels.empty()) {
    double total = 0.0;
    for (double c : s.cels) total += c;
    cell.cel = total / static_cast<double>(s.cels.size());
  }
  return cell;
}

// Scores one group of predictions: total volume plus CEL, then each class.
void score_group(const std::string& fold, const std::string& region, const std::string& window,
                 const std::vector<const CvPrediction*>& preds, std::vector<MetricCell>& out) {
  Sample total;
  std::array<Sample, kNumClasses> per_class;
  for (const CvPrediction* p : preds) {
    if (p->volume) {
      total.y.push_back(p->observed.volume);
      total.yhat.push_back(*p->volume);
    }
    if (p->share) total.cels.push_back(cel(p->observed.share, *p->share));
    if (p->volume && p->share) {
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        per_class[c].y.push_back(p->observed.volume * p->observed.share[c]);
        per_class[c].yhat.push_back(*p->volume * (*p->share)[c]);
      }
    }
  }
  if (auto cell = score(fold, region, "all", window, total)) out.push_back(*cell);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (auto cell = score(fold, region, class_label(kFirstClass + static_cast<int>(c)), window, per_class[c]))
      out.push_back(*cell);
}

void score_groups(const std::string& fold, const std::string& window, const std::vector<const CvPrediction*>& preds,
                  std::vector<MetricCell>& out) {
  std::vector<const CvPrediction*> scored;
  std::map<std::string, std::vector<const CvPrediction*>> by_region;
  for (const CvPrediction* p : preds) {
    if (p->missing()) continue;
    scored.push_back(p);
    by_region[p->observed.region].push_back(p);
  }
  score_group(fold, "all", window, scored, out);
  for (const auto& [region, group] : by_region) score_group(fold, region, window, group, out);
}

std::vector<MetricCell> fold_means(const std::string& window, const std::vector<MetricCell>& cells) {
  struct Acc {
    std::size_t n = 0;
    std::array<double, 4> sum{};
    std::array<std::size_t, 4> count{};
  };
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (const MetricCell& c : cells) {
    Acc& a = groups[{c.region, c.vehicle_class}];
    a.n += c.n;
    const std::array<std::optional<double>, 4> m = {c.mae, c.rmse, c.r2, c.cel};
    for (std::size_t i = 0; i < 4; ++i)
      if (m[i]) {
        a.sum[i] += *m[i];
        ++a.count[i];
      }
  }
  auto mean = [](const Acc& a, std::size_t i) -> std::optional<double> {
    if (a.count[i] == 0) return std::nullopt;
    return a.sum[i] / static_cast<double>(a.count[i]);
  };
  std::vector<MetricCell> out;
  for (const auto& [key, a] : groups)
    out.push_back({"fold_mean", key.first, key.second, window, a.n, mean(a, 0), mean(a, 1), mean(a, 2), mean(a, 3)});
  return out;
}

struct FoldOutcome {
  std::vector<CvPrediction> predictions;
};

FoldOutcome run_fold(const RoadNetwork& net, const StateTable& base, std::span<const CvObservation> observations,
                     const FoldAssignment& folds, std::size_t fold, const ImputeConfig& cfg,
                     const std::string& window) {
  std::vector<CvObservation> kept;
  std::vector<const CvObservation*> masked;
  for (const CvObservation& o : observations) {
    if (folds.fold_of.at(o.station_id) == fold) masked.push_back(&o);
    else kept.push_back(o);
  }
  const StateTable states = pin_observations(base, kept);

  FoldOutcome out;
  // With nothing left to propagate from, every masked edge is scored as missing.
  const bool any_observed = std::any_of(states.begin(), states.end(),
                                        [](const EdgeState& s) { return s.status == EdgeStatus::Observed; });
  std::optional<StateTable> imputed;
  if (any_observed) imputed = run_imputation(net, states, cfg).states;
  for (const CvObservation* o : masked) {
    CvPrediction p{fold, window, *o, std::nullopt, std::nullopt};
    if (imputed) {
      const EdgeState& s = (*imputed)[o->edge];
      p.volume = s.volume;
      p.share = s.class_share;
    }
    out.predictions.push_back(std::move(p));
  }
  return out;
}

}  // namespace

StateTable pin_observations(const StateTable& base, std::span<const CvObservation> observations) {
  struct Pin {
    double volume = 0.0;
    ClassShare::Vector mass{};
    std::size_t n = 0;
  };
  std::map<EdgeIndex, Pin> pins;
  for (const CvObservation& o : observations) {
    if (o.edge >= base.size()) throw ValidationError("station '" + o.station_id + "' snapped to an unknown edge");
    Pin& p = pins[o.edge];
    p.volume += o.volume;
    ++p.n;
    // Several stations on one edge: mean volume, volume-weighted shares.
    const double w = o.volume > 0.0 ? o.volume : 1.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) p.mass[c] += w * o.share[c];
  }
  StateTable states = base;
  for (const auto& [edge, p] : pins) {
    EdgeState& s = states[edge];
    s.status = EdgeStatus::Observed;
    s.volume = p.volume / static_cast<double>(p.n);
    s.class_share = ClassShare::from_masses(p.mass);
  }
  return states;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
  std::vector<std::size_t> out(k, 0);
  for (const auto& [id, f] : fold_of) ++out.at(f);
  return out;
}

std::vector<std::string> FoldAssignment::members(std::size_t fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of)
    if (f == fold) out.push_back(id);
  return out;
}

FoldAssignment make_folds(std::span<const std::string> station_ids, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs at least 2 folds");
  std::vector<std::string> ids(station_ids.begin(), station_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < k)
    throw ValidationError("fewer stations (" + std::to_string(ids.size()) + ") than folds (" + std::to_string(k) + ")");
  Rng rng(seed);
  rng.shuffle(ids);
  FoldAssignment out{seed, k, {}};
  for (std::size_t i = 0; i < ids.size(); ++i) out.fold_of[ids[i]] = i % k;
  return out;
}

double mae(std::span<const double> observed, std::span<const double> predicted) {
  check_pair(observed, predicted);
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) s += std::abs(observed[i] - predicted[i]);
  return s / static_cast<double>(observed.size());
}

double rmse(std::span<const double> observed, std::span<const double> predicted) {
  check_pair(observed, predicted);
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - predicted[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(observed.size()));
}

double pearson_r2(std::span<const double> observed, std::span<const double> predicted) {
  check_pair(observed, predicted);
  const std::size_t n = observed.size();
  if (n < 2) throw UndefinedMetricError("R^2 needs at least two records");
  double my = 0.0, mp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    my += observed[i];
    mp += predicted[i];
  }
  my /= static_cast<double>(n);
  mp /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = observed[i] - my, b = predicted[i] - mp;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw UndefinedMetricError("R^2 undefined: a series has zero variance");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::min(1.0, r * r);
}

double cel(std::span<const double> f, std::span<const double> g) {
  check_simplex(f, "observed distribution");
  check_simplex(g, "predicted distribution");
  double loss = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (f[i] <= 0.0) continue;
    loss -= f[i] * std::log(std::max(g[i], kCelFloor));
  }
  return loss;
}

double cel(const ClassShare& f, const ClassShare& g) { return cel(f.span(), g.span()); }

double entropy(std::span<const double> f) {
  double h = 0.0;
  for (double p : f)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

const MetricCell* MetricsReport::find(const std::string& fold, const std::string& region,
                                      const std::string& vehicle_class, const std::string& window) const {
  for (const MetricCell& c : cells)
    if (c.fold == fold && c.region == region && c.vehicle_class == vehicle_class && c.window == window) return &c;
  return nullptr;
}

void MetricsReport::append(const MetricsReport& other) {
  cells.insert(cells.end(), other.cells.begin(), other.cells.end());
  predictions.insert(predictions.end(), other.predictions.begin(), other.predictions.end());
  n_masked += other.n_masked;
  n_missing += other.n_missing;
}

MetricsReport run_cross_validation(const RoadNetwork& net, const StateTable& base,
                                   std::span<const CvObservation> observations, const FoldAssignment& folds,
                                   const ImputeConfig& cfg, const std::string& window, Execution exec) {
  cfg.validate();
  if (base.size() != net.edge_count()) throw ValidationError("base state table does not match the network");
  for (const CvObservation& o : observations) {
    if (!folds.fold_of.count(o.station_id))
      throw ValidationError("station '" + o.station_id + "' has no fold assignment");
    if (o.edge >= net.edge_count()) throw ValidationError("station '" + o.station_id + "' snapped to an unknown edge");
  }

  MetricsReport report;
  if (observations.empty()) return report;

  const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(folds.k);
  std::vector<FoldOutcome> outcomes(folds.k);
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t f = 0; f < k; ++f) outcomes[f] = run_fold(net, base, observations, folds, f, cfg, window);
  } else {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t f = 0; f < k; ++f) {
      try {
        outcomes[f] = run_fold(net, base, observations, folds, static_cast<std::size_t>(f), cfg, window);
      } catch (...) {
#pragma omp critical(netimpute_cv_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<MetricCell> per_fold;
  std::vector<const CvPrediction*> pooled;
  for (std::size_t f = 0; f < folds.k; ++f) {
    for (CvPrediction& p : outcomes[f].predictions) report.predictions.push_back(std::move(p));
  }
  std::size_t start = 0;
  for (std::size_t f = 0; f < folds.k; ++f) {
    std::vector<const CvPrediction*> preds;
    for (std::size_t i = start; i < report.predictions.size() && report.predictions[i].fold == f; ++i)
      preds.push_back(&report.predictions[i]);
    start += preds.size();
    score_groups(std::to_string(f), window, preds, per_fold);
    pooled.insert(pooled.end(), preds.begin(), preds.end());
  }
  report.n_masked = report.predictions.size();
  for (const CvPrediction& p : report.predictions)
    if (p.missing()) ++report.n_missing;

  const std::vector<MetricCell> means = fold_means(window, per_fold);
  report.cells = std::move(per_fold);
  score_groups("pooled", window, pooled, report.cells);
  report.cells.insert(report.cells.end(), means.begin(), means.end());
  return report;
}

}  // namespace netimpute
