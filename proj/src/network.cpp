#include "netimpute/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "netimpute/error.hpp"

namespace netimpute {
namespace {

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return c >= '0' && c <= '9'; });
}

std::string_view strip_leading_zeros(const std::string& s) {
  std::size_t i = 0;
  while (i + 1 < s.size() && s[i] == '0') ++i;
  return std::string_view(s).substr(i);
}

template <typename Rows>
void fill_csr(std::size_t n_rows, const Rows& rows, std::vector<std::size_t>& offsets, std::vector<EdgeIndex>& items) {
  offsets.assign(n_rows + 1, 0);
  for (std::size_t i = 0; i < n_rows; ++i) offsets[i + 1] = offsets[i] + rows[i].size();
  items.clear();
  items.reserve(offsets.back());
  for (std::size_t i = 0; i < n_rows; ++i) items.insert(items.end(), rows[i].begin(), rows[i].end());
}

// Largest distance from any vertex of one polyline to the other, both ways.
double geometry_discrepancy_m(const Polyline& a, const Polyline& b) {
  double worst = 0.0;
  for (const GeoPoint& p : a) worst = std::max(worst, geo::point_polyline_distance_m(p, b));
  for (const GeoPoint& p : b) worst = std::max(worst, geo::point_polyline_distance_m(p, a));
  return worst;
}

}  // namespace

std::strong_ordering natural_id_compare(const std::string& a, const std::string& b) {
  const bool da = all_digits(a);
  const bool db = all_digits(b);
  if (da != db) return da ? std::strong_ordering::less : std::strong_ordering::greater;
  if (da) {
    const auto sa = strip_leading_zeros(a);
    const auto sb = strip_leading_zeros(b);
    if (sa.size() != sb.size()) return sa.size() <=> sb.size();
    if (auto c = sa.compare(sb); c != 0) return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
  }
  // Numerically equal digit strings ("7" vs "007") fall back to the raw text.
  const int c = a.compare(b);
  return c < 0 ? std::strong_ordering::less : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
}

std::optional<NodeIndex> RoadNetwork::find_node(const NodeId& id) const {
  auto it = node_lookup_.find(id);
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<EdgeIndex> RoadNetwork::find_edge(const EdgeId& id) const {
  auto it = edge_lookup_.find(id);
  if (it == edge_lookup_.end()) return std::nullopt;
  return it->second;
}

NodeIndex RoadNetwork::node_index(const NodeId& id) const {
  if (auto i = find_node(id)) return *i;
  throw ValidationError("unknown node '" + id.str() + "'");
}

EdgeIndex RoadNetwork::edge_index(const EdgeId& id) const {
  if (auto i = find_edge(id)) return *i;
  throw ValidationError("unknown edge '" + id.str() + "'");
}

std::optional<EdgeIndex> RoadNetwork::twin(EdgeIndex e) const { return twin_.at(e); }

std::span<const EdgeIndex> RoadNetwork::in_edges(NodeIndex v) const {
  if (v >= nodes_.size()) throw ValidationError("node index out of range");
  return in_.row(v);
}

std::span<const EdgeIndex> RoadNetwork::out_edges(NodeIndex v) const {
  if (v >= nodes_.size()) throw ValidationError("node index out of range");
  return out_.row(v);
}

std::span<const EdgeIndex> RoadNetwork::neighbor_edges(EdgeIndex e) const {
  if (e >= edges_.size()) throw ValidationError("edge index out of range");
  return neighbors_.row(e);
}

std::span<const EdgeIndex> RoadNetwork::upstream(EdgeIndex e) const { return upstream_.row(e); }
std::span<const EdgeIndex> RoadNetwork::downstream(EdgeIndex e) const { return downstream_.row(e); }

RoadNetwork build_network(std::vector<NodeSpec> nodes, std::vector<EdgeSpec> edges, const BuildOptions& options) {
  RoadNetwork net;

  std::sort(nodes.begin(), nodes.end(), [](const NodeSpec& a, const NodeSpec& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0 && nodes[i].id == net.nodes_.back().id) throw ValidationError("duplicate node id '" + nodes[i].id.str() + "'");
    const GeoPoint p = nodes[i].location;
    if (!std::isfinite(p.lon) || !std::isfinite(p.lat) || std::abs(p.lat) > 90.0 || std::abs(p.lon) > 180.0)
      throw ValidationError("node '" + nodes[i].id.str() + "' has invalid coordinates");
    net.node_lookup_.emplace(nodes[i].id, i);
    net.nodes_.push_back(Node{std::move(nodes[i].id), p});
  }

  std::sort(edges.begin(), edges.end(), [](const EdgeSpec& a, const EdgeSpec& b) { return a.id < b.id; });
  const std::size_t n_edges = edges.size();
  net.edges_.reserve(n_edges);
  net.tail_.resize(n_edges);
  net.head_.resize(n_edges);
  for (std::size_t i = 0; i < n_edges; ++i) {
    EdgeSpec& spec = edges[i];
    const std::string& name = spec.id.str();
    if (i > 0 && spec.id == net.edges_.back().id) throw ValidationError("duplicate edge id '" + name + "'");
    const auto tail = net.find_node(spec.tail);
    const auto head = net.find_node(spec.head);
    if (!tail) throw ValidationError("edge '" + name + "' references undeclared node '" + spec.tail.str() + "'");
    if (!head) throw ValidationError("edge '" + name + "' references undeclared node '" + spec.head.str() + "'");
    if (*tail == *head) throw ValidationError("edge '" + name + "' is a self-loop");

    const GeoPoint tail_pt = net.nodes_[*tail].location;
    const GeoPoint head_pt = net.nodes_[*head].location;
    if (spec.geometry.empty()) spec.geometry = {tail_pt, head_pt};
    if (spec.geometry.size() < 2) throw ValidationError("edge '" + name + "' geometry needs at least two points");
    if (geo::haversine_m(spec.geometry.front(), tail_pt) > options.endpoint_tolerance_m ||
        geo::haversine_m(spec.geometry.back(), head_pt) > options.endpoint_tolerance_m)
      throw ValidationError("edge '" + name + "' geometry does not start/end at its tail/head nodes");

    const double length = spec.length_mi ? *spec.length_mi : geo::polyline_length_m(spec.geometry) / geo::kMetersPerMile;
    if (!std::isfinite(length) || length <= 0.0)
      throw ValidationError("edge '" + name + "' has non-positive length");

    net.tail_[i] = *tail;
    net.head_[i] = *head;
    net.edge_lookup_.emplace(spec.id, i);
    net.edges_.push_back(Edge{std::move(spec.id), std::move(spec.tail), std::move(spec.head), std::move(spec.geometry),
                              length, std::nullopt, std::move(spec.region_tag)});
  }

  // Reverse twins: pair (u->v) with (v->u) when the reversed geometry nearly
  // coincides. Best pairs first so parallel edges resolve deterministically.
  std::map<std::pair<NodeIndex, NodeIndex>, std::vector<EdgeIndex>> by_ends;
  for (EdgeIndex e = 0; e < n_edges; ++e) by_ends[{net.tail_[e], net.head_[e]}].push_back(e);
  std::vector<std::tuple<double, EdgeIndex, EdgeIndex>> pairs;
  for (EdgeIndex e = 0; e < n_edges; ++e) {
    auto it = by_ends.find({net.head_[e], net.tail_[e]});
    if (it == by_ends.end()) continue;
    for (EdgeIndex f : it->second) {
      if (f <= e) continue;
      Polyline reversed(net.edges_[f].geometry.rbegin(), net.edges_[f].geometry.rend());
      const double d = geometry_discrepancy_m(net.edges_[e].geometry, reversed);
      if (d <= options.twin_tolerance_m) pairs.emplace_back(d, e, f);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  net.twin_.assign(n_edges, std::nullopt);
  for (const auto& [d, e, f] : pairs) {
    if (net.twin_[e] || net.twin_[f]) continue;
    net.twin_[e] = f;
    net.twin_[f] = e;
    net.edges_[e].reverse_twin = net.edges_[f].id;
    net.edges_[f].reverse_twin = net.edges_[e].id;
  }

  // Edges are visited in index order, so every adjacency row comes out sorted.
  std::vector<std::vector<EdgeIndex>> in_rows(net.nodes_.size()), out_rows(net.nodes_.size());
  for (EdgeIndex e = 0; e < n_edges; ++e) {
    out_rows[net.tail_[e]].push_back(e);
    in_rows[net.head_[e]].push_back(e);
  }
  fill_csr(net.nodes_.size(), in_rows, net.in_.offsets, net.in_.items);
  fill_csr(net.nodes_.size(), out_rows, net.out_.offsets, net.out_.items);

  std::vector<std::vector<EdgeIndex>> nb(n_edges), up(n_edges), down(n_edges);
  for (EdgeIndex e = 0; e < n_edges; ++e) {
    const auto twin = net.twin_[e];
    for (EdgeIndex f : in_rows[net.tail_[e]])
      if (f != e && f != twin) up[e].push_back(f);
    for (EdgeIndex f : out_rows[net.head_[e]])
      if (f != e && f != twin) down[e].push_back(f);
    std::vector<EdgeIndex>& row = nb[e];
    row.reserve(up[e].size() + down[e].size());
    std::merge(up[e].begin(), up[e].end(), down[e].begin(), down[e].end(), std::back_inserter(row));
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  fill_csr(n_edges, nb, net.neighbors_.offsets, net.neighbors_.items);
  fill_csr(n_edges, up, net.upstream_.offsets, net.upstream_.items);
  fill_csr(n_edges, down, net.downstream_.offsets, net.downstream_.items);

  constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
  net.component_.assign(n_edges, unvisited);
  std::size_t next_component = 0;
  std::vector<EdgeIndex> stack;
  for (EdgeIndex root = 0; root < n_edges; ++root) {
    if (net.component_[root] != unvisited) continue;
    net.component_[root] = next_component;
    stack.push_back(root);
    while (!stack.empty()) {
      const EdgeIndex e = stack.back();
      stack.pop_back();
      for (EdgeIndex f : net.neighbors_.row(e)) {
        if (net.component_[f] == unvisited) {
          net.component_[f] = next_component;
          stack.push_back(f);
        }
      }
    }
    ++next_component;
  }
  return net;
}

const char* to_string(EdgeStatus s) {
  switch (s) {
    case EdgeStatus::Observed: return "observed";
    case EdgeStatus::Imputed: return "imputed";
    case EdgeStatus::Unset: break;
  }
  return "unset";
}

EdgeStatus parse_edge_status(const std::string& s) {
  if (s == "observed") return EdgeStatus::Observed;
  if (s == "imputed") return EdgeStatus::Imputed;
  if (s == "unset") return EdgeStatus::Unset;
  throw ValidationError("unknown edge status '" + s + "'");
}

StateTable make_state_table(const RoadNetwork& net) { return StateTable(net.edge_count()); }

void validate_states(const RoadNetwork& net, const StateTable& states) {
  if (states.size() != net.edge_count())
    throw ValidationError("state table has " + std::to_string(states.size()) + " rows for " +
                          std::to_string(net.edge_count()) + " edges");
  for (EdgeIndex e = 0; e < states.size(); ++e) {
    const EdgeState& s = states[e];
    const std::string& name = net.edge(e).id.str();
    if (s.weight && (!std::isfinite(*s.weight) || *s.weight < 0.0))
      throw ValidationError("edge '" + name + "' has a negative or non-finite weight");
    if (s.volume && !std::isfinite(*s.volume)) throw ValidationError("edge '" + name + "' has a non-finite volume");
    if (s.status == EdgeStatus::Observed && !s.volume && !s.class_share)
      throw ValidationError("observed edge '" + name + "' carries no value");
  }
}

}  // namespace netimpute
