#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netimpute/class_share.hpp"
#include "netimpute/geo.hpp"

namespace netimpute {

std::strong_ordering natural_id_compare(const std::string& a, const std::string& b);

/// Identifier preserved verbatim from input files.
///
/// Ordering is "natural": identifiers made only of digits compare
/// numerically and sort before all other identifiers, which compare
/// lexicographically. Sweep order and every adjacency list follow it.
template <typename Tag>
struct Id {
  std::string value;

  Id() = default;
  Id(std::string v) : value(std::move(v)) {}  // NOLINT(google-explicit-constructor)
  Id(const char* v) : value(v) {}             // NOLINT(google-explicit-constructor)

  const std::string& str() const { return value; }
  friend bool operator==(const Id&, const Id&) = default;
  friend std::strong_ordering operator<=>(const Id& a, const Id& b) { return natural_id_compare(a.value, b.value); }
};

struct NodeTag {};
struct EdgeTag {};
using NodeId = Id<NodeTag>;
using EdgeId = Id<EdgeTag>;

using NodeIndex = std::size_t;
using EdgeIndex = std::size_t;

struct Node {
  NodeId id;
  GeoPoint location;
};

struct Edge {
  EdgeId id;
  NodeId tail;
  NodeId head;
  Polyline geometry;
  double length_mi = 0.0;
  std::optional<EdgeId> reverse_twin;
  std::optional<std::string> region_tag;
};

struct NodeSpec {
  NodeId id;
  GeoPoint location;
};

struct EdgeSpec {
  EdgeId id;
  NodeId tail;
  NodeId head;
  Polyline geometry;                 // empty: straight tail-to-head segment
  std::optional<double> length_mi;   // unset: measured from geometry
  std::optional<std::string> region_tag;
};

struct BuildOptions {
  double endpoint_tolerance_m = 10.0;  // geometry ends vs node coordinates
  double twin_tolerance_m = 10.0;      // reversed-geometry match for reverse twins
};

/// Immutable directed multigraph. Nodes and edges are stored sorted by id,
/// so an EdgeIndex order is the EdgeId order.
class RoadNetwork {
 public:
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Edge> edges() const { return edges_; }
  const Node& node(NodeIndex i) const { return nodes_.at(i); }
  const Edge& edge(EdgeIndex i) const { return edges_.at(i); }

  std::optional<NodeIndex> find_node(const NodeId& id) const;
  std::optional<EdgeIndex> find_edge(const EdgeId& id) const;
  NodeIndex node_index(const NodeId& id) const;  // throws ValidationError
  EdgeIndex edge_index(const EdgeId& id) const;  // throws ValidationError

  NodeIndex tail(EdgeIndex e) const { return tail_[e]; }
  NodeIndex head(EdgeIndex e) const { return head_[e]; }
  std::optional<EdgeIndex> twin(EdgeIndex e) const;

  std::span<const EdgeIndex> in_edges(NodeIndex v) const;
  std::span<const EdgeIndex> out_edges(NodeIndex v) const;
  std::span<const EdgeIndex> in_edges(const NodeId& v) const { return in_edges(node_index(v)); }
  std::span<const EdgeIndex> out_edges(const NodeId& v) const { return out_edges(node_index(v)); }

  /// in_edges(tail) followed by out_edges(head), ascending, without e and its
  /// reverse twin.
  std::span<const EdgeIndex> neighbor_edges(EdgeIndex e) const;
  std::span<const EdgeIndex> neighbor_edges(const EdgeId& e) const { return neighbor_edges(edge_index(e)); }

  /// Upstream links of e (in_edges(tail) minus the twin), used by junction rules.
  std::span<const EdgeIndex> upstream(EdgeIndex e) const;
  /// Downstream links of e (out_edges(head) minus the twin).
  std::span<const EdgeIndex> downstream(EdgeIndex e) const;

  /// Weakly connected components of the neighbor relation; ids are dense and
  /// numbered in order of each component's smallest EdgeIndex.
  const std::vector<std::size_t>& neighbor_components() const { return component_; }

 private:
  friend RoadNetwork build_network(std::vector<NodeSpec>, std::vector<EdgeSpec>, const BuildOptions&);

  struct Csr {
    std::vector<std::size_t> offsets;
    std::vector<EdgeIndex> items;
    std::span<const EdgeIndex> row(std::size_t i) const {
      return {items.data() + offsets[i], offsets[i + 1] - offsets[i]};
    }
  };

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::map<NodeId, NodeIndex> node_lookup_;
  std::map<EdgeId, EdgeIndex> edge_lookup_;
  std::vector<NodeIndex> tail_;
  std::vector<NodeIndex> head_;
  std::vector<std::optional<EdgeIndex>> twin_;
  Csr in_;
  Csr out_;
  Csr neighbors_;
  Csr upstream_;
  Csr downstream_;
  std::vector<std::size_t> component_;
};

/// Validates and indexes a network. Throws ValidationError on a dangling node
/// reference, duplicate id, self-loop, non-positive length, or geometry whose
/// ends are further than the tolerance from the declared nodes.
RoadNetwork build_network(std::vector<NodeSpec> nodes, std::vector<EdgeSpec> edges, const BuildOptions& options = {});

enum class EdgeStatus { Unset, Observed, Imputed };

const char* to_string(EdgeStatus s);
EdgeStatus parse_edge_status(const std::string& s);

struct EdgeState {
  std::optional<double> weight;       // truck AADT prior, vehicles/day
  std::optional<double> volume;       // vehicles/hour
  std::optional<ClassShare> class_share;
  EdgeStatus status = EdgeStatus::Unset;
};

/// Per-edge state indexed by EdgeIndex.
using StateTable = std::vector<EdgeState>;

StateTable make_state_table(const RoadNetwork& net);

/// Checks the EdgeState invariants against a network; throws ValidationError.
void validate_states(const RoadNetwork& net, const StateTable& states);

}  // namespace netimpute
