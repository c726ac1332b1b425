#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "netimpute/network.hpp"

namespace testing {

using netimpute::EdgeSpec;
using netimpute::GeoPoint;
using netimpute::NodeSpec;

// Nodes at (x, y) * 0.01 degrees around (-84, 35).
inline GeoPoint at(double x, double y) { return {-84.0 + 0.01 * x, 35.0 + 0.01 * y}; }

struct Sketch {
  std::map<std::string, GeoPoint> nodes;
  std::vector<std::tuple<std::string, std::string, std::string>> edges;  // id, tail, head

  Sketch& node(const std::string& id, double x, double y) {
    nodes[id] = at(x, y);
    return *this;
  }
  Sketch& edge(const std::string& id, const std::string& tail, const std::string& head) {
    edges.emplace_back(id, tail, head);
    return *this;
  }
  netimpute::RoadNetwork build() const {
    std::vector<NodeSpec> ns;
    for (const auto& [id, p] : nodes) ns.push_back({id, p});
    std::vector<EdgeSpec> es;
    for (const auto& [id, t, h] : edges) es.push_back({id, t, h, {}, std::nullopt, std::nullopt});
    return netimpute::build_network(ns, es);
  }
};

// Merge then diverge: A->C, B->C, C->D, D->E, D->F.
inline Sketch junction_sketch() {
  Sketch s;
  s.node("A", -1, 1).node("B", -1, -1).node("C", 0, 0).node("D", 1, 0).node("E", 2, 1).node("F", 2, -1);
  s.edge("AC", "A", "C").edge("BC", "B", "C").edge("CD", "C", "D").edge("DE", "D", "E").edge("DF", "D", "F");
  return s;
}

inline std::vector<std::string> ids(const netimpute::RoadNetwork& net, std::span<const netimpute::EdgeIndex> es) {
  std::vector<std::string> out;
  for (auto e : es) out.push_back(net.edge(e).id.str());
  return out;
}

}  // namespace testing
