#pragma once

#include <initializer_list>
#include <tuple>

#include "dsr/model.hpp"

namespace dsr::testing {

// Builds a topology from (tx, rx, T, P) tuples.
inline Topology make_topology(int n, std::initializer_list<std::tuple<int, int, int, double>> links,
                              std::initializer_list<std::tuple<int, double, int>> flows = {}) {
  Topology t;
  t.n_nodes = n;
  for (const auto& [tx, rx, cap, p] : links)
    t.links.push_back(Link{static_cast<int>(t.links.size()), tx, rx, cap, p});
  for (const auto& [src, rate, deadline] : flows)
    t.flows.push_back(Flow{static_cast<int>(t.flows.size()), src, rate, deadline, UtilityKind::linear});
  return t;
}

// Single link 0 -> 1.
inline Topology two_nodes(double p, int cap = 1, double rate = 1.0, int deadline = 1) {
  return make_topology(2, {{0, 1, cap, p}}, {{0, rate, deadline}});
}

// The DSR walkthrough graph: s=0, A=1, B=2, C=3, D=4, E=5.
inline Topology walkthrough(double p = 1.0) {
  return make_topology(6, {{0, 1, 1, p}, {0, 2, 1, p}, {1, 3, 1, p}, {1, 4, 1, p}, {2, 5, 1, p}, {2, 4, 1, p}},
                       {{0, 1.0, 6}});
}

// Source 0 reaches destination 3 through relay 1 or relay 2.
inline Topology parallel_relays(double p = 1.0, int cap = 1) {
  return make_topology(4, {{0, 1, cap, p}, {0, 2, cap, p}, {1, 3, cap, p}, {2, 3, cap, p}}, {{0, 1.0, 2}});
}

}  // namespace dsr::testing
