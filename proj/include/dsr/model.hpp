#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsr/node_set.hpp"

namespace dsr {

// Violated precondition; indicates a programming error in the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

#define DSR_EXPECTS(cond, msg)                                          \
  do {                                                                  \
    if (!(cond)) throw ::dsr::ContractError(std::string("contract: ") + (msg)); \
  } while (0)

enum class UtilityKind { linear, logarithmic };

inline double utility_value(UtilityKind kind, double mu) {
  mu = std::max(mu, 0.0);
  return kind == UtilityKind::linear ? mu : std::log(mu + 1.0);
}

inline double utility_derivative(UtilityKind kind, double mu) {
  mu = std::max(mu, 0.0);
  return kind == UtilityKind::linear ? 1.0 : 1.0 / (mu + 1.0);
}

inline const char* to_string(UtilityKind kind) {
  return kind == UtilityKind::linear ? "linear" : "log";
}

inline std::optional<UtilityKind> parse_utility(const std::string& s) {
  if (s == "linear") return UtilityKind::linear;
  if (s == "log" || s == "logarithmic") return UtilityKind::logarithmic;
  return std::nullopt;
}

struct Link {
  int id = 0;
  NodeId tx = 0;
  NodeId rx = 0;
  int capacity = 1;          // packets per slot
  double reliability = 1.0;  // per-attempt success probability
};

struct Flow {
  int id = 0;
  NodeId source = 0;
  double arrival_rate = 0.0;  // mean packets per slot
  int deadline = 1;           // slots
  UtilityKind utility = UtilityKind::linear;
};

struct Topology {
  int n_nodes = 0;
  std::vector<Link> links;
  std::vector<Flow> flows;
  NodeSet gateways;

  NodeSet all_nodes() const { return NodeSet::full(n_nodes); }
};

// Gateway nodes share a backend switch; approximate that with a reliable,
// effectively uncapped directed clique. Existing (tx, rx) pairs are kept.
inline constexpr int kGatewayCapacity = 32;

inline Topology materialize_gateways(Topology t) {
  std::vector<std::vector<bool>> present(t.n_nodes, std::vector<bool>(t.n_nodes, false));
  for (const Link& l : t.links) {
    if (l.tx >= 0 && l.tx < t.n_nodes && l.rx >= 0 && l.rx < t.n_nodes) present[l.tx][l.rx] = true;
  }
  for (NodeId a : t.gateways) {
    for (NodeId b : t.gateways) {
      if (a == b || a >= t.n_nodes || b >= t.n_nodes || present[a][b]) continue;
      t.links.push_back(Link{static_cast<int>(t.links.size()), a, b, kGatewayCapacity, 1.0});
      present[a][b] = true;
    }
  }
  return t;
}

// Returns one message per violated invariant; empty when the topology is usable.
inline std::vector<std::string> validate_topology(const Topology& t) {
  std::vector<std::string> diags;
  if (t.n_nodes < 1 || t.n_nodes > kMaxNodes) {
    diags.push_back("topology: node count " + std::to_string(t.n_nodes) + " outside [1, 64]");
    return diags;
  }
  const auto in_range = [&](NodeId n) { return n >= 0 && n < t.n_nodes; };
  std::vector<std::vector<int>> seen(t.n_nodes, std::vector<int>(t.n_nodes, -1));
  for (std::size_t i = 0; i < t.links.size(); ++i) {
    const Link& l = t.links[i];
    const std::string tag = "link " + std::to_string(i) + ": ";
    if (l.id != static_cast<int>(i)) diags.push_back(tag + "id " + std::to_string(l.id) + " does not match position");
    if (!in_range(l.tx) || !in_range(l.rx)) {
      diags.push_back(tag + "endpoint out of range");
      continue;
    }
    if (l.tx == l.rx) diags.push_back(tag + "self-loop");
    else if (seen[l.tx][l.rx] >= 0) diags.push_back(tag + "duplicate of link " + std::to_string(seen[l.tx][l.rx]));
    else seen[l.tx][l.rx] = static_cast<int>(i);
    if (l.capacity < 1) diags.push_back(tag + "capacity must be >= 1");
    if (!(l.reliability > 0.0 && l.reliability <= 1.0)) diags.push_back(tag + "reliability must be in (0, 1]");
  }
  for (std::size_t i = 0; i < t.flows.size(); ++i) {
    const Flow& f = t.flows[i];
    const std::string tag = "flow " + std::to_string(i) + ": ";
    if (f.id != static_cast<int>(i)) diags.push_back(tag + "id " + std::to_string(f.id) + " does not match position");
    if (!in_range(f.source)) diags.push_back(tag + "source out of range");
    if (!(f.arrival_rate >= 0.0) || !std::isfinite(f.arrival_rate)) diags.push_back(tag + "arrival rate must be >= 0");
    if (f.deadline < 1) diags.push_back(tag + "deadline must be >= 1");
  }
  if (!t.gateways.subset_of(t.all_nodes())) diags.push_back("gateways: node out of range");
  return diags;
}

// Adjacency view of a topology: out-neighbour masks and a (tx, rx) -> link index.
class Graph {
 public:
  explicit Graph(const Topology& t) : n_(t.n_nodes), out_(t.n_nodes), link_of_(t.n_nodes * t.n_nodes, -1) {
    for (std::size_t i = 0; i < t.links.size(); ++i) {
      const Link& l = t.links[i];
      out_[l.tx] = out_[l.tx].with(l.rx);
      link_of_[l.tx * n_ + l.rx] = static_cast<int>(i);
    }
  }

  int n_nodes() const { return n_; }
  NodeSet out(NodeId n) const { return out_[n]; }
  int link_between(NodeId tx, NodeId rx) const { return link_of_[tx * n_ + rx]; }

  // Members of `within` reachable from `from` along links whose endpoints stay in `within`.
  NodeSet reach(NodeId from, NodeSet within) const {
    NodeSet seen = NodeSet::single(from);
    NodeSet frontier = seen;
    while (!frontier.empty()) {
      NodeSet next;
      for (NodeId v : frontier) next |= out_[v];
      next = (next & within) - seen;
      seen |= next;
      frontier = next;
    }
    return seen;
  }

 private:
  int n_;
  std::vector<NodeSet> out_;
  std::vector<int> link_of_;
};

// A copy of one packet held by one node, together with the nodes it must still serve.
struct PacketReplica {
  std::uint64_t packet_uid = 0;
  int flow = 0;
  NodeId holder = 0;
  NodeSet delegated;
  int remaining = 0;
  std::int64_t arrival_slot = 0;
};

struct SplitResult {
  PacketReplica sender;
  PacketReplica receiver;
};

// Hands `subset` of the sender's delegated set to `receiver`. The caller
// adjusts `remaining` on both halves.
inline SplitResult split_delegation(const PacketReplica& replica, NodeId receiver, NodeSet subset) {
  DSR_EXPECTS(replica.delegated.contains(replica.holder), "holder must be in its delegated set");
  DSR_EXPECTS(subset.contains(receiver), "receiver must be in the delegated subset");
  DSR_EXPECTS(subset.subset_of(replica.delegated), "subset must come from the delegated set");
  DSR_EXPECTS(!subset.contains(replica.holder), "sender keeps responsibility for itself");
  SplitResult out{replica, replica};
  out.sender.delegated = replica.delegated - subset;
  out.receiver.holder = receiver;
  out.receiver.delegated = subset;
  return out;
}

}  // namespace dsr
