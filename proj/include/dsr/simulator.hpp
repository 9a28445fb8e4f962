#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsr/dp_policy.hpp"
#include "dsr/model.hpp"
#include "dsr/rng.hpp"

namespace dsr {

enum class PolicyKind { dsr_relaxed, index_dsr, flood, random };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::dsr_relaxed: return "dsr-relaxed";
    case PolicyKind::index_dsr: return "index-dsr";
    case PolicyKind::flood: return "flood";
    case PolicyKind::random: return "random";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy(const std::string& s) {
  if (s == "dsr-relaxed") return PolicyKind::dsr_relaxed;
  if (s == "index-dsr") return PolicyKind::index_dsr;
  if (s == "flood") return PolicyKind::flood;
  if (s == "random") return PolicyKind::random;
  return std::nullopt;
}

enum class EventKind { arrival, transmit_attempt, delivery_success, delivery_failure, expiry };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::arrival: return "Arrival";
    case EventKind::transmit_attempt: return "TransmitAttempt";
    case EventKind::delivery_success: return "DeliverySuccess";
    case EventKind::delivery_failure: return "DeliveryFailure";
    case EventKind::expiry: return "Expiry";
  }
  return "?";
}

struct SlotEvent {
  std::int64_t slot = 0;
  EventKind kind = EventKind::arrival;
  std::uint64_t packet_uid = 0;
  int link = -1;
  NodeSet subset;

  bool operator==(const SlotEvent&) const = default;
};

// Tab-separated, one event per line: slot, kind, packet uid, link, subset.
inline void write_event_log(std::ostream& os, const std::vector<SlotEvent>& events) {
  for (const auto& e : events) {
    os << e.slot << '\t' << to_string(e.kind) << '\t' << e.packet_uid << '\t' << e.link << '\t'
       << e.subset.to_string() << '\n';
  }
}

struct Metrics {
  int n_nodes = 0;
  int n_flows = 0;
  int n_links = 0;
  std::int64_t slots = 0;
  std::vector<std::uint64_t> delivered;      // [n * n_flows + f]
  std::vector<std::uint64_t> transmissions;  // [l * n_flows + f]
  std::vector<std::uint64_t> demand;         // [l] packets with positive index value (index policy)
  std::vector<std::vector<std::uint64_t>> usage_histogram;  // [l][u]: slots with u transmissions on l
  std::uint64_t partition_checks = 0;

  Metrics() = default;
  Metrics(int nodes, int flows, int links)
      : n_nodes(nodes),
        n_flows(flows),
        n_links(links),
        delivered(static_cast<std::size_t>(nodes) * flows, 0),
        transmissions(static_cast<std::size_t>(links) * flows, 0),
        demand(links, 0),
        usage_histogram(links) {}

  double mu(NodeId n, int f) const { return slots ? static_cast<double>(delivered[n * n_flows + f]) / slots : 0.0; }
  double eps(int l, int f) const { return slots ? static_cast<double>(transmissions[l * n_flows + f]) / slots : 0.0; }

  double link_usage(int l) const {
    double sum = 0.0;
    for (int f = 0; f < n_flows; ++f) sum += eps(l, f);
    return sum;
  }

  double link_demand(int l) const { return slots ? static_cast<double>(demand[l]) / slots : 0.0; }

  std::size_t max_slot_usage(int l) const {
    const auto& h = usage_histogram[l];
    for (std::size_t u = h.size(); u > 0; --u)
      if (h[u - 1] > 0) return u - 1;
    return 0;
  }

  bool operator==(const Metrics&) const = default;
};

struct SimOptions {
  bool count_source = true;     // the source's own copy counts as a delivery on arrival
  bool check_partition = true;  // verify the delegated-set partition after every slot
  bool record_events = false;
};

class PartitionViolation : public ContractError {
 public:
  using ContractError::ContractError;
};

// Slotted simulation of one network. Holds the live packet copies, so it can
// be run in consecutive chunks (epochs) with the policy swapped in between.
class Simulator {
 public:
  using TableSet = std::vector<std::shared_ptr<const PolicyTable>>;

  Simulator(Topology topology, std::uint64_t seed, SimOptions options = {})
      : topology_(std::move(topology)), graph_(topology_), rng_(seed), options_(options) {}

  const Topology& topology() const { return topology_; }

  void set_policy(PolicyKind kind, TableSet tables = {}) {
    if (kind == PolicyKind::dsr_relaxed || kind == PolicyKind::index_dsr) {
      DSR_EXPECTS(tables.size() == topology_.flows.size(), "one policy table per flow");
      const Variant want = kind == PolicyKind::dsr_relaxed ? Variant::relaxed : Variant::index;
      for (std::size_t f = 0; f < tables.size(); ++f) {
        DSR_EXPECTS(tables[f] != nullptr, "missing policy table");
        DSR_EXPECTS(tables[f]->variant() == want, "policy table variant does not match policy");
        DSR_EXPECTS(tables[f]->horizon() == topology_.flows[f].deadline, "table horizon must equal flow deadline");
      }
    }
    kind_ = kind;
    tables_ = std::move(tables);
  }

  Metrics run(std::int64_t slots) {
    Metrics m(topology_.n_nodes, static_cast<int>(topology_.flows.size()), static_cast<int>(topology_.links.size()));
    for (std::int64_t i = 0; i < slots; ++i) step(m);
    return m;
  }

  // Queues one extra packet of `flow`; it arrives at the start of the next slot.
  void inject(int flow) {
    DSR_EXPECTS(flow >= 0 && flow < static_cast<int>(topology_.flows.size()), "flow out of range");
    injected_.push_back(flow);
  }

  const std::vector<PacketReplica>& replicas() const { return replicas_; }
  const std::vector<SlotEvent>& events() const { return events_; }
  std::int64_t now() const { return now_; }

 private:
  struct Request {
    std::size_t replica;
    int link;
    NodeId receiver;
    NodeSet subset;
    double value;
  };

  void emit(EventKind kind, std::uint64_t uid, int link = -1, NodeSet subset = {}) {
    if (options_.record_events) events_.push_back(SlotEvent{now_, kind, uid, link, subset});
  }

  void step(Metrics& m) {
    const int n_flows = m.n_flows;
    const NodeSet everyone = topology_.all_nodes();

    const auto arrive = [&](std::size_t f) {
      const Flow& flow = topology_.flows[f];
      PacketReplica r{next_uid_++, static_cast<int>(f), flow.source, everyone, flow.deadline, now_};
      emit(EventKind::arrival, r.packet_uid);
      if (options_.count_source) ++m.delivered[flow.source * n_flows + f];
      replicas_.push_back(r);
    };
    for (std::size_t f = 0; f < topology_.flows.size(); ++f) {
      const int arrivals = rng_.poisson(topology_.flows[f].arrival_rate);
      for (int a = 0; a < arrivals; ++a) arrive(f);
    }
    for (int f : injected_) arrive(static_cast<std::size_t>(f));
    injected_.clear();

    std::vector<Request> requests;
    collect_requests(requests);

    // Per-link admission.
    std::vector<std::vector<std::size_t>> by_link(topology_.links.size());
    for (std::size_t i = 0; i < requests.size(); ++i) by_link[requests[i].link].push_back(i);
    std::vector<std::size_t> admitted;
    for (std::size_t l = 0; l < by_link.size(); ++l) {
      auto& q = by_link[l];
      std::size_t take = q.size();
      if (kind_ == PolicyKind::index_dsr) {
        std::sort(q.begin(), q.end(), [&](std::size_t a, std::size_t b) {
          const auto& ra = requests[a];
          const auto& rb = requests[b];
          if (ra.value != rb.value) return ra.value > rb.value;
          const auto& pa = replicas_[ra.replica];
          const auto& pb = replicas_[rb.replica];
          if (pa.arrival_slot != pb.arrival_slot) return pa.arrival_slot < pb.arrival_slot;
          return pa.packet_uid < pb.packet_uid;
        });
        const auto positive = static_cast<std::size_t>(
            std::count_if(q.begin(), q.end(), [&](std::size_t i) { return requests[i].value > 0.0; }));
        m.demand[l] += positive;
        take = std::min<std::size_t>(positive, std::max(0, topology_.links[l].capacity));
      } else if (kind_ != PolicyKind::dsr_relaxed) {
        std::sort(q.begin(), q.end(), [&](std::size_t a, std::size_t b) {
          return replicas_[requests[a].replica].packet_uid < replicas_[requests[b].replica].packet_uid;
        });
        take = std::min<std::size_t>(q.size(), std::max(0, topology_.links[l].capacity));
      }
      admitted.insert(admitted.end(), q.begin(), q.begin() + static_cast<std::ptrdiff_t>(take));
      auto& hist = m.usage_histogram[l];
      if (hist.size() <= take) hist.resize(take + 1, 0);
      ++hist[take];
    }

    // Outcomes drawn in (link id, packet uid) order.
    std::sort(admitted.begin(), admitted.end(), [&](std::size_t a, std::size_t b) {
      if (requests[a].link != requests[b].link) return requests[a].link < requests[b].link;
      return replicas_[requests[a].replica].packet_uid < replicas_[requests[b].replica].packet_uid;
    });
    const std::size_t existing = replicas_.size();
    for (std::size_t idx : admitted) {
      const Request& req = requests[idx];
      PacketReplica& sender = replicas_[req.replica];
      ++m.transmissions[req.link * n_flows + sender.flow];
      emit(EventKind::transmit_attempt, sender.packet_uid, req.link, req.subset);
      if (rng_.bernoulli(topology_.links[req.link].reliability)) {
        auto split = split_delegation(sender, req.receiver, req.subset);
        sender = split.sender;
        split.receiver.remaining = sender.remaining - 1;
        ++m.delivered[req.receiver * n_flows + sender.flow];
        emit(EventKind::delivery_success, sender.packet_uid, req.link, req.subset);
        replicas_.push_back(split.receiver);
      } else {
        emit(EventKind::delivery_failure, sender.packet_uid, req.link, req.subset);
      }
    }

    for (std::size_t i = 0; i < existing; ++i) --replicas_[i].remaining;
    std::vector<PacketReplica> live;
    live.reserve(replicas_.size());
    for (const auto& r : replicas_) {
      if (r.remaining <= 0) emit(EventKind::expiry, r.packet_uid);
      else live.push_back(r);
    }
    replicas_ = std::move(live);
    std::sort(replicas_.begin(), replicas_.end(), [](const PacketReplica& a, const PacketReplica& b) {
      if (a.packet_uid != b.packet_uid) return a.packet_uid < b.packet_uid;
      return a.holder < b.holder;
    });
    if (options_.check_partition) check_partition(m);
    ++m.slots;
    ++now_;
  }

  void collect_requests(std::vector<Request>& out) {
    for (std::size_t i = 0; i < replicas_.size(); ++i) {
      const PacketReplica& r = replicas_[i];
      const NodeSet others = r.delegated.without(r.holder);
      switch (kind_) {
        case PolicyKind::dsr_relaxed:
        case PolicyKind::index_dsr: {
          auto d = best_action(*tables_[r.flow], r);
          if (d && d->action.transmits()) out.push_back({i, d->action.link, d->action.receiver, d->action.subset, d->value});
          break;
        }
        case PolicyKind::flood: {
          // Every direct neighbour gets a copy; nodes further out go to the
          // first neighbour that reaches them.
          const NodeSet direct = graph_.out(r.holder) & others;
          NodeSet far = others - direct;
          for (NodeId m : direct) {
            const NodeSet region = graph_.reach(m, far.with(m));
            far -= region;
            out.push_back({i, graph_.link_between(r.holder, m), m, region, 0.0});
          }
          break;
        }
        case PolicyKind::random: {
          const NodeSet neighbours = graph_.out(r.holder) & others;
          if (neighbours.empty()) break;
          auto pick = rng_.below(static_cast<std::uint64_t>(neighbours.size()));
          auto it = neighbours.begin();
          while (pick-- > 0) ++it;
          const NodeId m = *it;
          out.push_back({i, graph_.link_between(r.holder, m), m, NodeSet::single(m), 0.0});
          break;
        }
      }
    }
  }

  void check_partition(Metrics& m) const {
    const NodeSet everyone = topology_.all_nodes();
    std::size_t i = 0;
    while (i < replicas_.size()) {
      const std::uint64_t uid = replicas_[i].packet_uid;
      NodeSet covered;
      for (; i < replicas_.size() && replicas_[i].packet_uid == uid; ++i) {
        const auto& r = replicas_[i];
        if (!r.delegated.contains(r.holder) || !covered.disjoint(r.delegated)) {
          throw PartitionViolation("packet " + std::to_string(uid) + ": overlapping delegated sets at slot " +
                                   std::to_string(now_));
        }
        covered |= r.delegated;
      }
      if (covered != everyone) {
        throw PartitionViolation("packet " + std::to_string(uid) + ": delegated sets cover " + covered.to_string() +
                                 " at slot " + std::to_string(now_));
      }
    }
    ++m.partition_checks;
  }

  Topology topology_;
  Graph graph_;
  Rng rng_;
  SimOptions options_;
  PolicyKind kind_ = PolicyKind::flood;
  TableSet tables_;
  std::vector<PacketReplica> replicas_;
  std::vector<int> injected_;
  std::vector<SlotEvent> events_;
  std::uint64_t next_uid_ = 0;
  std::int64_t now_ = 0;
};

struct SimulationResult {
  Metrics metrics;
  std::vector<SlotEvent> events;
};

inline SimulationResult simulate(const Topology& topology, PolicyKind kind, Simulator::TableSet tables,
                                 std::int64_t slots, std::uint64_t seed, SimOptions options = {}) {
  Simulator sim(topology, seed, options);
  sim.set_policy(kind, std::move(tables));
  SimulationResult out{sim.run(slots), {}};
  out.events = sim.events();
  return out;
}

inline Metrics run_baseline(const Topology& topology, PolicyKind kind, std::int64_t slots, std::uint64_t seed,
                            SimOptions options = {}) {
  DSR_EXPECTS(kind == PolicyKind::flood || kind == PolicyKind::random, "baseline must be flood or random");
  return simulate(topology, kind, {}, slots, seed, options).metrics;
}

}  // namespace dsr
