#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dsr/model.hpp"

namespace dsr {

// reward[n]: marginal utility of delivering one more packet of the flow to n.
using RewardVector = std::vector<double>;
// price[l]: Lagrange multiplier of link l's capacity constraint.
using PriceVector = std::vector<double>;

enum class Variant { relaxed, index };

inline const char* to_string(Variant v) { return v == Variant::relaxed ? "relaxed" : "index"; }

// Absolute tolerance applied before tie-breaking in every max.
inline constexpr double kTieTolerance = 1e-12;

struct DpOptions {
  // Relaxed variant only: delegate only subsets whose members the receiver can
  // reach inside the subset. Never changes relaxed values.
  bool prune = true;
  std::size_t max_states = 4'000'000;
  std::size_t max_candidates = 8'000'000;
};

class SizingError : public std::runtime_error {
 public:
  SizingError(const std::string& what, double required) : std::runtime_error(what), required_(required) {}
  double required() const { return required_; }

 private:
  double required_;
};

struct Action {
  NodeId receiver = -1;  // -1: keep the packet this slot
  int link = -1;
  NodeSet subset;

  bool transmits() const { return receiver >= 0; }
  bool operator==(const Action&) const = default;
};

// Reachable (holder, delegated set) states of one packet and the transmission
// options available in each. Depends on the graph, source and variant only, so
// one space serves every epoch regardless of rewards and prices.
//
// States are canonical: a holder's set is cut down to the nodes it can reach
// inside that set. Unreachable members can never be served and do not change
// which links are usable, so both recursions give them zero weight.
class StateSpace {
 public:
  struct State {
    NodeId holder;
    NodeSet set;
  };

  struct Candidate {
    NodeId receiver;
    int link;
    NodeSet subset;
    std::uint32_t residual;  // state of the sender after a success
    std::uint32_t received;  // state of the receiver after a success
  };

  static std::shared_ptr<const StateSpace> build(const Topology& topology, NodeId source, Variant variant,
                                                 const DpOptions& options = {}) {
    DSR_EXPECTS(source >= 0 && source < topology.n_nodes, "source out of range");
    auto space = std::shared_ptr<StateSpace>(new StateSpace(topology, variant, options.prune && variant == Variant::relaxed));
    space->expand(source, options);
    return space;
  }

  Variant variant() const { return variant_; }
  bool pruned() const { return prune_; }
  const Graph& graph() const { return graph_; }
  std::size_t link_count() const { return link_count_; }
  std::size_t size() const { return states_.size(); }
  std::size_t candidate_count() const { return candidates_.size(); }
  std::uint32_t root() const { return 0; }

  const State& state(std::uint32_t id) const { return states_[id]; }

  std::span<const Candidate> candidates(std::uint32_t id) const {
    return {candidates_.data() + offsets_[id], candidates_.data() + offsets_[id + 1]};
  }

  State canonical(NodeId holder, NodeSet set) const { return {holder, graph_.reach(holder, set)}; }

  std::optional<std::uint32_t> find(NodeId holder, NodeSet set) const {
    const State c = canonical(holder, set);
    auto it = index_.find(Key{c.holder, c.set});
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Loose bound on the number of states; reported when a build is refused.
  static double state_bound(int n_nodes) { return n_nodes * std::ldexp(1.0, std::max(0, n_nodes - 1)); }

 private:
  struct Key {
    NodeId holder;
    NodeSet set;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return NodeSetHash{}(NodeSet(k.set.bits() ^ (static_cast<std::uint64_t>(k.holder) * 0x9e3779b97f4a7c15ULL)));
    }
  };

  StateSpace(const Topology& t, Variant variant, bool prune)
      : graph_(t), variant_(variant), prune_(prune), link_count_(t.links.size()) {}

  std::uint32_t intern(NodeId holder, NodeSet set, std::deque<std::uint32_t>& queue, const DpOptions& options) {
    const State c = canonical(holder, set);
    auto [it, inserted] = index_.try_emplace(Key{c.holder, c.set}, static_cast<std::uint32_t>(states_.size()));
    if (inserted) {
      if (states_.size() >= options.max_states) {
        throw SizingError("policy state space exceeds " + std::to_string(options.max_states) +
                              " states (upper bound " + std::to_string(state_bound(graph_.n_nodes())) + ")",
                          state_bound(graph_.n_nodes()));
      }
      states_.push_back(c);
      queue.push_back(it->second);
    }
    return it->second;
  }

  void expand(NodeId source, const DpOptions& options) {
    std::deque<std::uint32_t> queue;
    intern(source, NodeSet::full(graph_.n_nodes()), queue, options);
    // Candidates are appended per state in id order, so expansion must follow id order.
    std::vector<std::vector<Candidate>> per_state;
    std::vector<std::pair<int, std::uint64_t>> subsets;
    while (!queue.empty()) {
      const std::uint32_t id = queue.front();
      queue.pop_front();
      const State s = states_[id];
      std::vector<Candidate> list;
      const NodeSet others = s.set.without(s.holder);
      for (NodeId m : graph_.out(s.holder) & others) {
        const int link = graph_.link_between(s.holder, m);
        const std::uint64_t rest = others.without(m).bits();
        subsets.clear();
        std::uint64_t sub = rest;
        while (true) {
          const NodeSet delegated = NodeSet(sub).with(m);
          if (!prune_ || graph_.reach(m, delegated) == delegated) subsets.emplace_back(delegated.size(), delegated.bits());
          if (sub == 0) break;
          sub = (sub - 1) & rest;
        }
        std::sort(subsets.begin(), subsets.end());
        std::unordered_set<std::uint64_t> seen_pairs;
        for (const auto& [count, bits] : subsets) {
          const NodeSet delegated(bits);
          const std::uint32_t received = intern(m, delegated, queue, options);
          const std::uint32_t residual = intern(s.holder, s.set - delegated, queue, options);
          // Options with the same successor pair are interchangeable; keep the first in tie-break order.
          if (!seen_pairs.insert((static_cast<std::uint64_t>(received) << 32) | residual).second) continue;
          list.push_back(Candidate{m, link, delegated, residual, received});
        }
      }
      total_candidates_ += list.size();
      if (total_candidates_ > options.max_candidates) {
        throw SizingError("policy state space exceeds " + std::to_string(options.max_candidates) + " transmission options",
                          static_cast<double>(total_candidates_));
      }
      if (per_state.size() <= id) per_state.resize(id + 1);
      per_state[id] = std::move(list);
    }
    offsets_.assign(states_.size() + 1, 0);
    candidates_.reserve(total_candidates_);
    for (std::size_t i = 0; i < states_.size(); ++i) {
      offsets_[i] = candidates_.size();
      candidates_.insert(candidates_.end(), per_state[i].begin(), per_state[i].end());
    }
    offsets_[states_.size()] = candidates_.size();
  }

  Graph graph_;
  Variant variant_;
  bool prune_;
  std::size_t link_count_;
  std::vector<State> states_;
  std::unordered_map<Key, std::uint32_t, KeyHash> index_;
  std::vector<std::size_t> offsets_;
  std::vector<Candidate> candidates_;
  std::size_t total_candidates_ = 0;
};

struct Decision {
  Action action;
  double value;
};

// Values W(n, pi, tau) and argmax actions for every state of a StateSpace.
class PolicyTable {
 public:
  PolicyTable(std::shared_ptr<const StateSpace> space, int horizon)
      : space_(std::move(space)),
        horizon_(horizon),
        value_(space_->size() * (horizon + 1), 0.0),
        choice_(space_->size() * (horizon + 1), -1) {}

  Variant variant() const { return space_->variant(); }
  int horizon() const { return horizon_; }
  const StateSpace& space() const { return *space_; }
  std::shared_ptr<const StateSpace> space_ptr() const { return space_; }

  double value(std::uint32_t state, int tau) const { return value_[slot(state, tau)]; }

  Action action(std::uint32_t state, int tau) const {
    const int c = choice_[slot(state, tau)];
    if (c < 0) return {};
    const auto& cand = space_->candidates(state)[c];
    return Action{cand.receiver, cand.link, cand.subset};
  }

  // Index of the chosen candidate within the state's option list, or -1.
  int choice(std::uint32_t state, int tau) const { return choice_[slot(state, tau)]; }

  double root_value() const { return value(space_->root(), horizon_); }

  std::optional<double> value_at(NodeId holder, NodeSet set, int tau) const {
    auto id = space_->find(holder, set);
    if (!id || tau < 0 || tau > horizon_) return std::nullopt;
    return value(*id, tau);
  }

 private:
  friend PolicyTable evaluate_policy(std::shared_ptr<const StateSpace>, const Topology&, const RewardVector&,
                                     const PriceVector&, int);
  std::size_t slot(std::uint32_t state, int tau) const {
    return static_cast<std::size_t>(state) * (horizon_ + 1) + tau;
  }

  std::shared_ptr<const StateSpace> space_;
  int horizon_;
  std::vector<double> value_;
  std::vector<int> choice_;
};

// Backward induction over tau. Options are visited in tie-break order
// (receiver, subset size, subset mask) and only a strictly better value
// (beyond kTieTolerance) displaces the incumbent; keeping the packet is the
// incumbent in the relaxed recursion.
inline PolicyTable evaluate_policy(std::shared_ptr<const StateSpace> space, const Topology& topology,
                                   const RewardVector& rewards, const PriceVector& prices, int horizon) {
  DSR_EXPECTS(horizon >= 1, "horizon must be >= 1");
  DSR_EXPECTS(rewards.size() == static_cast<std::size_t>(topology.n_nodes), "one reward per node");
  DSR_EXPECTS(prices.size() == topology.links.size(), "one price per link");
  DSR_EXPECTS(space->link_count() == topology.links.size(), "state space built for another topology");
  for (double r : rewards) DSR_EXPECTS(r >= 0.0, "rewards must be nonnegative");
  for (double p : prices) DSR_EXPECTS(p >= 0.0, "prices must be nonnegative");

  PolicyTable table(space, horizon);
  const std::size_t n_states = space->size();
  const std::size_t stride = horizon + 1;
  const bool relaxed = space->variant() == Variant::relaxed;
  for (std::size_t s = 0; s < n_states; ++s) table.value_[s * stride] = rewards[space->state(s).holder];

  for (int tau = 1; tau <= horizon; ++tau) {
    for (std::uint32_t s = 0; s < n_states; ++s) {
      const double stay = table.value_[s * stride + tau - 1];
      const auto options = space->candidates(s);
      double best = stay;
      int choice = -1;
      for (std::size_t c = 0; c < options.size(); ++c) {
        const auto& o = options[c];
        const double p = topology.links[o.link].reliability;
        const double v = p * (table.value_[o.residual * stride + tau - 1] + table.value_[o.received * stride + tau - 1]) +
                         (1.0 - p) * stay - prices[o.link];
        if ((!relaxed && choice < 0) || v > best + kTieTolerance) {
          best = v;
          choice = static_cast<int>(c);
        }
      }
      table.value_[s * stride + tau] = best;
      table.choice_[s * stride + tau] = choice;
    }
  }
  return table;
}

inline PolicyTable solve_relaxed(const Topology& topology, const Flow& flow, const RewardVector& rewards,
                                 const PriceVector& prices, int horizon, const DpOptions& options = {}) {
  return evaluate_policy(StateSpace::build(topology, flow.source, Variant::relaxed, options), topology, rewards,
                         prices, horizon);
}

// Every holder with a usable link must transmit; values may go negative.
inline PolicyTable solve_index(const Topology& topology, const Flow& flow, const RewardVector& rewards,
                               const PriceVector& prices, int horizon, const DpOptions& options = {}) {
  return evaluate_policy(StateSpace::build(topology, flow.source, Variant::index, options), topology, rewards,
                         prices, horizon);
}

// Stored argmax for a replica's current state; nullopt once the packet has expired.
inline std::optional<Decision> best_action(const PolicyTable& table, const PacketReplica& replica) {
  if (replica.remaining <= 0) return std::nullopt;
  DSR_EXPECTS(replica.remaining <= table.horizon(), "replica outlives the table horizon");
  DSR_EXPECTS(replica.delegated.contains(replica.holder), "holder must be in its delegated set");
  auto id = table.space().find(replica.holder, replica.delegated);
  DSR_EXPECTS(id.has_value(), "unknown policy state " + std::to_string(replica.holder) + " " +
                                  replica.delegated.to_string());
  return Decision{table.action(*id, replica.remaining), table.value(*id, replica.remaining)};
}

// One line per (state, tau): holder, set, tau, value, action.
inline void dump_policy(std::ostream& os, const PolicyTable& table) {
  char buf[64];
  os << "# variant=" << to_string(table.variant()) << " horizon=" << table.horizon()
     << " states=" << table.space().size() << "\n";
  for (std::uint32_t s = 0; s < table.space().size(); ++s) {
    const auto& st = table.space().state(s);
    for (int tau = 0; tau <= table.horizon(); ++tau) {
      std::snprintf(buf, sizeof buf, "%.12g", table.value(s, tau));
      os << st.holder << '\t' << st.set.to_string() << '\t' << tau << '\t' << buf << '\t';
      const Action a = table.action(s, tau);
      if (a.transmits()) os << "send " << a.receiver << ' ' << a.subset.to_string();
      else os << "keep";
      os << '\n';
    }
  }
}

}  // namespace dsr
