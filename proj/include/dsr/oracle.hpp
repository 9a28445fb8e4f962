#pragma once

// Exhaustive reference for the per-packet optimum. Works on the joint state of
// every holder of one packet (the full partition of the node set) and searches
// all joint actions and all outcome branches, so it shares no structure with
// the per-holder recursion in dp_policy.hpp.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dsr/dp_policy.hpp"
#include "dsr/model.hpp"

namespace dsr::oracle {

struct Limits {
  int max_nodes = 4;
  int max_horizon = 3;
};

class LimitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Result {
  double value = 0.0;
  std::vector<double> usage;  // expected transmissions per link
};

namespace detail {

struct Holding {
  NodeId holder;
  NodeSet set;
};

struct Option {
  int link = -1;  // -1: keep
  NodeId receiver = -1;
  NodeSet subset;
};

class Search {
 public:
  Search(const Topology& t, const RewardVector& rewards, const PriceVector& prices, Variant variant)
      : t_(t), rewards_(rewards), prices_(prices), variant_(variant) {}

  Result solve(std::vector<Holding> holdings, int tau) const {
    Result out;
    out.usage.assign(t_.links.size(), 0.0);
    if (tau == 0) {
      for (const auto& h : holdings) out.value += rewards_[h.holder];
      return out;
    }
    std::vector<std::vector<Option>> per_holder;
    per_holder.reserve(holdings.size());
    for (const auto& h : holdings) per_holder.push_back(options_for(h));

    std::vector<std::size_t> pick(holdings.size(), 0);
    bool have_best = false;
    while (true) {
      Result r = evaluate(holdings, per_holder, pick, tau);
      if (!have_best || r.value > out.value + kTieTolerance) {
        out = std::move(r);
        have_best = true;
      }
      // Advance the mixed-radix counter; the last holder varies fastest.
      std::size_t i = holdings.size();
      while (i > 0) {
        --i;
        if (++pick[i] < per_holder[i].size()) break;
        pick[i] = 0;
        if (i == 0) return out;
      }
      if (holdings.empty()) return out;
    }
  }

 private:
  std::vector<Option> options_for(const Holding& h) const {
    std::vector<Option> sends;
    const NodeSet others = h.set.without(h.holder);
    for (std::size_t l = 0; l < t_.links.size(); ++l) {
      const Link& link = t_.links[l];
      if (link.tx != h.holder || !others.contains(link.rx)) continue;
      const std::uint64_t rest = others.without(link.rx).bits();
      std::uint64_t sub = rest;
      while (true) {
        sends.push_back(Option{static_cast<int>(l), link.rx, NodeSet(sub).with(link.rx)});
        if (sub == 0) break;
        sub = (sub - 1) & rest;
      }
    }
    std::sort(sends.begin(), sends.end(), [](const Option& a, const Option& b) {
      if (a.receiver != b.receiver) return a.receiver < b.receiver;
      if (a.subset.size() != b.subset.size()) return a.subset.size() < b.subset.size();
      return a.subset.bits() < b.subset.bits();
    });
    std::vector<Option> out;
    if (variant_ == Variant::relaxed || sends.empty()) out.push_back(Option{});
    out.insert(out.end(), sends.begin(), sends.end());
    return out;
  }

  Result evaluate(const std::vector<Holding>& holdings, const std::vector<std::vector<Option>>& per_holder,
                  const std::vector<std::size_t>& pick, int tau) const {
    Result out;
    out.usage.assign(t_.links.size(), 0.0);
    std::vector<std::size_t> senders;
    for (std::size_t i = 0; i < holdings.size(); ++i) {
      const Option& o = per_holder[i][pick[i]];
      if (o.link < 0) continue;
      senders.push_back(i);
      out.value -= prices_[o.link];
      out.usage[o.link] += 1.0;
    }
    const std::size_t outcomes = std::size_t{1} << senders.size();
    for (std::size_t mask = 0; mask < outcomes; ++mask) {
      double prob = 1.0;
      std::vector<Holding> next = holdings;
      for (std::size_t k = 0; k < senders.size(); ++k) {
        const std::size_t i = senders[k];
        const Option& o = per_holder[i][pick[i]];
        const double p = t_.links[o.link].reliability;
        if ((mask >> k) & 1u) {
          prob *= p;
          next[i].set -= o.subset;
          next.push_back(Holding{o.receiver, o.subset});
        } else {
          prob *= 1.0 - p;
        }
      }
      if (prob == 0.0) continue;
      std::sort(next.begin(), next.end(), [](const Holding& a, const Holding& b) { return a.holder < b.holder; });
      const Result child = solve(std::move(next), tau - 1);
      out.value += prob * child.value;
      for (std::size_t l = 0; l < out.usage.size(); ++l) out.usage[l] += prob * child.usage[l];
    }
    return out;
  }

  const Topology& t_;
  const RewardVector& rewards_;
  const PriceVector& prices_;
  Variant variant_;
};

inline void check_limits(const Topology& t, int horizon, const Limits& limits) {
  if (t.n_nodes > limits.max_nodes || horizon > limits.max_horizon) {
    throw LimitError("oracle refuses instance: needs N <= " + std::to_string(limits.max_nodes) +
                     " and horizon <= " + std::to_string(limits.max_horizon) + ", got N = " +
                     std::to_string(t.n_nodes) + ", horizon = " + std::to_string(horizon));
  }
}

}  // namespace detail

// Best expected (delivered reward - price paid) for one packet of `flow`,
// over every history-dependent strategy of its holders.
inline Result solve_exact(const Topology& topology, const Flow& flow, const RewardVector& rewards,
                          const PriceVector& prices, int horizon, Variant variant, const Limits& limits = {}) {
  detail::check_limits(topology, horizon, limits);
  DSR_EXPECTS(horizon >= 0, "horizon must be >= 0");
  DSR_EXPECTS(rewards.size() == static_cast<std::size_t>(topology.n_nodes), "one reward per node");
  DSR_EXPECTS(prices.size() == topology.links.size(), "one price per link");
  detail::Search search(topology, rewards, prices, variant);
  return search.solve({detail::Holding{flow.source, topology.all_nodes()}}, horizon);
}

inline double enumerate_exact(const Topology& topology, const Flow& flow, const RewardVector& rewards,
                              const PriceVector& prices, int horizon, Variant variant, const Limits& limits = {}) {
  return solve_exact(topology, flow, rewards, prices, horizon, variant, limits).value;
}

// Expected per-packet transmissions on each link under the relaxed optimum.
inline std::vector<double> expected_usage(const Topology& topology, const Flow& flow, const RewardVector& rewards,
                                          const PriceVector& prices, int horizon, const Limits& limits = {}) {
  return solve_exact(topology, flow, rewards, prices, horizon, Variant::relaxed, limits).usage;
}

}  // namespace dsr::oracle
