#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dsr/dp_policy.hpp"
#include "dsr/model.hpp"
#include "dsr/simulator.hpp"

namespace dsr {

// Running round-robin averages of the epoch-wise policy plus current prices.
struct EpochState {
  int k = 1;  // index of the epoch about to run
  int n_nodes = 0;
  int n_flows = 0;
  int n_links = 0;
  std::vector<double> mu;   // [n * n_flows + f], packets per slot
  std::vector<double> eps;  // [l * n_flows + f], transmissions per slot
  PriceVector lambda;
  double beta0 = 0.5;
  std::int64_t epoch_len = 2000;

  static EpochState initial(const Topology& t, double beta0, std::int64_t epoch_len) {
    EpochState s;
    s.n_nodes = t.n_nodes;
    s.n_flows = static_cast<int>(t.flows.size());
    s.n_links = static_cast<int>(t.links.size());
    s.mu.assign(static_cast<std::size_t>(s.n_nodes) * s.n_flows, 0.0);
    s.eps.assign(static_cast<std::size_t>(s.n_links) * s.n_flows, 0.0);
    s.lambda.assign(s.n_links, 0.0);
    s.beta0 = beta0;
    s.epoch_len = epoch_len;
    return s;
  }

  double step_size() const { return beta0 / k; }

  double link_usage(int l) const {
    double sum = 0.0;
    for (int f = 0; f < n_flows; ++f) sum += eps[l * n_flows + f];
    return sum;
  }
};

inline RewardVector gradient_rewards(const EpochState& state, const Flow& flow) {
  RewardVector r(state.n_nodes);
  for (NodeId n = 0; n < state.n_nodes; ++n)
    r[n] = utility_derivative(flow.utility, state.mu[n * state.n_flows + flow.id]);
  return r;
}

// Projected subgradient step: lambda <- [lambda - beta (T - usage)]^+.
inline PriceVector projected_price_step(const PriceVector& lambda, const std::vector<double>& usage,
                                        const std::vector<int>& capacities, double beta) {
  DSR_EXPECTS(lambda.size() == usage.size() && usage.size() == capacities.size(), "one entry per link");
  PriceVector next(lambda.size());
  for (std::size_t l = 0; l < lambda.size(); ++l) {
    DSR_EXPECTS(usage[l] >= 0.0, "usage must be nonnegative");
    next[l] = std::max(0.0, lambda[l] - beta * (capacities[l] - usage[l]));
  }
  return next;
}

inline PriceVector update_prices(const EpochState& state, const std::vector<double>& usage,
                                 const std::vector<int>& capacities) {
  return projected_price_step(state.lambda, usage, capacities, state.step_size());
}

inline std::vector<int> capacities_of(const Topology& t) {
  std::vector<int> c;
  c.reserve(t.links.size());
  for (const auto& l : t.links) c.push_back(l.capacity);
  return c;
}

inline double total_utility(const Topology& t, const std::vector<double>& mu) {
  const int n_flows = static_cast<int>(t.flows.size());
  double u = 0.0;
  for (NodeId n = 0; n < t.n_nodes; ++n)
    for (int f = 0; f < n_flows; ++f) u += utility_value(t.flows[f].utility, mu[n * n_flows + f]);
  return u;
}

struct EpochMeasurement {
  std::vector<double> mu;      // [n * n_flows + f]
  std::vector<double> eps;     // [l * n_flows + f]
  std::vector<double> usage;   // [l], summed over flows
  std::vector<double> demand;  // [l], positive-value candidates per slot (index policy)
  Metrics metrics;
};

inline EpochMeasurement measure(const Metrics& m) {
  EpochMeasurement out;
  for (NodeId n = 0; n < m.n_nodes; ++n)
    for (int f = 0; f < m.n_flows; ++f) out.mu.push_back(m.mu(n, f));
  for (int l = 0; l < m.n_links; ++l) {
    for (int f = 0; f < m.n_flows; ++f) out.eps.push_back(m.eps(l, f));
    out.usage.push_back(m.link_usage(l));
    out.demand.push_back(m.link_demand(l));
  }
  out.metrics = m;
  return out;
}

// Runs one epoch of `epoch_len` slots on a live simulator.
inline EpochMeasurement run_epoch(Simulator& sim, PolicyKind kind, Simulator::TableSet tables, std::int64_t epoch_len) {
  sim.set_policy(kind, std::move(tables));
  return measure(sim.run(epoch_len));
}

// Standalone epoch from an empty network.
inline EpochMeasurement run_epoch(const Topology& topology, const EpochState& state, PolicyKind kind,
                                  Simulator::TableSet tables, std::uint64_t seed, SimOptions options = {}) {
  Simulator sim(topology, seed, options);
  return run_epoch(sim, kind, std::move(tables), state.epoch_len);
}

// Folds one epoch into the running averages with weight 1/k.
inline void fold_epoch(EpochState& state, const EpochMeasurement& m) {
  const double w = 1.0 / state.k;
  for (std::size_t i = 0; i < state.mu.size(); ++i) state.mu[i] = std::max(0.0, state.mu[i] + w * (m.mu[i] - state.mu[i]));
  for (std::size_t i = 0; i < state.eps.size(); ++i) state.eps[i] = std::max(0.0, state.eps[i] + w * (m.eps[i] - state.eps[i]));
}

struct DualOptions {
  PolicyKind policy = PolicyKind::dsr_relaxed;
  int epochs = 100;
  std::int64_t epoch_len = 2000;
  double beta0 = 0.5;
  std::uint64_t seed = 1;
  // Epochs run at fixed prices between two price updates. 1 interleaves
  // policy and price steps; larger values approximate solving the inner
  // problem before each subgradient step.
  int inner_epochs = 1;
  DpOptions dp;
  SimOptions sim;
};

struct DualReport {
  std::vector<double> lagrangian_trace;
  std::vector<PriceVector> lambda_trace;  // prices in force during each epoch
  std::vector<double> utility_trace;
  EpochState final_state;
  std::vector<std::size_t> max_slot_usage;  // per link, over the whole run
  std::uint64_t partition_checks = 0;
  std::int64_t slots = 0;
};

// Builds (and caches) the per-flow state spaces, then re-evaluates tables.
class TableBuilder {
 public:
  TableBuilder(const Topology& t, Variant variant, DpOptions options) : t_(t), variant_(variant), options_(options) {}

  Simulator::TableSet build(const EpochState& state) {
    Simulator::TableSet tables;
    for (const Flow& f : t_.flows) {
      auto& space = spaces_[f.source];
      if (!space) space = StateSpace::build(t_, f.source, variant_, options_);
      tables.push_back(std::make_shared<const PolicyTable>(
          evaluate_policy(space, t_, gradient_rewards(state, f), state.lambda, f.deadline)));
    }
    return tables;
  }

 private:
  const Topology& t_;
  Variant variant_;
  DpOptions options_;
  std::map<NodeId, std::shared_ptr<const StateSpace>> spaces_;
};

// Epoch loop: rewards from running averages -> per-flow tables -> simulate
// one epoch -> fold measurements -> subgradient price step. Baseline
// policies go through the same loop with prices pinned at zero.
inline DualReport optimize(const Topology& topology, const DualOptions& options) {
  DSR_EXPECTS(options.epochs >= 0 && options.epoch_len >= 1, "need epochs >= 0 and epoch_len >= 1");
  DSR_EXPECTS(options.inner_epochs >= 1, "inner_epochs must be >= 1");
  DSR_EXPECTS(options.beta0 >= 0.0, "beta0 must be nonnegative");
  const bool uses_dp = options.policy == PolicyKind::dsr_relaxed || options.policy == PolicyKind::index_dsr;
  const Variant variant = options.policy == PolicyKind::index_dsr ? Variant::index : Variant::relaxed;
  const auto capacities = capacities_of(topology);

  DualReport report;
  report.final_state = EpochState::initial(topology, options.beta0, options.epoch_len);
  report.max_slot_usage.assign(topology.links.size(), 0);
  EpochState& state = report.final_state;
  Simulator sim(topology, options.seed, options.sim);
  TableBuilder builder(topology, variant, options.dp);

  int outer_k = 1;
  std::vector<double> pending_usage(topology.links.size(), 0.0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Simulator::TableSet tables;
    if (uses_dp) tables = builder.build(state);
    const EpochMeasurement m = run_epoch(sim, options.policy, std::move(tables), options.epoch_len);
    fold_epoch(state, m);

    report.partition_checks += m.metrics.partition_checks;
    report.slots += m.metrics.slots;
    for (std::size_t l = 0; l < topology.links.size(); ++l)
      report.max_slot_usage[l] = std::max(report.max_slot_usage[l], m.metrics.max_slot_usage(static_cast<int>(l)));

    const double utility = total_utility(topology, state.mu);
    double lagrangian = utility;
    for (int l = 0; l < state.n_links; ++l) lagrangian -= state.lambda[l] * (state.link_usage(l) - capacities[l]);
    report.utility_trace.push_back(utility);
    report.lagrangian_trace.push_back(lagrangian);
    report.lambda_trace.push_back(state.lambda);

    const auto& observed = options.policy == PolicyKind::index_dsr ? m.demand : m.usage;
    for (std::size_t l = 0; l < pending_usage.size(); ++l) pending_usage[l] += observed[l] / options.inner_epochs;
    if (uses_dp && (epoch + 1) % options.inner_epochs == 0) {
      state.lambda = projected_price_step(state.lambda, pending_usage, capacities, options.beta0 / outer_k);
      std::fill(pending_usage.begin(), pending_usage.end(), 0.0);
      ++outer_k;
    }
    ++state.k;
  }
  return report;
}

class UtilityKindError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Closed-form dual objective when every marginal utility is a constant:
// sum_f A_f W_f(s_f, all nodes, D_f) + sum_l lambda_l T_l.
inline double dual_value_exact(const Topology& topology, const PriceVector& prices,
                               const std::vector<RewardVector>& rewards, const DpOptions& options = {}) {
  DSR_EXPECTS(rewards.size() == topology.flows.size(), "one reward vector per flow");
  DSR_EXPECTS(prices.size() == topology.links.size(), "one price per link");
  double d = 0.0;
  for (std::size_t f = 0; f < topology.flows.size(); ++f) {
    const Flow& flow = topology.flows[f];
    if (flow.utility != UtilityKind::linear)
      throw UtilityKindError("dual_value_exact needs constant marginal utilities; flow " + std::to_string(f) +
                             " is logarithmic");
    if (flow.arrival_rate == 0.0) continue;
    d += flow.arrival_rate * solve_relaxed(topology, flow, rewards[f], prices, flow.deadline, options).root_value();
  }
  for (std::size_t l = 0; l < topology.links.size(); ++l) d += prices[l] * topology.links[l].capacity;
  return d;
}

// Epoch i (1-based) uses the first policy iff floor(a i) > floor(a (i - 1)).
inline std::vector<int> time_share_schedule(double a, int epochs) {
  std::vector<int> which;
  for (int i = 1; i <= epochs; ++i) {
    const auto now = static_cast<long>(std::floor(a * i + 1e-12));
    const auto before = static_cast<long>(std::floor(a * (i - 1) + 1e-12));
    which.push_back(now > before ? 0 : 1);
  }
  return which;
}

}  // namespace dsr
