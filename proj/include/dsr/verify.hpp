#pragma once

// Self-check suite behind `dsr verify`: DP vs. exhaustive oracle, the
// subgradient inequality of the dual, price-step direction, DP structural
// properties and simulator invariants, all on randomly drawn small instances.

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dsr/dp_policy.hpp"
#include "dsr/dual_opt.hpp"
#include "dsr/oracle.hpp"
#include "dsr/rng.hpp"
#include "dsr/scenario_io.hpp"
#include "dsr/simulator.hpp"

namespace dsr {

struct VerifyLimits {
  int max_nodes = 4;
  int max_horizon = 3;
  int instances = 200;
  int subgradient_instances = 50;
  int price_pairs = 20;
  std::uint64_t seed = 7;
  double tolerance = 1e-9;
};

// Seams for the routines under test; mutation tests swap these out.
struct VerifyHooks {
  std::function<double(const Topology&, const Flow&, const RewardVector&, const PriceVector&, int, Variant)> dp_root =
      [](const Topology& t, const Flow& f, const RewardVector& r, const PriceVector& p, int h, Variant v) {
        return v == Variant::relaxed ? solve_relaxed(t, f, r, p, h).root_value() : solve_index(t, f, r, p, h).root_value();
      };
  std::function<PriceVector(const PriceVector&, const std::vector<double>&, const std::vector<int>&, double)>
      price_step = projected_price_step;
};

struct PropertyOutcome {
  std::string name;
  bool passed = true;
  int checked = 0;
  std::string counterexample;
};

struct VerifyReport {
  std::vector<PropertyOutcome> properties;
  bool passed() const {
    for (const auto& p : properties)
      if (!p.passed) return false;
    return true;
  }
};

// Random instance: N in [1, max_nodes], each ordered pair linked with
// probability 0.6, P in [0.5, 1], T in {1..5}, one or two flows.
inline Topology random_instance(Rng& rng, int max_nodes, int max_horizon, int max_flows = 1) {
  Topology t;
  t.n_nodes = 1 + static_cast<int>(rng.below(max_nodes));
  for (NodeId a = 0; a < t.n_nodes; ++a) {
    for (NodeId b = 0; b < t.n_nodes; ++b) {
      if (a == b || !rng.bernoulli(0.6)) continue;
      const int cap = 1 + static_cast<int>(rng.below(5));
      const double p = 0.5 + 0.5 * rng.uniform();
      t.links.push_back(Link{static_cast<int>(t.links.size()), a, b, cap, p});
    }
  }
  const int flows = 1 + static_cast<int>(rng.below(max_flows));
  for (int f = 0; f < flows; ++f) {
    t.flows.push_back(Flow{f, static_cast<NodeId>(rng.below(t.n_nodes)), 0.5 + 1.5 * rng.uniform(),
                           1 + static_cast<int>(rng.below(max_horizon)), UtilityKind::linear});
  }
  return t;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

namespace detail {

inline std::string render_vector(const char* name, const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  os << name << " =";
  for (double x : v) os << ' ' << x;
  return os.str();
}

inline std::string instance_text(const Topology& t, const RewardVector& r, const PriceVector& p) {
  return serialize_scenario(t) + render_vector("rewards", r) + "\n" + render_vector("prices", p) + "\n";
}

}  // namespace detail

inline PropertyOutcome check_oracle_agreement(const VerifyLimits& lim, const VerifyHooks& hooks) {
  PropertyOutcome out{"dp matches exhaustive oracle"};
  Rng rng(lim.seed);
  const oracle::Limits olim{lim.max_nodes, lim.max_horizon};
  for (int i = 0; i < lim.instances && out.passed; ++i) {
    const Topology t = random_instance(rng, lim.max_nodes, lim.max_horizon);
    const RewardVector r = random_vector(rng, t.n_nodes, 0.0, 1.0);
    const PriceVector p = random_vector(rng, t.links.size(), 0.0, 2.0);
    const Flow& f = t.flows[0];
    for (Variant v : {Variant::relaxed, Variant::index}) {
      const double dp = hooks.dp_root(t, f, r, p, f.deadline, v);
      const double ex = oracle::enumerate_exact(t, f, r, p, f.deadline, v, olim);
      ++out.checked;
      if (std::abs(dp - ex) > lim.tolerance) {
        out.passed = false;
        std::ostringstream os;
        os.precision(17);
        os << to_string(v) << ": dp " << dp << " vs oracle " << ex << "\n" << detail::instance_text(t, r, p);
        out.counterexample = os.str();
        break;
      }
    }
  }
  return out;
}

// D(l') >= D(l) + sum_l (T_l - usage_l(l)) (l'_l - l_l) for linear utilities,
// with usage taken from the oracle's optimal strategy at l.
inline PropertyOutcome check_subgradient(const VerifyLimits& lim, const VerifyHooks& hooks) {
  PropertyOutcome out{"subgradient inequality of the dual"};
  Rng rng(lim.seed + 1);
  const oracle::Limits olim{lim.max_nodes, lim.max_horizon};
  for (int i = 0; i < lim.subgradient_instances && out.passed; ++i) {
    const Topology t = random_instance(rng, lim.max_nodes, lim.max_horizon, 2);
    const std::vector<RewardVector> rewards(t.flows.size(), RewardVector(t.n_nodes, 1.0));
    const auto dual = [&](const PriceVector& p) {
      double d = 0.0;
      for (const auto& f : t.flows) d += f.arrival_rate * hooks.dp_root(t, f, rewards[f.id], p, f.deadline, Variant::relaxed);
      for (const auto& l : t.links) d += p[l.id] * l.capacity;
      return d;
    };
    for (int k = 0; k < lim.price_pairs && out.passed; ++k) {
      const PriceVector lam = random_vector(rng, t.links.size(), 0.0, 2.0);
      const PriceVector lam2 = random_vector(rng, t.links.size(), 0.0, 2.0);
      std::vector<double> usage(t.links.size(), 0.0);
      for (const auto& f : t.flows) {
        const auto u = oracle::expected_usage(t, f, rewards[f.id], lam, f.deadline, olim);
        for (std::size_t l = 0; l < u.size(); ++l) usage[l] += f.arrival_rate * u[l];
      }
      double rhs = dual(lam);
      for (std::size_t l = 0; l < usage.size(); ++l) rhs += (t.links[l].capacity - usage[l]) * (lam2[l] - lam[l]);
      const double lhs = dual(lam2);
      ++out.checked;
      if (lhs < rhs - lim.tolerance) {
        out.passed = false;
        std::ostringstream os;
        os.precision(17);
        os << "D(lambda') = " << lhs << " < " << rhs << "\n"
           << serialize_scenario(t) << detail::render_vector("lambda", lam) << "\n"
           << detail::render_vector("lambda'", lam2) << "\n";
        out.counterexample = os.str();
      }
    }
  }
  return out;
}

// The price step must move against the capacity slack, never go negative and
// never move further than beta * |T - usage|.
inline PropertyOutcome check_price_step(const VerifyLimits& lim, const VerifyHooks& hooks) {
  PropertyOutcome out{"price update follows the projected subgradient"};
  Rng rng(lim.seed + 2);
  for (int i = 0; i < lim.instances && out.passed; ++i) {
    const std::size_t n = 1 + rng.below(6);
    const PriceVector lam = random_vector(rng, n, 0.0, 2.0);
    const std::vector<double> usage = random_vector(rng, n, 0.0, 6.0);
    std::vector<int> caps(n);
    for (auto& c : caps) c = 1 + static_cast<int>(rng.below(5));
    const double beta = 0.01 + rng.uniform();
    const PriceVector next = hooks.price_step(lam, usage, caps, beta);
    for (std::size_t l = 0; l < n; ++l) {
      ++out.checked;
      const double slack = caps[l] - usage[l];
      const double move = next[l] - lam[l];
      const bool ok = next[l] >= 0.0 && (slack <= 0.0 || move <= 1e-12) && (slack >= 0.0 || move >= -1e-12) &&
                      std::abs(move) <= beta * std::abs(slack) + 1e-12;
      if (!ok) {
        out.passed = false;
        std::ostringstream os;
        os.precision(17);
        os << "link " << l << ": lambda " << lam[l] << " -> " << next[l] << " with T " << caps[l] << ", usage "
           << usage[l] << ", beta " << beta << "\n";
        out.counterexample = os.str();
        break;
      }
    }
  }
  return out;
}

// Monotonicity in tau and in the delegated set, the reward-sum bound and
// relaxed >= index, over every stored state.
inline PropertyOutcome check_dp_structure(const VerifyLimits& lim) {
  PropertyOutcome out{"dp value monotonicity and bounds"};
  Rng rng(lim.seed + 3);
  const int horizon_cap = lim.max_horizon + 1;
  for (int i = 0; i < lim.instances && out.passed; ++i) {
    const Topology t = random_instance(rng, lim.max_nodes + 1, horizon_cap);
    const RewardVector r = random_vector(rng, t.n_nodes, 0.0, 1.0);
    const PriceVector p = random_vector(rng, t.links.size(), 0.0, 2.0);
    const Flow& f = t.flows[0];
    const PolicyTable relaxed = solve_relaxed(t, f, r, p, f.deadline);
    const PolicyTable index = solve_index(t, f, r, p, f.deadline);
    const auto fail = [&](const std::string& what) {
      out.passed = false;
      out.counterexample = what + "\n" + detail::instance_text(t, r, p);
    };
    for (std::uint32_t s = 0; s < relaxed.space().size() && out.passed; ++s) {
      const auto& st = relaxed.space().state(s);
      double bound = 0.0;
      for (NodeId k : st.set) bound += r[k];
      for (int tau = 0; tau <= relaxed.horizon() && out.passed; ++tau) {
        ++out.checked;
        const double w = relaxed.value(s, tau);
        if (tau > 0 && w < relaxed.value(s, tau - 1) - 1e-12) fail("value decreases in tau");
        else if (w < -1e-12 || w > bound + 1e-9) fail("value outside [0, sum of rewards]");
        else if (auto wi = index.value_at(st.holder, st.set, tau); wi && *wi > w + 1e-9) fail("index value exceeds relaxed");
        for (NodeId k = 0; k < t.n_nodes && out.passed; ++k) {
          if (st.set.contains(k)) continue;
          auto bigger = relaxed.value_at(st.holder, st.set.with(k), tau);
          if (bigger && *bigger < w - 1e-12) fail("value decreases when the delegated set grows");
        }
      }
    }
  }
  return out;
}

// Short runs of every policy: partition invariant (checked inside the
// simulator), hard caps for capped policies, determinism.
inline PropertyOutcome check_simulation(const VerifyLimits& lim) {
  PropertyOutcome out{"simulator invariants"};
  Rng rng(lim.seed + 4);
  const int runs = std::max(1, lim.instances / 10);
  for (int i = 0; i < runs && out.passed; ++i) {
    const Topology t = random_instance(rng, std::max(lim.max_nodes, 6), lim.max_horizon + 2, 2);
    EpochState st = EpochState::initial(t, 0.5, 200);
    for (auto& l : st.lambda) l = rng.uniform();
    for (PolicyKind kind : {PolicyKind::dsr_relaxed, PolicyKind::index_dsr, PolicyKind::flood, PolicyKind::random}) {
      Simulator::TableSet tables;
      if (kind == PolicyKind::dsr_relaxed || kind == PolicyKind::index_dsr) {
        TableBuilder builder(t, kind == PolicyKind::index_dsr ? Variant::index : Variant::relaxed, {});
        tables = builder.build(st);
      }
      const std::uint64_t seed = rng.below(1u << 30);
      try {
        const auto a = simulate(t, kind, tables, 200, seed).metrics;
        const auto b = simulate(t, kind, tables, 200, seed).metrics;
        ++out.checked;
        std::string problem;
        if (!(a == b)) problem = "nondeterministic metrics";
        if (a.partition_checks != 200) problem = "partition not checked every slot";
        if (kind != PolicyKind::dsr_relaxed)
          for (const auto& l : t.links)
            if (a.max_slot_usage(l.id) > static_cast<std::size_t>(l.capacity)) problem = "per-slot capacity exceeded";
        if (!problem.empty()) {
          out.passed = false;
          out.counterexample = std::string(to_string(kind)) + ": " + problem + "\n" + serialize_scenario(t);
        }
      } catch (const ContractError& e) {
        out.passed = false;
        out.counterexample = std::string(to_string(kind)) + ": " + e.what() + "\n" + serialize_scenario(t);
      }
      if (!out.passed) break;
    }
  }
  return out;
}

inline VerifyReport verify(const VerifyLimits& lim = {}, const VerifyHooks& hooks = {}) {
  VerifyReport report;
  report.properties.push_back(check_oracle_agreement(lim, hooks));
  report.properties.push_back(check_subgradient(lim, hooks));
  report.properties.push_back(check_price_step(lim, hooks));
  report.properties.push_back(check_dp_structure(lim));
  report.properties.push_back(check_simulation(lim));
  return report;
}

}  // namespace dsr
