#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "dsr/dp_policy.hpp"
#include "dsr/dual_opt.hpp"
#include "dsr/experiment.hpp"
#include "dsr/scenario_io.hpp"
#include "dsr/simulator.hpp"
#include "dsr/verify.hpp"

namespace {

// CSV with a `link,lambda` header; links not listed keep price 0.
dsr::PriceVector read_prices(const std::string& path, std::size_t n_links) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  dsr::PriceVector prices(n_links, 0.0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("link", 0) == 0) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ','))
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 'link,lambda'");
    const std::size_t l = std::stoul(a);
    const double v = std::stod(b);
    if (l >= n_links || v < 0.0) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad link or price");
    prices[l] = v;
  }
  return prices;
}

int cmd_validate(const std::string& path) {
  const dsr::Topology t = dsr::load_scenario(path);
  const dsr::Topology full = dsr::materialize_gateways(t);
  std::cout << "ok: " << t.n_nodes << " nodes, " << t.links.size() << " links (+"
            << full.links.size() - t.links.size() << " gateway links), " << t.flows.size() << " flows\n";
  return 0;
}

int cmd_verify(const dsr::VerifyLimits& limits) {
  const auto report = dsr::verify(limits);
  for (const auto& p : report.properties) {
    std::cout << (p.passed ? "PASS " : "FAIL ") << p.name << " (" << p.checked << " checks)\n";
    if (!p.passed) std::cout << "counterexample:\n" << p.counterexample;
  }
  return report.passed() ? 0 : 1;
}

int cmd_run(const std::string& config_path) {
  const auto config = dsr::load_config(config_path);
  const auto out = dsr::run_experiment(config);
  std::cout << "wrote " << out.cells.size() << " cells to " << config.output_dir << "\n";
  return 0;
}

int cmd_dump(const std::string& scenario, int flow, const std::string& lambda_file, const std::string& variant,
             int deadline, bool no_prune) {
  const dsr::Topology t = dsr::materialize_gateways(dsr::load_scenario(scenario));
  if (flow < 0 || flow >= static_cast<int>(t.flows.size())) throw std::runtime_error("--flow out of range");
  dsr::Flow f = t.flows[flow];
  if (deadline > 0) f.deadline = deadline;
  const dsr::PriceVector prices =
      lambda_file.empty() ? dsr::PriceVector(t.links.size(), 0.0) : read_prices(lambda_file, t.links.size());
  const dsr::RewardVector rewards(t.n_nodes, 1.0);
  dsr::DpOptions options;
  options.prune = !no_prune;
  const auto table = variant == "index" ? dsr::solve_index(t, f, rewards, prices, f.deadline, options)
                                        : dsr::solve_relaxed(t, f, rewards, prices, f.deadline, options);
  dsr::dump_policy(std::cout, table);
  return 0;
}

int cmd_simulate(const std::string& scenario, const std::string& policy, std::int64_t slots, std::uint64_t seed,
                 const std::string& events_path) {
  const dsr::Topology t = dsr::materialize_gateways(dsr::load_scenario(scenario));
  const auto kind = dsr::parse_policy(policy);
  if (!kind) throw std::runtime_error("unknown policy '" + policy + "'");
  dsr::Simulator::TableSet tables;
  if (*kind == dsr::PolicyKind::dsr_relaxed || *kind == dsr::PolicyKind::index_dsr) {
    dsr::TableBuilder builder(t, *kind == dsr::PolicyKind::index_dsr ? dsr::Variant::index : dsr::Variant::relaxed, {});
    tables = builder.build(dsr::EpochState::initial(t, 0.5, slots));
  }
  dsr::SimOptions options;
  options.record_events = !events_path.empty();
  const auto result = dsr::simulate(t, *kind, tables, slots, seed, options);
  if (!events_path.empty()) {
    std::ofstream os(events_path);
    dsr::write_event_log(os, result.events);
  }
  std::vector<double> mu;
  for (dsr::NodeId n = 0; n < t.n_nodes; ++n)
    for (int f = 0; f < result.metrics.n_flows; ++f) mu.push_back(result.metrics.mu(n, f));
  std::cout << "slots " << result.metrics.slots << " total_utility " << dsr::total_utility(t, mu) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delegated-set routing simulator and optimizer"};
  app.require_subcommand(1);

  std::string path;
  auto* validate = app.add_subcommand("validate", "Parse and check a scenario file");
  validate->add_option("file", path, "Scenario file")->required();

  dsr::VerifyLimits limits;
  auto* verify = app.add_subcommand("verify", "Run the oracle, subgradient and invariant self-checks");
  verify->add_option("--max-nodes", limits.max_nodes, "Largest random instance")->check(CLI::Range(1, 5));
  verify->add_option("--max-horizon", limits.max_horizon, "Largest deadline")->check(CLI::Range(1, 4));
  verify->add_option("--instances", limits.instances, "Random instances per property")->check(CLI::PositiveNumber);
  verify->add_option("--seed", limits.seed, "Instance generator seed");

  std::string config;
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("config", config, "Config file")->required();

  std::string scenario, lambda_file, variant = "relaxed";
  int flow = 0, deadline = 0;
  bool no_prune = false;
  auto* dump = app.add_subcommand("dump-policy", "Print a policy table, one state per line");
  dump->add_option("scenario", scenario, "Scenario file")->required();
  dump->add_option("--flow", flow, "Flow index");
  dump->add_option("--lambda-file", lambda_file, "CSV of link,lambda");
  dump->add_option("--variant", variant, "relaxed or index")->check(CLI::IsMember({"relaxed", "index"}));
  dump->add_option("--deadline", deadline, "Override the flow deadline");
  dump->add_flag("--no-prune", no_prune, "Enumerate every delegable subset");

  std::string policy = "index-dsr", events;
  std::int64_t slots = 1000;
  std::uint64_t seed = 1;
  auto* sim = app.add_subcommand("simulate", "Simulate one policy at zero prices");
  sim->add_option("scenario", scenario, "Scenario file")->required();
  sim->add_option("--policy", policy, "dsr-relaxed, index-dsr, flood or random");
  sim->add_option("--slots", slots, "Slots to simulate");
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--events", events, "Write the slot event log here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(path);
    if (*verify) return cmd_verify(limits);
    if (*run) return cmd_run(config);
    if (*dump) return cmd_dump(scenario, flow, lambda_file, variant, deadline, no_prune);
    if (*sim) return cmd_simulate(scenario, policy, slots, seed, events);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
