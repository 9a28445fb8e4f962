#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dsr/dual_opt.hpp"
#include "dsr/scenario_io.hpp"

namespace dsr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string topology_path;
  std::vector<PolicyKind> policies{PolicyKind::dsr_relaxed};
  std::vector<UtilityKind> utilities{UtilityKind::linear};
  std::vector<int> deadlines;  // empty: keep each flow's own deadline
  int epochs = 100;
  std::int64_t epoch_len = 2000;
  double beta0 = 0.5;
  int inner_epochs = 1;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  bool count_source = true;
  unsigned threads = 0;  // 0: hardware concurrency
};

inline std::vector<std::string> validate_config(const ExperimentConfig& c, const Topology& t) {
  std::vector<std::string> errs;
  if (c.seeds.empty()) errs.push_back("seeds must be nonempty");
  if (c.policies.empty()) errs.push_back("policies must be nonempty");
  if (c.utilities.empty()) errs.push_back("utility must be nonempty");
  if (c.epochs < 0) errs.push_back("epochs must be >= 0");
  if (c.beta0 < 0) errs.push_back("beta0 must be >= 0");
  if (c.inner_epochs < 1) errs.push_back("inner_epochs must be >= 1");
  int max_deadline = 1;
  for (int d : c.deadlines) {
    if (d < 1) errs.push_back("deadlines must be >= 1");
    max_deadline = std::max(max_deadline, d);
  }
  if (c.deadlines.empty())
    for (const auto& f : t.flows) max_deadline = std::max(max_deadline, f.deadline);
  if (c.epoch_len < 50LL * max_deadline)
    errs.push_back("epoch_len must be >= 50 * max deadline (" + std::to_string(50 * max_deadline) + ")");
  return errs;
}

// Reads a JSON config. Relative topology and output paths are resolved
// against the config file's directory.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  ExperimentConfig c;
  const auto as_list = [](const nlohmann::json& v) { return v.is_array() ? v : nlohmann::json::array({v}); };
  try {
    c.topology_path = j.at("topology").get<std::string>();
    std::filesystem::path tp(c.topology_path);
    if (tp.is_relative()) c.topology_path = (std::filesystem::path(path).parent_path() / tp).string();
    if (j.contains("policies") || j.contains("policy")) {
      c.policies.clear();
      for (const auto& p : as_list(j.contains("policies") ? j["policies"] : j["policy"])) {
        auto k = parse_policy(p.get<std::string>());
        if (!k) throw ConfigError(path + ": unknown policy '" + p.get<std::string>() + "'");
        c.policies.push_back(*k);
      }
    }
    if (j.contains("utility")) {
      c.utilities.clear();
      for (const auto& u : as_list(j["utility"])) {
        auto k = parse_utility(u.get<std::string>());
        if (!k) throw ConfigError(path + ": unknown utility '" + u.get<std::string>() + "'");
        c.utilities.push_back(*k);
      }
    }
    if (j.contains("deadlines")) c.deadlines = as_list(j["deadlines"]).get<std::vector<int>>();
    if (j.contains("deadline")) c.deadlines = as_list(j["deadline"]).get<std::vector<int>>();
    c.epochs = j.value("epochs", c.epochs);
    c.epoch_len = j.value("epoch_len", c.epoch_len);
    c.beta0 = j.value("beta0", c.beta0);
    c.inner_epochs = j.value("inner_epochs", c.inner_epochs);
    if (j.contains("seeds")) c.seeds = as_list(j["seeds"]).get<std::vector<std::uint64_t>>();
    c.output_dir = j.value("output", c.output_dir);
    if (std::filesystem::path(c.output_dir).is_relative())
      c.output_dir = (std::filesystem::path(path).parent_path() / c.output_dir).string();
    c.count_source = j.value("count_source", c.count_source);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

struct CellResult {
  PolicyKind policy;
  UtilityKind utility;
  int deadline;
  std::uint64_t seed;
  DualReport report;
};

// Topology used for one (utility, deadline) cell.
inline Topology cell_topology(const Topology& base, UtilityKind utility, int deadline) {
  Topology t = materialize_gateways(base);
  for (auto& f : t.flows) {
    f.utility = utility;
    if (deadline > 0) f.deadline = deadline;
  }
  return t;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

inline std::string summary_header(const Topology& t) {
  std::string h = "policy,utility_kind,deadline,seed,total_utility";
  for (NodeId n = 0; n < t.n_nodes; ++n)
    for (std::size_t f = 0; f < t.flows.size(); ++f) h += ",mu_n" + std::to_string(n) + "_f" + std::to_string(f);
  for (std::size_t l = 0; l < t.links.size(); ++l) h += ",usage_l" + std::to_string(l);
  return h;
}

inline std::string trace_header(const Topology& t) {
  std::string h = "policy,utility_kind,deadline,seed,epoch,utility,lagrangian";
  for (std::size_t l = 0; l < t.links.size(); ++l) h += ",lambda_l" + std::to_string(l);
  return h;
}

struct ExperimentOutput {
  std::vector<CellResult> cells;
  std::string summary_csv;
  std::string trace_csv;
  std::string by_deadline_csv;
};

// Runs every (policy, utility, deadline, seed) cell and renders the CSVs in
// cell order. Cells are independent and may run on several threads.
inline ExperimentOutput run_cells(const ExperimentConfig& config, const Topology& base) {
  const Topology shape = materialize_gateways(base);
  std::vector<int> deadlines = config.deadlines;
  if (deadlines.empty()) deadlines.push_back(0);

  std::vector<CellResult> cells;
  if (config.epochs > 0) {
    for (auto p : config.policies)
      for (auto u : config.utilities)
        for (int d : deadlines)
          for (auto s : config.seeds) cells.push_back(CellResult{p, u, d, s, {}});
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        CellResult& c = cells[i];
        DualOptions o;
        o.policy = c.policy;
        o.epochs = config.epochs;
        o.epoch_len = config.epoch_len;
        o.beta0 = config.beta0;
        o.inner_epochs = config.inner_epochs;
        o.seed = c.seed;
        o.sim.count_source = config.count_source;
        c.report = optimize(cell_topology(base, c.utility, c.deadline), o);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned n_threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, std::max<std::size_t>(1, cells.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  ExperimentOutput out;
  std::ostringstream summary, trace, by_deadline;
  summary << summary_header(shape) << "\n";
  trace << trace_header(shape) << "\n";
  by_deadline << "policy,utility_kind,deadline,seeds,mean_total_utility,stderr\n";
  for (const auto& c : cells) {
    const int deadline = c.deadline > 0 ? c.deadline : (shape.flows.empty() ? 0 : shape.flows[0].deadline);
    const std::string key = std::string(to_string(c.policy)) + "," + to_string(c.utility) + "," +
                            std::to_string(deadline) + "," + std::to_string(c.seed);
    const auto& st = c.report.final_state;
    summary << key << "," << detail::fmt(c.report.utility_trace.empty() ? 0.0 : c.report.utility_trace.back());
    for (double v : st.mu) summary << "," << detail::fmt(v);
    for (int l = 0; l < st.n_links; ++l) summary << "," << detail::fmt(st.link_usage(l));
    summary << "\n";
    for (std::size_t e = 0; e < c.report.utility_trace.size(); ++e) {
      trace << key << "," << e + 1 << "," << detail::fmt(c.report.utility_trace[e]) << ","
            << detail::fmt(c.report.lagrangian_trace[e]);
      for (double v : c.report.lambda_trace[e]) trace << "," << detail::fmt(v);
      trace << "\n";
    }
  }
  // Mean utility over seeds per (policy, utility, deadline), in cell order.
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    std::vector<double> u;
    while (j < cells.size() && cells[j].policy == cells[i].policy && cells[j].utility == cells[i].utility &&
           cells[j].deadline == cells[i].deadline) {
      u.push_back(cells[j].report.utility_trace.empty() ? 0.0 : cells[j].report.utility_trace.back());
      ++j;
    }
    double mean = 0.0, var = 0.0;
    for (double v : u) mean += v / u.size();
    for (double v : u) var += (v - mean) * (v - mean) / std::max<std::size_t>(1, u.size() - 1);
    const int deadline = cells[i].deadline > 0 ? cells[i].deadline : (shape.flows.empty() ? 0 : shape.flows[0].deadline);
    by_deadline << to_string(cells[i].policy) << "," << to_string(cells[i].utility) << "," << deadline << ","
                << u.size() << "," << detail::fmt(mean) << "," << detail::fmt(std::sqrt(var / u.size())) << "\n";
    i = j;
  }
  out.cells = std::move(cells);
  out.summary_csv = summary.str();
  out.trace_csv = trace.str();
  out.by_deadline_csv = by_deadline.str();
  return out;
}

// Writes summary.csv, trace.csv and utility_by_deadline.csv to the output directory.
inline ExperimentOutput run_experiment(const ExperimentConfig& config) {
  const Topology base = load_scenario(config.topology_path);
  const auto errs = validate_config(config, base);
  if (!errs.empty()) {
    std::string msg = "invalid config";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  namespace fs = std::filesystem;
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  {
    const fs::path probe = dir / ".write_probe";
    std::ofstream test(probe);
    if (!test) throw ConfigError("output directory " + dir.string() + " is not writable");
    test.close();
    fs::remove(probe, ec);
  }
  ExperimentOutput out = run_cells(config, base);
  const auto write = [&](const char* name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    f << body;
    if (!f) throw ConfigError("failed writing " + (dir / name).string());
  };
  write("summary.csv", out.summary_csv);
  write("trace.csv", out.trace_csv);
  write("utility_by_deadline.csv", out.by_deadline_csv);
  return out;
}

}  // namespace dsr
