#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsr/experiment.hpp"
#include "dsr/scenario_io.hpp"
#include "dsr/verify.hpp"

namespace dsr {
namespace {

namespace fs = std::filesystem;

std::string scenario(const char* name) { return std::string(DSR_SCENARIO_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dsr_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool same_topology(const Topology& a, const Topology& b) {
  if (a.n_nodes != b.n_nodes || a.gateways != b.gateways || a.links.size() != b.links.size() ||
      a.flows.size() != b.flows.size())
    return false;
  for (std::size_t i = 0; i < a.links.size(); ++i) {
    const auto &x = a.links[i], &y = b.links[i];
    if (x.id != y.id || x.tx != y.tx || x.rx != y.rx || x.capacity != y.capacity || x.reliability != y.reliability)
      return false;
  }
  for (std::size_t i = 0; i < a.flows.size(); ++i) {
    const auto &x = a.flows[i], &y = b.flows[i];
    if (x.source != y.source || x.arrival_rate != y.arrival_rate || x.deadline != y.deadline) return false;
  }
  return true;
}

TEST(Scenario, BundledScenarioOne) {
  const Topology t = load_scenario(scenario("scenario1.txt"));
  EXPECT_EQ(t.n_nodes, 11);
  EXPECT_EQ(t.gateways.size(), 2);
  ASSERT_EQ(t.flows.size(), 2u);
  EXPECT_EQ(t.flows[0].arrival_rate, 1.5);
  EXPECT_EQ(t.flows[1].arrival_rate, 2.0);
  EXPECT_TRUE(validate_topology(t).empty());
  for (const auto& l : t.links) {
    EXPECT_GE(l.reliability, 0.5);
    EXPECT_LE(l.capacity, 5);
  }
}

TEST(Scenario, BundledScenarioTwo) {
  const Topology t = load_scenario(scenario("scenario2.txt"));
  EXPECT_EQ(t.n_nodes, 18);
  EXPECT_EQ(t.gateways.size(), 9);
  EXPECT_TRUE(validate_topology(materialize_gateways(t)).empty());
}

TEST(Scenario, RoundTrip) {
  for (const char* name : {"scenario1.txt", "scenario2.txt"}) {
    const Topology a = load_scenario(scenario(name));
    std::istringstream in(serialize_scenario(a));
    const Topology b = parse_scenario(in);
    EXPECT_TRUE(same_topology(a, b)) << name;
  }
  Topology odd;
  odd.n_nodes = 2;
  odd.links.push_back(Link{0, 0, 1, 1, 0.1 + 0.2});
  odd.flows.push_back(Flow{0, 0, 1.0 / 3.0, 2, UtilityKind::linear});
  std::istringstream in(serialize_scenario(odd));
  EXPECT_TRUE(same_topology(odd, parse_scenario(in)));
}

TEST(Scenario, EmptyFileIsAnError) {
  std::istringstream in("");
  EXPECT_THROW(parse_scenario(in, "empty.txt"), ParseError);
  std::istringstream comments("# nothing here\n\n");
  EXPECT_THROW(parse_scenario(comments, "c.txt"), ParseError);
}

TEST(Scenario, MalformedLineNamesLineAndGrammar) {
  std::istringstream in("nodes 3\nlink 0 1 2 0.9\nlink 1 2 x 0.9\n");
  try {
    parse_scenario(in, "bad.txt");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bad.txt:3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("link FROM TO T P"), std::string::npos) << msg;
  }
  std::istringstream loop("nodes 2\nlink 1 1 1 0.5\n");
  EXPECT_THROW(parse_scenario(loop), ParseError);
  std::istringstream big("nodes 65\n");
  EXPECT_THROW(parse_scenario(big), ParseError);
}

TEST(Scenario, SecondScenarioExceedsDefaultBudget) {
  Topology t = materialize_gateways(load_scenario(scenario("scenario2.txt")));
  EXPECT_THROW(StateSpace::build(t, t.flows[0].source, Variant::relaxed), SizingError);
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.topology_path = scenario("scenario1.txt");
  c.policies = {PolicyKind::dsr_relaxed, PolicyKind::random};
  c.utilities = {UtilityKind::linear};
  c.deadlines = {4};
  c.epochs = 3;
  c.epoch_len = 200;
  c.seeds = {1, 2};
  c.output_dir = out.string();
  c.threads = 2;
  return c;
}

TEST(Experiment, ZeroEpochsGiveHeaderOnlyCsvs) {
  const fs::path dir = scratch_dir("zero");
  ExperimentConfig c = small_config(dir);
  c.epochs = 0;
  run_experiment(c);
  const Topology t = materialize_gateways(load_scenario(c.topology_path));
  EXPECT_EQ(slurp(dir / "summary.csv"), summary_header(t) + "\n");
  EXPECT_EQ(slurp(dir / "trace.csv"), trace_header(t) + "\n");
  EXPECT_EQ(slurp(dir / "utility_by_deadline.csv"), "policy,utility_kind,deadline,seeds,mean_total_utility,stderr\n");
}

TEST(Experiment, HeaderGolden) {
  Topology t;
  t.n_nodes = 2;
  t.links.push_back(Link{0, 0, 1, 1, 1.0});
  t.flows.push_back(Flow{0, 0, 1.0, 1, UtilityKind::linear});
  EXPECT_EQ(summary_header(t), "policy,utility_kind,deadline,seed,total_utility,mu_n0_f0,mu_n1_f0,usage_l0");
  EXPECT_EQ(trace_header(t), "policy,utility_kind,deadline,seed,epoch,utility,lagrangian,lambda_l0");
}

TEST(Experiment, RepeatIsByteIdentical) {
  const fs::path a = scratch_dir("rep_a"), b = scratch_dir("rep_b");
  ExperimentConfig ca = small_config(a);
  ExperimentConfig cb = small_config(b);
  cb.threads = 1;
  const auto out = run_experiment(ca);
  run_experiment(cb);
  for (const char* f : {"summary.csv", "trace.csv", "utility_by_deadline.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  // 2 policies x 2 seeds, 3 epochs each.
  EXPECT_EQ(out.cells.size(), 4u);
  std::istringstream trace(out.trace_csv);
  int lines = 0;
  for (std::string l; std::getline(trace, l);) ++lines;
  EXPECT_EQ(lines, 1 + 4 * 3);
}

TEST(Experiment, UnwritableOutputFailsFirst) {
  const fs::path dir = scratch_dir("blocked");
  const fs::path file = dir / "not_a_dir";
  std::ofstream(file) << "x";
  ExperimentConfig c = small_config(file / "out");
  EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(Experiment, ConfigValidation) {
  const Topology t = load_scenario(scenario("scenario1.txt"));
  ExperimentConfig c = small_config("x");
  EXPECT_TRUE(validate_config(c, t).empty());
  c.seeds.clear();
  c.deadlines = {10};
  c.epoch_len = 499;
  EXPECT_EQ(validate_config(c, t).size(), 2u);
}

TEST(Experiment, LoadConfigResolvesTopology) {
  const fs::path dir = scratch_dir("cfg");
  fs::copy_file(scenario("scenario1.txt"), dir / "s1.txt");
  std::ofstream(dir / "c.json") << R"({"topology": "s1.txt", "policies": ["index-dsr", "flood"],
    "utility": ["linear", "log"], "deadlines": [4, 5], "epochs": 7, "epoch_len": 300, "seeds": [3],
    "output": "o"})";
  const auto c = load_config((dir / "c.json").string());
  EXPECT_EQ(c.topology_path, (dir / "s1.txt").string());
  EXPECT_EQ(c.policies, (std::vector<PolicyKind>{PolicyKind::index_dsr, PolicyKind::flood}));
  EXPECT_EQ(c.utilities, (std::vector<UtilityKind>{UtilityKind::linear, UtilityKind::logarithmic}));
  EXPECT_EQ(c.deadlines, (std::vector<int>{4, 5}));
  EXPECT_EQ(c.epochs, 7);
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{3});
  EXPECT_EQ(c.output_dir, (dir / "o").string());

  std::ofstream(dir / "bad.json") << R"({"topology": "s1.txt", "policies": ["nope"]})";
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
  std::ofstream(dir / "broken.json") << "{";
  EXPECT_THROW(load_config((dir / "broken.json").string()), ConfigError);
}

TEST(Verify, DefaultLimitsPass) {
  const auto report = verify();
  for (const auto& p : report.properties) EXPECT_TRUE(p.passed) << p.name << "\n" << p.counterexample;
}

TEST(Verify, CatchesFlippedPriceStep) {
  VerifyHooks hooks;
  hooks.price_step = [](const PriceVector& lam, const std::vector<double>& usage, const std::vector<int>& caps,
                        double beta) {
    PriceVector next(lam.size());
    for (std::size_t l = 0; l < lam.size(); ++l) next[l] = std::max(0.0, lam[l] + beta * (caps[l] - usage[l]));
    return next;
  };
  const auto out = check_price_step(VerifyLimits{}, hooks);
  EXPECT_FALSE(out.passed);
  EXPECT_NE(out.counterexample.find("lambda"), std::string::npos);
}

TEST(Verify, CatchesBoundaryOffByOne) {
  VerifyHooks hooks;
  hooks.dp_root = [](const Topology& t, const Flow& f, const RewardVector& r, const PriceVector& p, int h, Variant v) {
    return v == Variant::relaxed ? solve_relaxed(t, f, r, p, h + 1).root_value()
                                 : solve_index(t, f, r, p, h + 1).root_value();
  };
  const auto out = check_oracle_agreement(VerifyLimits{}, hooks);
  EXPECT_FALSE(out.passed);
  EXPECT_NE(out.counterexample.find("nodes"), std::string::npos);
}

}  // namespace
}  // namespace dsr
