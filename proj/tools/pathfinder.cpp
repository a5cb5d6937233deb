#include <charconv>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pathfinder/harness.hpp"

namespace fs = std::filesystem;
using namespace pathfinder;

namespace {

constexpr int kUsage = 1;
constexpr int kScenario = 2;
constexpr int kRuntime = 3;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || end != item.data() + item.size())
      throw CLI::ValidationError("--seeds", "not an integer: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError("--seeds", "empty seed list");
  return out;
}

struct TrainingFlags {
  std::size_t episodes = 500;
  std::uint64_t episode_limit = 10000;
  std::string seeds = "1";
  AgentConfig config;

  void attach(CLI::App* cmd) {
    cmd->add_option("--episodes", episodes, "Episodes per seed")->capture_default_str();
    cmd->add_option("--episode-limit", episode_limit, "Step limit per episode")->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seeds", seeds, "Comma-separated seeds")->capture_default_str();
    cmd->add_option("--train-interval", config.train_interval, "Environment steps per update")
        ->capture_default_str();
    cmd->add_option("--batch-size", config.batch_size)->capture_default_str();
    cmd->add_option("--gamma", config.gamma)->capture_default_str();
    cmd->add_option("--tau", config.tau)->capture_default_str();
    cmd->add_option("--actor-lr", config.actor_lr)->capture_default_str();
    cmd->add_option("--critic-lr", config.critic_lr)->capture_default_str();
  }

  void fill(RunSpec& spec) const {
    spec.episodes = episodes;
    spec.episode_limit = episode_limit;
    spec.seeds = parse_seeds(seeds);
    spec.agent_config = config;
  }
};

void print_summary(const MetricsTable& t) {
  if (t.oracle) {
    std::cout << format_oracle_text(*t.oracle);
    return;
  }
  for (const auto& m : t.rows) {
    const auto min = m.minimum_steps();
    std::cout << m.agent << " seed " << m.seed << ": successes " << m.attack_success_count() << ", min steps "
              << (min ? std::to_string(*min) : "-") << ", infeasible executions " << m.infeasible_executions
              << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-domain attack path simulator"};
  app.require_subcommand(1);

  RunSpec run_spec;
  TrainingFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Train an agent or run the oracle on one scenario");
  run_cmd->add_option("--scenario", run_spec.scenario, "Scenario file")->required();
  run_cmd->add_option("--agent", run_spec.agent, "iddpg, ddpg, dqn, a2c or oracle")
      ->capture_default_str()
      ->check(CLI::IsMember({"iddpg", "ddpg", "dqn", "a2c", "oracle"}));
  run_cmd->add_option("--out", run_spec.out_dir, "Output directory");
  run_flags.attach(run_cmd);

  fs::path oracle_scenario;
  fs::path oracle_out;
  OracleOptions oracle_opts;
  auto* oracle_cmd = app.add_subcommand("oracle", "Shortest attack path by exhaustive search");
  oracle_cmd->add_option("--scenario", oracle_scenario, "Scenario file")->required();
  oracle_cmd->add_option("--depth-limit", oracle_opts.depth_limit)->capture_default_str();
  oracle_cmd->add_option("--node-budget", oracle_opts.node_budget)->capture_default_str();
  oracle_cmd->add_option("--out", oracle_out, "Also write oracle.json and oracle.txt here");

  fs::path sweep_base;
  fs::path sweep_out;
  std::string sweep_agents = "iddpg,ddpg,dqn,a2c";
  TrainingFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand("sweep", "Mean successful attack steps across rule variants");
  sweep_cmd->add_option("--base", sweep_base, "Three-rule scenario; siblings _r4.._r6 are picked up")->required();
  sweep_cmd->add_option("--agents", sweep_agents)->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "Output directory")->required();
  sweep_flags.attach(sweep_cmd);

  fs::path plot_dir;
  std::size_t plot_window = 10;
  auto* plot_cmd = app.add_subcommand("plot-data", "Reward curves from a metrics directory");
  plot_cmd->add_option("--metrics", plot_dir, "Directory holding <agent>_seed<N>.json files")->required();
  plot_cmd->add_option("--window", plot_window, "Smoothing window")->capture_default_str()
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  const LogLevel level = log_level_from_env();
  std::ostream* log = level == LogLevel::Off ? nullptr : &std::cerr;

  try {
    if (*run_cmd) {
      run_flags.fill(run_spec);
      run_spec.log = level;
      print_summary(run(run_spec, log));
    } else if (*oracle_cmd) {
      RunSpec spec;
      spec.scenario = oracle_scenario;
      spec.agent = "oracle";
      spec.oracle = oracle_opts;
      spec.out_dir = oracle_out;
      spec.log = level;
      const auto table = run(spec, log);
      std::cout << format_oracle_text(*table.oracle) << oracle_json(*table.oracle) << "\n";
    } else if (*sweep_cmd) {
      RunSpec spec;
      sweep_flags.fill(spec);
      spec.out_dir = sweep_out;
      spec.log = level;
      const auto agents = split_list(sweep_agents);
      for (const auto& a : agents)
        if (!parse_agent_kind(a)) throw CLI::ValidationError("--agents", "unknown agent: " + a);
      const auto table = sweep_rules(spec, rule_variants(sweep_base), agents, log);
      std::cout << table.to_text();
    } else if (*plot_cmd) {
      for (const auto& p : emit_plot_data(load_metrics_dir(plot_dir), plot_dir, plot_window))
        std::cout << p.string() << "\n";
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kScenario;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return 0;
}
