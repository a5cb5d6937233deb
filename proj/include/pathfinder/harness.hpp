#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pathfinder/agents.hpp"
#include "pathfinder/oracle.hpp"

namespace pathfinder {

enum class LogLevel : std::uint8_t { Off, Info, Trace };

// Reads PATHFINDER_LOG; unset or unrecognised values mean Off.
LogLevel log_level_from_env();
std::optional<LogLevel> parse_log_level(std::string_view s);

struct RunSpec {
  std::filesystem::path scenario;
  std::string agent = "iddpg";  // iddpg, ddpg, dqn, a2c or oracle
  std::size_t episodes = 500;
  std::uint64_t episode_limit = 10000;
  std::vector<std::uint64_t> seeds = {1};
  std::filesystem::path out_dir;  // empty: write nothing
  AgentConfig agent_config;       // seed and episodes are overridden per run
  OracleOptions oracle;
  LogLevel log = LogLevel::Off;

  void validate() const;
};

struct SeedMetrics {
  std::string agent;
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<double> episode_rewards;
  std::vector<std::uint64_t> episode_successes;
  std::vector<std::uint64_t> episode_min_steps;
  std::vector<std::uint64_t> episode_attack_steps;
  std::uint64_t infeasible_executions = 0;
  std::uint64_t total_steps = 0;
  std::string checkpoint;

  std::uint64_t attack_success_count() const;
  std::optional<std::uint64_t> minimum_steps() const;
  std::optional<double> mean_attack_steps() const;

  friend bool operator==(const SeedMetrics&, const SeedMetrics&) = default;
};

SeedMetrics to_metrics(const TrainingResult& r, std::string agent, std::string scenario, std::uint64_t seed);

struct OracleRecord {
  std::string scenario;
  bool reachable = false;
  std::vector<std::string> actions;
  std::vector<double> rewards;
  std::size_t length() const { return actions.size(); }
};

struct MetricsTable {
  std::vector<SeedMetrics> rows;
  std::optional<OracleRecord> oracle;
};

class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loads and validates the scenario, then runs the oracle or trains one agent
// per seed. With an output directory, writes <agent>_seed<N>.json/.csv and a
// checkpoint per seed, or oracle.json/oracle.txt.
MetricsTable run(const RunSpec& spec, std::ostream* log = nullptr);

OracleRecord run_oracle(const AttackEnvironment& env, const std::string& scenario, const OracleOptions& options);
std::string format_oracle_text(const OracleRecord& record);

// --- files ---

std::string metrics_json(const SeedMetrics& m);
SeedMetrics parse_metrics_json(const std::string& text);
std::string oracle_json(const OracleRecord& r);

// episode,reward,successes,min_steps,attack_steps
std::string episodes_csv(const SeedMetrics& m);
// Fills the per-episode arrays of `into` from episodes_csv output.
void parse_episodes_csv(const std::string& text, SeedMetrics& into);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Reads every <agent>_seed<N>.json under `dir`, sorted by agent then seed.
std::vector<SeedMetrics> load_metrics_dir(const std::filesystem::path& dir);

// --- rule sweep ---

struct SweepRow {
  std::string label;  // r3 .. r6
  std::filesystem::path scenario;
  std::optional<std::size_t> oracle_length;
  // Per agent, in the order requested: summed successful attack steps over
  // successes, pooled across seeds.
  std::vector<std::optional<double>> mean_steps;
};

struct SweepTable {
  std::vector<std::string> agents;
  std::vector<SweepRow> rows;
  std::string to_csv() const;
  std::string to_text() const;
};

// benchmark.scn -> benchmark.scn, benchmark_r4.scn, benchmark_r5.scn, benchmark_r6.scn
std::vector<std::filesystem::path> rule_variants(const std::filesystem::path& base);

SweepTable sweep_rules(const RunSpec& base, const std::vector<std::filesystem::path>& scenarios,
                       const std::vector<std::string>& agents, std::ostream* log = nullptr);

// --- plot data ---

// Trailing moving average over up to `window` points.
std::vector<double> smooth(const std::vector<double>& values, std::size_t window);

struct PlotSeries {
  std::string agent;
  std::optional<std::uint64_t> seed;  // nullopt for the mean across seeds
  std::vector<double> reward;
  std::vector<double> smoothed;
};

// episode,reward,smoothed
std::string plot_csv(const PlotSeries& s);
PlotSeries parse_plot_csv(const std::string& text);

// Per-seed series plus one mean series per agent. Throws on empty input.
std::vector<PlotSeries> plot_series(const std::vector<SeedMetrics>& metrics, std::size_t window = 10);
// Writes plot_<agent>_seed<N>.csv and plot_<agent>_mean.csv; returns the paths.
std::vector<std::filesystem::path> emit_plot_data(const std::vector<SeedMetrics>& metrics,
                                                  const std::filesystem::path& dir, std::size_t window = 10);

}  // namespace pathfinder
