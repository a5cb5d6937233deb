#include "pathfinder/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pathfinder {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Shortest representation that parses back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("bad number in CSV: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("bad integer in CSV: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text, const std::string& header) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != header) throw std::runtime_error("unexpected CSV header: " + line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.push_back(split(line, ','));
  }
  return rows;
}

std::string scenario_label(const fs::path& p) { return p.filename().string(); }

bool is_training_agent(const std::string& a) { return parse_agent_kind(a).has_value(); }

}  // namespace

std::optional<LogLevel> parse_log_level(std::string_view s) {
  if (s == "off") return LogLevel::Off;
  if (s == "info") return LogLevel::Info;
  if (s == "trace") return LogLevel::Trace;
  return std::nullopt;
}

LogLevel log_level_from_env() {
  const char* v = std::getenv("PATHFINDER_LOG");
  if (!v) return LogLevel::Off;
  return parse_log_level(v).value_or(LogLevel::Off);
}

void RunSpec::validate() const {
  if (agent != "oracle" && !is_training_agent(agent)) throw std::invalid_argument("unknown agent '" + agent + "'");
  if (episode_limit < 1) throw std::invalid_argument("episode_limit must be >= 1");
  if (is_training_agent(agent) && seeds.empty()) throw std::invalid_argument("at least one seed is required");
}

std::uint64_t SeedMetrics::attack_success_count() const {
  return std::accumulate(episode_successes.begin(), episode_successes.end(), std::uint64_t{0});
}

std::optional<std::uint64_t> SeedMetrics::minimum_steps() const {
  std::optional<std::uint64_t> best;
  for (auto s : episode_min_steps)
    if (s > 0 && (!best || s < *best)) best = s;
  return best;
}

std::optional<double> SeedMetrics::mean_attack_steps() const {
  const auto n = attack_success_count();
  if (n == 0) return std::nullopt;
  const auto total = std::accumulate(episode_attack_steps.begin(), episode_attack_steps.end(), std::uint64_t{0});
  return static_cast<double>(total) / static_cast<double>(n);
}

SeedMetrics to_metrics(const TrainingResult& r, std::string agent, std::string scenario, std::uint64_t seed) {
  SeedMetrics m;
  m.agent = std::move(agent);
  m.scenario = std::move(scenario);
  m.seed = seed;
  m.episode_rewards = r.episode_rewards;
  m.episode_successes = r.episode_successes;
  m.episode_min_steps = r.episode_min_steps;
  m.episode_attack_steps = r.episode_attack_steps;
  m.infeasible_executions = r.infeasible_executions;
  m.total_steps = r.total_steps;
  return m;
}

// --- files ---

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RunError("cannot write " + path.string());
  os << text;
  if (!os) throw RunError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RunError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string metrics_json(const SeedMetrics& m) {
  json j;
  j["agent"] = m.agent;
  j["scenario"] = m.scenario;
  j["seed"] = m.seed;
  j["episodes"] = m.episode_rewards.size();
  j["attack_success_count"] = m.attack_success_count();
  const auto best = m.minimum_steps();
  j["minimum_steps"] = best ? json(*best) : json(nullptr);
  const auto mean = m.mean_attack_steps();
  j["mean_attack_steps"] = mean ? json(*mean) : json(nullptr);
  j["infeasible_executions"] = m.infeasible_executions;
  j["total_steps"] = m.total_steps;
  j["checkpoint"] = m.checkpoint;
  j["episode_rewards"] = m.episode_rewards;
  j["episode_successes"] = m.episode_successes;
  j["episode_min_steps"] = m.episode_min_steps;
  j["episode_attack_steps"] = m.episode_attack_steps;
  return j.dump(2) + "\n";
}

SeedMetrics parse_metrics_json(const std::string& text) {
  SeedMetrics m;
  try {
    const auto j = json::parse(text);
    m.agent = j.at("agent").get<std::string>();
    m.scenario = j.at("scenario").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.infeasible_executions = j.at("infeasible_executions").get<std::uint64_t>();
    m.total_steps = j.at("total_steps").get<std::uint64_t>();
    m.checkpoint = j.at("checkpoint").get<std::string>();
    m.episode_rewards = j.at("episode_rewards").get<std::vector<double>>();
    m.episode_successes = j.at("episode_successes").get<std::vector<std::uint64_t>>();
    m.episode_min_steps = j.at("episode_min_steps").get<std::vector<std::uint64_t>>();
    m.episode_attack_steps = j.at("episode_attack_steps").get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw RunError(std::string("malformed metrics file: ") + e.what());
  }
  return m;
}

std::string oracle_json(const OracleRecord& r) {
  json j;
  j["scenario"] = r.scenario;
  j["reachable"] = r.reachable;
  j["length"] = r.reachable ? json(r.length()) : json(nullptr);
  j["actions"] = r.actions;
  j["rewards"] = r.rewards;
  return j.dump(2) + "\n";
}

std::string format_oracle_text(const OracleRecord& r) {
  std::ostringstream os;
  if (!r.reachable) {
    os << "unreachable\n";
    return os.str();
  }
  for (std::size_t i = 0; i < r.actions.size(); ++i)
    os << (i + 1) << ". " << r.actions[i] << "  reward " << fmt_double(r.rewards[i]) << "\n";
  os << "length: " << r.length() << "\n";
  return os.str();
}

std::string episodes_csv(const SeedMetrics& m) {
  std::ostringstream os;
  os << "episode,reward,successes,min_steps,attack_steps\n";
  for (std::size_t i = 0; i < m.episode_rewards.size(); ++i)
    os << i << ',' << fmt_double(m.episode_rewards[i]) << ',' << m.episode_successes.at(i) << ','
       << m.episode_min_steps.at(i) << ',' << m.episode_attack_steps.at(i) << '\n';
  return os.str();
}

void parse_episodes_csv(const std::string& text, SeedMetrics& into) {
  into.episode_rewards.clear();
  into.episode_successes.clear();
  into.episode_min_steps.clear();
  into.episode_attack_steps.clear();
  for (const auto& row : csv_rows(text, "episode,reward,successes,min_steps,attack_steps")) {
    if (row.size() != 5) throw std::runtime_error("episode CSV row has wrong width");
    if (parse_u64(row[0]) != into.episode_rewards.size()) throw std::runtime_error("episode CSV out of order");
    into.episode_rewards.push_back(parse_double(row[1]));
    into.episode_successes.push_back(parse_u64(row[2]));
    into.episode_min_steps.push_back(parse_u64(row[3]));
    into.episode_attack_steps.push_back(parse_u64(row[4]));
  }
}

std::vector<SeedMetrics> load_metrics_dir(const fs::path& dir) {
  static const std::regex name(R"((.+)_seed(\d+)\.json)");
  std::vector<SeedMetrics> out;
  if (!fs::is_directory(dir)) throw RunError("not a directory: " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto file = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(file, name))
      out.push_back(parse_metrics_json(read_text(entry.path())));
  }
  std::sort(out.begin(), out.end(), [](const SeedMetrics& a, const SeedMetrics& b) {
    return std::tie(a.agent, a.seed) < std::tie(b.agent, b.seed);
  });
  return out;
}

// --- run ---

OracleRecord run_oracle(const AttackEnvironment& env, const std::string& scenario, const OracleOptions& options) {
  OracleRecord rec;
  rec.scenario = scenario;
  const auto path = shortest_attack_path(env, options);
  if (!path) return rec;
  rec.reachable = true;
  for (auto a : path->actions) rec.actions.push_back(env.describe(a));
  rec.rewards = path->rewards;
  return rec;
}

MetricsTable run(const RunSpec& spec, std::ostream* log) {
  spec.validate();
  auto model = std::make_shared<const CyberspaceModel>(load_scenario_file(spec.scenario.string()));
  AttackEnvironment env(model, EnvConfig{spec.episode_limit});
  const auto label = scenario_label(spec.scenario);
  const bool write = !spec.out_dir.empty();
  if (write) {
    std::error_code ec;
    fs::create_directories(spec.out_dir, ec);
    if (ec) throw RunError("cannot create " + spec.out_dir.string() + ": " + ec.message());
  }

  MetricsTable table;
  if (spec.agent == "oracle") {
    auto rec = run_oracle(env, label, spec.oracle);
    if (log && spec.log != LogLevel::Off)
      *log << "oracle " << label << ": " << (rec.reachable ? std::to_string(rec.length()) : "unreachable") << "\n";
    if (write) {
      write_text(spec.out_dir / "oracle.json", oracle_json(rec));
      write_text(spec.out_dir / "oracle.txt", format_oracle_text(rec));
    }
    table.oracle = std::move(rec);
    return table;
  }

  const auto kind = *parse_agent_kind(spec.agent);
  for (auto seed : spec.seeds) {
    auto cfg = spec.agent_config;
    cfg.seed = seed;
    cfg.episodes = spec.episodes;
    const std::string stem = spec.agent + "_seed" + std::to_string(seed);

    std::ofstream trace_file;
    std::ostream* trace = nullptr;
    if (spec.log == LogLevel::Trace) {
      if (write) {
        trace_file.open(spec.out_dir / (stem + ".trace.tsv"), std::ios::binary);
        if (!trace_file) throw RunError("cannot write step trace for " + stem);
        trace = &trace_file;
      } else {
        trace = log;
      }
      if (trace) *trace << "episode\tstep\taction\tverb\ttarget\treward\tfeasible\tsuccess\n";
    }
    double ep_reward = 0.0;
    std::uint64_t ep_success = 0;
    StepObserver observe;
    if (spec.log != LogLevel::Off) {
      observe = [&](std::uint64_t ep, std::uint64_t step, std::size_t action, const StepOutcome& out) {
        if (trace) *trace << env.trace_line(ep, step, action, out) << '\n';
        ep_reward += out.reward;
        ep_success += out.attack_succeeded ? 1 : 0;
        if (out.episode_done) {
          if (log)
            *log << stem << " episode " << ep << " reward " << fmt_double(ep_reward) << " successes " << ep_success
                 << "\n";
          ep_reward = 0.0;
          ep_success = 0;
        }
      };
    }

    const auto result = train(kind, env, cfg, observe);
    auto metrics = to_metrics(result, spec.agent, label, seed);
    if (write) {
      metrics.checkpoint = stem + ".ckpt";
      try {
        nn::save_checkpoint((spec.out_dir / metrics.checkpoint).string(), result.final_parameters);
      } catch (const std::runtime_error& e) {
        throw RunError(e.what());
      }
      write_text(spec.out_dir / (stem + ".json"), metrics_json(metrics));
      write_text(spec.out_dir / (stem + ".csv"), episodes_csv(metrics));
    }
    table.rows.push_back(std::move(metrics));
  }
  return table;
}

// --- sweep ---

std::vector<fs::path> rule_variants(const fs::path& base) {
  std::vector<fs::path> out{base};
  const auto dir = base.parent_path();
  const auto stem = base.stem().string();
  const auto ext = base.extension().string();
  for (int r = 4; r <= 6; ++r) out.push_back(dir / (stem + "_r" + std::to_string(r) + ext));
  return out;
}

SweepTable sweep_rules(const RunSpec& base, const std::vector<fs::path>& scenarios,
                       const std::vector<std::string>& agents, std::ostream* log) {
  SweepTable table;
  table.agents = agents;
  for (const auto& a : agents)
    if (!is_training_agent(a)) throw std::invalid_argument("unknown agent '" + a + "'");
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    SweepRow row;
    row.scenario = scenarios[i];
    row.label = "r" + std::to_string(i + 3);

    RunSpec spec = base;
    spec.scenario = scenarios[i];
    spec.agent = "oracle";
    if (!base.out_dir.empty()) spec.out_dir = base.out_dir / row.label;
    const auto oracle = run(spec, log);
    if (oracle.oracle && oracle.oracle->reachable) row.oracle_length = oracle.oracle->length();

    for (const auto& agent : agents) {
      spec.agent = agent;
      const auto t = run(spec, log);
      std::uint64_t steps = 0, successes = 0;
      for (const auto& m : t.rows) {
        steps += std::accumulate(m.episode_attack_steps.begin(), m.episode_attack_steps.end(), std::uint64_t{0});
        successes += m.attack_success_count();
      }
      row.mean_steps.push_back(successes ? std::optional<double>(static_cast<double>(steps) / successes)
                                         : std::nullopt);
    }
    table.rows.push_back(std::move(row));
  }
  if (!base.out_dir.empty() && !scenarios.empty()) {
    write_text(base.out_dir / "sweep.csv", table.to_csv());
    write_text(base.out_dir / "sweep.txt", table.to_text());
  }
  return table;
}

std::string SweepTable::to_csv() const {
  std::ostringstream os;
  os << "rules,scenario,oracle";
  for (const auto& a : agents) os << ',' << a;
  os << '\n';
  for (const auto& r : rows) {
    os << r.label << ',' << r.scenario.filename().string() << ',';
    if (r.oracle_length) os << *r.oracle_length;
    for (const auto& v : r.mean_steps) {
      os << ',';
      if (v) os << fmt_double(*v);
    }
    os << '\n';
  }
  return os.str();
}

std::string SweepTable::to_text() const {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-6s %8s", "rules", "oracle");
  os << buf;
  for (const auto& a : agents) {
    std::snprintf(buf, sizeof buf, " %10s", a.c_str());
    os << buf;
  }
  os << '\n';
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-6s %8s", r.label.c_str(),
                  r.oracle_length ? std::to_string(*r.oracle_length).c_str() : "-");
    os << buf;
    for (const auto& v : r.mean_steps) {
      if (v)
        std::snprintf(buf, sizeof buf, " %10.1f", *v);
      else
        std::snprintf(buf, sizeof buf, " %10s", "-");
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

// --- plot data ---

std::vector<double> smooth(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("smoothing window must be positive");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto first = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t k = first; k <= i; ++k) sum += values[k];
    out[i] = sum / static_cast<double>(i + 1 - first);
  }
  return out;
}

std::string plot_csv(const PlotSeries& s) {
  std::ostringstream os;
  os << "episode,reward,smoothed\n";
  for (std::size_t i = 0; i < s.reward.size(); ++i)
    os << i << ',' << fmt_double(s.reward[i]) << ',' << fmt_double(s.smoothed.at(i)) << '\n';
  return os.str();
}

PlotSeries parse_plot_csv(const std::string& text) {
  PlotSeries s;
  for (const auto& row : csv_rows(text, "episode,reward,smoothed")) {
    if (row.size() != 3) throw std::runtime_error("plot CSV row has wrong width");
    s.reward.push_back(parse_double(row[1]));
    s.smoothed.push_back(parse_double(row[2]));
  }
  return s;
}

std::vector<PlotSeries> plot_series(const std::vector<SeedMetrics>& metrics, std::size_t window) {
  if (metrics.empty()) throw std::invalid_argument("no metrics to plot");
  std::map<std::string, std::vector<const SeedMetrics*>> by_agent;
  for (const auto& m : metrics) by_agent[m.agent].push_back(&m);
  std::vector<PlotSeries> out;
  for (const auto& [agent, runs] : by_agent) {
    const auto n = runs.front()->episode_rewards.size();
    PlotSeries mean{agent, std::nullopt, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (const auto* m : runs) {
      if (m->episode_rewards.size() != n) throw std::invalid_argument("seeds of " + agent + " differ in length");
      PlotSeries s{agent, m->seed, m->episode_rewards, smooth(m->episode_rewards, window)};
      for (std::size_t i = 0; i < n; ++i) {
        mean.reward[i] += s.reward[i];
        mean.smoothed[i] += s.smoothed[i];
      }
      out.push_back(std::move(s));
    }
    const auto k = static_cast<double>(runs.size());
    for (std::size_t i = 0; i < n; ++i) {
      mean.reward[i] /= k;
      mean.smoothed[i] /= k;
    }
    out.push_back(std::move(mean));
  }
  return out;
}

std::vector<fs::path> emit_plot_data(const std::vector<SeedMetrics>& metrics, const fs::path& dir,
                                     std::size_t window) {
  std::vector<fs::path> written;
  for (const auto& s : plot_series(metrics, window)) {
    const auto name =
        "plot_" + s.agent + "_" + (s.seed ? "seed" + std::to_string(*s.seed) : std::string("mean")) + ".csv";
    write_text(dir / name, plot_csv(s));
    written.push_back(dir / name);
  }
  return written;
}

}  // namespace pathfinder
