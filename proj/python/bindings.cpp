#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pathfinder/harness.hpp"

namespace py = pybind11;
using namespace pathfinder;

namespace {

std::vector<bool> to_bools(const BitSet& b) {
  std::vector<bool> out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) out[i] = b.test(i);
  return out;
}

std::shared_ptr<AttackEnvironment> make_env(const CyberspaceModel& model, std::uint64_t limit) {
  return std::make_shared<AttackEnvironment>(std::make_shared<const CyberspaceModel>(model), EnvConfig{limit});
}

AgentConfig config_from(const py::dict& d) {
  AgentConfig c;
  for (auto [k, v] : d) {
    const auto key = k.cast<std::string>();
    if (key == "seed") c.seed = v.cast<std::uint64_t>();
    else if (key == "episodes") c.episodes = v.cast<std::size_t>();
    else if (key == "gamma") c.gamma = v.cast<double>();
    else if (key == "tau") c.tau = v.cast<double>();
    else if (key == "batch_size") c.batch_size = v.cast<std::size_t>();
    else if (key == "memory_capacity") c.memory_capacity = v.cast<std::size_t>();
    else if (key == "actor_lr") c.actor_lr = v.cast<double>();
    else if (key == "critic_lr") c.critic_lr = v.cast<double>();
    else if (key == "train_interval") c.train_interval = v.cast<std::size_t>();
    else if (key == "reward_scale") c.reward_scale = v.cast<double>();
    else throw py::key_error("unknown config key: " + key);
  }
  return c;
}

py::dict metrics_dict(const SeedMetrics& m) {
  py::dict d;
  d["agent"] = m.agent;
  d["scenario"] = m.scenario;
  d["seed"] = m.seed;
  d["episode_rewards"] = m.episode_rewards;
  d["episode_successes"] = m.episode_successes;
  d["episode_min_steps"] = m.episode_min_steps;
  d["infeasible_executions"] = m.infeasible_executions;
  d["total_steps"] = m.total_steps;
  d["attack_success_count"] = m.attack_success_count();
  d["minimum_steps"] = m.minimum_steps();
  d["mean_attack_steps"] = m.mean_attack_steps();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Attack path simulator core";

  py::register_exception<ScenarioError>(m, "ScenarioError", PyExc_ValueError);

  py::class_<CyberspaceModel>(m, "Model")
      .def_readonly("name", &CyberspaceModel::name)
      .def_property_readonly("atom_count", &CyberspaceModel::atom_count)
      .def("to_text", [](const CyberspaceModel& s) { return serialize_scenario(s); });
  m.def("load_scenario", [](const std::string& text) { return load_scenario(text); });
  m.def("load_scenario_file", [](const std::filesystem::path& p) { return load_scenario_file(p.string()); });

  py::class_<EnvState>(m, "State")
      .def_property_readonly("permissions", [](const EnvState& s) { return to_bools(s.permissions); })
      .def_property_readonly("acl", [](const EnvState& s) { return to_bools(s.acl); })
      .def_readonly("steps_this_attack", &EnvState::steps_this_attack)
      .def_readonly("steps_this_episode", &EnvState::steps_this_episode)
      .def("__eq__", [](const EnvState& a, const EnvState& b) { return a == b; });

  py::class_<StepOutcome>(m, "StepOutcome")
      .def_readonly("next", &StepOutcome::next)
      .def_readonly("reward", &StepOutcome::reward)
      .def_readonly("attack_succeeded", &StepOutcome::attack_succeeded)
      .def_readonly("episode_done", &StepOutcome::episode_done)
      .def_readonly("feasible", &StepOutcome::feasible)
      .def_readonly("attack_steps", &StepOutcome::attack_steps);

  py::class_<AttackEnvironment, std::shared_ptr<AttackEnvironment>>(m, "Environment")
      .def(py::init(&make_env), py::arg("model"), py::arg("episode_limit") = 10000)
      .def_property_readonly("action_count", &AttackEnvironment::action_count)
      .def_property_readonly("state_size", &AttackEnvironment::state_size)
      .def("reset", &AttackEnvironment::reset)
      .def("action_mask", [](const AttackEnvironment& e, const EnvState& s) { return to_bools(e.action_mask(s)); })
      .def("feasible", &AttackEnvironment::feasible)
      .def("step", &AttackEnvironment::step)
      .def("state_vector", &AttackEnvironment::state_vector)
      .def("describe", &AttackEnvironment::describe);

  m.def(
      "shortest_attack_path",
      [](const AttackEnvironment& env, std::size_t depth_limit) -> std::optional<std::vector<std::string>> {
        OracleOptions o;
        o.depth_limit = depth_limit;
        const auto path = shortest_attack_path(env, o);
        if (!path) return std::nullopt;
        std::vector<std::string> names;
        for (auto a : path->actions) names.push_back(env.describe(a));
        return names;
      },
      py::arg("env"), py::arg("depth_limit") = 200);

  m.def(
      "train",
      [](const std::string& agent, const AttackEnvironment& env, const py::dict& config) {
        const auto kind = parse_agent_kind(agent);
        if (!kind) throw py::value_error("unknown agent: " + agent);
        const auto cfg = config_from(config);
        TrainingResult r;
        {
          py::gil_scoped_release release;
          r = train(*kind, env, cfg);
        }
        return metrics_dict(to_metrics(r, agent, env.model().name, cfg.seed));
      },
      py::arg("agent"), py::arg("env"), py::arg("config") = py::dict());

  m.def("soft_update", [](const std::vector<double>& target, const std::vector<double>& source, double tau) {
    if (target.size() != source.size()) throw py::value_error("size mismatch");
    nn::ParamList t{nn::Matrix::Map(target.data(), static_cast<Eigen::Index>(target.size()), 1)};
    nn::ParamList s{nn::Matrix::Map(source.data(), static_cast<Eigen::Index>(source.size()), 1)};
    nn::soft_update(t, s, tau);
    return std::vector<double>(t[0].data(), t[0].data() + t[0].size());
  });
}
