from pathlib import Path

import pytest

import pathfinder

ROOT = Path(__file__).resolve().parents[2]
BENCHMARK = ROOT / "scenarios" / "benchmark.scn"
SHORT = ROOT / "tests" / "data" / "short.scn"


def test_benchmark_dimensions():
    env = pathfinder.Environment(pathfinder.load_scenario_file(BENCHMARK))
    assert env.state_size == 106
    assert env.action_count == 133
    state = env.reset()
    assert len(state.permissions) == 106
    assert len(env.state_vector(state)) == 106


def test_mask_agrees_with_step():
    env = pathfinder.Environment(pathfinder.load_scenario_file(BENCHMARK))
    state = env.reset()
    mask = env.action_mask(state)
    for a, bit in enumerate(mask):
        assert env.step(state, a).feasible == bit


def test_oracle_short_path():
    env = pathfinder.Environment(pathfinder.load_scenario_file(SHORT))
    path = pathfinder.shortest_attack_path(env)
    assert path is not None and len(path) == 2
    state = env.reset()
    names = [env.describe(a) for a in range(env.action_count)]
    for name in path:
        out = env.step(state, names.index(name))
        assert out.feasible
        state = out.next
    assert out.attack_succeeded


def test_train_is_deterministic():
    env = pathfinder.Environment(pathfinder.load_scenario_file(SHORT), episode_limit=200)
    cfg = {"seed": 3, "episodes": 3, "batch_size": 16}
    a = pathfinder.train("iddpg", env, cfg)
    b = pathfinder.train("iddpg", env, cfg)
    assert a == b
    assert len(a["episode_rewards"]) == 3
    assert a["infeasible_executions"] == 0


def test_soft_update_endpoints():
    assert pathfinder.soft_update([1.0, 2.0], [3.0, 5.0], 0.0) == [1.0, 2.0]
    assert pathfinder.soft_update([1.0, 2.0], [3.0, 5.0], 1.0) == [3.0, 5.0]


def test_bad_scenario_raises():
    with pytest.raises(pathfinder.ScenarioError):
        pathfinder.load_scenario("not a scenario")
