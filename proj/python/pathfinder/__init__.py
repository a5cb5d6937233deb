"""Multi-domain attack path simulator."""

from ._core import (
    Environment,
    Model,
    ScenarioError,
    State,
    StepOutcome,
    load_scenario,
    load_scenario_file,
    shortest_attack_path,
    soft_update,
    train,
)

__all__ = [
    "Environment",
    "Model",
    "ScenarioError",
    "State",
    "StepOutcome",
    "load_scenario",
    "load_scenario_file",
    "shortest_attack_path",
    "soft_update",
    "train",
]
