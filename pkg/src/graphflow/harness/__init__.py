"""Scenario configuration, initial-map presets, run persistence and the CLI."""

from graphflow.harness.config import ScenarioConfig, build_initial_map, load_config, parse_config
from graphflow.harness.presets import PRESETS, build_preset

__all__ = ["PRESETS", "ScenarioConfig", "build_initial_map", "build_preset", "load_config", "parse_config"]
