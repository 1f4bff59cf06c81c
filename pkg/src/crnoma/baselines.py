"""Benchmark policies that spend at full power without looking ahead.

Both act directly in (alpha, power) coordinates and never call the
closed-form solver.
"""

from __future__ import annotations

import numpy as np

from .environment import SlotState
from .netmodel import NetworkConfig


def _max_alpha(state: SlotState, config: NetworkConfig) -> float:
    return min(1.0, state.battery / (config.slot_duration * config.secondary_max_power))


def greedy_policy(state: SlotState, config: NetworkConfig) -> tuple[float, float]:
    """Spend the whole battery at ``P_max``, harvest for the rest of the slot."""
    return _max_alpha(state, config), config.secondary_max_power


def random_policy(
    state: SlotState, config: NetworkConfig, rng: np.random.Generator
) -> tuple[float, float]:
    """Transmit at ``P_max`` for a uniformly drawn fraction of the affordable time."""
    return float(rng.uniform(0.0, _max_alpha(state, config))), config.secondary_max_power
