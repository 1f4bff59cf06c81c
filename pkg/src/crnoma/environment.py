"""Slot-level decision environment: battery dynamics, rate, action window and
the transition consumed by the learning agent and the baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .netmodel import ChannelModel, ChannelRealization, NetworkConfig, scheduled_user
from .subproblem import SolverInputs, SubproblemSolution, solve

EPISODE_SLOTS = 100
#: Floating-point residue tolerated below an empty battery before it is an error.
BATTERY_FLOOR_TOL = 1e-12
ENERGY_RTOL = 1e-9


class EnergyCausalityError(ValueError):
    """More energy spent in a slot than was stored at its start."""


class InvalidActionError(ValueError):
    pass


@dataclass(frozen=True)
class SlotState:
    """What the secondary user observes at the start of a slot."""

    g0_gain: float
    h_gain: float
    h0_gain: float
    battery: float

    @classmethod
    def from_channels(cls, ch: ChannelRealization, battery: float) -> "SlotState":
        return cls(ch.g0_gain, ch.h_gain, ch.h0_gain, battery)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.g0_gain, self.h_gain, self.h0_gain, self.battery)


@dataclass(frozen=True)
class SlotOutcome:
    reward: float
    next_state: SlotState
    ebar_applied: float
    alpha: float
    secondary_power: float


def achievable_rate(alpha: float, power: float, state: SlotState, config: NetworkConfig) -> float:
    """Secondary-user rate in nats per channel use, decoded first under SIC."""
    if alpha <= 0 or power <= 0:
        return 0.0
    sinr = power * state.g0_gain / (config.noise_power + config.primary_tx_power * state.h_gain)
    return alpha * math.log1p(sinr)


def harvested_energy(alpha: float, state: SlotState, config: NetworkConfig) -> float:
    return (1.0 - alpha) * config.max_harvest * state.h0_gain


def battery_update(state: SlotState, alpha: float, power: float, config: NetworkConfig) -> float:
    """Battery level at the start of the next slot.

    Transmission happens first (``alpha T`` seconds at `power`), harvesting
    fills the rest of the slot, and the result is capped at capacity.
    """
    spent = alpha * config.slot_duration * power
    if spent > state.battery * (1 + ENERGY_RTOL) + 1e-300:
        raise EnergyCausalityError(
            f"spending {spent} J with only {state.battery} J stored"
        )
    level = harvested_energy(alpha, state, config) - spent + state.battery
    return _clamp_battery(level, config)


def _clamp_battery(level: float, config: NetworkConfig) -> float:
    if level < 0:
        assert level > -BATTERY_FLOOR_TOL, f"battery went negative by {-level} J"
        level = 0.0
    return min(level, config.battery_capacity)


def ebar_bounds(state: SlotState, config: NetworkConfig) -> tuple[float, float]:
    """Range of the energy fluctuation between no harvesting and no transmission."""
    lo = -min(state.battery, config.slot_duration * config.secondary_max_power)
    hi = min(config.battery_capacity - state.battery, config.max_harvest * state.h0_gain)
    return lo, max(hi, 0.0)


def action_to_ebar(beta: float, state: SlotState, config: NetworkConfig) -> float:
    """Map ``beta`` in [0, 1] affinely onto `ebar_bounds`."""
    if not 0.0 <= beta <= 1.0:
        raise InvalidActionError(f"beta must lie in [0, 1], got {beta}")
    lo, hi = ebar_bounds(state, config)
    return beta * hi + (1.0 - beta) * lo


class Environment:
    """One secondary user stepping through TDMA slots.

    Owns a `ChannelModel`; a single instance follows a single trajectory.
    Slots are numbered from 1 within each episode, so episode k starts with
    the first primary user again.
    """

    def __init__(
        self,
        config: NetworkConfig,
        fading_mode: str = "none",
        seed: int = 0,
        slots_per_episode: int = EPISODE_SLOTS,
    ):
        self.config = config
        self.channels = ChannelModel(config, fading_mode, seed)
        self.slots_per_episode = slots_per_episode
        self.episode = 0
        self.slot = 1
        self.state: SlotState | None = None

    @property
    def scheduled(self) -> int:
        return scheduled_user(self.slot, self.config.num_primary)

    @property
    def done(self) -> bool:
        return self.slot > self.slots_per_episode

    def reset(self, episode: int | None = None) -> SlotState:
        """Start an episode with a full battery."""
        self.episode = self.episode + 1 if episode is None else episode
        self.slot = 1
        ch = self.channels.channels(self.slot, self.episode)
        self.state = SlotState.from_channels(ch, self.config.battery_capacity)
        return self.state

    def step(self, beta: float) -> SlotOutcome:
        """Take action ``beta``, solve the slot in closed form and advance."""
        state = self.state
        ebar = action_to_ebar(beta, state, self.config)
        sol = solve(SolverInputs(ebar, state, self.config))
        check_energy_identity(sol, ebar, state, self.config)
        return self._advance(state, ebar, sol.alpha, sol.power, sol.rate)

    def step_direct(self, alpha: float, power: float) -> SlotOutcome:
        """Apply ``(alpha, power)`` without the solver (benchmark policies)."""
        state = self.state
        rate = achievable_rate(alpha, power, state, self.config)
        new_level = battery_update(state, alpha, power, self.config)
        ebar = harvested_energy(alpha, state, self.config) - alpha * self.config.slot_duration * power
        return self._finish(state, new_level, ebar, alpha, power, rate)

    def _advance(self, state, ebar, alpha, power, rate) -> SlotOutcome:
        new_level = _clamp_battery(state.battery + ebar, self.config)
        return self._finish(state, new_level, ebar, alpha, power, rate)

    def _finish(self, state, new_level, ebar, alpha, power, rate) -> SlotOutcome:
        # record the fluctuation actually realized once the capacity cap binds
        ebar_applied = min(ebar, self.config.battery_capacity - state.battery)
        self.slot += 1
        ch = self.channels.channels(self.slot, self.episode)
        self.state = SlotState.from_channels(ch, new_level)
        return SlotOutcome(rate, self.state, ebar_applied, alpha, power)


def check_energy_identity(
    sol: SubproblemSolution, ebar: float, state: SlotState, config: NetworkConfig
) -> None:
    """Assert the solver's (alpha, P) realize `ebar` and respect causality."""
    spent = sol.alpha * config.slot_duration * sol.power
    realized = harvested_energy(sol.alpha, state, config) - spent
    scale = max(abs(ebar), config.max_harvest * state.h0_gain, spent, 1e-300)
    if abs(realized - ebar) > ENERGY_RTOL * scale:
        raise EnergyCausalityError(
            f"solver realized {realized} J instead of ebar={ebar} J"
        )
    if spent > state.battery * (1 + ENERGY_RTOL) + 1e-300:
        raise EnergyCausalityError(f"solver spends {spent} J > stored {state.battery} J")


def with_battery(state: SlotState, battery: float) -> SlotState:
    return replace(state, battery=battery)
