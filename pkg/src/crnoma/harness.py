"""Experiment orchestration: built-in scenarios, training/evaluation loops,
per-episode records, CSV output and cross-policy summaries."""

from __future__ import annotations

import csv
import os
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .baselines import greedy_policy, random_policy
from .ddpg import AgentConfig, DDPGAgent, StateNormalizer, Transition
from .environment import EPISODE_SLOTS, Environment
from .netmodel import NetworkConfig, equally_spaced

POLICIES = ("ddpg", "greedy", "random", "oracle")
OUT_DIR_ENV = "CRNOMA_OUT_DIR"
CSV_HEADER = ("episode", "mean_reward", "final_battery", "sigma", "seconds")


@dataclass(frozen=True)
class Scenario:
    name: str
    config: NetworkConfig
    fading_mode: str = "none"
    num_episodes: int = 200
    slots_per_episode: int = EPISODE_SLOTS
    seeds: tuple[int, ...] = (0, 1, 2)
    policy: str = "ddpg"

    def __post_init__(self):
        if self.num_episodes < 1:
            raise ValueError("num_episodes must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")


@dataclass
class EpisodeRecord:
    episode: int
    rewards: np.ndarray
    final_battery: float
    sigma: float
    seconds: float
    min_battery: float = 0.0
    max_battery: float = 0.0

    @property
    def mean_reward(self) -> float:
        """Per-slot mean rate in NPCU."""
        return float(np.mean(self.rewards))


def _segment_config(m: int) -> NetworkConfig:
    return NetworkConfig(primary_positions=equally_spaced((1.0, 0.0), (1000.0, 0.0), m))


def builtin_scenarios() -> list[Scenario]:
    """The deterministic two-user case and the fading cases with M = 2, 10."""
    return [
        Scenario("det2", NetworkConfig(primary_positions=((0.0, 1.0), (0.0, 1000.0)))),
        Scenario("const-fading-M2", _segment_config(2), "constant_per_experiment"),
        Scenario("const-fading-M10", _segment_config(10), "constant_per_experiment"),
        Scenario("tv-fading-M2", _segment_config(2), "per_episode", num_episodes=150),
        Scenario("tv-fading-M10", _segment_config(10), "per_episode", num_episodes=150),
    ]


def get_scenario(name: str) -> Scenario:
    for sc in builtin_scenarios():
        if sc.name == name:
            return sc
    raise KeyError(f"unknown scenario {name!r}")


def oracle_beta(env: Environment) -> float:
    """Harvest-only in the slot of the primary user closest in gain to the
    secondary user, transmit-only otherwise."""
    gains = [ch.h0_gain for ch in env.channels.all_gains(env.episode)]
    return 1.0 if env.scheduled == int(np.argmax(gains)) + 1 else 0.0


def run_experiment(
    scenario: Scenario,
    policy: str | None = None,
    seed: int | None = None,
    num_episodes: int | None = None,
    out_dir: str | os.PathLike | None = None,
    agent_config: AgentConfig | None = None,
    callback: Callable[[EpisodeRecord], None] | None = None,
) -> list[EpisodeRecord]:
    """Run one experiment: a fresh agent/environment pair over many episodes.

    Each episode starts from a full battery. The DDPG agent acts with
    exploration noise and trains once per slot after warm-up; the baselines
    set ``(alpha, power)`` directly. With `out_dir`, a CSV named
    ``<scenario>_<policy>_seed<seed>.csv`` is written there.
    """
    policy = policy or scenario.policy
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    seed = scenario.seeds[0] if seed is None else seed
    episodes = num_episodes or scenario.num_episodes
    cfg = scenario.config

    env = Environment(cfg, scenario.fading_mode, seed, scenario.slots_per_episode)
    agent = None
    if policy == "ddpg":
        acfg = agent_config or AgentConfig(gamma=cfg.discount)
        agent = DDPGAgent(acfg, seed)
        norm = StateNormalizer(cfg, fading=scenario.fading_mode != "none")
    policy_rng = np.random.default_rng([seed, 4])

    records = []
    for k in range(episodes):
        t0 = time.perf_counter()
        state = env.reset(episode=k)
        rewards = np.empty(scenario.slots_per_episode)
        lo = hi = state.battery
        sigma = agent.sigma if agent else 0.0
        for i in range(scenario.slots_per_episode):
            if policy == "ddpg":
                sv = norm(state)
                beta = agent.select_action(sv)
                out = env.step(beta)
                agent.remember(Transition(sv, beta, out.reward, norm(out.next_state)))
                agent.train_step()
            elif policy == "oracle":
                out = env.step(oracle_beta(env))
            elif policy == "greedy":
                out = env.step_direct(*greedy_policy(state, cfg))
            else:
                out = env.step_direct(*random_policy(state, cfg, policy_rng))
            rewards[i] = out.reward
            state = out.next_state
            lo, hi = min(lo, state.battery), max(hi, state.battery)
        if agent:
            agent.end_episode()
        rec = EpisodeRecord(k, rewards, state.battery, sigma, time.perf_counter() - t0, lo, hi)
        records.append(rec)
        if callback:
            callback(rec)
    if out_dir is not None:
        write_csv(records, Path(out_dir) / f"{scenario.name}_{policy}_seed{seed}.csv")
    return records


def write_csv(records: list[EpisodeRecord], path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([r.episode, repr(r.mean_reward), repr(r.final_battery), repr(r.sigma), f"{r.seconds:.4f}"])
    return path


def trailing_mean(records: list[EpisodeRecord], window: int) -> float:
    """Mean per-slot reward over the last `window` episodes (clamped)."""
    if not records:
        raise ValueError("no records")
    if window > len(records):
        warnings.warn(f"window {window} > {len(records)} episodes; using all", stacklevel=2)
        window = len(records)
    return float(np.mean([r.mean_reward for r in records[-window:]]))


@dataclass
class Summary:
    window: int
    rows: dict[str, dict[str, float]] = field(default_factory=dict)

    def table(self) -> str:
        lines = [f"{'policy':<12}{'trailing':>12}{'best':>12}{'best_ep':>9}  (per-slot NPCU, last {self.window} episodes)"]
        for name, row in self.rows.items():
            lines.append(f"{name:<12}{row['trailing']:>12.4f}{row['best']:>12.4f}{int(row['best_episode']):>9d}")
        return "\n".join(lines)


def summarize(runs: dict[str, list[EpisodeRecord]] | list[EpisodeRecord], trailing_window: int = 20) -> Summary:
    """Trailing-window mean and best episode for each named run."""
    if not isinstance(runs, dict):
        runs = {"run": runs}
    summary = Summary(trailing_window)
    for name, records in runs.items():
        means = [r.mean_reward for r in records]
        best = int(np.argmax(means))
        summary.rows[name] = {
            "trailing": trailing_mean(records, trailing_window),
            "best": means[best],
            "best_episode": records[best].episode,
        }
    return summary


def battery_violations(records: list[EpisodeRecord], capacity: float) -> int:
    return sum(r.min_battery < 0 or r.max_battery > capacity for r in records)


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "results"))


def with_config(scenario: Scenario, config: NetworkConfig) -> Scenario:
    return replace(scenario, config=config)
