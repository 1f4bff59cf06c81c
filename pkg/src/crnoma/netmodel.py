"""Physical-layer model: geometry, path loss, small-scale fading and the
round-robin TDMA schedule of the primary users."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

FADING_MODES = ("none", "constant_per_experiment", "per_episode")

#: -170 dBm/Hz over 1 MHz.
DEFAULT_NOISE_POWER = 1e-14
#: Gain at 1 m of the calibrated power law (0.7 W * T / 10**3.17 J harvested at 1 m).
DEFAULT_PATHLOSS_REF = 10 ** -3.17


class InvalidGeometryError(ValueError):
    """Raised for non-positive link distances or malformed positions."""


Point = tuple[float, float]


def equally_spaced(start: Point, stop: Point, count: int) -> tuple[Point, ...]:
    """`count` points on the segment start-stop, both endpoints included."""
    if count == 1:
        return (tuple(map(float, start)),)
    xs = np.linspace(start[0], stop[0], count)
    ys = np.linspace(start[1], stop[1], count)
    return tuple((float(x), float(y)) for x, y in zip(xs, ys))


@dataclass(frozen=True)
class NetworkConfig:
    """Physical and scheduling constants of the CR-NOMA uplink.

    Powers in W, energies in J, times in s, positions in m. Instances are
    immutable and hashable so they can key caches and be shared freely.
    """

    primary_positions: tuple[Point, ...] = ((0.0, 1.0), (0.0, 1000.0))
    bs_position: Point = (0.0, 0.0)
    secondary_position: Point = (1.0, 1.0)
    primary_tx_power: float = 1.0
    battery_capacity: float = 0.1
    slot_duration: float = 1.0
    secondary_max_power: float = 0.1
    harvest_efficiency: float = 0.7
    noise_power: float = DEFAULT_NOISE_POWER
    pathloss_ref: float = DEFAULT_PATHLOSS_REF
    pathloss_exponent: float = 3.0
    discount: float = 0.9
    # documentation only; the calibrated power law does not use it
    carrier_frequency: float = 914e6
    num_primary: int = field(default=-1)

    def __post_init__(self):
        positions = tuple((float(p[0]), float(p[1])) for p in self.primary_positions)
        object.__setattr__(self, "primary_positions", positions)
        object.__setattr__(self, "bs_position", tuple(map(float, self.bs_position)))
        object.__setattr__(
            self, "secondary_position", tuple(map(float, self.secondary_position))
        )
        if self.num_primary == -1:
            object.__setattr__(self, "num_primary", len(positions))
        self.validate()

    def validate(self):
        if self.num_primary < 1 or self.num_primary != len(self.primary_positions):
            raise ValueError(
                f"num_primary={self.num_primary} does not match "
                f"{len(self.primary_positions)} primary positions"
            )
        for name in (
            "primary_tx_power",
            "battery_capacity",
            "slot_duration",
            "secondary_max_power",
            "noise_power",
            "pathloss_exponent",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0 < self.harvest_efficiency <= 1:
            raise ValueError("harvest_efficiency must lie in (0, 1]")
        if not 0 < self.pathloss_ref <= 1:
            raise ValueError("pathloss_ref must lie in (0, 1]")
        if not 0 <= self.discount < 1:
            raise ValueError("discount must lie in [0, 1)")

    def replace(self, **changes) -> "NetworkConfig":
        if "primary_positions" in changes and "num_primary" not in changes:
            changes["num_primary"] = -1
        return dataclasses.replace(self, **changes)

    @property
    def max_harvest(self) -> float:
        """T * eta * P_n, the harvested energy per unit of |h_{n,0}|^2."""
        return self.slot_duration * self.harvest_efficiency * self.primary_tx_power

    def link_distances(self) -> dict[str, np.ndarray]:
        """Distances of every link type: `h` (primary-BS), `h0` (primary-SU), `g0`."""
        prim = np.asarray(self.primary_positions)
        bs = np.asarray(self.bs_position)
        su = np.asarray(self.secondary_position)
        return {
            "h": np.hypot(*(prim - bs).T),
            "h0": np.hypot(*(prim - su).T),
            "g0": np.array([math.dist(su, bs)]),
        }


@dataclass(frozen=True)
class ChannelRealization:
    """Raw power gains of the three links active in one slot (noise kept apart)."""

    g0_gain: float
    h_gain: float
    h0_gain: float


def scheduled_user(slot_index: int, num_primary: int) -> int:
    """Index in 1..M of the primary user transmitting in slot `slot_index` (1-based)."""
    if slot_index < 1 or num_primary < 1:
        raise ValueError("slot_index and num_primary must be >= 1")
    return (slot_index - 1) % num_primary + 1


def path_loss(distance, config: NetworkConfig | None = None):
    """Large-scale power gain ``pathloss_ref * distance**-pathloss_exponent``.

    Accepts scalars or arrays; every distance must be strictly positive.
    """
    ref = DEFAULT_PATHLOSS_REF if config is None else config.pathloss_ref
    exponent = 3.0 if config is None else config.pathloss_exponent
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise InvalidGeometryError(f"link distance must be > 0, got {distance!r}")
    out = ref * d**-exponent
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FadingDraw:
    """Unit-mean exponential power factors for every (user, link) pair."""

    h: np.ndarray
    h0: np.ndarray
    g0: float


def _fading_rng(seed: int, episode: int) -> np.random.Generator:
    # stream id 0 is reserved for fading; other purposes use other ids
    return np.random.default_rng([int(seed), 0, int(episode)])


def fading_draw(
    config: NetworkConfig, fading_mode: str, seed: int = 0, episode: int = 0
) -> FadingDraw:
    """Small-scale fading factors in force during `episode` of experiment `seed`.

    ``|CN(0,1)|^2`` is Exponential(1). In ``constant_per_experiment`` mode the
    episode index is ignored, so every episode sees the same draw.
    """
    m = config.num_primary
    if fading_mode == "none":
        return FadingDraw(np.ones(m), np.ones(m), 1.0)
    if fading_mode == "constant_per_experiment":
        episode = 0
    elif fading_mode != "per_episode":
        raise ValueError(f"unknown fading mode {fading_mode!r}; expected {FADING_MODES}")
    rng = _fading_rng(seed, episode)
    h = rng.exponential(1.0, m)
    h0 = rng.exponential(1.0, m)
    g0 = float(rng.exponential(1.0))
    return FadingDraw(h, h0, g0)


def mean_gains(config: NetworkConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """Path-loss-only gains (h per user, h0 per user, g0)."""
    d = config.link_distances()
    return (
        path_loss(d["h"], config),
        path_loss(d["h0"], config),
        float(path_loss(d["g0"], config)[0]),
    )


def draw_channels(
    config: NetworkConfig,
    slot_index: int,
    fading_mode: str = "none",
    seed: int = 0,
    episode: int = 0,
) -> ChannelRealization:
    """Channel gains seen by the secondary user in slot `slot_index`.

    A pure function of its arguments: equal inputs give identical gains.
    `ChannelModel` caches the fading draw when stepping through an episode.
    """
    return ChannelModel(config, fading_mode, seed).channels(slot_index, episode)


class ChannelModel:
    """Per-experiment channel source that caches the current fading draw."""

    def __init__(self, config: NetworkConfig, fading_mode: str = "none", seed: int = 0):
        if fading_mode not in FADING_MODES:
            raise ValueError(f"unknown fading mode {fading_mode!r}")
        self.config = config
        self.fading_mode = fading_mode
        self.seed = seed
        self._h, self._h0, self._g0 = mean_gains(config)
        self._cached: tuple[int, FadingDraw] | None = None

    def _fading(self, episode: int) -> FadingDraw:
        key = 0 if self.fading_mode != "per_episode" else episode
        if self._cached is None or self._cached[0] != key:
            self._cached = (key, fading_draw(self.config, self.fading_mode, self.seed, key))
        return self._cached[1]

    def channels(self, slot_index: int, episode: int = 0) -> ChannelRealization:
        f = self._fading(episode)
        m = scheduled_user(slot_index, self.config.num_primary) - 1
        return ChannelRealization(
            g0_gain=self._g0 * f.g0,
            h_gain=float(self._h[m] * f.h[m]),
            h0_gain=float(self._h0[m] * f.h0[m]),
        )

    def all_gains(self, episode: int = 0) -> list[ChannelRealization]:
        """Realizations for every primary user, in schedule order."""
        return [self.channels(m, episode) for m in range(1, self.config.num_primary + 1)]


def config_from_mapping(values: dict, base: NetworkConfig | None = None) -> NetworkConfig:
    """Override fields of `base` (default config) from a plain mapping.

    Unknown keys raise ``KeyError`` so typos in config files are not silently
    ignored.
    """
    base = base or NetworkConfig()
    names = {f.name for f in dataclasses.fields(NetworkConfig)}
    unknown = set(values) - names
    if unknown:
        raise KeyError(f"unknown NetworkConfig fields: {sorted(unknown)}")
    changes = dict(values)
    for key in ("primary_positions",):
        if key in changes:
            changes[key] = tuple(tuple(p) for p in changes[key])
    return base.replace(**changes)

