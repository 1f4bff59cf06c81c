"""Closed-form per-slot optimizer.

For a chosen energy fluctuation ``ebar`` (harvested minus spent energy in the
slot) find the time-sharing coefficient ``alpha`` and the transmit power that
maximize the secondary user's rate

    R = alpha * ln(1 + P * g0 / (N + P_n * h))

subject to ``(1 - alpha) T eta P_n h0 - alpha T P = ebar``, energy causality
``alpha T P <= E_n`` and ``0 <= P <= P_max``. Eliminating ``P`` leaves a concave
one-dimensional problem in ``alpha`` whose stationary point has a closed form
through the principal Lambert W branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .lambertw import w0_plus_one

if TYPE_CHECKING:
    from .environment import SlotState
    from .netmodel import NetworkConfig

#: Relative distance from ``ebar == T eta P_n h0`` treated as the no-transmission case.
SINGULAR_RTOL = 1e-12
INTERVAL_TOL = 1e-9
ALPHA_ASSERT_TOL = 1e-9


class ContractError(RuntimeError):
    """The solver was called with inputs outside its feasibility contract."""


class ObjectiveDomainError(ValueError):
    pass


@dataclass(frozen=True)
class SolverInputs:
    ebar: float
    state: "SlotState"
    config: "NetworkConfig"

    @property
    def harvest_cap(self) -> float:
        """T eta P_n |h0|^2: energy harvested if the whole slot is spent harvesting."""
        return self.config.max_harvest * self.state.h0_gain

    @property
    def interference(self) -> float:
        return self.config.noise_power + self.config.primary_tx_power * self.state.h_gain

    @property
    def kappa1(self) -> float:
        c = self.config
        return (
            c.harvest_efficiency * c.primary_tx_power * self.state.h0_gain
            * self.state.g0_gain / self.interference
        )

    @property
    def kappa2(self) -> float:
        return (
            self.ebar * self.state.g0_gain
            / (self.config.slot_duration * self.interference)
        )


@dataclass(frozen=True)
class SubproblemSolution:
    alpha: float
    power: float
    rate: float
    kappa1: float
    kappa2: float
    theta0: float
    theta1: float
    x_star: float

    @property
    def transmits(self) -> bool:
        return self.alpha > 0 and self.power > 0


def _theta_bounds(inputs: SolverInputs) -> tuple[float, float]:
    """(theta0, theta1): the binding lower bound and the zero-power upper bound."""
    a = inputs.harvest_cap
    e, c = inputs.ebar, inputs.config
    if a == 0:
        # nothing to harvest; alpha * T * P = -ebar with P <= P_max
        theta0 = -e / (c.slot_duration * c.secondary_max_power)
        theta1 = math.inf if e < 0 else 0.0
        return theta0, theta1
    theta0 = max(
        1.0 - (inputs.state.battery + e) / a,
        (a - e) / (a + c.slot_duration * c.secondary_max_power),
    )
    theta1 = 1.0 - e / a
    return theta0, theta1


def feasible_interval(inputs: SolverInputs) -> tuple[float, float]:
    """Closed interval of admissible ``alpha`` for the given fluctuation.

    Always nonempty when ``ebar`` lies inside `ebar_bounds`; an empty interval
    beyond `INTERVAL_TOL` signals a caller bug and raises `ContractError`.
    """
    theta0, theta1 = _theta_bounds(inputs)
    lo = max(0.0, theta0)
    hi = min(1.0, theta1)
    if lo > hi:
        if lo - hi > INTERVAL_TOL:
            raise ContractError(
                f"empty feasible interval [{lo}, {hi}] for ebar={inputs.ebar}"
            )
        lo = hi
    return lo, hi


def objective(alpha, inputs: SolverInputs):
    """Rate as a function of ``alpha`` after eliminating the power.

    ``alpha * ln(1 - k1 + (k1 - k2) / alpha)``; the value at ``alpha = 0`` is
    its limit, 0. Vectorized over `alpha`.
    """
    k1, k2 = inputs.kappa1, inputs.kappa2
    x = np.atleast_1d(np.asarray(alpha, dtype=float))
    out = np.zeros_like(x)
    pos = x > 0
    # argument of the log is 1 + s; log1p keeps precision for tiny SINRs
    s = (k1 - k2) / x[pos] - k1
    if np.any(s <= -1.0):
        raise ObjectiveDomainError("log argument <= 0: alpha outside the feasible set")
    out[pos] = x[pos] * np.log1p(s)
    return float(out[0]) if np.ndim(alpha) == 0 else out


def is_singular(inputs: SolverInputs) -> bool:
    """True when ``ebar`` equals the full-slot harvest: no transmission possible."""
    a = inputs.harvest_cap
    return abs(inputs.ebar - a) <= SINGULAR_RTOL * a


def stationary_point(kappa1: float, kappa2: float) -> float:
    """Unconstrained maximizer of the concave objective over ``alpha >= 0``.

    ``(k1 - k2) / (exp(W0((k1 - 1)/e) + 1) - 1 + k1)``, with the denominator
    formed as ``expm1(u) + k1`` for ``u = W0 + 1`` to avoid cancellation.
    Returns ``inf`` when ``k1 == 0`` (rate increasing in alpha).
    """
    if kappa1 <= 0:
        return math.inf if kappa1 - kappa2 > 0 else 0.0
    u = w0_plus_one(kappa1)
    return (kappa1 - kappa2) / (math.expm1(u) + kappa1)


def optimal_alpha(inputs: SolverInputs) -> float:
    """Optimal time-sharing coefficient, ``min(1, max(x*, theta0))``."""
    return _solve_alpha(inputs)[0]


def _solve_alpha(inputs: SolverInputs):
    k1, k2 = inputs.kappa1, inputs.kappa2
    theta0, theta1 = _theta_bounds(inputs)
    if is_singular(inputs):
        return 0.0, k1, k2, theta0, theta1, 0.0
    if inputs.state.g0_gain == 0:
        # rate is zero everywhere; take the harvest-maximal endpoint
        return feasible_interval(inputs)[1], k1, k2, theta0, theta1, 0.0
    x_star = stationary_point(k1, k2)
    alpha = min(1.0, max(x_star, theta0))
    if alpha > min(1.0, theta1) + ALPHA_ASSERT_TOL:
        raise ContractError(
            f"alpha*={alpha} exceeds upper bound theta1={theta1} (x*={x_star})"
        )
    lo, hi = feasible_interval(inputs)
    alpha = min(max(alpha, lo), hi)
    return alpha, k1, k2, theta0, theta1, x_star


def optimal_power(alpha_star: float, inputs: SolverInputs) -> float:
    """Transmit power meeting the energy identity at ``alpha_star``.

    Raises ``ValueError`` for ``alpha_star == 0``, where the power is undefined.
    """
    if alpha_star <= 0:
        raise ValueError("power is undefined when alpha = 0")
    c = inputs.config
    a = inputs.harvest_cap
    return ((1.0 - alpha_star) * a - inputs.ebar) / (alpha_star * c.slot_duration)


def solve(inputs: SolverInputs) -> SubproblemSolution:
    from .environment import achievable_rate

    alpha, k1, k2, theta0, theta1, x_star = _solve_alpha(inputs)
    c = inputs.config
    if alpha <= 0:
        power = rate = 0.0
    else:
        power = optimal_power(alpha, inputs)
        # rounding can leave the power a few ulps outside its box
        cap = min(c.secondary_max_power, inputs.state.battery / (alpha * c.slot_duration))
        power = min(max(power, 0.0), cap)
        rate = achievable_rate(alpha, power, inputs.state, c)
    return SubproblemSolution(alpha, power, rate, k1, k2, theta0, theta1, x_star)


def grid_oracle(
    inputs: SolverInputs, resolution: int = 10_000, refine: bool = True
) -> tuple[float, float]:
    """Brute-force maximizer of `objective` over the feasible interval.

    Evaluates a uniform grid of `resolution` points plus both endpoints and
    optionally polishes the best point by golden-section search on its two
    neighbouring cells. For verification only.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if is_singular(inputs):
        return 0.0, 0.0
    lo, hi = feasible_interval(inputs)
    grid = np.linspace(lo, hi, resolution)
    vals = objective(grid, inputs)
    i = int(np.argmax(vals))
    best_x, best_v = float(grid[i]), float(vals[i])
    if refine and hi > lo:
        a = float(grid[max(i - 1, 0)])
        b = float(grid[min(i + 1, resolution - 1)])
        x, v = _golden_max(lambda t: objective(t, inputs), a, b)
        if v > best_v:
            best_x, best_v = x, v
    return best_x, best_v


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, a: float, b: float, iters: int = 100):
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a <= 1e-15 * max(1.0, abs(a)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    candidates = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    v, x = max(candidates)
    return x, v
