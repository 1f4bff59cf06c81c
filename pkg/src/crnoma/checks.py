"""Numerical self-checks shared by the test-suite and ``crnoma verify``.

Instance generators draw solver inputs the way the simulator produces them
(scenario geometry, exponential fading, any battery level, any action), and
the gradient helper is a plain central-difference oracle.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass

import numpy as np

from .environment import SlotState, action_to_ebar
from .lambertw import lambert_w0
from .netmodel import NetworkConfig, equally_spaced, mean_gains
from .subproblem import SolverInputs, feasible_interval, grid_oracle, objective, solve

GEOMETRIES = (
    NetworkConfig(primary_positions=((0.0, 1.0), (0.0, 1000.0))),
    NetworkConfig(primary_positions=equally_spaced((1.0, 0.0), (1000.0, 0.0), 2)),
    NetworkConfig(primary_positions=equally_spaced((1.0, 0.0), (1000.0, 0.0), 10)),
)


@functools.lru_cache(maxsize=None)
def _gain_table(cfg: NetworkConfig):
    return mean_gains(cfg)


def random_instance(rng: np.random.Generator, configs=GEOMETRIES) -> SolverInputs:
    """One solver input drawn like a simulated slot.

    Half of the batteries are uniform on [0, E_max], half log-uniform down to
    1e-12 E_max; one action in ten sits exactly on an endpoint of the window.
    """
    cfg = configs[rng.integers(len(configs))]
    h, h0, g0 = _gain_table(cfg)
    m = rng.integers(cfg.num_primary)
    f = rng.exponential(size=3)
    if rng.random() < 0.5:
        battery = cfg.battery_capacity * rng.uniform()
    else:
        battery = cfg.battery_capacity * 10 ** rng.uniform(-12, 0)
    state = SlotState(g0 * f[0], float(h[m] * f[1]), float(h0[m] * f[2]), float(battery))
    beta = rng.uniform() if rng.random() > 0.1 else float(rng.integers(2))
    return SolverInputs(action_to_ebar(beta, state, cfg), state, cfg)


def wide_instance(rng: np.random.Generator, config: NetworkConfig = GEOMETRIES[0]) -> SolverInputs:
    """Gains log-uniform over many decades, covering ``kappa1 > 1`` as well."""
    state = SlotState(
        10 ** rng.uniform(-13, 0),
        10 ** rng.uniform(-14, -2),
        10 ** rng.uniform(-14, -1),
        config.battery_capacity * rng.uniform(),
    )
    return SolverInputs(action_to_ebar(rng.uniform(), state, config), state, config)


def central_difference(f, params: list[np.ndarray], step: float = 1e-6) -> list[np.ndarray]:
    """Gradient of scalar ``f()`` w.r.t. each array in `params`, perturbed in place.

    One entry at a time; fine for small nets, see
    `stagewise_central_difference` for the 64-wide topologies.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = f()
            flat[i] = orig - step
            down = f()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * step)
        grads.append(g)
    return grads


# Finite differences over the network *function*, written independently of
# the layer classes. Perturbing W[p, q] of a layer moves only column q of its
# pre-activation, by step * x[:, p]; so every perturbed network is evaluated by
# re-running just the layers after the perturbed one, for all entries at once.

def _act(z, kind):
    if kind == "relu":
        return np.where(z > 0, z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _actor_stages(params, s, acts):
    W1, b1, W2, b2, W3, b3 = params

    def out3(z):
        return 0.5 * (np.tanh(z) + 1.0)

    def out2(z):
        return out3(_act(z, acts[1]) @ W3 + b3)

    def out1(z):
        return out2(_act(z, acts[0]) @ W2 + b2)

    z1 = s @ W1 + b1
    a1 = _act(z1, acts[0])
    z2 = a1 @ W2 + b2
    a2 = _act(z2, acts[1])
    return [(s, z1, out1), (a1, z2, out2), (a2, a2 @ W3 + b3, out3)]


def _critic_stages(params, s, a, output):
    Ws, bs, Wa, ba, W1, b1, W2, b2 = params

    def out2(z):
        return _act(z, output)

    def out1(z):
        return out2(_act(z, "relu") @ W2 + b2)

    zs, za = s @ Ws + bs, a @ Wa + ba
    hs, ha = _act(zs, "relu"), _act(za, "relu")
    joined = np.concatenate([hs, ha], axis=1)

    def out_s(z):
        other = np.broadcast_to(ha, z.shape[:-1] + ha.shape[-1:])
        return out1(np.concatenate([_act(z, "relu"), other], axis=-1) @ W1 + b1)

    def out_a(z):
        other = np.broadcast_to(hs, z.shape[:-1] + hs.shape[-1:])
        return out1(np.concatenate([other, _act(z, "relu")], axis=-1) @ W1 + b1)

    z1 = joined @ W1 + b1
    return [(s, zs, out_s), (a, za, out_a), (joined, z1, out1), (_act(z1, "relu"), _act(z1, "relu") @ W2 + b2, out2)]


def _stage_difference(x, z, tail, weights, step):
    n_in, n_out = x.shape[1], z.shape[1]
    eye = np.eye(n_out)
    # shift[p, q] moves pre-activation column q by x[:, p]
    shift_w = (x.T[:, None, :, None] * eye[None, :, None, :]).reshape(n_in * n_out, *z.shape)
    shift_b = np.broadcast_to(eye[:, None, :], (n_out,) + z.shape)
    grads = []
    for shift, shape in ((shift_w, (n_in, n_out)), (shift_b, (n_out,))):
        up = np.sum(weights * tail(z + step * shift), axis=(1, 2))
        down = np.sum(weights * tail(z - step * shift), axis=(1, 2))
        grads.append(((up - down) / (2 * step)).reshape(shape))
    return grads


def stagewise_central_difference(stages, weights, step=1e-6):
    """Central-difference gradients of ``sum(weights * net)`` for all parameters."""
    grads = []
    for x, z, tail in stages:
        grads += _stage_difference(x, z, tail, weights, step)
    return grads


def actor_numeric_gradients(params, s, weights, hidden_activations=("relu", "tanh"), step=1e-6):
    return stagewise_central_difference(_actor_stages(params, s, hidden_activations), weights, step)


def critic_numeric_gradients(params, s, a, weights, output="relu", step=1e-6):
    return stagewise_central_difference(_critic_stages(params, s, a, output), weights, step)


def critic_value(params, s, a, output="relu"):
    """Critic output recomputed from raw parameters."""
    _, z, tail = _critic_stages(params, s, a, output)[-1]
    return tail(z)


def relative_error(a, b, floor: float = 1e-8) -> float:
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def check_lambert(n: int = 10_000) -> CheckResult:
    t = time.perf_counter()
    z = np.concatenate([
        -math.exp(-1) + np.logspace(-9, math.log10(math.exp(-1)), n // 2),
        np.logspace(-9, 6, n - n // 2),
    ])
    w = np.array([lambert_w0(v) for v in z])
    res = float(np.max(np.abs(w * np.exp(w) - z) / np.maximum(1.0, np.abs(z))))
    return CheckResult("lambert_w0 residual", res <= 1e-12, f"max scaled residual {res:.2e}", time.perf_counter() - t)


def check_oracle(n: int = 500, resolution: int = 10_000, seed: int = 0) -> CheckResult:
    t = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_rate = worst_alpha = 0.0
    for _ in range(n):
        inp = random_instance(rng)
        sol = solve(inp)
        a, r = grid_oracle(inp, resolution)
        worst_rate = max(worst_rate, (r - sol.rate) / max(1.0, sol.rate))
        worst_alpha = max(worst_alpha, abs(a - sol.alpha))
    ok = worst_rate <= 1e-6 and worst_alpha <= 1e-4
    return CheckResult(
        "closed form vs grid oracle", ok,
        f"{n} instances, rate gap {worst_rate:.1e}, alpha gap {worst_alpha:.1e}",
        time.perf_counter() - t,
    )


def check_feasibility(n: int = 10_000, seed: int = 1) -> CheckResult:
    t = time.perf_counter()
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        lo, hi = feasible_interval(random_instance(rng))
        bad += lo > hi
    return CheckResult("feasible interval nonempty", bad == 0, f"{bad} violations in {n}", time.perf_counter() - t)


def max_scaled_second_difference(inputs: SolverInputs, points: int = 1000) -> float:
    lo, hi = feasible_interval(inputs)
    if hi <= lo:
        return 0.0
    f = objective(np.linspace(lo, hi, points), inputs)
    d2 = f[:-2] - 2 * f[1:-1] + f[2:]
    return float(np.max(d2) / max(1.0, np.max(np.abs(f))))


def check_concavity(n: int = 200, seed: int = 2) -> CheckResult:
    t = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = max(max_scaled_second_difference(random_instance(rng)) for _ in range(n))
    return CheckResult("objective concave", worst <= 1e-9, f"max scaled 2nd difference {worst:.1e}", time.perf_counter() - t)


def gradient_errors(rng: np.random.Generator, batch: int = 8, critic_output: str = "relu") -> tuple[float, float]:
    """Largest relative error of backprop vs central differences for one
    random actor and one random critic (per parameter array, norm-wise)."""
    from .ddpg import Actor, Critic

    s = rng.uniform(size=(batch, 4))
    a = rng.uniform(size=(batch, 1))
    w = rng.normal(size=(batch, 1))
    actor = Actor(rng=rng, output_scale=1.0)
    actor.forward(s)
    analytic, _ = actor.backward(w)
    numeric = actor_numeric_gradients(actor.params(), s, w)
    actor_err = max(relative_error(x, y) for x, y in zip(analytic, numeric))

    # a positive output bias keeps the ReLU output unit active
    critic = Critic(output=critic_output, rng=rng, output_bias=1.0 if critic_output == "relu" else None)
    critic.forward(s, a)
    analytic, _, da = critic.backward(w)
    numeric = critic_numeric_gradients(critic.params(), s, a, w, critic_output)
    critic_err = max(relative_error(x, y) for x, y in zip(analytic, numeric))
    h = 1e-6
    da_num = (critic_value(critic.params(), s, a + h, critic_output)
              - critic_value(critic.params(), s, a - h, critic_output)) * w / (2 * h)
    critic_err = max(critic_err, relative_error(da, da_num))
    return actor_err, critic_err


def check_gradients(n: int = 10, seed: int = 3) -> CheckResult:
    t = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = max(max(gradient_errors(rng)) for _ in range(n))
    return CheckResult("backprop vs finite differences", worst <= 1e-5, f"{n} instances, max relative error {worst:.1e}", time.perf_counter() - t)


def run_all() -> list[CheckResult]:
    return [check_lambert(), check_oracle(), check_feasibility(), check_concavity(), check_gradients()]
