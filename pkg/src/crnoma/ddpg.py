"""Deep deterministic policy gradient in plain numpy.

Two fixed topologies with hand-written reverse mode:

* actor: state -> 64 (ReLU) -> 64 (tanh) -> 1 (tanh), mapped to beta = (y + 1) / 2
* critic: state -> 64 (ReLU) and action -> 64 (ReLU), concatenated -> 64 (ReLU)
  -> 1 (ReLU, or linear as an ablation)

Weights are stored ``(fan_in, fan_out)`` and batches are row-major, so a
layer computes ``x @ W + b``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .environment import SlotState
from .netmodel import NetworkConfig, path_loss

CHECKPOINT_VERSION = 1

_ACTIVATIONS = ("relu", "tanh", "linear")


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z, out, kind):
    if kind == "relu":
        # subgradient 0 at exactly 0
        return (z > 0).astype(z.dtype)
    if kind == "tanh":
        return 1.0 - out * out
    return np.ones_like(z)


class Dense:
    """Fully connected layer with an elementwise activation."""

    def __init__(self, fan_in: int, fan_out: int, activation: str = "linear", rng=None, scale=1.0):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng()
        bound = 1.0 / math.sqrt(fan_in)
        self.W = rng.uniform(-bound, bound, (fan_in, fan_out)) * scale
        self.b = rng.uniform(-bound, bound, fan_out) * scale
        self.activation = activation
        self._x = self._z = self._y = None

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def forward(self, x):
        z = x @ self.W + self.b
        y = _activate(z, self.activation)
        self._x, self._z, self._y = x, z, y
        return y

    def backward(self, dy):
        """Return ([dW, db], dx) for upstream gradient `dy` of the last forward."""
        dz = dy * _activation_grad(self._z, self._y, self.activation)
        return [self._x.T @ dz, dz.sum(axis=0)], dz @ self.W.T


class MLP:
    """A stack of `Dense` layers."""

    def __init__(self, layers: list[Dense]):
        for a, b in zip(layers, layers[1:]):
            if a.W.shape[1] != b.W.shape[0]:
                raise ValueError("incompatible consecutive layer widths")
        self.layers = layers

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        grads = []
        for layer in reversed(self.layers):
            g, dy = layer.backward(dy)
            grads = g + grads
        return grads, dy


class Actor:
    def __init__(self, state_dim=4, hidden=64, hidden_activations=("relu", "tanh"), rng=None, output_scale=0.1):
        rng = rng or np.random.default_rng()
        a1, a2 = hidden_activations
        self.net = MLP([
            Dense(state_dim, hidden, a1, rng),
            Dense(hidden, hidden, a2, rng),
            Dense(hidden, 1, "tanh", rng, scale=output_scale),
        ])

    def params(self):
        return self.net.params()

    def forward(self, s):
        """Batch of states ``(B, state_dim)`` -> beta ``(B, 1)`` in [0, 1]."""
        s = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s)):
            raise FloatingPointError("non-finite actor input")
        return 0.5 * (self.net.forward(s) + 1.0)

    def backward(self, dbeta):
        return self.net.backward(0.5 * dbeta)


class Critic:
    def __init__(self, state_dim=4, hidden=64, output="relu", rng=None, output_bias=None):
        rng = rng or np.random.default_rng()
        self.state_branch = Dense(state_dim, hidden, "relu", rng)
        self.action_branch = Dense(1, hidden, "relu", rng)
        self.trunk = MLP([Dense(2 * hidden, hidden, "relu", rng), Dense(hidden, 1, output, rng)])
        if output_bias is not None:
            self.trunk.layers[-1].b[:] = output_bias
        self.hidden = hidden

    def params(self):
        return self.state_branch.params() + self.action_branch.params() + self.trunk.params()

    def forward(self, s, a):
        s = np.asarray(s, dtype=float)
        a = np.asarray(a, dtype=float).reshape(-1, 1)
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a))):
            raise FloatingPointError("non-finite critic input")
        joined = np.concatenate([self.state_branch.forward(s), self.action_branch.forward(a)], axis=1)
        return self.trunk.forward(joined)

    def backward(self, dq):
        """Return (parameter grads, d/ds, d/da) for upstream `dq` of shape (B, 1)."""
        g_trunk, d_joined = self.trunk.backward(dq)
        g_s, ds = self.state_branch.backward(d_joined[:, : self.hidden])
        g_a, da = self.action_branch.backward(d_joined[:, self.hidden:])
        return g_s + g_a + g_trunk, ds, da


def copy_params(dst, src):
    for d, s in zip(dst, src):
        d[...] = s


def soft_update(target, online, tau: float):
    """target <- tau * online + (1 - tau) * target, in place."""
    for t, o in zip(target, online):
        t *= 1.0 - tau
        t += tau * o


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        """Descend along `grads` (minimization)."""
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class Transition:
    state_vec: np.ndarray
    action: float
    reward: float
    next_state_vec: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int = 4):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, 1))
        self.rewards = np.zeros((capacity, 1))
        self.next_states = np.zeros((capacity, state_dim))
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def add(self, t: Transition):
        if not 0.0 <= t.action <= 1.0:
            raise ValueError(f"action {t.action} outside [0, 1]")
        i = self.inserted % self.capacity
        self.states[i] = t.state_vec
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state_vec
        self.inserted += 1

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if len(self) < batch_size:
            raise ValueError("not enough transitions to sample a batch")
        return rng.integers(0, len(self), batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_indices(batch_size, rng)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]


class StateNormalizer:
    """Maps a `SlotState` to four features in [0, 1].

    Gains are log-scaled between the path loss of the farthest and nearest
    links of the configured geometry, widened when fading can push a gain
    past them. Battery is divided by capacity.
    """

    def __init__(self, config: NetworkConfig, fading: bool = False, margin_up=1.0, margin_down=2.0):
        d = np.concatenate(list(config.link_distances().values()))
        self.l_max = math.log10(path_loss(d.min(), config)) + (margin_up if fading else 0.0)
        self.l_min = math.log10(path_loss(d.max(), config)) - (margin_down if fading else 0.0)
        self.floor = 10.0**self.l_min
        self.capacity = config.battery_capacity

    def gain_feature(self, x):
        span = self.l_max - self.l_min
        if span <= 0:
            return np.ones_like(np.asarray(x, dtype=float))
        val = (np.log10(np.asarray(x, dtype=float) + self.floor) - self.l_min) / span
        return np.clip(val, 0.0, 1.0)

    def __call__(self, state: SlotState) -> np.ndarray:
        gains = self.gain_feature([state.g0_gain, state.h_gain, state.h0_gain])
        return np.append(gains, state.battery / self.capacity)


def normalize_state(state: SlotState, config: NetworkConfig, fading: bool = False) -> np.ndarray:
    return StateNormalizer(config, fading)(state)


@dataclass
class AgentConfig:
    actor_lr: float = 0.002
    critic_lr: float = 0.004
    gamma: float = 0.9
    tau: float = 0.01
    batch_size: int = 32
    buffer_capacity: int = 20_000
    warmup: int = 500
    hidden: int = 64
    state_dim: int = 4
    noise: str = "gaussian"
    sigma_start: float = 0.2
    sigma_decay: float = 0.995
    sigma_min: float = 0.01
    ou_theta: float = 0.15
    actor_hidden_activations: tuple = ("relu", "tanh")
    critic_output: str = "relu"
    # a ReLU output unit that starts negative on every input never receives a
    # gradient; a positive initial bias keeps it alive (None: uniform init)
    critic_output_bias: float | None = 1.0
    actor_output_scale: float = 0.1

    def __post_init__(self):
        self.actor_hidden_activations = tuple(self.actor_hidden_activations)
        if not 0 <= self.tau <= 1:
            raise ValueError("tau must lie in [0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size exceeds buffer_capacity")
        if self.noise not in ("gaussian", "ou"):
            raise ValueError(f"unknown noise {self.noise!r}")


@dataclass
class TrainDiagnostics:
    critic_loss: float
    actor_objective: float


def _streams(seed: int):
    # stream ids: 0 fading (netmodel), 1 exploration, 2 replay, 3 weight init
    return {
        "exploration": np.random.default_rng([seed, 1]),
        "replay": np.random.default_rng([seed, 2]),
        "init": np.random.default_rng([seed, 3]),
    }


class DDPGAgent:
    """Actor, critic, their target copies, replay buffer and exploration."""

    def __init__(self, config: AgentConfig | None = None, seed: int = 0):
        self.config = config = config or AgentConfig()
        self.seed = seed
        self.rngs = _streams(seed)
        init = self.rngs["init"]
        self.actor = Actor(config.state_dim, config.hidden, config.actor_hidden_activations, init, config.actor_output_scale)
        self.critic = Critic(config.state_dim, config.hidden, config.critic_output, init, config.critic_output_bias)
        self.target_actor = Actor(config.state_dim, config.hidden, config.actor_hidden_activations, init, config.actor_output_scale)
        self.target_critic = Critic(config.state_dim, config.hidden, config.critic_output, init, config.critic_output_bias)
        copy_params(self.target_actor.params(), self.actor.params())
        copy_params(self.target_critic.params(), self.critic.params())
        self.actor_opt = Adam(self.actor.params(), config.actor_lr)
        self.critic_opt = Adam(self.critic.params(), config.critic_lr)
        self.buffer = ReplayBuffer(config.buffer_capacity, config.state_dim)
        self.sigma = config.sigma_start
        self.episodes_seen = 0
        self._ou = 0.0

    # acting -----------------------------------------------------------------

    def policy(self, state_vec) -> float:
        return float(self.actor.forward(np.reshape(state_vec, (1, -1)))[0, 0])

    def select_action(self, state_vec, explore: bool = True) -> float:
        beta = self.policy(state_vec)
        if explore and self.sigma > 0:
            beta += self._noise()
        return float(np.clip(beta, 0.0, 1.0))

    def _noise(self) -> float:
        rng = self.rngs["exploration"]
        if self.config.noise == "ou":
            th = self.config.ou_theta
            self._ou += -th * self._ou + self.sigma * rng.standard_normal()
            return self._ou
        return self.sigma * rng.standard_normal()

    def end_episode(self):
        self.episodes_seen += 1
        self.sigma = max(self.config.sigma_min, self.sigma * self.config.sigma_decay)
        self._ou = 0.0

    # learning ---------------------------------------------------------------

    def remember(self, t: Transition):
        self.buffer.add(t)

    @property
    def ready(self) -> bool:
        return len(self.buffer) >= max(self.config.batch_size, self.config.warmup)

    def train_step(self) -> TrainDiagnostics | None:
        """One critic and one actor update on a sampled batch, then soft
        target updates. Returns ``None`` (no-op) until the buffer is warm."""
        if not self.ready:
            return None
        c = self.config
        s, a, r, s2 = self.buffer.sample(c.batch_size, self.rngs["replay"])
        return self.update_on_batch(s, a, r, s2)

    def update_on_batch(self, s, a, r, s2) -> TrainDiagnostics:
        c = self.config
        n = len(s)
        y = r + c.gamma * self.target_critic.forward(s2, self.target_actor.forward(s2))

        q = self.critic.forward(s, a)
        err = q - y
        critic_loss = float(np.mean(err**2))
        grads, _, _ = self.critic.backward(2.0 * err / n)
        self.critic_opt.step(grads)

        beta = self.actor.forward(s)
        q_pi = self.critic.forward(s, beta)
        _, _, dq_da = self.critic.backward(np.full((n, 1), 1.0 / n))
        # ascend on mean Q: descend on its negative
        actor_grads, _ = self.actor.backward(-dq_da)
        self.actor_opt.step(actor_grads)

        soft_update(self.target_critic.params(), self.critic.params(), c.tau)
        soft_update(self.target_actor.params(), self.actor.params(), c.tau)
        return TrainDiagnostics(critic_loss, float(np.mean(q_pi)))

    # persistence ------------------------------------------------------------

    def _named_arrays(self):
        named = {}
        groups = {
            "actor": self.actor.params(),
            "critic": self.critic.params(),
            "target_actor": self.target_actor.params(),
            "target_critic": self.target_critic.params(),
        }
        for g, arrays in groups.items():
            for i, p in enumerate(arrays):
                named[f"{g}.{i}"] = p
        for g, opt in (("actor_opt", self.actor_opt), ("critic_opt", self.critic_opt)):
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                named[f"{g}.m.{i}"] = m
                named[f"{g}.v.{i}"] = v
        return named

    def save(self, path) -> None:
        """Write every parameter and optimizer moment to an ``.npz`` file."""
        meta = {
            "format_version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "seed": self.seed,
            "sigma": self.sigma,
            "episodes_seen": self.episodes_seen,
            "actor_opt_t": self.actor_opt.t,
            "critic_opt_t": self.critic_opt.t,
        }
        arrays = self._named_arrays()
        with open(path, "wb") as fh:
            np.savez(fh, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path) -> "DDPGAgent":
        with np.load(path) as data:
            meta = json.loads(bytes(data["__meta__"]).decode())
            if meta.get("format_version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
            agent = cls(AgentConfig(**meta["config"]), meta["seed"])
            for name, arr in agent._named_arrays().items():
                stored = data[name]
                if stored.shape != arr.shape:
                    raise ValueError(f"shape mismatch for {name}: {stored.shape} vs {arr.shape}")
                arr[...] = stored
        agent.sigma = meta["sigma"]
        agent.episodes_seen = meta["episodes_seen"]
        agent.actor_opt.t = meta["actor_opt_t"]
        agent.critic_opt.t = meta["critic_opt_t"]
        return agent

    def snapshot(self) -> dict[str, np.ndarray]:
        """Plain copies of all arrays, safe to hand to another thread or process."""
        return {k: v.copy() for k, v in self._named_arrays().items()}
