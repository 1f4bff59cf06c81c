"""Energy-constrained CR-NOMA secondary user: closed-form per-slot power and
time-sharing, and a DDPG agent that manages the battery across slots."""

from .baselines import greedy_policy, random_policy
from .ddpg import AgentConfig, DDPGAgent, StateNormalizer, normalize_state
from .environment import (
    Environment,
    SlotOutcome,
    SlotState,
    achievable_rate,
    action_to_ebar,
    battery_update,
    ebar_bounds,
)
from .harness import Scenario, builtin_scenarios, get_scenario, run_experiment, summarize
from .lambertw import lambert_w0
from .netmodel import (
    ChannelModel,
    ChannelRealization,
    NetworkConfig,
    draw_channels,
    path_loss,
    scheduled_user,
)
from .subproblem import SolverInputs, SubproblemSolution, grid_oracle, solve

__version__ = "0.1.0"
