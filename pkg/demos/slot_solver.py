"""
One slot, solved in closed form
===============================

The secondary user picks how much energy to gain or lose in a slot. Given
that choice, the best split of the slot between transmitting and harvesting
has a closed form. Here we compare it with a brute-force grid.
"""

import numpy as np

from crnoma import NetworkConfig, SlotState, draw_channels
from crnoma.environment import action_to_ebar, ebar_bounds
from crnoma.subproblem import SolverInputs, feasible_interval, grid_oracle, objective, solve

# two primary users, 1 m and 1000 m from the base station
cfg = NetworkConfig(primary_positions=((0.0, 1.0), (0.0, 1000.0)))

# the far user's slot, with a battery holding what one near slot harvests
ch = draw_channels(cfg, slot_index=2)
state = SlotState.from_channels(ch, battery=0.7 * 10**-3.17)
print("gains  g0=%.3e  h=%.3e  h0=%.3e" % (ch.g0_gain, ch.h_gain, ch.h0_gain))
print("energy window [%.3e, %.3e] J" % ebar_bounds(state, cfg))

# sweep the action: 0 spends as much as allowed, 1 harvests only
for beta in (0.0, 0.25, 0.5, 0.75, 1.0):
    inp = SolverInputs(action_to_ebar(beta, state, cfg), state, cfg)
    sol = solve(inp)
    a_grid, r_grid = grid_oracle(inp)
    print(
        "beta=%.2f  alpha*=%.4f  P*=%.3e W  rate=%.4f  grid alpha=%.4f rate=%.4f"
        % (beta, sol.alpha, sol.power, sol.rate, a_grid, r_grid)
    )

# the rate as a function of alpha is concave on the feasible interval
inp = SolverInputs(action_to_ebar(0.3, state, cfg), state, cfg)
lo, hi = feasible_interval(inp)
alphas = np.linspace(lo, hi, 11)
print("\nalpha  rate")
for a, r in zip(alphas, objective(alphas, inp)):
    print("%.3f  %.4f" % (a, r))
