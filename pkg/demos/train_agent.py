"""
Learning the energy plan
========================

DDPG sees the channel gains and the battery level and picks the energy
fluctuation for each slot; the closed-form solver does the rest. This trains
one agent on the two-user layout and compares it with the baselines.

Takes about half a minute. Pass a number of episodes to change the length.
"""

import sys

from crnoma import get_scenario, run_experiment, summarize

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 200
det2 = get_scenario("det2")


def progress(rec):
    if rec.episode % 20 == 0:
        print("episode %3d  mean %.3f  sigma %.3f" % (rec.episode, rec.mean_reward, rec.sigma))


runs = {"ddpg": run_experiment(det2, "ddpg", seed=0, num_episodes=episodes, callback=progress)}
for policy in ("greedy", "random", "oracle"):
    runs[policy] = run_experiment(det2, policy, seed=0, num_episodes=episodes)

print()
print(summarize(runs, trailing_window=20).table())
