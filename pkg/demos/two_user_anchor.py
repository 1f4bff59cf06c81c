"""
The two-user hand analysis
==========================

With one primary user next to the secondary user and one far away, the best
plan is plain: harvest while the near user talks, spend everything while the
far one does. Each far slot then yields about 12 NPCU, i.e. about 6 per slot.
"""

import numpy as np

from crnoma import get_scenario, run_experiment

det2 = get_scenario("det2")
records = run_experiment(det2, policy="oracle", num_episodes=10)

rewards = np.concatenate([r.rewards for r in records])
print("first slots:", np.round(rewards[:6], 4))
print("mean over slots 201-1000: %.4f NPCU" % rewards[200:1000].mean())

# the baselines spend whatever they hold at full power
for policy in ("greedy", "random"):
    recs = run_experiment(det2, policy=policy, num_episodes=10)
    print("%-7s mean %.4f NPCU" % (policy, np.mean([r.mean_reward for r in recs])))
