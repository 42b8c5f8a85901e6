"""
Training FD-MADDPG and DDPG
===========================

Both learners give every platoon leader its own actor and critic.  FD-MADDPG
trains each critic on the leader's own reward; DDPG trains on the network-wide
mean.  A full desk run is 300 episodes (a minute or two per seed); set
``EPISODES`` lower for a quick look.
"""

import numpy as np

from hapsv2x.drl import train
from hapsv2x.experiments import desk_config, episodes_to_fraction, final_phase_mean, rollout_baseline

EPISODES = 60
run = desk_config()

for algo in ("fd-maddpg", "ddpg"):
    log = train(algo, run.env, run.drl, EPISODES, seed=1)
    r = log.column("reward_mean")
    k = max(1, EPISODES // 5)
    print(f"{algo:>9}: reward {r[:k].mean():+.3f} -> {r[-k:].mean():+.3f}, "
          f"90% of the gain by episode {episodes_to_fraction(r)}, "
          f"final AoI {final_phase_mean(log.aoi_ms_mean):.2f} ms")

rand = rollout_baseline("random", run.env, EPISODES, seed=1)
print(f"   random: reward {np.mean(rand.reward_mean):+.3f}, "
      f"AoI {np.mean(rand.aoi_ms_mean):.2f} ms")

# %%
# The same thing from the command line, with CSVs and checkpoints on disk:
#
#   hapsv2x train --algo fd-maddpg --seed 1 --seed 2 --out out/fd
#   hapsv2x eval --checkpoint out/fd/checkpoints/seed_1 --out out/fd_eval
