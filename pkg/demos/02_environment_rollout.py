"""
Stepping the environment by hand
================================

Two platoons share two sub-channels.  Every slot each leader picks a mode,
a sub-channel and a transmit power.  The age of information (AoI) resets to
one slot after a V2I or V2H transmission that clears the capacity threshold
and otherwise keeps growing.
"""

import numpy as np

from hapsv2x.env import Action, EnvConfig, HapsV2XEnv, Mode
from hapsv2x.experiments import rollout_baseline

cfg = EnvConfig()
env = HapsV2XEnv(cfg)
obs = env.reset(seed=3)
print(f"{cfg.num_platoons} agents, observation size {obs[0].size}")

# A fixed schedule: agent 0 uses V2I on channel 0, agent 1 uses V2H on channel 1
plan = [Action(Mode.V2I, 0, 0.2), Action(Mode.V2H, 1, 0.5)]
for t in range(5):
    outcomes, done = env.step(plan)
    for j, o in enumerate(outcomes):
        print(f"slot {t} agent {j} {o.mode.name}: C={o.capacity_bps_hz:5.2f} bit/s/Hz "
              f"AoI={1e3 * o.aoi_s:.0f} ms reward={o.local_reward:+.3f}")

# %%
# V2V moves the CAM payload to the followers but does not refresh the AoI.
env.reset(seed=3)
for t in range(5):
    outcomes, _ = env.step([Action(Mode.V2V, 0, 0.3), Action(Mode.V2V, 1, 0.3)])
print("after five V2V slots:",
      [f"AoI {1e3 * o.aoi_s:.0f} ms, payload left {o.remaining_payload_bits:.0f} bit"
       for o in outcomes])

# %%
# Reference policies over a few episodes
for name in ("random", "greedy"):
    log = rollout_baseline(name, cfg, episodes=20, seed=1)
    print(f"{name:>6}: AoI {np.mean(log.aoi_ms_mean):.2f} ms, "
          f"reward {np.mean(log.reward_mean):+.3f}, power {np.mean(log.power_w_mean):.2f} W")
