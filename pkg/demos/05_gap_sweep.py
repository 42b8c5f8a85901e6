"""
AoI against the inter-platoon gap
=================================

Pushing the second platoon further from the roadside unit weakens its V2I
link.  The sweep repeats a run for every gap and writes ``sweep.csv``.  The
baselines need no training, so they make a fast first look.
"""

import tempfile
from pathlib import Path

from hapsv2x.experiments import desk_config, gap_sweep

base = desk_config().replace(episodes=30, seeds=(1, 2, 3))

with tempfile.TemporaryDirectory() as d:
    rows, _ = gap_sweep(base, [5, 15, 25, 35], ["random", "greedy"], out_dir=d)
    print(Path(d, "sweep.csv").read_text())

for gap, algo, aoi, spread, reward in rows:
    print(f"{gap:4.0f} m {algo:>10}: AoI {aoi:.2f} ms (IQR {spread:.2f}), reward {reward:+.3f}")

# %%
# For the learners, swap in ``["fd-maddpg", "ddpg"]`` and the full 300
# episodes, or use ``hapsv2x sweep --gaps 5,35 --algo fd-maddpg --algo ddpg``.
