"""
Link budget for the three radio links
=====================================

A platoon leader can reach the roadside unit (V2I), its own followers (V2V)
or a high-altitude platform 20 km overhead (V2H).  This script prints the
average SNR each link gets at full power, and how the HAPS link behaves as
the line-of-sight share of the Rician channel changes.
"""

import numpy as np

from hapsv2x.channel import (PathLossParams, RicianParams, path_loss_db, sample_rayleigh_power,
                             sample_v2h_small_scale, v2h_gain)
from hapsv2x.env import EnvConfig

cfg = EnvConfig()
rng = np.random.default_rng(0)

# Free-space loss to the platform, plus atmospheric and scintillation losses
haps_pl = path_loss_db(cfg.haps_altitude_m, cfg.v2h_path_loss)
print(f"HAPS path loss at {cfg.haps_altitude_m / 1e3:.0f} km: {haps_pl:.2f} dB")

# Average received SNR at p_max for a few distances to the RSU
for d in (30.0, 100.0, 200.0):
    pl = path_loss_db(d, cfg.v2i_path_loss)
    snr_db = 10 * np.log10(cfg.p_max_w) - pl - 10 * np.log10(cfg.noise_power_w)
    print(f"V2I at {d:5.0f} m: path loss {pl:6.1f} dB, mean SNR {snr_db:5.1f} dB")

pl_v2v = path_loss_db(cfg.intra_platoon_spacing_m, cfg.v2v_path_loss)
print(f"V2V to the first follower: path loss {pl_v2v:.1f} dB")

# %%
# Rician fading on the HAPS link.  With a strong line-of-sight share the
# gain hardly fluctuates; as the share drops the channel approaches Rayleigh.
h = sample_v2h_small_scale(rng, 50_000)
for p_los in (1.0, 0.95, 0.5, 0.0):
    g = v2h_gain(haps_pl, RicianParams(p_los), h)
    snr = cfg.p_max_w * g / cfg.noise_power_w
    outage = np.mean(np.log2(1 + snr) < cfg.c_min_v2h_bps_hz)
    print(f"p_LoS={p_los:4.2f}: mean SNR {10 * np.log10(snr.mean()):5.1f} dB, "
          f"outage at full power {outage:.3f}")

# %%
# Terrestrial links use Rayleigh small-scale fading with unit mean power.
x = sample_rayleigh_power(rng, 50_000)
print(f"Rayleigh power: mean {x.mean():.3f}, P(fade below -10 dB) {np.mean(x < 0.1):.3f}")

# Changing the carrier shifts every free-space term by 20 log10 of the ratio
p35 = PathLossParams(3.5e9)
print(f"3.5 GHz vs 2 GHz at 1 km: +{path_loss_db(1000, p35) - path_loss_db(1000, PathLossParams()):.2f} dB")
