"""AoI-aware resource allocation for HAPS-assisted platoon V2X networks.

Modules: ``channel`` (link gains), ``env`` (network simulator), ``approximator``
(numpy MLPs with manual backprop), ``drl`` (DDPG / FD-MADDPG training),
``experiments`` (presets, baselines, sweeps, CSV) and ``cli``.
"""

__version__ = "0.1.0"
