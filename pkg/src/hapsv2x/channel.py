"""Link gain models for the V2H, V2I and V2V links.

All gains leave this module as linear *power* gains (squared magnitudes), so
they can be multiplied with a transmit power in watts directly.

The HAPS link is Rician: a unit-magnitude deterministic LoS term plus a
diffuse complex Gaussian term, weighted by the LoS / NLoS probabilities and
scaled by the composite path loss.  Terrestrial links use the product of a
large-scale term (path loss and shadowing) and a small-scale Rayleigh power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PathLossParams",
    "RicianParams",
    "FadingSample",
    "fspl_db",
    "path_loss_db",
    "db_to_linear",
    "v2h_gain",
    "v2x_gain",
    "sample_shadowing_db",
    "sample_v2h_small_scale",
    "sample_rayleigh_power",
    "sample_small_scale",
]


@dataclass(frozen=True)
class PathLossParams:
    carrier_frequency_hz: float = 2.0e9
    atmospheric_loss_db: float = 0.0
    scintillation_loss_db: float = 0.0
    clutter_loss_db: float = 0.0
    shadowing_sigma_db: float = 0.0
    # 2.0 is free space; terrestrial links use a steeper log-distance slope
    path_loss_exponent: float = 2.0

    def __post_init__(self):
        if not np.isfinite(self.path_loss_exponent) or self.path_loss_exponent <= 0:
            raise ValueError(f"path_loss_exponent must be > 0, got {self.path_loss_exponent}")
        if not np.isfinite(self.carrier_frequency_hz) or self.carrier_frequency_hz <= 0:
            raise ValueError(f"carrier_frequency_hz must be > 0, got {self.carrier_frequency_hz}")
        for name in ("atmospheric_loss_db", "scintillation_loss_db", "clutter_loss_db",
                     "shadowing_sigma_db"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @property
    def extra_loss_db(self) -> float:
        return self.atmospheric_loss_db + self.scintillation_loss_db + self.clutter_loss_db


@dataclass(frozen=True)
class RicianParams:
    p_los: float = 0.95
    p_nlos: float | None = None
    los_phase_rad: float = 0.0

    def __post_init__(self):
        if self.p_nlos is None:
            object.__setattr__(self, "p_nlos", 1.0 - self.p_los)
        for name in ("p_los", "p_nlos"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.p_los + self.p_nlos - 1.0) > 1e-12:
            raise ValueError(f"p_los + p_nlos must equal 1, got {self.p_los + self.p_nlos}")

    @property
    def los_component(self) -> complex:
        return complex(np.exp(1j * self.los_phase_rad))


@dataclass(frozen=True)
class FadingSample:
    large_scale: float
    small_scale: float

    def __post_init__(self):
        for name in ("large_scale", "small_scale"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


def fspl_db(distance_m, carrier_frequency_hz, exponent=2.0):
    """Free-space path loss in dB: 32.45 + 20 log10(f / MHz) + 10 n log10(d / km).

    ``exponent`` n = 2 is the free-space law.
    """
    d_km = np.asarray(distance_m, dtype=float) / 1e3
    f_mhz = carrier_frequency_hz / 1e6
    return 32.45 + 20.0 * np.log10(f_mhz) + 10.0 * exponent * np.log10(d_km)


def path_loss_db(distance_m, params: PathLossParams, shadow_db=0.0):
    """Composite path loss: FSPL plus atmospheric, scintillation, clutter and shadowing.

    Accepts scalars or arrays for ``distance_m`` and ``shadow_db``.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance_m must be strictly positive")
    out = fspl_db(d, params.carrier_frequency_hz, params.path_loss_exponent)
    out = out + params.extra_loss_db + shadow_db
    return float(out) if np.ndim(out) == 0 else out


def db_to_linear(x_db):
    return np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)


def v2h_gain(pl_db, rician: RicianParams, small_scale_complex):
    """Power gain of the Rician HAPS link, |10^(-PL/20) (sqrt(pL) a + sqrt(pN) h)|^2."""
    amp = np.power(10.0, -np.asarray(pl_db, dtype=float) / 20.0)
    field = np.sqrt(rician.p_los) * rician.los_component \
        + np.sqrt(rician.p_nlos) * np.asarray(small_scale_complex, dtype=complex)
    g = np.abs(amp * field) ** 2
    return float(g) if np.ndim(g) == 0 else g


def v2x_gain(fading):
    """Terrestrial power gain: large-scale times small-scale.

    ``fading`` is a :class:`FadingSample` or a ``(large, small)`` pair of arrays.
    """
    if isinstance(fading, FadingSample):
        return fading.large_scale * fading.small_scale
    large, small = fading
    return np.asarray(large, dtype=float) * np.asarray(small, dtype=float)


def sample_shadowing_db(rng: np.random.Generator, sigma_db: float, size=None):
    return rng.normal(0.0, sigma_db, size=size)


def sample_v2h_small_scale(rng: np.random.Generator, size=None):
    """Zero-mean, unit-variance circularly symmetric complex Gaussian."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) / np.sqrt(2.0)


def sample_rayleigh_power(rng: np.random.Generator, size=None):
    """Unit-mean exponential power, i.e. |g|^2 of a Rayleigh envelope."""
    return rng.exponential(1.0, size=size)


def sample_small_scale(rng: np.random.Generator, link: str, size=None):
    if link == "v2h":
        return sample_v2h_small_scale(rng, size)
    if link in ("v2i", "v2v"):
        return sample_rayleigh_power(rng, size)
    raise ValueError(f"unknown link type {link!r}")
