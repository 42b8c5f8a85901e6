"""Discrete-time HAPS-assisted platoon V2X environment.

Each platoon leader (PL) is an agent.  Per slot it picks a communication mode
(V2I to the roadside unit, V2V to its own followers, V2H to the HAPS), one of
``K`` orthogonal sub-channels and a transmit power.  The environment computes
SINR-based capacities with co-channel interference, updates the age of
information (AoI) and the remaining intra-platoon payload, and returns the
per-agent rewards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import IntEnum
from typing import NamedTuple, Sequence

import numpy as np

from . import channel as ch

__all__ = [
    "Mode",
    "EnvConfig",
    "Action",
    "AgentState",
    "Capacities",
    "ChannelState",
    "StepOutcome",
    "ConstraintViolation",
    "HapsV2XEnv",
    "dbm_to_w",
    "compute_interference",
    "compute_capacity",
    "update_aoi",
    "local_reward",
    "global_reward",
]


class ConstraintViolation(ValueError):
    """An executed action breaks one of the mode / sub-channel / power constraints."""


class Mode(IntEnum):
    V2I = 0
    V2V = 1
    V2H = 2


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class EnvConfig:
    # scenario
    num_platoons: int = 2
    followers_per_platoon: int = 3
    num_subchannels: int = 2
    subchannel_bandwidth_hz: float = 180e3
    slot_duration_s: float = 1e-3
    episode_slots: int = 100
    intra_platoon_spacing_m: float = 25.0
    inter_platoon_gap_m: float = 5.0
    vehicle_speed_mps: float = 25.0
    vehicle_antenna_height_m: float = 1.5
    haps_altitude_m: float = 20e3
    rsu_position: tuple = (0.0, 25.0, 10.0)
    large_scale_update_period_slots: int = 100
    # radio
    p_max_w: float = dbm_to_w(30.0)
    noise_power_w: float = dbm_to_w(-114.0)
    c_min_v2i_bps_hz: float = 3.0
    c_min_v2h_bps_hz: float = 3.0
    cam_size_bits: float = 4000 * 8
    carrier_frequency_hz: float = 2e9
    v2h_atmospheric_loss_db: float = 0.5
    v2h_scintillation_loss_db: float = 1.0
    v2h_clutter_loss_db: float = 0.0
    v2h_shadowing_sigma_db: float = 2.0
    v2h_p_los: float = 0.95
    v2h_los_phase_rad: float = 0.0
    v2i_path_loss_exponent: float = 3.76
    v2i_clutter_loss_db: float = 62.0
    v2i_shadowing_sigma_db: float = 4.0
    v2v_path_loss_exponent: float = 2.0
    v2v_clutter_loss_db: float = 10.0
    v2v_shadowing_sigma_db: float = 3.0
    # reward
    kappa1: float = 1.0
    kappa2: float = 2.0
    kappa3: float = 1.0
    kappa4: float = 1.0
    kappa5: float = 1.0
    terminal_payload_penalty: bool = True
    # observation normalization windows
    obs_gain_floor_db: float = -140.0
    obs_gain_ceil_db: float = -40.0
    obs_interference_floor_db: float = -10.0  # relative to noise power
    obs_interference_ceil_db: float = 50.0

    def __post_init__(self):
        ints = ("num_platoons", "followers_per_platoon", "num_subchannels", "episode_slots",
                "large_scale_update_period_slots")
        for name in ints:
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        positive = ("subchannel_bandwidth_hz", "slot_duration_s", "intra_platoon_spacing_m",
                    "haps_altitude_m", "p_max_w", "noise_power_w", "c_min_v2i_bps_hz",
                    "c_min_v2h_bps_hz", "cam_size_bits", "carrier_frequency_hz")
        for name in positive:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0, got {v!r}")
        non_negative = ("inter_platoon_gap_m", "vehicle_speed_mps", "kappa1", "kappa2", "kappa3",
                        "kappa4", "kappa5")
        for name in non_negative:
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be >= 0, got {v!r}")
        if len(self.rsu_position) != 3:
            raise ValueError(f"rsu_position must have 3 coordinates, got {self.rsu_position!r}")
        object.__setattr__(self, "rsu_position", tuple(float(x) for x in self.rsu_position))
        if self.obs_gain_ceil_db <= self.obs_gain_floor_db:
            raise ValueError("obs_gain_ceil_db must exceed obs_gain_floor_db")
        if self.obs_interference_ceil_db <= self.obs_interference_floor_db:
            raise ValueError("obs_interference_ceil_db must exceed obs_interference_floor_db")
        # validates the derived channel parameter objects eagerly
        self.v2h_path_loss, self.v2i_path_loss, self.v2v_path_loss, self.rician

    @property
    def obs_dim(self) -> int:
        return 4 * self.num_subchannels + 3

    @property
    def v2h_path_loss(self) -> ch.PathLossParams:
        return ch.PathLossParams(self.carrier_frequency_hz, self.v2h_atmospheric_loss_db,
                                 self.v2h_scintillation_loss_db, self.v2h_clutter_loss_db,
                                 self.v2h_shadowing_sigma_db)

    @property
    def v2i_path_loss(self) -> ch.PathLossParams:
        return ch.PathLossParams(self.carrier_frequency_hz, 0.0, 0.0, self.v2i_clutter_loss_db,
                                 self.v2i_shadowing_sigma_db, self.v2i_path_loss_exponent)

    @property
    def v2v_path_loss(self) -> ch.PathLossParams:
        return ch.PathLossParams(self.carrier_frequency_hz, 0.0, 0.0, self.v2v_clutter_loss_db,
                                 self.v2v_shadowing_sigma_db, self.v2v_path_loss_exponent)

    @property
    def rician(self) -> ch.RicianParams:
        return ch.RicianParams(self.v2h_p_los, 1.0 - self.v2h_p_los, self.v2h_los_phase_rad)

    @property
    def horizon_s(self) -> float:
        return self.episode_slots * self.slot_duration_s

    def replace(self, **changes) -> "EnvConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Action:
    mode: Mode
    subchannel: int
    power_w: float

    def check(self, config: EnvConfig, agent: int | None = None) -> None:
        who = "" if agent is None else f"agent {agent}: "
        if self.mode not in (0, 1, 2):
            raise ConstraintViolation(f"{who}mode must be one of 0, 1, 2; got {self.mode!r}")
        if int(self.subchannel) != self.subchannel or not 0 <= self.subchannel < config.num_subchannels:
            raise ConstraintViolation(
                f"{who}subchannel must be an integer in [0, {config.num_subchannels}); "
                f"got {self.subchannel!r}")
        if not (math.isfinite(self.power_w) and 0.0 <= self.power_w <= config.p_max_w):
            raise ConstraintViolation(
                f"{who}power_w must lie in [0, {config.p_max_w}]; got {self.power_w!r}")


@dataclass(frozen=True)
class AgentState:
    aoi_s: float
    remaining_payload_bits: float
    remaining_slots: int


class Capacities(NamedTuple):
    """Spectral efficiency (bit/s/Hz) per link type; non-selected modes are 0."""
    v2i: float = 0.0
    v2v: float = 0.0
    v2h: float = 0.0

    def for_mode(self, mode: Mode) -> float:
        return self[int(mode)]


@dataclass
class ChannelState:
    """Power gains of one slot.

    ``rsu`` and ``haps`` are ``(P, K)``: leader ``j`` to the RSU / HAPS.
    ``v2v`` is ``(P, P, F, K)``: leader ``j`` to follower ``f`` of platoon ``i``.
    """
    rsu: np.ndarray
    haps: np.ndarray
    v2v: np.ndarray

    def own_v2v(self, j: int) -> np.ndarray:
        return self.v2v[j, j]


@dataclass
class StepOutcome:
    mode: Mode
    subchannel: int
    power_w: float
    capacities: Capacities
    capacity_bps_hz: float
    interference_w: np.ndarray
    local_reward: float
    observation: np.ndarray
    v2i_success: bool
    v2h_success: bool
    aoi_s: float
    remaining_payload_bits: float
    global_reward: float = 0.0


def _receiver_gains(gains: ChannelState, tx: int, victim: int, mode: Mode, k) -> np.ndarray | float:
    if mode == Mode.V2I:
        return gains.rsu[tx, k]
    if mode == Mode.V2H:
        return gains.haps[tx, k]
    return gains.v2v[tx, victim, :, k]


def compute_interference(joint_actions: Sequence[Action], gains: ChannelState, j: int, k: int,
                         mode: Mode | None = None):
    """Co-channel interference power (W) at agent ``j``'s receiver on sub-channel ``k``.

    The receiver is the one of ``mode`` (default: agent ``j``'s own selected mode).
    Every other leader transmitting on ``k`` contributes ``p * h`` with its gain
    toward that receiver, whatever mode it is using.  For V2V the result is an
    array with one entry per follower of platoon ``j``.
    """
    mode = joint_actions[j].mode if mode is None else Mode(mode)
    total = np.zeros(gains.v2v.shape[2]) if mode == Mode.V2V else 0.0
    for jp, a in enumerate(joint_actions):
        if jp == j or a.subchannel != k:
            continue
        total = total + a.power_w * _receiver_gains(gains, jp, j, mode, k)
    return total if mode == Mode.V2V else float(total)


def compute_capacity(action: Action, link: Mode, subchannel: int, gain, interference_w,
                     noise_power_w: float):
    """Shannon spectral efficiency of ``link`` on ``subchannel`` for ``action``.

    Zero unless the action selects that mode and sub-channel.  ``gain`` and
    ``interference_w`` may be arrays (one entry per V2V receiver).
    """
    if noise_power_w <= 0:
        raise ValueError("noise_power_w must be > 0")
    if action.mode != link or action.subchannel != subchannel:
        return np.zeros_like(np.asarray(gain, dtype=float)) if np.ndim(gain) else 0.0
    sinr = action.power_w * np.asarray(gain, dtype=float) / (np.asarray(interference_w) + noise_power_w)
    c = np.log2(1.0 + sinr)
    return float(c) if np.ndim(c) == 0 else c


def update_aoi(agent: AgentState, action: Action, capacities: Capacities,
               config: EnvConfig) -> AgentState:
    dt = config.slot_duration_s
    if action.mode == Mode.V2I and capacities.v2i >= config.c_min_v2i_bps_hz:
        aoi = dt
    elif action.mode == Mode.V2H and capacities.v2h >= config.c_min_v2h_bps_hz:
        aoi = dt
    else:
        aoi = agent.aoi_s + dt
    payload = agent.remaining_payload_bits
    if action.mode == Mode.V2V:
        delivered = capacities.v2v * config.subchannel_bandwidth_hz * dt
        payload = max(0.0, payload - delivered)
    return AgentState(aoi, payload, max(0, agent.remaining_slots - 1))


def _step_penalty(x: float) -> float:
    return 1.0 if x < 0 else 0.0


def local_reward(action: Action, agent_after: AgentState, capacities: Capacities,
                 config: EnvConfig, terminal: bool = False) -> float:
    power_term = action.power_w / config.p_max_w
    aoi_term = min(agent_after.aoi_s / config.horizon_s, 1.0)
    r = -config.kappa1 * power_term - config.kappa2 * aoi_term
    if action.mode == Mode.V2I:
        r -= config.kappa3 * _step_penalty(capacities.v2i - config.c_min_v2i_bps_hz)
    elif action.mode == Mode.V2H:
        r -= config.kappa4 * _step_penalty(capacities.v2h - config.c_min_v2h_bps_hz)
    if terminal and config.terminal_payload_penalty:
        r -= config.kappa5 * agent_after.remaining_payload_bits / config.cam_size_bits
    return float(r)


def global_reward(local_rewards: Sequence[float]) -> float:
    if len(local_rewards) == 0:
        raise ValueError("global_reward needs at least one agent")
    return float(np.mean(local_rewards))


def _normalize(x, lo, hi):
    return np.clip(2.0 * (np.asarray(x, dtype=float) - lo) / (hi - lo) - 1.0, -1.0, 1.0)


def _to_db(x):
    return 10.0 * np.log10(np.maximum(np.asarray(x, dtype=float), 1e-300))


class HapsV2XEnv:
    """Multi-agent environment with a ``reset`` / ``step`` interface.

    One platoon leader per agent.  ``step`` takes a list of :class:`Action`
    (one per platoon) and returns ``(outcomes, done)``.
    """

    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        self.rng = np.random.default_rng()
        self.slot = 0
        self.states: list[AgentState] = []

    # -- geometry ---------------------------------------------------------
    def _initial_positions(self) -> np.ndarray:
        c = self.config
        F = c.followers_per_platoon
        platoon_len = F * c.intra_platoon_spacing_m
        pos = np.zeros((c.num_platoons, F + 1, 3))
        for i in range(c.num_platoons):
            head = -i * (platoon_len + c.inter_platoon_gap_m)
            pos[i, :, 0] = head - np.arange(F + 1) * c.intra_platoon_spacing_m
        pos[:, :, 2] = c.vehicle_antenna_height_m
        return pos

    @property
    def leader_positions(self) -> np.ndarray:
        return self.positions[:, 0, :]

    @property
    def haps_position(self) -> np.ndarray:
        return np.array([self.rsu_xyz[0], 0.0, self.config.haps_altitude_m])

    def _update_large_scale(self) -> None:
        c = self.config
        rng = self.rng
        P, F = c.num_platoons, c.followers_per_platoon
        leaders = self.leader_positions
        d_rsu = np.maximum(np.linalg.norm(leaders - self.rsu_xyz, axis=1), 1.0)
        d_haps = np.maximum(np.linalg.norm(leaders - self.haps_position, axis=1), 1.0)
        followers = self.positions[:, 1:, :]
        d_v2v = np.linalg.norm(leaders[:, None, None, :] - followers[None, :, :, :], axis=-1)
        d_v2v = np.maximum(d_v2v, 1.0)

        pl_i = ch.path_loss_db(d_rsu, c.v2i_path_loss,
                               ch.sample_shadowing_db(rng, c.v2i_shadowing_sigma_db, P))
        pl_h = ch.path_loss_db(d_haps, c.v2h_path_loss,
                               ch.sample_shadowing_db(rng, c.v2h_shadowing_sigma_db, P))
        pl_v = ch.path_loss_db(d_v2v, c.v2v_path_loss,
                               ch.sample_shadowing_db(rng, c.v2v_shadowing_sigma_db, (P, P, F)))
        self.large_rsu = ch.db_to_linear(-np.atleast_1d(pl_i))
        self.pl_haps_db = np.atleast_1d(pl_h)
        self.large_v2v = ch.db_to_linear(-np.asarray(pl_v))

    def _draw_small_scale(self) -> ChannelState:
        c = self.config
        rng = self.rng
        P, F, K = c.num_platoons, c.followers_per_platoon, c.num_subchannels
        rsu = ch.v2x_gain((self.large_rsu[:, None], ch.sample_rayleigh_power(rng, (P, K))))
        h_small = ch.sample_v2h_small_scale(rng, (P, K))
        haps = ch.v2h_gain(self.pl_haps_db[:, None], c.rician, h_small)
        v2v = ch.v2x_gain((self.large_v2v[..., None], ch.sample_rayleigh_power(rng, (P, P, F, K))))
        return ChannelState(np.asarray(rsu), np.asarray(haps), np.asarray(v2v))

    # -- observation ------------------------------------------------------
    def observe(self, j: int) -> np.ndarray:
        c = self.config
        g = self.gains
        lo, hi = c.obs_gain_floor_db, c.obs_gain_ceil_db
        h_v = _normalize(_to_db(g.own_v2v(j).min(axis=0)), lo, hi)
        h_i = _normalize(_to_db(g.rsu[j]), lo, hi)
        h_h = _normalize(_to_db(g.haps[j]), lo, hi)
        interf = _normalize(_to_db(self.prev_interference[j] / c.noise_power_w),
                            c.obs_interference_floor_db, c.obs_interference_ceil_db)
        s = self.states[j]
        tail = [min(s.aoi_s / c.horizon_s, 1.0),
                s.remaining_payload_bits / c.cam_size_bits,
                s.remaining_slots / c.episode_slots]
        return np.concatenate([h_v, h_i, h_h, interf, tail])

    # -- episode API ------------------------------------------------------
    def reset(self, seed=None) -> list[np.ndarray]:
        c = self.config
        if seed is not None or not hasattr(self, "positions"):
            self.rng = np.random.default_rng(seed)
        self.slot = 0
        self.rsu_xyz = np.asarray(c.rsu_position, dtype=float)
        self.positions = self._initial_positions()
        self.states = [AgentState(c.slot_duration_s, float(c.cam_size_bits), c.episode_slots)
                       for _ in range(c.num_platoons)]
        self.prev_interference = np.zeros((c.num_platoons, c.num_subchannels))
        self._update_large_scale()
        self.gains = self._draw_small_scale()
        return [self.observe(j) for j in range(c.num_platoons)]

    def step(self, joint_actions: Sequence[Action]) -> tuple[list[StepOutcome], bool]:
        c = self.config
        P, K = c.num_platoons, c.num_subchannels
        if not self.states:
            raise RuntimeError("call reset() before step()")
        if self.slot >= c.episode_slots:
            raise RuntimeError("episode is over; call reset()")
        if len(joint_actions) != P:
            raise ConstraintViolation(f"expected {P} actions, got {len(joint_actions)}")
        for j, a in enumerate(joint_actions):
            a.check(c, j)

        g = self.gains
        terminal = self.slot + 1 == c.episode_slots
        outcomes = []
        new_interf = np.zeros((P, K))
        for j, a in enumerate(joint_actions):
            k = a.subchannel
            for kk in range(K):
                iv = compute_interference(joint_actions, g, j, kk)
                new_interf[j, kk] = np.max(iv) if a.mode == Mode.V2V else iv
            interf = compute_interference(joint_actions, g, j, k)
            gain = _receiver_gains(g, j, j, a.mode, k)
            cap = compute_capacity(a, a.mode, k, gain, interf, c.noise_power_w)
            if a.mode == Mode.V2V:
                cap = float(np.min(cap))
            caps = Capacities(**{a.mode.name.lower(): cap})
            state = update_aoi(self.states[j], a, caps, c)
            self.states[j] = state
            r = local_reward(a, state, caps, c, terminal)
            outcomes.append(StepOutcome(
                mode=Mode(a.mode), subchannel=k, power_w=a.power_w, capacities=caps,
                capacity_bps_hz=cap, interference_w=new_interf[j].copy(), local_reward=r,
                observation=None,
                v2i_success=a.mode == Mode.V2I and caps.v2i >= c.c_min_v2i_bps_hz,
                v2h_success=a.mode == Mode.V2H and caps.v2h >= c.c_min_v2h_bps_hz,
                aoi_s=state.aoi_s, remaining_payload_bits=state.remaining_payload_bits))

        r_glob = global_reward([o.local_reward for o in outcomes])
        self.prev_interference = new_interf
        self.slot += 1
        self.positions[:, :, 0] += c.vehicle_speed_mps * c.slot_duration_s
        if self.slot % c.large_scale_update_period_slots == 0:
            self._update_large_scale()
        self.gains = self._draw_small_scale()
        for j, o in enumerate(outcomes):
            o.global_reward = r_glob
            o.observation = self.observe(j)
        return outcomes, self.slot == c.episode_slots
