"""DDPG and fully decentralized MADDPG training for the HAPS-V2X environment.

Every platoon leader owns an actor, a critic, their target copies and a replay
buffer.  The two algorithms share the update rules; they differ in the reward
written into the replay buffer:

* ``DDPG``: the global reward, i.e. the mean of all local rewards, so each
  critic scores actions against network-wide interference effects.
* ``FD_MADDPG``: the agent's own local reward only.

The hybrid action (mode, sub-channel, power) is produced as a continuous
vector in ``[-1, 1]^(3 + K + 1)`` and decoded by argmax / affine mapping.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .approximator import (Mlp, TrainingDivergenceError, load_mlp, make_optimizer, save_mlp,
                           soft_update)
from .env import Action, EnvConfig, HapsV2XEnv, Mode

__all__ = [
    "Algorithm",
    "DrlConfig",
    "Transition",
    "ReplayBuffer",
    "AgentBundle",
    "TrainingLog",
    "raw_action_dim",
    "make_bundle",
    "select_action",
    "decode_action",
    "td_target",
    "critic_update",
    "actor_update",
    "learn_step",
    "run_episode",
    "train",
    "save_bundle",
    "load_bundle",
]

log = logging.getLogger(__name__)


class Algorithm(str, enum.Enum):
    DDPG = "DDPG"
    FD_MADDPG = "FD_MADDPG"
    RANDOM = "RANDOM"
    GREEDY_V2H = "GREEDY_V2H"

    @classmethod
    def parse(cls, text: str) -> "Algorithm":
        key = str(text).strip().upper().replace("-", "_")
        aliases = {"GREEDY": "GREEDY_V2H", "FDMADDPG": "FD_MADDPG", "MADDPG": "FD_MADDPG"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown algorithm {text!r}") from None

    @property
    def learns(self) -> bool:
        return self in (Algorithm.DDPG, Algorithm.FD_MADDPG)


@dataclass(frozen=True)
class DrlConfig:
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 64
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    actor_hidden: tuple = (1024, 512)
    critic_hidden: tuple = (1024, 512, 256)
    noise_std: float = 0.3
    noise_decay: float = 0.999
    noise_floor: float = 0.01
    buffer_capacity: int = 100_000
    warmup: int = 640
    optimizer: str = "adam"
    final_layer_scale: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        object.__setattr__(self, "actor_hidden", tuple(int(h) for h in self.actor_hidden))
        object.__setattr__(self, "critic_hidden", tuple(int(h) for h in self.critic_hidden))

    def noise_at(self, episode: int) -> float:
        return max(self.noise_floor, self.noise_std * self.noise_decay ** episode)


def raw_action_dim(num_subchannels: int) -> int:
    return 3 + num_subchannels + 1


@dataclass
class Transition:
    state: np.ndarray
    raw_action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int, rng=None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.rng = np.random.default_rng(rng)
        self._next = 0
        self._size = 0
        self._s = None

    def __len__(self):
        return self._size

    def _allocate(self, t: Transition):
        n = self.capacity
        self._s = np.zeros((n, len(t.state)))
        self._a = np.zeros((n, len(t.raw_action)))
        self._r = np.zeros(n)
        self._s2 = np.zeros((n, len(t.next_state)))
        self._d = np.zeros(n, dtype=bool)

    def push(self, t: Transition) -> None:
        if len(t.state) != len(t.next_state):
            raise ValueError("state and next_state dimensions differ")
        if self._s is None:
            self._allocate(t)
        i = self._next
        self._s[i] = t.state
        self._a[i] = t.raw_action
        self._r[i] = t.reward
        self._s2[i] = t.next_state
        self._d[i] = t.terminal
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        start = self._next if self._size == self.capacity else 0
        return (start + np.arange(self._size)) % self.capacity

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        return [Transition(self._s[i].copy(), self._a[i].copy(), float(self._r[i]),
                           self._s2[i].copy(), bool(self._d[i])) for i in self._order()]

    def sample(self, batch_size: int):
        """Uniform i.i.d. minibatch as ``(s, a, r, s2, done)`` arrays."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = self.rng.integers(0, self._size, size=batch_size)
        return self._s[idx], self._a[idx], self._r[idx], self._s2[idx], self._d[idx]


@dataclass
class AgentBundle:
    actor: Mlp
    critic: Mlp
    target_actor: Mlp
    target_critic: Mlp
    actor_opt: object
    critic_opt: object
    replay: ReplayBuffer
    noise_rng: np.random.Generator
    noise_std: float = 0.3

    @property
    def obs_dim(self) -> int:
        return self.actor.input_dim

    @property
    def act_dim(self) -> int:
        return self.actor.output_dim


def make_bundle(obs_dim: int, num_subchannels: int, cfg: DrlConfig, seed=None) -> AgentBundle:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_ss, noise_ss, replay_ss = ss.spawn(3)
    init_rng = np.random.default_rng(init_ss)
    act_dim = raw_action_dim(num_subchannels)
    actor = Mlp([obs_dim, *cfg.actor_hidden, act_dim], "tanh", init_rng,
                final_layer_scale=cfg.final_layer_scale)
    critic = Mlp([obs_dim + act_dim, *cfg.critic_hidden, 1], "linear", init_rng)
    return AgentBundle(actor, critic, actor.copy(), critic.copy(),
                       make_optimizer(cfg.optimizer, actor), make_optimizer(cfg.optimizer, critic),
                       ReplayBuffer(cfg.buffer_capacity, np.random.default_rng(replay_ss)),
                       np.random.default_rng(noise_ss), cfg.noise_std)


def select_action(bundle: AgentBundle, observation, noise_std: float, rng=None) -> np.ndarray:
    """Actor output plus i.i.d. Gaussian exploration noise, clamped to [-1, 1]."""
    rng = bundle.noise_rng if rng is None else rng
    a = bundle.actor.forward(observation)
    if noise_std > 0:
        a = a + rng.normal(0.0, noise_std, size=a.shape)
    return np.clip(a, -1.0, 1.0)


def decode_action(raw, config: EnvConfig) -> Action:
    raw = np.asarray(raw, dtype=float)
    K = config.num_subchannels
    if raw.shape != (raw_action_dim(K),):
        raise ValueError(f"raw action must have shape ({raw_action_dim(K)},), got {raw.shape}")
    mode = Mode(int(np.argmax(raw[:3])))
    sub = int(np.argmax(raw[3:3 + K]))
    s = float(np.clip(raw[-1], -1.0, 1.0))
    power = min(config.p_max_w * (s + 1.0) / 2.0, config.p_max_w)
    return Action(mode, sub, power)


def _td_targets(bundle: AgentBundle, r, s2, done, gamma: float) -> np.ndarray:
    a2 = bundle.target_actor.forward(s2)
    q2 = bundle.target_critic.forward(np.concatenate([s2, a2], axis=-1))[..., 0]
    return r + gamma * np.where(done, 0.0, q2)


def td_target(bundle: AgentBundle, transition: Transition, gamma: float) -> float:
    if transition.terminal or gamma == 0.0:
        return float(transition.reward)
    y = _td_targets(bundle, np.array([transition.reward]), np.atleast_2d(transition.next_state),
                    np.array([False]), gamma)
    return float(y[0])


def critic_update(bundle: AgentBundle, minibatch, gamma: float, lr: float) -> float:
    """One gradient step on the mean squared TD error; returns the pre-update loss."""
    s, a, r, s2, done = minibatch
    n = len(r)
    if n == 0:
        raise ValueError("empty minibatch")
    y = _td_targets(bundle, r, s2, done, gamma)
    x = np.concatenate([s, a], axis=1)
    q, cache = bundle.critic.forward(x, return_cache=True)
    err = q[:, 0] - y
    loss = float(np.mean(err ** 2))
    if not np.isfinite(loss):
        raise TrainingDivergenceError(f"critic loss is {loss}")
    grads, _ = bundle.critic.backward(x, (2.0 / n) * err[:, None], cache)
    bundle.critic_opt.step(bundle.critic, grads, lr)
    return loss


def actor_update(bundle: AgentBundle, minibatch, lr: float) -> float:
    """Deterministic policy-gradient ascent on mean Q(s, pi(s)); returns that mean before the step."""
    s = minibatch[0]
    n = len(s)
    if n == 0:
        raise ValueError("empty minibatch")
    a, a_cache = bundle.actor.forward(s, return_cache=True)
    x = np.concatenate([s, a], axis=1)
    q, q_cache = bundle.critic.forward(x, return_cache=True)
    _, dx = bundle.critic.backward(x, np.full((n, 1), 1.0 / n), q_cache, params=False)
    dq_da = dx[:, s.shape[1]:]
    grads, _ = bundle.actor.backward(s, -dq_da, a_cache)
    bundle.actor_opt.step(bundle.actor, grads, lr)
    return float(np.mean(q))


def learn_step(bundle: AgentBundle, cfg: DrlConfig) -> tuple[float, float]:
    """Minibatch critic + actor update and target blending for one agent."""
    batch = bundle.replay.sample(cfg.batch_size)
    loss = critic_update(bundle, batch, cfg.gamma, cfg.critic_lr)
    q = actor_update(bundle, batch, cfg.actor_lr)
    soft_update(bundle.target_critic, bundle.critic, cfg.tau)
    soft_update(bundle.target_actor, bundle.actor, cfg.tau)
    return loss, q


METRIC_NAMES = ("reward_mean", "aoi_ms_mean", "power_w_mean", "v2i_success_rate",
                "v2h_success_rate", "payload_completion_rate")


@dataclass
class TrainingLog:
    """Per-episode metrics.

    Success rates are the share of agent-slots that delivered a fresh update
    over V2I (resp. V2H); payload completion is the share of platoons whose
    whole CAM reached every follower before the episode ended.
    """
    algorithm: str = ""
    seed: int | None = None
    episode: list = field(default_factory=list)
    reward_mean: list = field(default_factory=list)
    aoi_ms_mean: list = field(default_factory=list)
    power_w_mean: list = field(default_factory=list)
    v2i_success_rate: list = field(default_factory=list)
    v2h_success_rate: list = field(default_factory=list)
    payload_completion_rate: list = field(default_factory=list)
    bundles: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.episode)

    def append(self, episode: int, stats: dict) -> None:
        self.episode.append(episode)
        for name in METRIC_NAMES:
            getattr(self, name).append(float(stats[name]))

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        for i, ep in enumerate(self.episode):
            yield [ep] + [getattr(self, name)[i] for name in METRIC_NAMES]


def run_episode(env: HapsV2XEnv, observations, choose: Callable[[list], list],
                on_step: Callable | None = None) -> dict:
    """Roll one episode to the horizon and return its aggregate metrics.

    ``choose(observations) -> (actions, extra)``; ``on_step(obs, extra, outcomes, done)``
    is called after every environment step.
    """
    c = env.config
    rewards, aois, powers, v2i, v2h = [], [], [], 0, 0
    done = False
    while not done:
        actions, extra = choose(observations)
        outcomes, done = env.step(actions)
        for o in outcomes:
            rewards.append(o.local_reward)
            aois.append(o.aoi_s)
            powers.append(o.power_w)
            v2i += o.v2i_success
            v2h += o.v2h_success
        if on_step is not None:
            on_step(observations, extra, outcomes, done)
        observations = [o.observation for o in outcomes]
    n = len(rewards)
    completed = sum(s.remaining_payload_bits <= 0.0 for s in env.states)
    return {
        "reward_mean": float(np.mean(rewards)),
        "aoi_ms_mean": 1e3 * float(np.mean(aois)),
        "power_w_mean": float(np.mean(powers)),
        "v2i_success_rate": v2i / n,
        "v2h_success_rate": v2h / n,
        "payload_completion_rate": completed / c.num_platoons,
    }


def train(algorithm, env_config: EnvConfig, drl_config: DrlConfig, episodes: int,
          seed: int = 0) -> TrainingLog:
    """Train one agent per platoon for ``episodes`` episodes.

    Deterministic given ``(env_config, drl_config, episodes, seed)``.
    """
    algorithm = Algorithm.parse(algorithm) if not isinstance(algorithm, Algorithm) else algorithm
    if not algorithm.learns:
        raise ValueError(f"{algorithm.value} is not a learning algorithm")
    P = env_config.num_platoons
    env_ss, *agent_ss = np.random.SeedSequence(seed).spawn(P + 1)
    bundles = [make_bundle(env_config.obs_dim, env_config.num_subchannels, drl_config, ss)
               for ss in agent_ss]
    result = TrainingLog(algorithm=algorithm.value, seed=seed, bundles=bundles)
    if episodes <= 0:
        return result
    env = HapsV2XEnv(env_config)
    use_global = algorithm == Algorithm.DDPG
    env_seed = int(env_ss.generate_state(1)[0])
    step_idx = 0

    for ep in range(episodes):
        noise = drl_config.noise_at(ep)
        obs = env.reset(seed=env_seed) if ep == 0 else env.reset()

        def choose(observations):
            raws = [select_action(b, o, noise) for b, o in zip(bundles, observations)]
            return [decode_action(r, env_config) for r in raws], raws

        def on_step(observations, raws, outcomes, done):
            nonlocal step_idx
            for j, (b, o) in enumerate(zip(bundles, outcomes)):
                reward = o.global_reward if use_global else o.local_reward
                b.replay.push(Transition(observations[j], raws[j], reward, o.observation, done))
            for j, b in enumerate(bundles):
                if len(b.replay) >= max(drl_config.warmup, 1):
                    try:
                        learn_step(b, drl_config)
                    except TrainingDivergenceError as exc:
                        raise TrainingDivergenceError(
                            f"{exc} (episode {ep}, step {step_idx}, agent {j})") from exc
            step_idx += 1

        stats = run_episode(env, obs, choose, on_step)
        result.append(ep, stats)
        log.debug("%s seed=%s ep=%d reward=%.4f aoi=%.3fms", algorithm.value, seed, ep,
                  stats["reward_mean"], stats["aoi_ms_mean"])
    return result


# -- checkpoints --------------------------------------------------------------

_NETS = ("actor", "critic", "target_actor", "target_critic")


def save_bundle(bundle: AgentBundle, run_dir, agent_id: str) -> list[Path]:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in _NETS:
        p = run_dir / f"{agent_id}_{name}.mlp"
        save_mlp(getattr(bundle, name), p)
        paths.append(p)
    return paths


def load_bundle(run_dir, agent_id: str, cfg: DrlConfig | None = None) -> AgentBundle:
    cfg = cfg or DrlConfig()
    run_dir = Path(run_dir)
    nets = {}
    for name in _NETS:
        act = "tanh" if name.endswith("actor") else "linear"
        nets[name] = load_mlp(run_dir / f"{agent_id}_{name}.mlp", act)
    return AgentBundle(nets["actor"], nets["critic"], nets["target_actor"], nets["target_critic"],
                       make_optimizer(cfg.optimizer, nets["actor"]),
                       make_optimizer(cfg.optimizer, nets["critic"]),
                       ReplayBuffer(cfg.buffer_capacity), np.random.default_rng(0), 0.0)
