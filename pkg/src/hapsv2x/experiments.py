"""Scenario presets, baselines, experiment drivers and CSV outputs.

Config files are plain ``key = value`` lines with ``#`` comments.  Scenario
fields live under ``env.``, learner settings under ``drl.``, and the run
itself uses the bare keys ``preset``, ``algorithm``, ``episodes`` and
``seeds``::

    preset = desk
    algorithm = fd-maddpg
    episodes = 300
    seeds = 1, 2, 3
    env.inter_platoon_gap_m = 35
    drl.gamma = 0.99
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .drl import (METRIC_NAMES, Algorithm, DrlConfig, TrainingLog, decode_action, load_bundle,
                  run_episode, save_bundle, select_action, train)
from .env import Action, EnvConfig, HapsV2XEnv, Mode

__all__ = [
    "ConfigError",
    "RunConfig",
    "desk_config",
    "paper_config",
    "PRESETS",
    "parse_config",
    "load_config",
    "format_config",
    "baseline_random",
    "baseline_greedy_v2h",
    "rollout_baseline",
    "TrainingLog",
    "run_seed",
    "run_experiment",
    "gap_sweep",
    "evaluate_checkpoint",
    "write_log_csv",
    "read_log_csv",
    "summarize_logs",
    "final_phase_mean",
    "episodes_to_fraction",
    "LOG_HEADER",
    "SWEEP_HEADER",
    "DEFAULT_GAPS_M",
]

log = logging.getLogger(__name__)

LOG_HEADER = ("episode", "reward_mean", "aoi_ms_mean", "power_w_mean", "v2i_success_rate",
              "v2h_success_rate", "payload_completion_rate")
SWEEP_HEADER = ("gap_m", "algorithm", "aoi_ms_median", "aoi_ms_iqr", "reward_median")
DEFAULT_GAPS_M = (5.0, 15.0, 25.0, 35.0)
FINAL_PHASE_FRACTION = 0.1


class ConfigError(ValueError):
    """Bad configuration key or value; the message names the key."""


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    drl: DrlConfig = field(default_factory=DrlConfig)
    algorithm: Algorithm = Algorithm.FD_MADDPG
    episodes: int = 300
    seeds: tuple = (1,)
    preset: str = "desk"

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm)
                           if not isinstance(self.algorithm, Algorithm) else self.algorithm)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if int(self.episodes) != self.episodes or self.episodes < 1:
            raise ConfigError(f"episodes: must be a positive integer, got {self.episodes!r}")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_env(self, **changes) -> "RunConfig":
        return self.replace(env=self.env.replace(**changes))


# The AoI term is normalized by the episode length (100 ms by default), while
# typical AoI values are a few ms.  The presets weight it 10x so that AoI and
# transmit power cost the same order of magnitude.
PRESET_KAPPA2 = 20.0


def desk_config() -> RunConfig:
    """Two platoons of three followers on two sub-channels; minutes per run."""
    return RunConfig(
        env=EnvConfig(kappa2=PRESET_KAPPA2),
        drl=DrlConfig(actor_hidden=(64, 64), critic_hidden=(64, 64, 32)),
        episodes=300, preset="desk")


def paper_config() -> RunConfig:
    """Five platoons of six followers with the full-width networks."""
    return RunConfig(
        env=EnvConfig(num_platoons=5, followers_per_platoon=6, num_subchannels=5,
                      kappa2=PRESET_KAPPA2),
        drl=DrlConfig(), episodes=1000, preset="paper")


PRESETS = {"desk": desk_config, "paper": paper_config}


# -- config file ----------------------------------------------------------------

def _coerce(key: str, default, text: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            f = float(text)
            if f != int(f):
                raise ValueError(text)
            return int(f)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            parts = [p for p in text.strip("()[] ").split(",") if p.strip()]
            kind = type(default[0]) if default else float
            return tuple(kind(float(p)) if kind is int else kind(p.strip()) for p in parts)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(default).__name__}") from None


def _apply(obj, prefix: str, key: str, name: str, text: str, changes: dict):
    names = {f.name: f for f in fields(obj)}
    if name not in names:
        raise ConfigError(f"{key}: unknown key")
    changes[name] = _coerce(key, getattr(obj, name), text)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Overlay ``key = value`` lines onto ``base`` (default: the desk preset)."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        entries.append((key, value))

    preset = [v for k, v in entries if k == "preset"]
    if preset:
        name = preset[-1].strip().lower()
        if name not in PRESETS:
            raise ConfigError(f"preset: unknown preset {name!r} (choose from {sorted(PRESETS)})")
        base = PRESETS[name]()
    base = base or desk_config()

    env_changes, drl_changes, run_changes = {}, {}, {}
    for key, value in entries:
        if key == "preset":
            continue
        if key.startswith("env."):
            _apply(base.env, "env", key, key[4:], value, env_changes)
        elif key.startswith("drl."):
            _apply(base.drl, "drl", key, key[4:], value, drl_changes)
        elif key == "algorithm":
            try:
                run_changes["algorithm"] = Algorithm.parse(value)
            except ValueError as exc:
                raise ConfigError(f"algorithm: {exc}") from None
        elif key == "episodes":
            run_changes["episodes"] = _coerce(key, 1, value)
        elif key == "seeds":
            run_changes["seeds"] = _coerce(key, (0,), value)
        else:
            raise ConfigError(f"{key}: unknown key")
    try:
        env = base.env.replace(**env_changes)
    except ValueError as exc:
        raise ConfigError(f"env: {exc}") from None
    try:
        drl = dataclasses.replace(base.drl, **drl_changes)
    except ValueError as exc:
        raise ConfigError(f"drl: {exc}") from None
    return base.replace(env=env, drl=drl, **run_changes)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base)


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, Algorithm):
        return v.value
    return str(v)


def format_config(cfg: RunConfig, header: Sequence[str] = ()) -> str:
    """Fully resolved config text; ``parse_config`` of the result reproduces ``cfg``."""
    lines = [f"# {h}" for h in header]
    lines += [f"preset = {cfg.preset}", f"algorithm = {cfg.algorithm.value}",
              f"episodes = {cfg.episodes}", f"seeds = {_fmt_value(cfg.seeds)}"]
    for prefix, obj in (("env", cfg.env), ("drl", cfg.drl)):
        for f in fields(obj):
            lines.append(f"{prefix}.{f.name} = {_fmt_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


# -- baselines ------------------------------------------------------------------

def baseline_random(observation, config: EnvConfig, rng: np.random.Generator) -> Action:
    return Action(Mode(int(rng.integers(3))), int(rng.integers(config.num_subchannels)),
                  float(rng.uniform(0.0, config.p_max_w)))


def baseline_greedy_v2h(observation, config: EnvConfig) -> Action:
    """V2H at full power on the sub-channel with the strongest observed HAPS gain."""
    K = config.num_subchannels
    haps_slice = np.asarray(observation)[2 * K:3 * K]
    return Action(Mode.V2H, int(np.argmax(haps_slice)), config.p_max_w)


def rollout_baseline(algorithm, env_config: EnvConfig, episodes: int, seed: int = 0) -> TrainingLog:
    algorithm = Algorithm.parse(algorithm) if not isinstance(algorithm, Algorithm) else algorithm
    env_ss, policy_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(policy_ss)
    env = HapsV2XEnv(env_config)
    if algorithm == Algorithm.RANDOM:
        def choose(observations):
            return [baseline_random(o, env_config, rng) for o in observations], None
    elif algorithm == Algorithm.GREEDY_V2H:
        def choose(observations):
            return [baseline_greedy_v2h(o, env_config) for o in observations], None
    else:
        raise ValueError(f"{algorithm.value} is not a baseline")
    result = TrainingLog(algorithm=algorithm.value, seed=seed)
    env_seed = int(env_ss.generate_state(1)[0])
    for ep in range(episodes):
        obs = env.reset(seed=env_seed) if ep == 0 else env.reset()
        result.append(ep, run_episode(env, obs, choose))
    return result


# -- CSV I/O ----------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def write_log_csv(training_log: TrainingLog, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_HEADER)
            for row in training_log.rows():
                w.writerow([row[0]] + [_fmt(x) for x in row[1:]])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_log_csv(path) -> TrainingLog:
    path = Path(path)
    out = TrainingLog()
    with path.open(newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        if header != LOG_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in r:
            out.append(int(row[0]), dict(zip(METRIC_NAMES, map(float, row[1:]))))
    return out


# -- aggregation ------------------------------------------------------------------

def iqr(values) -> float:
    q75, q25 = np.percentile(np.asarray(values, dtype=float), [75, 25])
    return float(q75 - q25)


def final_phase_mean(values, fraction: float = FINAL_PHASE_FRACTION) -> float:
    """Mean over the last ``fraction`` of episodes (at least one)."""
    v = np.asarray(values, dtype=float)
    n = max(1, int(round(len(v) * fraction)))
    return float(v[-n:].mean())


def episodes_to_fraction(rewards, fraction: float = 0.9, window: int = 10) -> int:
    """First episode at which the smoothed reward covers ``fraction`` of its total gain.

    The gain is measured from the first smoothed value to the final level (mean of
    the last 20% of episodes).  Returns 0 when the curve never improves.
    """
    r = np.asarray(rewards, dtype=float)
    if len(r) == 0:
        return 0
    w = max(1, min(window, len(r)))
    smooth = np.convolve(r, np.ones(w) / w, mode="valid")
    start = smooth[0]
    final = r[-max(1, len(r) // 5):].mean()
    if final <= start:
        return 0
    threshold = start + fraction * (final - start)
    hits = np.nonzero(smooth >= threshold)[0]
    return int(hits[0]) + w - 1 if len(hits) else len(r)


def _summary_columns():
    cols = ["episode"]
    for m in METRIC_NAMES:
        base = m[:-5] if m.endswith("_mean") else m
        cols += [f"{base}_median", f"{base}_iqr"]
    return cols


def summarize_logs(logs: Sequence[TrainingLog]) -> list[list]:
    """Per-episode cross-seed median and IQR of every metric."""
    n = min(len(lg) for lg in logs)
    rows = []
    for ep in range(n):
        row = [ep]
        for m in METRIC_NAMES:
            vals = [getattr(lg, m)[ep] for lg in logs]
            row += [float(np.median(vals)), iqr(vals)]
        rows.append(row)
    return rows


def write_summary_csv(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_summary_columns())
        for row in rows:
            w.writerow([row[0]] + [_fmt(x) for x in row[1:]])
    return path


# -- drivers ----------------------------------------------------------------------

def run_seed(config: RunConfig, seed: int) -> TrainingLog:
    """Train (or roll out a baseline) for one seed."""
    if config.algorithm.learns:
        return train(config.algorithm, config.env, config.drl, config.episodes, seed)
    return rollout_baseline(config.algorithm, config.env, config.episodes, seed)


def _run_seed_star(args):
    return run_seed(*args)


@dataclass
class ExperimentResult:
    config: RunConfig
    logs: list
    summary: list
    final_aoi_ms: list
    final_reward: list
    files: list = field(default_factory=list)

    @property
    def aoi_ms_median(self) -> float:
        return float(np.median(self.final_aoi_ms))

    @property
    def aoi_ms_iqr(self) -> float:
        return iqr(self.final_aoi_ms)

    @property
    def reward_median(self) -> float:
        return float(np.median(self.final_reward))


def run_experiment(config: RunConfig, out_dir=None, checkpoints: bool = True,
                   max_workers: int = 1) -> ExperimentResult:
    """Run every seed of ``config``; optionally write per-seed CSVs, a summary and checkpoints.

    Files under ``out_dir``: ``seed_<s>.csv``, ``summary.csv`` and, for learners,
    ``checkpoints/seed_<s>/agent<j>_<net>.mlp``.
    """
    jobs = [(config, s) for s in config.seeds]
    if max_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            logs = list(pool.map(_run_seed_star, jobs))
    else:
        logs = [run_seed(*j) for j in jobs]

    summary = summarize_logs(logs)
    result = ExperimentResult(
        config, logs, summary,
        final_aoi_ms=[final_phase_mean(lg.aoi_ms_mean) for lg in logs],
        final_reward=[final_phase_mean(lg.reward_mean) for lg in logs])
    if out_dir is not None:
        out = Path(out_dir)
        for lg in logs:
            result.files.append(write_log_csv(lg, out / f"seed_{lg.seed}.csv"))
            if checkpoints and lg.bundles:
                for j, b in enumerate(lg.bundles):
                    result.files += save_bundle(b, out / "checkpoints" / f"seed_{lg.seed}",
                                                f"agent{j}")
        result.files.append(write_summary_csv(summary, out / "summary.csv"))
    return result


def gap_sweep(base: RunConfig, gaps_m: Sequence[float] = DEFAULT_GAPS_M,
              algorithms: Sequence | None = None, out_dir=None, max_workers: int = 1):
    """Repeat ``run_experiment`` for every (gap, algorithm) pair.

    Returns ``(rows, results)`` where each row follows :data:`SWEEP_HEADER`.
    """
    gaps_m = [float(g) for g in gaps_m]
    if not gaps_m:
        raise ValueError("gap sweep needs at least one gap")
    if any(g < 0 for g in gaps_m):
        raise ValueError("gaps must be >= 0")
    algorithms = [base.algorithm] if algorithms is None else [
        a if isinstance(a, Algorithm) else Algorithm.parse(a) for a in algorithms]
    rows, results = [], {}
    for gap in gaps_m:
        for algo in algorithms:
            cfg = base.replace(algorithm=algo).with_env(inter_platoon_gap_m=gap)
            sub = None if out_dir is None else Path(out_dir) / f"gap_{gap:g}" / algo.value.lower()
            res = run_experiment(cfg, sub, max_workers=max_workers)
            results[(gap, algo)] = res
            rows.append([gap, algo.value, res.aoi_ms_median, res.aoi_ms_iqr, res.reward_median])
            log.info("gap=%gm %s aoi=%.3fms", gap, algo.value, res.aoi_ms_median)
    if out_dir is not None:
        path = Path(out_dir) / "sweep.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_HEADER)
            for g, a, m, q, r in rows:
                w.writerow([_fmt(g), a, _fmt(m), _fmt(q), _fmt(r)])
    return rows, results


def evaluate_checkpoint(checkpoint_dir, env_config: EnvConfig, episodes: int,
                        seed: int = 0) -> TrainingLog:
    """Roll out saved actors without exploration noise."""
    ckpt = Path(checkpoint_dir)
    bundles = []
    for j in range(env_config.num_platoons):
        if not (ckpt / f"agent{j}_actor.mlp").exists():
            raise FileNotFoundError(f"{ckpt / f'agent{j}_actor.mlp'} not found")
        bundles.append(load_bundle(ckpt, f"agent{j}"))
    env = HapsV2XEnv(env_config)
    result = TrainingLog(algorithm="EVAL", seed=seed, bundles=bundles)

    def choose(observations):
        raws = [select_action(b, o, 0.0) for b, o in zip(bundles, observations)]
        return [decode_action(r, env_config) for r in raws], raws

    for ep in range(episodes):
        obs = env.reset(seed=seed) if ep == 0 else env.reset()
        result.append(ep, run_episode(env, obs, choose))
    return result
