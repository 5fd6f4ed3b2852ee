"""Entanglement-growth baselines, policy evaluation and (n, d, alpha) sweeps."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from ._backend import kernels
from .clifford import enumerate_clifford_2q
from .env import DisentangleEnv, EnvConfig, build_brickwall, unscaled_reward, weighted_avg_layer
from .ppo import PolicyModel, TrainConfig, sample_actions, train
from .stabilizer import new_computational_basis_state, prefix_entropies

log = logging.getLogger(__name__)

RESULTS_HEADER = (
    "n", "d", "alpha", "mean_measurements", "stderr_measurements",
    "mean_weighted_layer", "mean_reward", "success_rate", "seed",
)
GROWTH_HEADER = ("n", "depth", "mean_savg", "stderr")

# large grid for long runs; DEFAULT_GRID fits on a single workstation
FULL_GRID = dict(n=tuple(range(3, 12)), layers=tuple(range(2, 12)), alpha=(0.1,), t_s=200_000)
DEFAULT_GRID = dict(n=tuple(range(3, 9)), layers=tuple(range(2, 9)), alpha=(0.1,), t_s=100_000)


def _stderr(v: np.ndarray) -> float:
    return float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")


@dataclass
class GrowthCurve:
    n: int
    depths: np.ndarray
    mean_savg: np.ndarray
    stderr: np.ndarray


def entanglement_growth(n_list: Iterable[int], max_depth: int, n_samples: int,
                        rng: np.random.Generator) -> list[GrowthCurve]:
    """Mean S_avg of measurement-free brick-wall circuits at every even depth up to ``max_depth``.

    Each sample is one circuit of depth ``max_depth`` evaluated after every
    second layer, so the depth points of a curve share circuits.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    max_depth = max(2, max_depth + (max_depth % 2))
    table = enumerate_clifford_2q()
    curves = []
    for n in n_list:
        depths = np.arange(0, max_depth + 1, 2)
        samples = np.zeros((n_samples, len(depths)))
        for s in range(n_samples):
            c = build_brickwall(n, max_depth, rng, table=table)
            t = new_computational_basis_state(n)
            for k in range(1, len(depths)):
                for layer in (2 * k - 2, 2 * k - 1):
                    for gid, a, b in c.gates[layer]:
                        kernels.apply_lut(t.x, t.z, t.r, table.lut_bits[gid], table.lut_sign[gid], int(a), int(b))
                samples[s, k] = prefix_entropies(t).sum() / (n - 1)
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(n_samples) if n_samples > 1 else np.zeros(len(depths))
        curves.append(GrowthCurve(n, depths, samples.mean(axis=0), stderr))
    return curves


def write_growth_csv(curves: Sequence[GrowthCurve], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROWTH_HEADER)
        for c in curves:
            for d, m, e in zip(c.depths, c.mean_savg, c.stderr):
                w.writerow([c.n, int(d), repr(float(m)), repr(float(e))])


def read_growth_csv(path) -> list[GrowthCurve]:
    by_n: dict[int, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_n.setdefault(int(row["n"]), []).append((int(row["depth"]), float(row["mean_savg"]), float(row["stderr"])))
    return [GrowthCurve(n, *(np.array(col) for col in zip(*sorted(rows)))) for n, rows in by_n.items()]


# --- actors -----------------------------------------------------------------

class PolicyActor:
    """Samples actions from a trained policy."""

    def __init__(self, model: PolicyModel, greedy: bool = False):
        self.model = model
        self.greedy = greedy

    def __call__(self, obs: np.ndarray, rng: np.random.Generator) -> int:
        logits = self.model.forward(obs[None, :])[0]
        if self.greedy:
            return int(np.argmax(logits[0]))
        return int(sample_actions(logits, rng)[0])


class RandomActor:
    def __init__(self, n_actions: int):
        self.n_actions = n_actions

    def __call__(self, obs, rng) -> int:
        return int(rng.integers(self.n_actions))


class FillFinalColumnActor:
    """Scripted baseline: measure every qubit after the last unitary layer, top to bottom."""

    def __init__(self, n: int, n_layers: int):
        self.n, self.n_layers = n, n_layers

    def __call__(self, obs, rng) -> int:
        p = np.asarray(obs).reshape(self.n, self.n_layers)
        for i in range(self.n):
            if not p[i, -1]:
                return i * self.n_layers + self.n_layers - 1
        raise RuntimeError("final column already full")


@dataclass
class EvalStats:
    n_episodes: int
    success_count: int
    mean_measurements: float
    stderr_measurements: float
    mean_weighted_layer: float
    stderr_weighted_layer: float
    mean_unscaled_reward: float
    stderr_unscaled_reward: float

    @property
    def success_rate(self) -> float:
        return self.success_count / self.n_episodes if self.n_episodes else float("nan")


def evaluate_policy(actor, env_cfg: EnvConfig, n_episodes: int, rng: np.random.Generator) -> EvalStats:
    """Roll out ``n_episodes``; statistics are over successful (terminated) episodes only."""
    if isinstance(actor, PolicyModel):
        if actor.input_dim != env_cfg.n_actions:
            raise ValueError(f"model input_dim {actor.input_dim} does not match environment ({env_cfg.n_actions})")
        actor = PolicyActor(actor)
    env = DisentangleEnv(env_cfg, seed=int(rng.integers(2**63)))
    counts, layers, rewards = [], [], []
    for _ in range(n_episodes):
        obs = env.reset()
        while True:
            obs, _, terminated, truncated = env.step(actor(obs, rng))
            if terminated or truncated:
                break
        if terminated:
            p = env.state.p
            counts.append(int(p.sum()))
            layers.append(weighted_avg_layer(p))
            rewards.append(unscaled_reward(p, env_cfg.alpha, env_cfg.penalty_orientation))
    counts_a, layers_a, rewards_a = (np.array(v, dtype=np.float64) for v in (counts, layers, rewards))
    mean = lambda v: float(v.mean()) if len(v) else float("nan")  # noqa: E731
    return EvalStats(
        n_episodes=n_episodes,
        success_count=len(counts),
        mean_measurements=mean(counts_a),
        stderr_measurements=_stderr(counts_a),
        mean_weighted_layer=mean(layers_a),
        stderr_weighted_layer=_stderr(layers_a),
        mean_unscaled_reward=mean(rewards_a),
        stderr_unscaled_reward=_stderr(rewards_a),
    )


# --- sweeps -------------------------------------------------------------------

def point_seed(base_seed: int, n: int, d: int, alpha: float) -> int:
    """Seed of one grid point, a pure function of the point and the base seed."""
    seq = np.random.SeedSequence([int(base_seed), int(n), int(d), int(round(alpha * 1_000_000))])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def run_point(n: int, d: int, alpha: float, seed: int, train_cfg: TrainConfig, env_cfg: EnvConfig,
              n_episodes: int) -> tuple[dict, PolicyModel, object]:
    """Train and evaluate a single grid point from its own seed."""
    ecfg = replace(env_cfg, n=n, d=d, alpha=alpha, seed=seed)
    tcfg = replace(train_cfg, seed=seed)
    model, metrics = train(lambda s: DisentangleEnv(ecfg, seed=s), tcfg)
    stats = evaluate_policy(model, ecfg, n_episodes, np.random.default_rng([seed, 1]))
    row = dict(
        n=n, d=d, alpha=alpha,
        mean_measurements=stats.mean_measurements,
        stderr_measurements=stats.stderr_measurements,
        mean_weighted_layer=stats.mean_weighted_layer,
        mean_reward=stats.mean_unscaled_reward,
        success_rate=stats.success_rate,
        seed=seed,
        # not part of the CSV schema; kept for callers that compare points
        stderr_weighted_layer=stats.stderr_weighted_layer,
    )
    return row, model, metrics


def _point_job(args):
    n, d, alpha, seed, train_cfg, env_cfg, n_episodes = args
    try:
        return run_point(n, d, alpha, seed, train_cfg, env_cfg, n_episodes)[0]
    except Exception as exc:  # noqa: BLE001 - record and continue the sweep
        log.error("grid point n=%d d=%d alpha=%g failed: %s", n, d, alpha, exc)
        nan = float("nan")
        return dict(n=n, d=d, alpha=alpha, mean_measurements=nan, stderr_measurements=nan,
                    mean_weighted_layer=nan, mean_reward=nan, success_rate=nan, seed=seed)


def sweep(grid: Iterable[tuple[int, int, float]], train_cfg: TrainConfig, env_cfg: EnvConfig,
          n_episodes: int, base_seed: int = 0, jobs: int = 1,
          on_row: Callable[[dict], None] | None = None) -> list[dict]:
    """One trained-and-evaluated row per (n, d, alpha) grid point, sorted by (n, d, alpha)."""
    points = sorted(set((int(n), int(d), float(a)) for n, d, a in grid))
    if not points:
        raise ValueError("empty sweep grid")
    jobs_args = [(n, d, a, point_seed(base_seed, n, d, a), train_cfg, env_cfg, n_episodes) for n, d, a in points]
    rows = []
    if jobs <= 1:
        for args in jobs_args:
            row = _point_job(args)
            rows.append(row)
            if on_row:
                on_row(row)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for row in pool.map(_point_job, jobs_args):
                rows.append(row)
                if on_row:
                    on_row(row)
    return sorted(rows, key=lambda r: (r["n"], r["d"], r["alpha"]))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def emit_results(rows: Sequence[dict], path) -> None:
    """Write results CSV with the fixed header, ordered by (n, d, alpha)."""
    ordered = sorted(rows, key=lambda r: (r["n"], r["d"], r["alpha"]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in ordered:
            w.writerow([_fmt(r[k]) for k in RESULTS_HEADER])


def read_results(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULTS_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            out.append({k: (int(row[k]) if k in ("n", "d", "seed") else float(row[k])) for k in RESULTS_HEADER})
    return out
