"""Proximal policy optimization in plain numpy.

Actor-critic with a shared tanh trunk, a categorical policy head and a
scalar value head.  Gradients of the clipped surrogate, value and entropy
terms are derived by hand; the optimizer is Adam with global gradient-norm
clipping.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

MODEL_FORMAT = "disentangler-policy"
MODEL_VERSION = 1
METRICS_HEADER = ("timestep", "ep_len_mean", "ep_rew_mean", "policy_loss", "value_loss", "entropy")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    t_s: int = 100_000
    l_r: float = 1e-3
    e_c: float = 0.01
    clip_eps: float = 0.2
    discount: float = 0.99
    gae_lambda: float = 0.95
    n_steps: int = 2048
    minibatch_size: int = 64
    n_epochs: int = 10
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    n_envs: int = 1
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.validate()

    def validate(self) -> None:
        if self.n_steps < 1 or self.n_envs < 1 or self.minibatch_size < 1 or self.n_epochs < 1:
            raise ValueError("n_steps, n_envs, minibatch_size and n_epochs must be positive")
        if self.t_s < self.n_steps:
            raise ValueError("t_s must be at least n_steps")
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must be in (0, 1)")
        if not 0 <= self.discount <= 1:
            raise ValueError("discount must be in [0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must be in [0, 1]")
        if self.l_r < 0 or self.e_c < 0 or self.value_coef < 0 or self.max_grad_norm <= 0:
            raise ValueError("l_r, e_c, value_coef must be >= 0 and max_grad_norm > 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def _orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    # C order so saved and reloaded weights multiply through the same BLAS path
    return np.ascontiguousarray(gain * q[:rows, :cols])


@dataclass
class PolicyModel:
    input_dim: int
    n_actions: int
    hidden: tuple[int, ...]
    params: dict[str, np.ndarray] = field(repr=False)

    @classmethod
    def init(cls, input_dim: int, n_actions: int, hidden=(64, 64), rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        hidden = tuple(hidden)
        params = {}
        width = input_dim
        for k, h in enumerate(hidden):
            params[f"trunk{k}.w"] = _orthogonal(rng, (width, h), math.sqrt(2))
            params[f"trunk{k}.b"] = np.zeros(h)
            width = h
        params["pi.w"] = _orthogonal(rng, (width, n_actions), 0.01)
        params["pi.b"] = np.zeros(n_actions)
        params["v.w"] = _orthogonal(rng, (width, 1), 1.0)
        params["v.b"] = np.zeros(1)
        return cls(input_dim, n_actions, hidden, params)

    @classmethod
    def zeros(cls, input_dim: int, n_actions: int, hidden=(64, 64)):
        m = cls.init(input_dim, n_actions, hidden)
        for v in m.params.values():
            v[...] = 0.0
        return m

    def param_names(self) -> list[str]:
        return list(self.params)

    def copy(self) -> "PolicyModel":
        return PolicyModel(self.input_dim, self.n_actions, self.hidden, {k: v.copy() for k, v in self.params.items()})

    def forward(self, obs: np.ndarray):
        """Batched pass: returns (logits (B, A), values (B,), trunk activations)."""
        h = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        if h.shape[1] != self.input_dim:
            raise ValueError(f"observation width {h.shape[1]} != input_dim {self.input_dim}")
        acts = [h]
        for k in range(len(self.hidden)):
            h = np.tanh(h @ self.params[f"trunk{k}.w"] + self.params[f"trunk{k}.b"])
            acts.append(h)
        logits = h @ self.params["pi.w"] + self.params["pi.b"]
        values = (h @ self.params["v.w"] + self.params["v.b"])[:, 0]
        return logits, values, acts


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def policy_forward(m: PolicyModel, obs: np.ndarray) -> tuple[np.ndarray, float]:
    """Logits and value for a single observation."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (m.input_dim,):
        raise ValueError(f"expected observation of length {m.input_dim}, got shape {obs.shape}")
    logits, values, _ = m.forward(obs[None, :])
    if not (np.all(np.isfinite(logits)) and np.isfinite(values[0])):
        raise TrainingDiverged("non-finite policy output")
    return logits[0], float(values[0])


def categorical_entropy(logits: np.ndarray) -> np.ndarray:
    lp = log_softmax(logits)
    return -(np.exp(lp) * lp).sum(axis=-1)


def sample_actions(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling, one action per row."""
    probs = np.exp(log_softmax(logits))
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(len(probs))[:, None]
    return np.minimum((cdf < u).sum(axis=-1), probs.shape[-1] - 1)


def gae(rewards, values, dones, last_value, gamma: float, lam: float):
    """Generalized advantage estimation with episode-boundary masking.

    ``dones[t]`` marks that the episode ended at step t, so no value is
    bootstrapped across it.  Arrays may be (T,) or (T, n_envs).  Returns
    (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    adv = np.zeros_like(rewards)
    next_value = np.asarray(last_value, dtype=np.float64)
    running = np.zeros_like(rewards[0])
    for t in reversed(range(len(rewards))):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


@dataclass
class LossTerms:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    unclipped_surrogate: float
    clipped_surrogate: float
    clip_fraction: float
    approx_kl: float


def ppo_loss_and_grad(m: PolicyModel, obs, actions, old_logp, advantages, returns,
                      clip_eps: float, e_c: float, value_coef: float):
    """Total loss (policy + value_coef * value - e_c * entropy) and its parameter gradients."""
    logits, values, acts = m.forward(obs)
    actions = np.asarray(actions, dtype=np.int64)
    adv = np.asarray(advantages, dtype=np.float64)
    ret = np.asarray(returns, dtype=np.float64)
    B = len(actions)
    rows = np.arange(B)

    lp_all = log_softmax(logits)
    probs = np.exp(lp_all)
    logp = lp_all[rows, actions]
    ratio = np.exp(logp - old_logp)
    s1 = ratio * adv
    s2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv
    surr = np.minimum(s1, s2)
    policy_loss = -surr.mean()
    value_loss = np.mean((ret - values) ** 2)
    ent = -(probs * lp_all).sum(axis=1)
    entropy = ent.mean()
    loss = policy_loss + value_coef * value_loss - e_c * entropy

    # min picks s1 whenever s1 <= s2; the clipped branch has zero slope
    g_logp = -np.where(s1 <= s2, ratio * adv, 0.0) / B
    g_logits = -probs * g_logp[:, None]
    g_logits[rows, actions] += g_logp
    g_logits += (e_c / B) * probs * (lp_all + ent[:, None])
    g_v = value_coef * 2.0 * (values - ret) / B

    h = acts[-1]
    grads = {
        "pi.w": h.T @ g_logits,
        "pi.b": g_logits.sum(axis=0),
        "v.w": h.T @ g_v[:, None],
        "v.b": np.array([g_v.sum()]),
    }
    g_h = g_logits @ m.params["pi.w"].T + g_v[:, None] @ m.params["v.w"].T
    for k in reversed(range(len(m.hidden))):
        g_a = g_h * (1.0 - acts[k + 1] ** 2)
        grads[f"trunk{k}.w"] = acts[k].T @ g_a
        grads[f"trunk{k}.b"] = g_a.sum(axis=0)
        if k:
            g_h = g_a @ m.params[f"trunk{k}.w"].T

    terms = LossTerms(
        loss=float(loss),
        policy_loss=float(policy_loss),
        value_loss=float(value_loss),
        entropy=float(entropy),
        unclipped_surrogate=float(s1.mean()),
        clipped_surrogate=float(surr.mean()),
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > clip_eps)),
        approx_kl=float(np.mean((ratio - 1.0) - (logp - old_logp))),
    )
    return terms, grads


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads.values():
            g *= scale
    return norm


class RolloutBuffer:
    def __init__(self, n_steps: int, n_envs: int, obs_dim: int):
        self.n_steps, self.n_envs = n_steps, n_envs
        self.obs = np.zeros((n_steps, n_envs, obs_dim))
        self.actions = np.zeros((n_steps, n_envs), dtype=np.int64)
        self.log_probs = np.zeros((n_steps, n_envs))
        self.rewards = np.zeros((n_steps, n_envs))
        self.dones = np.zeros((n_steps, n_envs))
        self.values = np.zeros((n_steps, n_envs))
        self.advantages = np.zeros((n_steps, n_envs))
        self.returns = np.zeros((n_steps, n_envs))
        self.pos = 0

    @property
    def full(self) -> bool:
        return self.pos == self.n_steps

    def add(self, obs, actions, log_probs, rewards, dones, values) -> None:
        t = self.pos
        self.obs[t], self.actions[t], self.log_probs[t] = obs, actions, log_probs
        self.rewards[t], self.dones[t], self.values[t] = rewards, dones, values
        self.pos += 1

    def compute_advantages(self, last_values, gamma: float, lam: float) -> None:
        self.advantages, self.returns = gae(self.rewards, self.values, self.dones, last_values, gamma, lam)

    def flat(self):
        """Flattened (obs, actions, old log-probs, normalized advantages, returns)."""
        T = self.n_steps * self.n_envs
        adv = self.advantages.reshape(T)
        adv = (adv - adv.mean()) / max(adv.std(), 1e-8)
        return (self.obs.reshape(T, -1), self.actions.reshape(T), self.log_probs.reshape(T), adv,
                self.returns.reshape(T))


def ppo_update(m: PolicyModel, buffer: RolloutBuffer, cfg: TrainConfig, rng: np.random.Generator,
               optimizer: Adam | None = None) -> dict:
    """Run ``n_epochs`` of shuffled minibatch updates on ``m`` in place; return mean loss terms."""
    if not buffer.full:
        raise ValueError("rollout buffer is not full")
    optimizer = optimizer or Adam(m.params, cfg.l_r)
    obs, actions, old_logp, adv, ret = buffer.flat()
    T = len(actions)
    totals = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_fraction": 0.0, "approx_kl": 0.0}
    count = 0
    surrogate_gap = -math.inf
    for _ in range(cfg.n_epochs):
        order = rng.permutation(T)
        for start in range(0, T, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            terms, grads = ppo_loss_and_grad(m, obs[idx], actions[idx], old_logp[idx], adv[idx], ret[idx],
                                             cfg.clip_eps, cfg.e_c, cfg.value_coef)
            if not math.isfinite(terms.loss):
                raise TrainingDiverged(
                    f"non-finite loss (policy={terms.policy_loss}, value={terms.value_loss}, entropy={terms.entropy})"
                )
            surrogate_gap = max(surrogate_gap, terms.clipped_surrogate - terms.unclipped_surrogate)
            clip_grad_norm(grads, cfg.max_grad_norm)
            optimizer.step(m.params, grads)
            for k in totals:
                totals[k] += getattr(terms, k)
            count += 1
    stats = {k: v / count for k, v in totals.items()}
    stats["max_surrogate_gap"] = surrogate_gap
    return stats


@dataclass
class TrainMetrics:
    rows: list[dict] = field(default_factory=list)

    def append(self, **row) -> None:
        if self.rows and row["timestep"] <= self.rows[-1]["timestep"]:
            raise ValueError("metric timesteps must increase")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=np.float64)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRICS_HEADER)
            for r in self.rows:
                w.writerow([r["timestep"]] + [repr(float(r[k])) for k in METRICS_HEADER[1:]])


def train(env_factory: Callable[[int], object], cfg: TrainConfig, progress: Callable[[dict], None] | None = None):
    """Train a policy; ``env_factory(seed)`` returns a fresh environment.

    Environments are stepped serially in index order, each with its own
    seed spawned from ``cfg.seed``.  Returns (PolicyModel, TrainMetrics).
    """
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    init_seq, sample_seq, shuffle_seq, env_root = root.spawn(4)
    env_seeds = [int(s.generate_state(1)[0]) for s in env_root.spawn(cfg.n_envs)]
    envs = [env_factory(s) for s in env_seeds]
    obs_dim, n_actions = envs[0].obs_dim, envs[0].n_actions
    model = PolicyModel.init(obs_dim, n_actions, cfg.hidden, np.random.default_rng(init_seq))
    sample_rng = np.random.default_rng(sample_seq)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    optimizer = Adam(model.params, cfg.l_r)
    metrics = TrainMetrics()

    obs = np.stack([e.reset() for e in envs])
    ep_len = np.zeros(cfg.n_envs, dtype=np.int64)
    ep_rew = np.zeros(cfg.n_envs)
    per_update = cfg.n_steps * cfg.n_envs
    timestep = 0
    for _ in range(cfg.t_s // per_update):
        buf = RolloutBuffer(cfg.n_steps, cfg.n_envs, obs_dim)
        finished_len: list[int] = []
        finished_rew: list[float] = []
        for _ in range(cfg.n_steps):
            logits, values, _ = model.forward(obs)
            if not np.all(np.isfinite(logits)):
                raise TrainingDiverged("non-finite logits during rollout")
            actions = sample_actions(logits, sample_rng)
            logp = log_softmax(logits)[np.arange(cfg.n_envs), actions]
            rewards = np.zeros(cfg.n_envs)
            dones = np.zeros(cfg.n_envs)
            next_obs = np.empty_like(obs)
            for k, env in enumerate(envs):
                o, r, terminated, truncated = env.step(int(actions[k]))
                ep_len[k] += 1
                ep_rew[k] += r
                if truncated and not terminated:
                    # bootstrap the cut-off tail so truncation is not read as failure-by-design
                    r += cfg.discount * float(model.forward(o[None, :])[1][0])
                if terminated or truncated:
                    finished_len.append(int(ep_len[k]))
                    finished_rew.append(float(ep_rew[k]))
                    ep_len[k] = 0
                    ep_rew[k] = 0.0
                    o = env.reset()
                    dones[k] = 1.0
                rewards[k] = r
                next_obs[k] = o
            buf.add(obs, actions, logp, rewards, dones, values)
            obs = next_obs
        timestep += per_update
        last_values = model.forward(obs)[1]
        buf.compute_advantages(last_values, cfg.discount, cfg.gae_lambda)
        stats = ppo_update(model, buf, cfg, shuffle_rng, optimizer)
        row = dict(
            timestep=timestep,
            ep_len_mean=float(np.mean(finished_len)) if finished_len else float("nan"),
            ep_rew_mean=float(np.mean(finished_rew)) if finished_rew else float("nan"),
            policy_loss=stats["policy_loss"],
            value_loss=stats["value_loss"],
            entropy=stats["entropy"],
        )
        metrics.append(**row)
        log.debug("update at %d: %s", timestep, row)
        if progress is not None:
            progress(row)
    return model, metrics


def save_model(m: PolicyModel, cfg: TrainConfig, path, extra: dict | None = None) -> None:
    """Write a self-describing JSON text file; floats are stored with round-trip precision."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "input_dim": m.input_dim,
        "n_actions": m.n_actions,
        "hidden": list(m.hidden),
        "train_config": cfg.to_dict(),
        "layers": [
            {"name": k, "shape": list(v.shape), "values": [float(x) for x in v.reshape(-1)]}
            for k, v in m.params.items()
        ],
    }
    if extra:
        doc["extra"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path, expected_input_dim: int | None = None):
    """Read a model file; returns (PolicyModel, TrainConfig, extra dict)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed model file {path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path} is not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r} (expected {MODEL_VERSION})")
    input_dim, n_actions = int(doc["input_dim"]), int(doc["n_actions"])
    if expected_input_dim is not None and input_dim != expected_input_dim:
        raise ValueError(f"model input_dim {input_dim} does not match environment ({expected_input_dim})")
    hidden = tuple(int(h) for h in doc["hidden"])
    template = PolicyModel.zeros(input_dim, n_actions, hidden)
    params = {}
    for layer in doc["layers"]:
        name, shape = layer["name"], tuple(layer["shape"])
        if name not in template.params or template.params[name].shape != shape:
            raise ValueError(f"layer {name} with shape {shape} does not fit declared dimensions")
        values = np.array(layer["values"], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise ValueError(f"layer {name} has {values.size} values for shape {shape}")
        params[name] = values.reshape(shape)
    if set(params) != set(template.params):
        raise ValueError("model file is missing layers")
    model = PolicyModel(input_dim, n_actions, hidden, {k: params[k] for k in template.params})
    return model, TrainConfig.from_dict(doc["train_config"]), doc.get("extra", {})
