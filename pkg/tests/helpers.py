"""Shared test utilities: dense replay of circuits and cached training runs."""

from functools import lru_cache

import numpy as np

from disentangler.clifford import enumerate_clifford_2q
from disentangler.env import EnvConfig, build_brickwall, simulate
from disentangler.experiments import point_seed, run_point
from disentangler.oracle import DenseState, sv_apply_word, sv_measure_z, sv_prefix_entropy
from disentangler.ppo import TrainConfig
from disentangler.stabilizer import prefix_entropies


def dense_run(circuit, p, rng, table=None):
    """Replay a CircuitSpec on the statevector oracle with the same schedule as ``simulate``."""
    table = table or enumerate_clifford_2q()
    s = DenseState(circuit.n)
    for j in range(circuit.n_layers):
        for layer in (2 * j, 2 * j + 1):
            for gid, a, b in circuit.gates[layer]:
                sv_apply_word(s, table[int(gid)].word, (int(a), int(b)))
        for i in range(circuit.n):
            if p[i, j]:
                sv_measure_z(s, i, rng)
    return s


def dense_prefix_entropies(s):
    return np.array([sv_prefix_entropy(s, i) for i in range(1, s.n)])


def random_case(rng, n, d, density=0.3):
    table = enumerate_clifford_2q()
    c = build_brickwall(n, d, rng, table=table)
    p = (rng.random((n, d // 2)) < density).astype(np.uint8)
    return c, p


def both_entropies(c, p, seed):
    t = simulate(c, p, np.random.default_rng(seed))
    s = dense_run(c, p, np.random.default_rng(seed + 1))
    return prefix_entropies(t), dense_prefix_entropies(s)


# Training runs shared between the acceptance suite and the experiment tests.
BASE_SEED = 0
EVAL_EPISODES = 1000


@lru_cache(maxsize=None)
def trained_point(n, layers, alpha, t_s=100_000):
    seed = point_seed(BASE_SEED, n, 2 * layers, alpha)
    row, model, metrics = run_point(n, 2 * layers, alpha, seed, TrainConfig(t_s=t_s),
                                    EnvConfig(n=n, d=2 * layers, alpha=alpha), EVAL_EPISODES)
    return row, model, metrics


def random_batch(rng, m, B=32):
    from disentangler.ppo import log_softmax

    obs = rng.integers(0, 2, size=(B, m.input_dim)).astype(float)
    actions = rng.integers(m.n_actions, size=B)
    logits = m.forward(obs)[0]
    # old policy near the current one so both clip branches occur
    old_logp = log_softmax(logits)[np.arange(B), actions] + rng.normal(0, 0.3, size=B)
    adv = rng.normal(size=B)
    ret = rng.normal(size=B)
    return obs, actions, old_logp, adv, ret


def grad_rel_error(m, batch, clip_eps=0.2, e_c=0.01, value_coef=0.5, h=1e-6):
    """Relative error between analytic and central-difference gradients of the full loss."""
    from disentangler.ppo import ppo_loss_and_grad

    _, grads = ppo_loss_and_grad(m, *batch, clip_eps, e_c, value_coef)
    analytic, numeric = [], []
    for name, p in m.params.items():
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = ppo_loss_and_grad(m, *batch, clip_eps, e_c, value_coef)[0].loss
            p[idx] = orig - h
            down = ppo_loss_and_grad(m, *batch, clip_eps, e_c, value_coef)[0].loss
            p[idx] = orig
            numeric.append((up - down) / (2 * h))
        analytic.append(grads[name].reshape(-1))
    a = np.concatenate(analytic)
    n = np.array(numeric)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12))


# one line per acceptance criterion, printed in the terminal summary
CRITERIA: dict[int, str] = {}


def record(number: int, name: str, passed: bool, detail: str) -> bool:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
    CRITERIA[number] = line
    print(line)
    return passed
