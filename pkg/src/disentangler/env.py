"""The disentangling game on brick-wall random Clifford circuits.

The agent edits an n x L binary matrix P (L = d/2 measurement layers) one
bit at a time.  After every edit the circuit is re-simulated from |0...0>:
unitary layers 2j-1 and 2j, then Z measurements on the qubits marked in
column j, for j = 1..L.  The episode ends once the prefix-averaged entropy
of the final state is zero, and only then is a reward paid.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._backend import kernels
from .clifford import CliffordTable, _join, enumerate_clifford_2q
from .stabilizer import PauliString, StabilizerTableau, new_computational_basis_state, prefix_entropies

ORIENTATIONS = ("depth_increasing", "as_written")
CIRCUIT_MODES = ("resample_per_episode", "fixed")
CIRCUIT_FORMAT = "disentangler-circuit"
CIRCUIT_VERSION = 1
MAX_REDRAWS = 100


class DegenerateCircuitError(RuntimeError):
    """Every drawn circuit was already a product state without measurements."""


def brickwall_pairs(n: int, layer: int) -> list[tuple[int, int]]:
    """Qubit pairs of 0-based unitary ``layer`` under periodic boundaries.

    Even layers couple (0,1),(2,3),...; odd layers (1,2),(3,4),... and wrap
    (n-1, 0) for even n.  Odd n leaves qubit n-1 (even layers) or qubit 0
    (odd layers) idle.
    """
    if layer % 2 == 0:
        return [(2 * k, 2 * k + 1) for k in range(n // 2)]
    if n % 2 == 0:
        return [(2 * k + 1, (2 * k + 2) % n) for k in range(n // 2)]
    return [(2 * k + 1, 2 * k + 2) for k in range((n - 1) // 2)]


@dataclass
class CircuitSpec:
    n: int
    d: int
    gates: np.ndarray  # int32 (d, gates_per_layer, 3): table index, qubit a, qubit b
    seed: int | None = None

    @property
    def n_layers(self) -> int:
        return self.d // 2

    def layers(self, table: CliffordTable | None = None):
        """Per unitary layer, the list of ((a, b), CliffordGate2Q)."""
        table = table or enumerate_clifford_2q()
        return [[((int(a), int(b)), table[int(g)]) for g, a, b in layer] for layer in self.gates]

    def to_text(self, inline_gates: bool = True, table: CliffordTable | None = None) -> str:
        doc = {"format": CIRCUIT_FORMAT, "version": CIRCUIT_VERSION, "n": self.n, "d": self.d, "seed": self.seed}
        if inline_gates:
            doc["layers"] = [
                [{"qubits": [a, b], "images": [str(p) for p in g.image_paulis()]} for (a, b), g in layer]
                for layer in self.layers(table)
            ]
        elif self.seed is None:
            raise ValueError("a circuit without seed must be saved with inline gates")
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_text(cls, text: str, table: CliffordTable | None = None) -> "CircuitSpec":
        doc = json.loads(text)
        if doc.get("format") != CIRCUIT_FORMAT:
            raise ValueError("not a circuit document")
        if doc.get("version") != CIRCUIT_VERSION:
            raise ValueError(f"unsupported circuit format version {doc.get('version')!r}")
        n, d, seed = int(doc["n"]), int(doc["d"]), doc.get("seed")
        if "layers" not in doc:
            return build_brickwall(n, d, seed=seed, table=table)
        table = table or enumerate_clifford_2q()
        rows = []
        for layer in doc["layers"]:
            row = []
            for g in layer:
                images = []
                for label in g["images"]:
                    p = PauliString.from_str(label)
                    images.append((_join(p.x_mask, p.z_mask), 1 if p.sign < 0 else 0))
                row.append((table.index_of(tuple(images)), *g["qubits"]))
            rows.append(row)
        gates = np.array(rows, dtype=np.int32).reshape(d, len(brickwall_pairs(n, 0)), 3)
        return cls(n, d, gates, seed)


def build_brickwall(n: int, d: int, rng: np.random.Generator | None = None, *, seed: int | None = None,
                    table: CliffordTable | None = None) -> CircuitSpec:
    """Draw a brick-wall circuit of ``d`` layers with uniform two-qubit Cliffords.

    With ``seed`` the draw uses a fresh generator so the circuit can be rebuilt
    from (n, d, seed) alone; otherwise a seed is taken from ``rng``.
    """
    if n < 2:
        raise ValueError("brick-wall circuit needs n >= 2")
    if d < 2 or d % 2:
        raise ValueError(f"depth must be even and >= 2, got {d}")
    if seed is None:
        if rng is None:
            raise ValueError("need rng or seed")
        seed = int(rng.integers(2**63))
    table = table or enumerate_clifford_2q()
    draw = np.random.default_rng(seed)
    per_layer = len(brickwall_pairs(n, 0))
    gates = np.empty((d, per_layer, 3), dtype=np.int32)
    for layer in range(d):
        pairs = brickwall_pairs(n, layer)
        idx = draw.integers(len(table), size=per_layer)
        for k, (a, b) in enumerate(pairs):
            gates[layer, k] = (idx[k], a, b)
    return CircuitSpec(n, d, gates, seed)


def simulate(c: CircuitSpec, p: np.ndarray, rng: np.random.Generator,
             table: CliffordTable | None = None) -> StabilizerTableau:
    """Run the circuit with measurements at the marked positions of ``p``."""
    p = np.ascontiguousarray(p, dtype=np.uint8)
    if p.shape != (c.n, c.n_layers):
        raise ValueError(f"measurement matrix shape {p.shape} != {(c.n, c.n_layers)}")
    table = table or enumerate_clifford_2q()
    t = new_computational_basis_state(c.n)
    coins = rng.integers(0, 2, size=c.n * c.n_layers, dtype=np.uint8)
    kernels.run_circuit(t.x, t.z, t.r, c.n, table.lut_bits, table.lut_sign, c.gates, p, coins)
    return t


def layer_weight(j: int, alpha: float, n_layers: int, orientation: str = "depth_increasing") -> float:
    """Cost weight of 1-based measurement layer ``j``: 2 e^{-a l} / (1 + e^{-a l}).

    ``as_written`` uses l = j; ``depth_increasing`` uses l = L - j + 1 so the
    deepest layer is the most expensive.
    """
    if not 1 <= j <= n_layers:
        raise ValueError(f"layer {j} out of range 1..{n_layers}")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if orientation == "as_written":
        arg = j
    elif orientation == "depth_increasing":
        arg = n_layers - j + 1
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    e = math.exp(-alpha * arg)
    return 2.0 * e / (1.0 + e)


def layer_weights(alpha: float, n_layers: int, orientation: str = "depth_increasing") -> np.ndarray:
    return np.array([layer_weight(j, alpha, n_layers, orientation) for j in range(1, n_layers + 1)])


def measurement_cost(p: np.ndarray, alpha: float, orientation: str = "depth_increasing") -> float:
    p = np.asarray(p)
    counts = p.sum(axis=0)
    return float(np.dot(layer_weights(alpha, p.shape[1], orientation), counts))


def unscaled_reward(p: np.ndarray, alpha: float, orientation: str = "depth_increasing") -> float:
    """1 - C / (F N), in [0, 1]."""
    p = np.asarray(p)
    n, n_layers = p.shape
    w = layer_weights(alpha, n_layers, orientation)
    # sum of f_j (N - c_j) keeps every term >= 0, so a full matrix gives exactly 0
    spare = float(np.dot(w, n - p.sum(axis=0)))
    return min(1.0, spare / (float(w.sum()) * n))


def sparse_reward(p: np.ndarray, cfg: "EnvConfig") -> float:
    return cfg.p_r * unscaled_reward(p, cfg.alpha, cfg.penalty_orientation)


def weighted_avg_layer(p: np.ndarray) -> float:
    """Measurement-count-weighted mean of the 1-based layer index."""
    counts = np.asarray(p).sum(axis=0)
    total = counts.sum()
    if total == 0:
        raise ValueError("weighted layer is undefined without measurements")
    return float(np.dot(np.arange(1, len(counts) + 1), counts) / total)


@dataclass
class EnvConfig:
    n: int = 4
    d: int = 6
    alpha: float = 0.1
    p_r: float = 50.0
    max_steps: int | None = None
    penalty_orientation: str = "depth_increasing"
    circuit_mode: str = "resample_per_episode"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.d < 2 or self.d % 2:
            raise ValueError(f"depth must be even and >= 2, got {self.d}")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not self.p_r > 0:
            raise ValueError("p_r must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.penalty_orientation not in ORIENTATIONS:
            raise ValueError(f"penalty_orientation must be one of {ORIENTATIONS}")
        if self.circuit_mode not in CIRCUIT_MODES:
            raise ValueError(f"circuit_mode must be one of {CIRCUIT_MODES}")

    @property
    def n_layers(self) -> int:
        return self.d // 2

    @property
    def n_actions(self) -> int:
        return self.n * self.n_layers

    @property
    def step_limit(self) -> int:
        return self.max_steps if self.max_steps is not None else 2 * self.n * self.n_layers

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpisodeState:
    circuit: CircuitSpec
    p: np.ndarray
    steps_taken: int = 0
    terminal: bool = False
    savg: float = field(default=float("nan"))


class DisentangleEnv:
    """Gym-style environment: ``reset() -> obs``, ``step(a) -> (obs, r, terminated, truncated)``.

    Circuits come from a generator seeded by ``seed`` (default ``cfg.seed``);
    measurement outcomes use a separate stream and never affect entropies.
    """

    def __init__(self, cfg: EnvConfig, seed: int | None = None, table: CliffordTable | None = None):
        cfg.validate()
        self.cfg = cfg
        self.table = table or enumerate_clifford_2q()
        seq = np.random.SeedSequence(cfg.seed if seed is None else seed)
        circuit_seq, outcome_seq = seq.spawn(2)
        self._circuit_rng = np.random.default_rng(circuit_seq)
        self._outcome_rng = np.random.default_rng(outcome_seq)
        self._fixed_circuit: CircuitSpec | None = None
        self.state: EpisodeState | None = None

    @property
    def n_actions(self) -> int:
        return self.cfg.n_actions

    @property
    def obs_dim(self) -> int:
        return self.cfg.n_actions

    def savg_of(self, circuit: CircuitSpec, p: np.ndarray) -> tuple[float, int]:
        """(S_avg, summed prefix entropy) of the final state."""
        t = simulate(circuit, p, self._outcome_rng, self.table)
        total = int(prefix_entropies(t).sum())
        return total / (circuit.n - 1), total

    def _draw_circuit(self, rng: np.random.Generator) -> CircuitSpec:
        zero = np.zeros((self.cfg.n, self.cfg.n_layers), dtype=np.uint8)
        for _ in range(MAX_REDRAWS):
            c = build_brickwall(self.cfg.n, self.cfg.d, rng, table=self.table)
            if self.savg_of(c, zero)[1] > 0:
                return c
        raise DegenerateCircuitError(
            f"{MAX_REDRAWS} consecutive circuits of size {self.cfg.n}x{self.cfg.d} were already disentangled"
        )

    def reset(self) -> np.ndarray:
        cfg = self.cfg
        if cfg.circuit_mode == "fixed":
            if self._fixed_circuit is None:
                self._fixed_circuit = self._draw_circuit(np.random.default_rng(cfg.seed))
            circuit = self._fixed_circuit
        else:
            circuit = self._draw_circuit(self._circuit_rng)
        p = np.zeros((cfg.n, cfg.n_layers), dtype=np.uint8)
        self.state = EpisodeState(circuit, p)
        self.state.savg = self.savg_of(circuit, p)[0]
        return self.observation()

    def observation(self) -> np.ndarray:
        return self.state.p.reshape(-1).astype(np.float64)

    def step(self, action: int) -> tuple[np.ndarray, float, bool, bool]:
        es = self.state
        if es is None:
            raise RuntimeError("call reset() before step()")
        if es.terminal:
            raise RuntimeError("episode is over; call reset()")
        action = int(action)
        if not 0 <= action < self.cfg.n_actions:
            raise IndexError(f"action {action} out of range 0..{self.cfg.n_actions - 1}")
        i, j = divmod(action, self.cfg.n_layers)
        es.p[i, j] ^= 1
        es.steps_taken += 1
        es.savg, total = self.savg_of(es.circuit, es.p)
        if total == 0:
            es.terminal = True
            return self.observation(), sparse_reward(es.p, self.cfg), True, False
        if es.steps_taken >= self.cfg.step_limit:
            es.terminal = True
            return self.observation(), 0.0, False, True
        return self.observation(), 0.0, False, False
