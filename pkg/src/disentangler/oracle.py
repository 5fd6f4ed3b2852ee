"""Dense statevector reference simulator for small systems.

Amplitudes are kept as an n-axis tensor of shape (2,)*n with axis k
belonging to qubit k, so the first i qubits form a contiguous prefix and the
reduced density matrix needs no axis permutation.
"""

from __future__ import annotations

import numpy as np

MAX_DENSE_QUBITS = 12
EIG_CUTOFF = 1e-12

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
).reshape(2, 2, 2, 2)
_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DenseState:
    def __init__(self, n: int, amplitudes: np.ndarray | None = None):
        if not 1 <= n <= MAX_DENSE_QUBITS:
            raise ValueError(f"dense oracle supports 1..{MAX_DENSE_QUBITS} qubits, got {n}")
        self.n = n
        if amplitudes is None:
            psi = np.zeros((2,) * n, dtype=complex)
            psi[(0,) * n] = 1.0
        else:
            psi = np.asarray(amplitudes, dtype=complex).reshape((2,) * n).copy()
        self.psi = psi

    @property
    def amplitudes(self) -> np.ndarray:
        """Flat vector; qubit 0 is the most significant index bit."""
        return self.psi.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def _check(self, q: int):
        if not 0 <= q < self.n:
            raise IndexError(f"qubit {q} out of range for {self.n} qubits")

    def apply_1q(self, u: np.ndarray, q: int) -> None:
        self._check(q)
        self.psi = np.moveaxis(np.tensordot(u, self.psi, axes=([1], [q])), 0, q)

    def apply_2q(self, u: np.ndarray, a: int, b: int) -> None:
        """Apply a (2,2,2,2) tensor u[out_a, out_b, in_a, in_b]."""
        self._check(a)
        self._check(b)
        if a == b:
            raise ValueError("two-qubit gate needs distinct qubits")
        out = np.tensordot(u, self.psi, axes=([2, 3], [a, b]))
        self.psi = np.moveaxis(out, [0, 1], [a, b])

    def expectation(self, pauli) -> float:
        """<psi| P |psi> for a PauliString on all n qubits (real for Hermitian P)."""
        phi = self.psi
        for k, ch in enumerate(str(pauli)[1:]):
            if ch != "I":
                phi = np.moveaxis(np.tensordot(_PAULI[ch], phi, axes=([1], [k])), 0, k)
        val = np.vdot(self.psi, phi)
        return float(pauli.sign * val.real)


def sv_apply_word(s: DenseState, word, qubits: tuple[int, int]) -> DenseState:
    """Replay a generator word on ordered qubits (a, b); in place."""
    a, b = qubits
    s._check(a)
    s._check(b)
    if a == b:
        raise ValueError("word qubits must be distinct")
    for g in word:
        if g == "Ha":
            s.apply_1q(_H, a)
        elif g == "Hb":
            s.apply_1q(_H, b)
        elif g == "Sa":
            s.apply_1q(_S, a)
        elif g == "Sb":
            s.apply_1q(_S, b)
        elif g == "CX":
            s.apply_2q(_CX, a, b)
        else:
            raise ValueError(f"unknown generator {g!r}")
    return s


def sv_measure_z(s: DenseState, q: int, rng: np.random.Generator) -> int:
    """Born-rule Z measurement; projects and renormalizes the state."""
    s._check(q)
    p1 = float(np.sum(np.abs(np.take(s.psi, 1, axis=q)) ** 2))
    p1 = min(max(p1, 0.0), 1.0)
    outcome = int(rng.random() < p1)
    prob = p1 if outcome else 1.0 - p1
    assert prob > 0.0, "selected a zero-probability branch"
    idx = [slice(None)] * s.n
    idx[q] = 1 - outcome
    s.psi[tuple(idx)] = 0.0
    s.psi /= np.sqrt(prob)
    return outcome


def reduced_density_matrix(s: DenseState, i: int) -> np.ndarray:
    """rho of the first i qubits (suffix traced out)."""
    m = s.psi.reshape(2**i, 2 ** (s.n - i))
    return m @ m.conj().T


def sv_prefix_entropy(s: DenseState, i: int) -> float:
    """Von Neumann entropy in bits of the first i qubits."""
    if not 1 <= i <= s.n - 1:
        raise ValueError(f"prefix length must be in 1..{s.n - 1}, got {i}")
    lam = np.linalg.eigvalsh(reduced_density_matrix(s, i))
    lam = lam[lam > EIG_CUTOFF]
    return float(-np.sum(lam * np.log2(lam)) + 0.0)


def sv_avg_prefix_entropy(s: DenseState) -> float:
    return float(np.mean([sv_prefix_entropy(s, i) for i in range(1, s.n)]))
