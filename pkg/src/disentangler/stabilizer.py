"""Stabilizer tableau simulation with GF(2)-rank entanglement entropies.

A state on n qubits is held as 2n signed Pauli rows (destabilizers then
stabilizers).  Each row packs its X and Z parts into one unsigned 64-bit
word, so n is limited to 64.  Entropy of a region A of a pure stabilizer
state is ``rank(stabilizers restricted to A) - |A|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels

MAX_QUBITS = 64

_PAULI_CHARS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_CHAR_BITS = {v: k for k, v in _PAULI_CHARS.items()}


def pauli_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Power of i (mod 4) in P1 * P2 = i^k P3 for Hermitian Pauli strings P1, P2, P3."""
    mask = (1 << 64) - 1
    nx1, nz1, nx2, nz2 = ~x1 & mask, ~z1 & mask, ~x2 & mask, ~z2 & mask
    plus = (x1 & nz1 & x2 & z2) | (nx1 & z1 & x2 & nz2) | (x1 & z1 & nx2 & z2)
    minus = (x1 & nz1 & nx2 & z2) | (nx1 & z1 & x2 & z2) | (x1 & z1 & x2 & nz2)
    return (plus.bit_count() - minus.bit_count()) & 3


@dataclass(frozen=True)
class PauliString:
    """A Hermitian Pauli string ``sign * P_0 (x) P_1 (x) ...``.

    Bit k of ``x_mask``/``z_mask`` is the X/Z component on qubit k; (1, 1)
    denotes Y.  ``sign`` is +1 or -1.
    """

    n: int
    x_mask: int
    z_mask: int
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        limit = 1 << self.n
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise ValueError("mask has bits beyond qubit count")

    @classmethod
    def from_str(cls, s: str) -> "PauliString":
        """Parse ``'+XZI'`` style labels (qubit 0 first, sign optional)."""
        sign = 1
        if s and s[0] in "+-":
            sign = -1 if s[0] == "-" else 1
            s = s[1:]
        x = z = 0
        for k, ch in enumerate(s):
            try:
                xb, zb = _CHAR_BITS[ch]
            except KeyError:
                raise ValueError(f"bad Pauli character {ch!r}") from None
            x |= xb << k
            z |= zb << k
        return cls(len(s), x, z, sign)

    def __str__(self) -> str:
        body = "".join(_PAULI_CHARS[((self.x_mask >> k) & 1, (self.z_mask >> k) & 1)] for k in range(self.n))
        return ("+" if self.sign > 0 else "-") + body

    def commutes(self, other: "PauliString") -> bool:
        return ((self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask)).bit_count() % 2 == 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("qubit count mismatch")
        phase = pauli_phase(self.x_mask, self.z_mask, other.x_mask, other.z_mask)
        if self.sign < 0:
            phase += 2
        if other.sign < 0:
            phase += 2
        phase &= 3
        if phase & 1:
            raise ValueError("product of anticommuting strings is not Hermitian")
        return PauliString(self.n, self.x_mask ^ other.x_mask, self.z_mask ^ other.z_mask, -1 if phase else 1)


class StabilizerTableau:
    """CHP-style tableau: rows 0..n-1 destabilizers, n..2n-1 stabilizers."""

    def __init__(self, n: int, x: np.ndarray, z: np.ndarray, r: np.ndarray):
        if not 1 <= n <= MAX_QUBITS:
            raise ValueError(f"qubit count must be in 1..{MAX_QUBITS}, got {n}")
        self.n = n
        self.x = np.ascontiguousarray(x, dtype=np.uint64)
        self.z = np.ascontiguousarray(z, dtype=np.uint64)
        self.r = np.ascontiguousarray(r, dtype=np.uint8)
        if self.x.shape != (2 * n,) or self.z.shape != (2 * n,) or self.r.shape != (2 * n,):
            raise ValueError("tableau arrays must have length 2n")

    def copy(self) -> "StabilizerTableau":
        return StabilizerTableau(self.n, self.x.copy(), self.z.copy(), self.r.copy())

    def row(self, i: int) -> PauliString:
        return PauliString(self.n, int(self.x[i]), int(self.z[i]), -1 if self.r[i] else 1)

    @property
    def stabilizers(self) -> list[PauliString]:
        return [self.row(i) for i in range(self.n, 2 * self.n)]

    @property
    def destabilizers(self) -> list[PauliString]:
        return [self.row(i) for i in range(self.n)]

    def __eq__(self, other):
        if not isinstance(other, StabilizerTableau):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.r, other.r)
        )

    def __repr__(self):
        stabs = ", ".join(str(p) for p in self.stabilizers)
        return f"StabilizerTableau(n={self.n}, stabilizers=[{stabs}])"

    def validate(self) -> None:
        """Raise ``AssertionError`` unless the commutation structure and rank hold."""
        n = self.n
        rows = [self.row(i) for i in range(2 * n)]
        for i in range(n):
            for j in range(n):
                d, s = rows[i], rows[n + j]
                assert d.commutes(s) == (i != j), f"destabilizer {i} / stabilizer {j} commutation broken"
                assert rows[n + i].commutes(rows[n + j]), f"stabilizers {i},{j} anticommute"
        bits = [p.x_mask | (p.z_mask << n) for p in rows]
        assert gf2_rank_ints(bits) == 2 * n, "tableau rows are linearly dependent"


def gf2_rank_ints(rows: Iterable[int]) -> int:
    """GF(2) rank of rows given as Python int bitsets."""
    basis: dict[int, int] = {}
    for v in rows:
        while v:
            lead = v.bit_length() - 1
            b = basis.get(lead)
            if b is None:
                basis[lead] = v
                break
            v ^= b
    return len(basis)


def gf2_rank(matrix: Sequence[Sequence[int]] | np.ndarray) -> int:
    """Rank over GF(2) of a 0/1 matrix.  The input is not modified."""
    arr = np.asarray(matrix)
    if arr.size == 0:
        return 0
    if arr.ndim != 2:
        raise ValueError("expected a 2-D bit matrix")
    m, width = arr.shape
    n_words = (width + 63) // 64
    packed = np.zeros((m, n_words), dtype=np.uint64)
    bits = (arr & 1).astype(np.uint64)
    for c in range(width):
        packed[:, c // 64] |= bits[:, c] << np.uint64(c % 64)
    return kernels.gf2_rank_words(packed)


def new_computational_basis_state(n: int) -> StabilizerTableau:
    """|0...0>: stabilizers +Z_i, destabilizers +X_i."""
    if n < 1:
        raise ValueError("need at least one qubit")
    if n > MAX_QUBITS:
        raise ValueError(f"at most {MAX_QUBITS} qubits supported")
    singles = np.array([1 << i for i in range(n)], dtype=np.uint64)
    zeros = np.zeros(n, dtype=np.uint64)
    x = np.concatenate([singles, zeros])
    z = np.concatenate([zeros, singles])
    return StabilizerTableau(n, x, z, np.zeros(2 * n, dtype=np.uint8))


def _check_qubit(t: StabilizerTableau, q: int) -> None:
    if not 0 <= q < t.n:
        raise IndexError(f"qubit {q} out of range for {t.n} qubits")


def apply_gate(t: StabilizerTableau, gate, qubits: tuple[int, int]) -> StabilizerTableau:
    """Conjugate every row by a two-qubit Clifford acting on ``(a, b)``; in place."""
    a, b = qubits
    _check_qubit(t, a)
    _check_qubit(t, b)
    if a == b:
        raise ValueError("gate qubits must be distinct")
    kernels.apply_lut(t.x, t.z, t.r, gate.lut_bits, gate.lut_sign, a, b)
    return t


def measure_z(t: StabilizerTableau, q: int, rng: np.random.Generator) -> int:
    """Projective Z measurement on qubit ``q``; returns the outcome bit.

    A coin is drawn from ``rng`` only when the outcome is not determined.
    """
    _check_qubit(t, q)
    p = kernels.find_pivot(t.x, t.n, q)
    if p < 0:
        return int(kernels.deterministic_outcome(t.x, t.z, t.r, t.n, q))
    outcome = int(rng.integers(2))
    kernels.collapse(t.x, t.z, t.r, t.n, q, p, outcome)
    return outcome


def is_deterministic(t: StabilizerTableau, q: int) -> bool:
    _check_qubit(t, q)
    return kernels.find_pivot(t.x, t.n, q) < 0


def _region_mask(n: int, region) -> int:
    if isinstance(region, (int, np.integer)):
        mask = int(region)
    else:
        mask = 0
        for q in region:
            if not 0 <= q < n:
                raise IndexError(f"qubit {q} out of range for {n} qubits")
            mask |= 1 << q
    full = (1 << n) - 1
    if mask == 0 or mask == full or mask & ~full:
        raise ValueError("region must be a non-empty proper subset of the qubits")
    return mask


def region_entropy(t: StabilizerTableau, region) -> int:
    """Entanglement entropy in bits of ``region`` (iterable of qubits or bit mask)."""
    return int(kernels.region_entropy(t.x, t.z, t.n, _region_mask(t.n, region)))


def prefix_entropies(t: StabilizerTableau) -> np.ndarray:
    """Entropies of the prefixes {0}, {0,1}, ..., {0..n-2} as an int64 array."""
    out = np.zeros(max(t.n - 1, 0), dtype=np.int64)
    if t.n >= 2:
        kernels.prefix_entropies(t.x, t.z, t.n, out)
    return out


def avg_prefix_entropy(t: StabilizerTableau) -> float:
    """Mean entropy over the n-1 contiguous prefix cuts of the chain."""
    if t.n < 2:
        raise ValueError("averaged prefix entropy needs at least two qubits")
    return float(prefix_entropies(t).sum()) / (t.n - 1)
