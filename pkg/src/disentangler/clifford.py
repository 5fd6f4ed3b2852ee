"""The two-qubit Clifford group, enumerated by breadth-first closure.

An element is stored by the images of X_a, Z_a, X_b, Z_b under conjugation
plus a shortest generator word over ``GENERATORS`` that realizes it.  For
simulation each element also carries a 16-entry lookup table mapping every
two-qubit Hermitian Pauli (4-bit pattern ``x_a | z_a<<1 | x_b<<2 | z_b<<3``)
to its image pattern and a sign bit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .stabilizer import PauliString, pauli_phase

GENERATORS = ("Ha", "Hb", "Sa", "Sb", "CX")
GROUP_ORDER = 11520
SYMPLECTIC_ORDER = 720

# (pattern, sign bit) images of X_a, Z_a, X_b, Z_b
Images = tuple[tuple[int, int], tuple[int, int], tuple[int, int], tuple[int, int]]

XA, ZA, XB, ZB = 0b0001, 0b0010, 0b0100, 0b1000
IDENTITY_IMAGES: Images = ((XA, 0), (ZA, 0), (XB, 0), (ZB, 0))

_GENERATOR_IMAGES: dict[str, Images] = {
    "Ha": ((ZA, 0), (XA, 0), (XB, 0), (ZB, 0)),
    "Hb": ((XA, 0), (ZA, 0), (ZB, 0), (XB, 0)),
    "Sa": ((XA | ZA, 0), (ZA, 0), (XB, 0), (ZB, 0)),
    "Sb": ((XA, 0), (ZA, 0), (XB | ZB, 0), (ZB, 0)),
    "CX": ((XA | XB, 0), (ZA, 0), (XB, 0), (ZA | ZB, 0)),
}


def _split(p: int) -> tuple[int, int]:
    """4-bit pattern -> (x_mask, z_mask) over two qubits."""
    return (p & 1) | ((p >> 1) & 2), ((p >> 1) & 1) | ((p >> 2) & 2)


def _join(x: int, z: int) -> int:
    return (x & 1) | ((z & 1) << 1) | ((x & 2) << 1) | ((z & 2) << 2)


def lut_from_images(images: Images) -> tuple[np.ndarray, np.ndarray]:
    """Conjugation table for all 16 patterns, built from the four generator images."""
    bits = np.zeros(16, dtype=np.uint8)
    signs = np.zeros(16, dtype=np.uint8)
    for p in range(16):
        x_in, z_in = _split(p)
        # Y = iXZ per qubit, so P = i^(#Y) X_a^. Z_a^. X_b^. Z_b^.
        e = (x_in & z_in).bit_count()
        ax = az = 0
        for k, (img_p, img_s) in enumerate(images):
            if not (p >> k) & 1:
                continue
            ix, iz = _split(img_p)
            e += 2 * img_s + pauli_phase(ax, az, ix, iz)
            ax ^= ix
            az ^= iz
        e &= 3
        assert e % 2 == 0, "non-Hermitian image; images violate the symplectic condition"
        bits[p] = _join(ax, az)
        signs[p] = e >> 1
    return bits, signs


def _conjugate(images: Images, lut: tuple[np.ndarray, np.ndarray]) -> Images:
    bits, signs = lut
    return tuple((int(bits[p]), s ^ int(signs[p])) for p, s in images)  # type: ignore[return-value]


_GEN_LUTS = {name: lut_from_images(imgs) for name, imgs in _GENERATOR_IMAGES.items()}


def _symplectic_ok(images: Images) -> bool:
    pauli = [_split(p) for p, _ in images]

    def anti(u, v):
        return ((u[0] & v[1]) ^ (u[1] & v[0])).bit_count() & 1

    want = {(0, 1): 1, (2, 3): 1}
    for i in range(4):
        for j in range(i + 1, 4):
            if anti(pauli[i], pauli[j]) != want.get((i, j), 0):
                return False
    return True


@dataclass(frozen=True, eq=False)
class CliffordGate2Q:
    """A two-qubit Clifford (modulo global phase)."""

    images: Images
    word: tuple[str, ...]
    lut_bits: np.ndarray = field(repr=False)
    lut_sign: np.ndarray = field(repr=False)

    @classmethod
    def from_images(cls, images: Images, word: tuple[str, ...] = ()) -> "CliffordGate2Q":
        if not _symplectic_ok(images):
            raise ValueError("images violate the symplectic condition")
        bits, signs = lut_from_images(images)
        bits.setflags(write=False)
        signs.setflags(write=False)
        return cls(tuple(images), tuple(word), bits, signs)  # type: ignore[arg-type]

    @classmethod
    def from_word(cls, word) -> "CliffordGate2Q":
        """Compose generators left to right (first letter applied first)."""
        images = IDENTITY_IMAGES
        for g in word:
            if g not in _GEN_LUTS:
                raise ValueError(f"unknown generator {g!r}")
            images = _conjugate(images, _GEN_LUTS[g])
        return cls.from_images(images, tuple(word))

    @property
    def key(self) -> Images:
        return self.images

    @property
    def symplectic_part(self) -> tuple[int, int, int, int]:
        return tuple(p for p, _ in self.images)  # type: ignore[return-value]

    def image_paulis(self) -> list[PauliString]:
        """Images of X_a, Z_a, X_b, Z_b as two-qubit strings (qubit a first)."""
        return [PauliString(2, *_split(p), -1 if s else 1) for p, s in self.images]

    def conjugate(self, pauli: PauliString) -> PauliString:
        """Image of a two-qubit Pauli string under this gate."""
        p = _join(pauli.x_mask, pauli.z_mask)
        x, z = _split(int(self.lut_bits[p]))
        sign = pauli.sign * (-1 if self.lut_sign[p] else 1)
        return PauliString(2, x, z, sign)

    def then(self, other: "CliffordGate2Q") -> "CliffordGate2Q":
        """The gate that applies ``self`` first and ``other`` second."""
        images = _conjugate(self.images, (other.lut_bits, other.lut_sign))
        return CliffordGate2Q.from_images(images, self.word + other.word)

    def inverse_images(self) -> Images:
        inv_bits = np.zeros(16, dtype=np.uint8)
        inv_sign = np.zeros(16, dtype=np.uint8)
        for p in range(16):
            inv_bits[self.lut_bits[p]] = p
            inv_sign[self.lut_bits[p]] = self.lut_sign[p]
        return _conjugate(IDENTITY_IMAGES, (inv_bits, inv_sign))

    def __repr__(self):
        imgs = ", ".join(str(p) for p in self.image_paulis())
        return f"CliffordGate2Q(images=[{imgs}], word={'.'.join(self.word) or 'I'})"


class CliffordTable:
    """All 11520 two-qubit Cliffords with stacked lookup tables for the kernels."""

    def __init__(self, gates: list[CliffordGate2Q]):
        self.gates = gates
        self.lut_bits = np.ascontiguousarray(np.stack([g.lut_bits for g in gates]), dtype=np.uint8)
        self.lut_sign = np.ascontiguousarray(np.stack([g.lut_sign for g in gates]), dtype=np.uint8)
        self.lut_bits.setflags(write=False)
        self.lut_sign.setflags(write=False)
        self._index = {g.key: i for i, g in enumerate(gates)}

    def __len__(self):
        return len(self.gates)

    def __getitem__(self, i: int) -> CliffordGate2Q:
        return self.gates[i]

    def __iter__(self):
        return iter(self.gates)

    def index_of(self, gate_or_images) -> int:
        key = gate_or_images.key if isinstance(gate_or_images, CliffordGate2Q) else tuple(gate_or_images)
        return self._index[key]

    def inverse_index(self, i: int) -> int:
        return self._index[self.gates[i].inverse_images()]


def enumerate_clifford_2q() -> CliffordTable:
    """Breadth-first closure of ``GENERATORS`` from the identity.

    Elements are deduplicated by their signed images (global phase is
    already quotiented out) and each keeps the first, hence shortest, word.
    The table is built once per process and shared.
    """
    return _enumerate()


@lru_cache(maxsize=1)
def _enumerate() -> CliffordTable:
    seen: dict[Images, tuple[str, ...]] = {IDENTITY_IMAGES: ()}
    order = [IDENTITY_IMAGES]
    queue = deque([IDENTITY_IMAGES])
    while queue:
        cur = queue.popleft()
        word = seen[cur]
        for g in GENERATORS:
            nxt = _conjugate(cur, _GEN_LUTS[g])
            if nxt not in seen:
                seen[nxt] = word + (g,)
                order.append(nxt)
                queue.append(nxt)
    if len(order) != GROUP_ORDER:
        raise AssertionError(f"Clifford closure has {len(order)} elements, expected {GROUP_ORDER}")
    return CliffordTable([CliffordGate2Q.from_images(imgs, seen[imgs]) for imgs in order])


def sample_clifford_2q(rng: np.random.Generator, table: CliffordTable | None = None) -> CliffordGate2Q:
    """Uniform draw from the group."""
    table = table or enumerate_clifford_2q()
    return table[int(rng.integers(len(table)))]
