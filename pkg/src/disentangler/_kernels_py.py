"""Pure-Python tableau kernels.

Same signatures and array layout as the compiled ``_kernels`` extension:
``x`` and ``z`` are uint64 arrays of length 2n (one word per row, bit k is
qubit k), ``r`` is a uint8 sign array.  Rows 0..n-1 are destabilizers,
rows n..2n-1 stabilizers.
"""

from __future__ import annotations

import numpy as np

COMPILED = False

_MASK64 = (1 << 64) - 1


def pauli_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent of i (mod 4) picked up by the product P1 * P2 of Hermitian strings."""
    nx1 = ~x1 & _MASK64
    nz1 = ~z1 & _MASK64
    nx2 = ~x2 & _MASK64
    nz2 = ~z2 & _MASK64
    plus = (x1 & nz1 & x2 & z2) | (nx1 & z1 & x2 & nz2) | (x1 & z1 & nx2 & z2)
    minus = (x1 & nz1 & nx2 & z2) | (nx1 & z1 & x2 & z2) | (x1 & z1 & x2 & nz2)
    return (plus.bit_count() - minus.bit_count()) & 3


def _apply_lut_lists(xs, zs, rs, bits, signs, a, b):
    ma = 1 << a
    mb = 1 << b
    keep = ~(ma | mb) & _MASK64
    for i in range(len(xs)):
        xi = xs[i]
        zi = zs[i]
        idx = ((xi >> a) & 1) | (((zi >> a) & 1) << 1) | (((xi >> b) & 1) << 2) | (((zi >> b) & 1) << 3)
        out = bits[idx]
        xi &= keep
        zi &= keep
        if out & 1:
            xi |= ma
        if out & 2:
            zi |= ma
        if out & 4:
            xi |= mb
        if out & 8:
            zi |= mb
        xs[i] = xi
        zs[i] = zi
        rs[i] ^= signs[idx]


def _rowsum(xs, zs, rs, h, i):
    e = (2 * rs[h] + 2 * rs[i] + pauli_phase(xs[i], zs[i], xs[h], zs[h])) & 3
    rs[h] = e >> 1
    xs[h] ^= xs[i]
    zs[h] ^= zs[i]


def _measure_lists(xs, zs, rs, n, q, coin):
    p = -1
    for k in range(n, 2 * n):
        if (xs[k] >> q) & 1:
            p = k
            break
    if p < 0:
        return _deterministic_lists(xs, zs, rs, n, q)
    _collapse_lists(xs, zs, rs, n, q, p, coin)
    return coin


def _deterministic_lists(xs, zs, rs, n, q):
    sx = sz = sr = 0
    for i in range(n):
        if (xs[i] >> q) & 1:
            k = i + n
            e = (2 * sr + 2 * rs[k] + pauli_phase(xs[k], zs[k], sx, sz)) & 3
            sr = e >> 1
            sx ^= xs[k]
            sz ^= zs[k]
    return sr


def _collapse_lists(xs, zs, rs, n, q, p, outcome):
    for i in range(2 * n):
        if i != p and (xs[i] >> q) & 1:
            _rowsum(xs, zs, rs, i, p)
    xs[p - n] = xs[p]
    zs[p - n] = zs[p]
    rs[p - n] = rs[p]
    xs[p] = 0
    zs[p] = 1 << q
    rs[p] = outcome


def _store(x, z, r, xs, zs, rs):
    x[:] = np.array(xs, dtype=np.uint64)
    z[:] = np.array(zs, dtype=np.uint64)
    r[:] = np.array(rs, dtype=np.uint8)


def _load(x, z, r):
    return [int(v) for v in x], [int(v) for v in z], [int(v) for v in r]


def apply_lut(x, z, r, lut_bits, lut_sign, a, b):
    xs, zs, rs = _load(x, z, r)
    _apply_lut_lists(xs, zs, rs, [int(v) for v in lut_bits], [int(v) for v in lut_sign], a, b)
    _store(x, z, r, xs, zs, rs)


def find_pivot(x, n, q):
    for k in range(n, 2 * n):
        if (int(x[k]) >> q) & 1:
            return k
    return -1


def deterministic_outcome(x, z, r, n, q):
    xs, zs, rs = _load(x, z, r)
    return _deterministic_lists(xs, zs, rs, n, q)


def collapse(x, z, r, n, q, p, outcome):
    xs, zs, rs = _load(x, z, r)
    _collapse_lists(xs, zs, rs, n, q, p, outcome)
    _store(x, z, r, xs, zs, rs)


def measure(x, z, r, n, q, coin):
    xs, zs, rs = _load(x, z, r)
    out = _measure_lists(xs, zs, rs, n, q, coin)
    _store(x, z, r, xs, zs, rs)
    return out


def _rank_ints(rows) -> int:
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


def gf2_rank_words(rows) -> int:
    """Rank over GF(2) of an (m, W) uint64 array, word 0 least significant."""
    rows = np.asarray(rows, dtype=np.uint64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        return 0
    ints = []
    for row in rows:
        v = 0
        for w, word in enumerate(row):
            v |= int(word) << (64 * w)
        ints.append(v)
    return _rank_ints(ints)


def _region_entropy_lists(xs, zs, n, mask, size):
    # restricted stabilizer rows packed as (z|x) in a single int
    rows = [(xs[k] & mask) | ((zs[k] & mask) << 64) for k in range(n, 2 * n)]
    return _rank_ints(rows) - size


def region_entropy(x, z, n, mask):
    xs = [int(v) for v in x]
    zs = [int(v) for v in z]
    return _region_entropy_lists(xs, zs, n, int(mask), int(mask).bit_count())


def prefix_entropies(x, z, n, out):
    xs = [int(v) for v in x]
    zs = [int(v) for v in z]
    for i in range(1, n):
        out[i - 1] = _region_entropy_lists(xs, zs, n, (1 << i) - 1, i)


def run_circuit(x, z, r, n, lut_bits, lut_sign, gates, pmat, coins):
    xs, zs, rs = _load(x, z, r)
    gates = gates.tolist()
    # only the table rows this circuit uses; the full table is 11520 x 16
    used = {g for layer in gates for g, _, _ in layer}
    bits = {g: lut_bits[g].tolist() for g in used}
    signs = {g: lut_sign[g].tolist() for g in used}
    pm = pmat.tolist()
    cs = coins.tolist()
    n_meas = len(pm[0]) if pm else 0
    for j in range(n_meas):
        for layer in (2 * j, 2 * j + 1):
            for gid, a, b in gates[layer]:
                _apply_lut_lists(xs, zs, rs, bits[gid], signs[gid], a, b)
        for i in range(n):
            if pm[i][j]:
                _measure_lists(xs, zs, rs, n, i, cs[i * n_meas + j])
    _store(x, z, r, xs, zs, rs)
