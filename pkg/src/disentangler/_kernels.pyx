# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tableau kernels.

Mirror of ``_kernels_py``: ``x``/``z`` are uint64[2n] with one word per
row (bit k is qubit k, so n <= 64), ``r`` is uint8[2n].  Rows 0..n-1 are
destabilizers, rows n..2n-1 stabilizers.
"""

import numpy as np

from libc.stdint cimport uint64_t, uint8_t, int32_t, int64_t

ctypedef uint64_t u64

COMPILED = True

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_clzll(unsigned long long) nogil


cdef inline int _phase(u64 x1, u64 z1, u64 x2, u64 z2) noexcept nogil:
    cdef u64 plus = (x1 & ~z1 & x2 & z2) | (~x1 & z1 & x2 & ~z2) | (x1 & z1 & ~x2 & z2)
    cdef u64 minus = (x1 & ~z1 & ~x2 & z2) | (~x1 & z1 & x2 & z2) | (x1 & z1 & x2 & ~z2)
    return (__builtin_popcountll(plus) - __builtin_popcountll(minus)) & 3


def pauli_phase(u64 x1, u64 z1, u64 x2, u64 z2):
    """Exponent of i (mod 4) picked up by the product P1 * P2 of Hermitian strings."""
    return _phase(x1, z1, x2, z2)


cdef inline void _apply_lut(u64* x, u64* z, uint8_t* r, Py_ssize_t m,
                            const uint8_t* bits, const uint8_t* signs,
                            int a, int b) noexcept nogil:
    cdef u64 ma = (<u64>1) << a
    cdef u64 mb = (<u64>1) << b
    cdef u64 keep = ~(ma | mb)
    cdef u64 xi, zi
    cdef int idx, out
    cdef Py_ssize_t i
    for i in range(m):
        xi = x[i]
        zi = z[i]
        idx = (<int>((xi >> a) & 1)) | (<int>((zi >> a) & 1) << 1) \
            | (<int>((xi >> b) & 1) << 2) | (<int>((zi >> b) & 1) << 3)
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
        x[i] = xi
        z[i] = zi
        r[i] ^= signs[idx]


cdef inline void _rowsum(u64* x, u64* z, uint8_t* r, Py_ssize_t h, Py_ssize_t i) noexcept nogil:
    cdef int e = (2 * r[h] + 2 * r[i] + _phase(x[i], z[i], x[h], z[h])) & 3
    r[h] = <uint8_t>(e >> 1)
    x[h] ^= x[i]
    z[h] ^= z[i]


cdef inline Py_ssize_t _find_pivot(const u64* x, int n, int q) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(n, 2 * n):
        if (x[k] >> q) & 1:
            return k
    return -1


cdef inline int _deterministic(const u64* x, const u64* z, const uint8_t* r, int n, int q) noexcept nogil:
    cdef u64 sx = 0, sz = 0
    cdef int sr = 0, e
    cdef Py_ssize_t i, k
    for i in range(n):
        if (x[i] >> q) & 1:
            k = i + n
            e = (2 * sr + 2 * r[k] + _phase(x[k], z[k], sx, sz)) & 3
            sr = e >> 1
            sx ^= x[k]
            sz ^= z[k]
    return sr


cdef inline void _collapse(u64* x, u64* z, uint8_t* r, int n, int q, Py_ssize_t p, int outcome) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(2 * n):
        if i != p and (x[i] >> q) & 1:
            _rowsum(x, z, r, i, p)
    x[p - n] = x[p]
    z[p - n] = z[p]
    r[p - n] = r[p]
    x[p] = 0
    z[p] = (<u64>1) << q
    r[p] = <uint8_t>outcome


cdef inline int _measure(u64* x, u64* z, uint8_t* r, int n, int q, int coin) noexcept nogil:
    cdef Py_ssize_t p = _find_pivot(x, n, q)
    if p < 0:
        return _deterministic(x, z, r, n, q)
    _collapse(x, z, r, n, q, p, coin)
    return coin


cdef inline int _lead(u64 lo, u64 hi) noexcept nogil:
    if hi:
        return 127 - __builtin_clzll(hi)
    if lo:
        return 63 - __builtin_clzll(lo)
    return -1


cdef int _region_entropy(const u64* x, const u64* z, int n, u64 mask) noexcept nogil:
    # XOR basis keyed by leading bit over the 128-bit row (z_A << 64) | x_A
    cdef u64 blo[128]
    cdef u64 bhi[128]
    cdef uint8_t used[128]
    cdef int rank = 0, lead, k
    cdef u64 lo, hi
    for k in range(128):
        used[k] = 0
    for k in range(n, 2 * n):
        lo = x[k] & mask
        hi = z[k] & mask
        while True:
            lead = _lead(lo, hi)
            if lead < 0:
                break
            if not used[lead]:
                used[lead] = 1
                blo[lead] = lo
                bhi[lead] = hi
                rank += 1
                break
            lo ^= blo[lead]
            hi ^= bhi[lead]
    return rank - __builtin_popcountll(mask)


def apply_lut(u64[::1] x, u64[::1] z, uint8_t[::1] r,
              const uint8_t[::1] lut_bits, const uint8_t[::1] lut_sign, int a, int b):
    _apply_lut(&x[0], &z[0], &r[0], x.shape[0], &lut_bits[0], &lut_sign[0], a, b)


def find_pivot(const u64[::1] x, int n, int q):
    return _find_pivot(&x[0], n, q)


def deterministic_outcome(const u64[::1] x, const u64[::1] z, const uint8_t[::1] r, int n, int q):
    return _deterministic(&x[0], &z[0], &r[0], n, q)


def collapse(u64[::1] x, u64[::1] z, uint8_t[::1] r, int n, int q, Py_ssize_t p, int outcome):
    _collapse(&x[0], &z[0], &r[0], n, q, p, outcome)


def measure(u64[::1] x, u64[::1] z, uint8_t[::1] r, int n, int q, int coin):
    return _measure(&x[0], &z[0], &r[0], n, q, coin)


def region_entropy(const u64[::1] x, const u64[::1] z, int n, u64 mask):
    return _region_entropy(&x[0], &z[0], n, mask)


def prefix_entropies(const u64[::1] x, const u64[::1] z, int n, int64_t[::1] out):
    cdef int i
    for i in range(1, n):
        out[i - 1] = _region_entropy(&x[0], &z[0], n, ((<u64>1) << i) - 1)


def gf2_rank_words(rows):
    """Rank over GF(2) of an (m, W) uint64 array, word 0 least significant."""
    arr = np.array(rows, dtype=np.uint64, order="C", copy=True)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        return 0
    cdef u64[:, ::1] work = arr
    cdef Py_ssize_t m = work.shape[0], W = work.shape[1]
    cdef Py_ssize_t row = 0, col, w, k, piv
    cdef u64 bit
    cdef int rank = 0
    for col in range(W * 64 - 1, -1, -1):
        if row == m:
            break
        w = col >> 6
        bit = (<u64>1) << (col & 63)
        piv = -1
        for k in range(row, m):
            if work[k, w] & bit:
                piv = k
                break
        if piv < 0:
            continue
        if piv != row:
            for k in range(W):
                work[piv, k], work[row, k] = work[row, k], work[piv, k]
        for k in range(row + 1, m):
            if work[k, w] & bit:
                for piv in range(W):
                    work[k, piv] ^= work[row, piv]
        row += 1
        rank += 1
    return rank


def run_circuit(u64[::1] x, u64[::1] z, uint8_t[::1] r, int n,
                const uint8_t[:, ::1] lut_bits, const uint8_t[:, ::1] lut_sign,
                const int32_t[:, :, ::1] gates, const uint8_t[:, ::1] pmat,
                const uint8_t[::1] coins):
    cdef Py_ssize_t n_meas = pmat.shape[1]
    cdef Py_ssize_t per_layer = gates.shape[1]
    cdef Py_ssize_t j, layer, k, i
    cdef int gid
    cdef Py_ssize_t m = x.shape[0]
    with nogil:
        for j in range(n_meas):
            for layer in range(2 * j, 2 * j + 2):
                for k in range(per_layer):
                    gid = gates[layer, k, 0]
                    _apply_lut(&x[0], &z[0], &r[0], m, &lut_bits[gid, 0], &lut_sign[gid, 0],
                               gates[layer, k, 1], gates[layer, k, 2])
            for i in range(n):
                if pmat[i, j]:
                    _measure(&x[0], &z[0], &r[0], n, <int>i, coins[i * n_meas + j])
