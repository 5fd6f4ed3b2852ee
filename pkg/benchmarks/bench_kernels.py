"""Compare the compiled and pure-Python tableau kernels.

Usage: python3 benchmarks/bench_kernels.py [--n 6] [--layers 6] [--reps 200]

Times one full circuit simulation (the per-step cost of the environment),
the prefix-entropy scan and a dense GF(2) rank, and checks that both
backends return identical results on the same inputs.
"""

import argparse
import time

import numpy as np

from disentangler._backend import available_backends
from disentangler.clifford import enumerate_clifford_2q
from disentangler.env import build_brickwall
from disentangler.stabilizer import new_computational_basis_state


def _time(fn, reps):
    fn()
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench(n, n_layers, reps, seed=0):
    rng = np.random.default_rng(seed)
    table = enumerate_clifford_2q()
    circ = build_brickwall(n, 2 * n_layers, rng, table=table)
    p = (rng.random((n, n_layers)) < 0.3).astype(np.uint8)
    coins = rng.integers(0, 2, size=n * n_layers, dtype=np.uint8)
    rows = rng.integers(0, 2**63, size=(4 * n, 2), dtype=np.uint64)

    results = {}
    for name, k in available_backends().items():
        def run():
            t = new_computational_basis_state(n)
            k.run_circuit(t.x, t.z, t.r, n, table.lut_bits, table.lut_sign, circ.gates, p, coins)
            return t

        t = run()
        ent = np.zeros(n - 1, dtype=np.int64)
        k.prefix_entropies(t.x, t.z, n, ent)
        results[name] = dict(
            circuit=_time(run, reps),
            entropy=_time(lambda: k.prefix_entropies(t.x, t.z, n, ent), reps),
            rank=_time(lambda: k.gf2_rank_words(rows), reps),
            state=(t.x.copy(), t.z.copy(), t.r.copy(), ent.copy(), k.gf2_rank_words(rows)),
        )
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--layers", type=int, default=6)
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args()
    res = bench(args.n, args.layers, args.reps)
    print(f"n={args.n} layers={args.layers} reps={args.reps}")
    print(f"{'backend':<10}{'circuit us':>12}{'entropy us':>12}{'rank us':>10}")
    for name, r in res.items():
        print(f"{name:<10}{r['circuit'] * 1e6:>12.1f}{r['entropy'] * 1e6:>12.1f}{r['rank'] * 1e6:>10.1f}")
    if "compiled" in res:
        a, b = res["python"]["state"], res["compiled"]["state"]
        same = all(np.array_equal(u, v) for u, v in zip(a[:4], b[:4])) and a[4] == b[4]
        print(f"backends agree: {same}")
        print(f"speedup (circuit): {res['python']['circuit'] / res['compiled']['circuit']:.1f}x")


if __name__ == "__main__":
    main()
