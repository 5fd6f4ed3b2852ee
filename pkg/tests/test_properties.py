"""Property-based checks of the invariants of each module."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from disentangler.clifford import enumerate_clifford_2q
from disentangler.env import (
    CircuitSpec, build_brickwall, layer_weights, measurement_cost, simulate, unscaled_reward, weighted_avg_layer,
)
from disentangler.ppo import gae
from disentangler.stabilizer import PauliString, gf2_rank, measure_z, region_entropy

TABLE = enumerate_clifford_2q()
SETTINGS = settings(max_examples=60, deadline=None)

bit_matrices = st.integers(1, 12).flatmap(
    lambda m: st.integers(1, 12).flatmap(lambda n: arrays(np.uint8, (m, n), elements=st.integers(0, 1)))
)


@st.composite
def states(draw, max_n=8):
    n = draw(st.integers(2, max_n))
    layers = draw(st.integers(1, 5))
    seed = draw(st.integers(0, 2**32))
    density = draw(st.sampled_from([0.0, 0.2, 0.5]))
    rng = np.random.default_rng(seed)
    c = build_brickwall(n, 2 * layers, rng, table=TABLE)
    p = (rng.random((n, layers)) < density).astype(np.uint8)
    return simulate(c, p, rng, TABLE)


@st.composite
def measurement_matrices(draw):
    n = draw(st.integers(2, 10))
    L = draw(st.integers(1, 10))
    return draw(arrays(np.uint8, (n, L), elements=st.integers(0, 1)))


@SETTINGS
@given(bit_matrices)
def test_rank_bounds_and_transpose(m):
    r = gf2_rank(m)
    assert 0 <= r <= min(m.shape)
    assert r == gf2_rank(m.T)


@SETTINGS
@given(bit_matrices, st.data())
def test_rank_invariant_under_row_addition(m, data):
    if m.shape[0] < 2:
        return
    i, j = data.draw(st.lists(st.integers(0, m.shape[0] - 1), min_size=2, max_size=2, unique=True))
    m2 = m.copy()
    m2[i] ^= m2[j]
    assert gf2_rank(m2) == gf2_rank(m)


@SETTINGS
@given(states())
def test_tableau_stays_valid(t):
    t.validate()


@SETTINGS
@given(states(), st.data())
def test_entropy_bounds_and_complement(t, data):
    full = (1 << t.n) - 1
    mask = data.draw(st.integers(1, full - 1))
    s = region_entropy(t, mask)
    size = bin(mask).count("1")
    assert 0 <= s <= min(size, t.n - size)
    assert s == region_entropy(t, full ^ mask)


@SETTINGS
@given(states(max_n=7), st.data())
def test_entropy_subadditivity(t, data):
    full = (1 << t.n) - 1
    a = data.draw(st.integers(1, full - 1))
    b = data.draw(st.integers(1, full - 1)) & ~a
    if b == 0 or a | b == full:
        return
    sa, sb, sab = region_entropy(t, a), region_entropy(t, b), region_entropy(t, a | b)
    assert abs(sa - sb) <= sab <= sa + sb


@SETTINGS
@given(states(), st.integers(0, 7), st.integers(0, 2**32))
def test_measurement_keeps_validity_and_is_repeatable(t, q, seed):
    q %= t.n
    rng = np.random.default_rng(seed)
    o = measure_z(t, q, rng)
    t.validate()
    assert measure_z(t, q, rng) == o


@SETTINGS
@given(measurement_matrices(), st.floats(0, 3), st.sampled_from(["as_written", "depth_increasing"]))
def test_reward_in_unit_interval(p, alpha, orientation):
    r = unscaled_reward(p, alpha, orientation)
    assert -1e-12 <= r <= 1 + 1e-12
    w = layer_weights(alpha, p.shape[1], orientation)
    assert np.all((w > 0) & (w <= 1))


@SETTINGS
@given(measurement_matrices(), st.floats(0, 3), st.data())
def test_adding_a_measurement_costs(p, alpha, data):
    zeros = np.argwhere(p == 0)
    if len(zeros) == 0:
        return
    i, j = zeros[data.draw(st.integers(0, len(zeros) - 1))]
    q = p.copy()
    q[i, j] = 1
    assert measurement_cost(q, alpha) > measurement_cost(p, alpha)
    assert unscaled_reward(q, alpha) < unscaled_reward(p, alpha)


@SETTINGS
@given(measurement_matrices())
def test_alpha_zero_cost_is_popcount_and_layer_in_range(p):
    assert measurement_cost(p, 0.0) == p.sum()
    if p.any():
        assert 1 <= weighted_avg_layer(p) <= p.shape[1]


@SETTINGS
@given(st.integers(2, 9), st.integers(1, 6), st.integers(0, 2**32))
def test_circuit_text_roundtrip(n, layers, seed):
    c = build_brickwall(n, 2 * layers, np.random.default_rng(seed), table=TABLE)
    assert np.array_equal(CircuitSpec.from_text(c.to_text(), TABLE).gates, c.gates)


paulis = st.integers(1, 6).flatmap(
    lambda n: st.tuples(*[st.text("IXYZ", min_size=n, max_size=n)] * 3)
)


@SETTINGS
@given(paulis)
def test_pauli_product_associative_when_hermitian(labels):
    a, b, c = (PauliString.from_str(s) for s in labels)
    if not (a.commutes(b) and b.commutes(c) and a.commutes(c)):
        return
    assert (a * b) * c == a * (b * c)
    assert a * a == PauliString(a.n, 0, 0, 1)


@SETTINGS
@given(st.integers(1, 30), st.integers(0, 2**32), st.floats(0, 1))
def test_gae_lambda_zero_is_one_step(T, seed, gamma):
    rng = np.random.default_rng(seed)
    r, v = rng.normal(size=T), rng.normal(size=T)
    d = (rng.random(T) < 0.2).astype(float)
    last = rng.normal()
    adv, ret = gae(r, v, d, last, gamma, 0.0)
    nxt = np.append(v[1:], last)
    np.testing.assert_allclose(adv, r + gamma * nxt * (1 - d) - v, atol=1e-12)
    np.testing.assert_allclose(ret, adv + v)
