import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from disentangler.env import EnvConfig
from disentangler.experiments import (
    RESULTS_HEADER, FillFinalColumnActor, RandomActor, emit_results, entanglement_growth, evaluate_policy,
    point_seed, read_growth_csv, read_results, sweep, write_growth_csv,
)
from disentangler.ppo import TrainConfig

from helpers import EVAL_EPISODES, trained_point


def test_growth_starts_at_zero_and_roundtrips(tmp_path):
    curves = entanglement_growth([3, 4], 8, 20, np.random.default_rng(0))
    for c in curves:
        assert list(c.depths) == [0, 2, 4, 6, 8]
        assert c.mean_savg[0] == 0.0 and c.stderr[0] == 0.0
        assert np.all(c.mean_savg[1:] > 0)
    write_growth_csv(curves, tmp_path / "g.csv")
    back = read_growth_csv(tmp_path / "g.csv")
    for a, b in zip(curves, back):
        assert a.n == b.n
        np.testing.assert_array_equal(a.mean_savg, b.mean_savg)
        np.testing.assert_array_equal(a.stderr, b.stderr)


def test_growth_bounded_by_page_limit():
    # prefix entropy can never exceed min(i, n - i)
    for c in entanglement_growth([5, 6], 16, 30, np.random.default_rng(1)):
        bound = np.mean([min(i, c.n - i) for i in range(1, c.n)])
        assert np.all(c.mean_savg <= bound + 1e-12)


def test_growth_rejects_no_samples():
    with pytest.raises(ValueError):
        entanglement_growth([4], 8, 0, np.random.default_rng(0))


def test_fill_final_column_actor():
    cfg = EnvConfig(n=5, d=8, alpha=0.1)
    stats = evaluate_policy(FillFinalColumnActor(5, 4), cfg, 100, np.random.default_rng(0))
    assert stats.success_rate == 1.0
    assert stats.mean_weighted_layer == 4.0
    # measuring N-1 qubits of a pure state already leaves a product state
    assert 1 <= stats.mean_measurements <= cfg.n - 1


def test_random_actor_statistics_finite():
    cfg = EnvConfig(n=4, d=6)
    stats = evaluate_policy(RandomActor(cfg.n_actions), cfg, 200, np.random.default_rng(0))
    assert 0 < stats.success_rate <= 1
    for v in (stats.mean_measurements, stats.stderr_measurements, stats.mean_weighted_layer,
              stats.stderr_weighted_layer, stats.mean_unscaled_reward):
        assert math.isfinite(v)


def test_evaluate_rejects_mismatched_model():
    from disentangler.ppo import PolicyModel

    with pytest.raises(ValueError):
        evaluate_policy(PolicyModel.init(6, 6), EnvConfig(n=4, d=6), 5, np.random.default_rng(0))


def test_point_seed_is_pure():
    assert point_seed(0, 4, 6, 0.1) == point_seed(0, 4, 6, 0.1)
    assert len({point_seed(0, n, d, a) for n in (3, 4) for d in (4, 6) for a in (0.1, 0.5)}) == 8


TINY = TrainConfig(t_s=256, n_steps=128, minibatch_size=64, n_epochs=1, hidden=(8,))


def test_one_point_grid_gives_one_row():
    rows = sweep([(3, 4, 0.1)], TINY, EnvConfig(), 20)
    assert len(rows) == 1
    assert set(RESULTS_HEADER) <= set(rows[0])
    assert (rows[0]["n"], rows[0]["d"], rows[0]["alpha"]) == (3, 4, 0.1)


def test_sweep_parallel_matches_serial():
    grid = [(4, 4, 0.1), (3, 4, 0.1), (3, 4, 0.5)]
    serial = sweep(grid, TINY, EnvConfig(), 20, base_seed=5, jobs=1)
    parallel = sweep(grid, TINY, EnvConfig(), 20, base_seed=5, jobs=2)
    assert [(r["n"], r["d"], r["alpha"]) for r in serial] == [(3, 4, 0.1), (3, 4, 0.5), (4, 4, 0.1)]
    for a, b in zip(serial, parallel):
        assert {k: a[k] for k in RESULTS_HEADER} == {k: b[k] for k in RESULTS_HEADER}


def test_results_csv(tmp_path):
    emit_results([], tmp_path / "empty.csv")
    assert (tmp_path / "empty.csv").read_text() == ",".join(RESULTS_HEADER) + "\n"
    rows = [dict(n=4, d=6, alpha=0.1, mean_measurements=2.5, stderr_measurements=0.1, mean_weighted_layer=2.0,
                 mean_reward=0.8, success_rate=1.0, seed=7),
            dict(n=3, d=6, alpha=0.1, mean_measurements=float("nan"), stderr_measurements=0.1,
                 mean_weighted_layer=2.0, mean_reward=0.8, success_rate=0.5, seed=9)]
    emit_results(rows, tmp_path / "r.csv")
    back = read_results(tmp_path / "r.csv")
    assert [r["n"] for r in back] == [3, 4]
    assert back[1] == rows[0]
    assert math.isnan(back[0]["mean_measurements"])
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_results(tmp_path / "bad.csv")


@pytest.mark.slow
def test_trained_agent_beats_random_actor():
    row, _, _ = trained_point(6, 6, 0.1)
    cfg = EnvConfig(n=6, d=12, alpha=0.1)
    rnd = evaluate_policy(RandomActor(cfg.n_actions), cfg, EVAL_EPISODES, np.random.default_rng(1))
    pooled = math.hypot(row["stderr_measurements"], rnd.stderr_measurements)
    assert rnd.mean_measurements - row["mean_measurements"] > 2 * pooled


@pytest.mark.slow
def test_alpha_sweep_moves_measurements_earlier():
    alphas = [round(0.1 * k, 1) for k in range(1, 11)]
    layers = [trained_point(6, 6, a)[0]["mean_weighted_layer"] for a in alphas]
    rho, _ = spearmanr(alphas, layers)
    assert rho < 0
