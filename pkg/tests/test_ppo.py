import json
import math

import numpy as np
import pytest

from disentangler.env import DisentangleEnv, EnvConfig
from disentangler.ppo import (
    Adam, PolicyModel, RolloutBuffer, TrainConfig, TrainingDiverged, categorical_entropy, clip_grad_norm, gae,
    load_model, log_softmax, policy_forward, ppo_loss_and_grad, ppo_update, sample_actions, save_model, train,
)

from helpers import grad_rel_error, random_batch


def small_cfg(**kw):
    base = dict(t_s=512, n_steps=128, minibatch_size=32, n_epochs=2, seed=0, hidden=(16,))
    base.update(kw)
    return TrainConfig(**base)


# --- network -------------------------------------------------------------

def test_zero_parameters_give_uniform_policy_and_zero_value():
    m = PolicyModel.zeros(12, 12)
    logits, v = policy_forward(m, np.ones(12))
    np.testing.assert_allclose(np.exp(log_softmax(logits)), np.full(12, 1 / 12))
    assert v == 0.0


def test_logit_count_matches_actions():
    cfg = EnvConfig(n=4, d=6)
    m = PolicyModel.init(cfg.n_actions, cfg.n_actions)
    assert policy_forward(m, np.zeros(12))[0].shape == (12,)


def test_random_parameters_finite_outputs(rng):
    m = PolicyModel.init(20, 20, rng=rng)
    for _ in range(50):
        logits, v = policy_forward(m, rng.integers(0, 2, 20).astype(float))
        assert np.all(np.isfinite(logits)) and math.isfinite(v)


def test_forward_rejects_wrong_width():
    with pytest.raises(ValueError):
        policy_forward(PolicyModel.init(4, 4), np.zeros(5))


def test_nonfinite_output_raises():
    m = PolicyModel.init(3, 3)
    m.params["pi.b"][0] = np.nan
    with pytest.raises(TrainingDiverged):
        policy_forward(m, np.zeros(3))


def test_orthogonal_init(rng):
    m = PolicyModel.init(8, 8, hidden=(8, 8), rng=rng)
    w = m.params["trunk1.w"]
    np.testing.assert_allclose(w.T @ w, 2 * np.eye(8), atol=1e-12)


def test_softmax_entropy_bounds(rng):
    for _ in range(50):
        logits = rng.normal(scale=5, size=(4, 7))
        probs = np.exp(log_softmax(logits))
        np.testing.assert_allclose(probs.sum(axis=1), 1)
        h = categorical_entropy(logits)
        assert np.all(h >= -1e-12) and np.all(h <= math.log(7) + 1e-12)


def test_sample_actions_frequencies():
    rng = np.random.default_rng(1)
    logits = np.log(np.array([[0.1, 0.6, 0.3]] * 30000))
    counts = np.bincount(sample_actions(logits, rng), minlength=3) / 30000
    np.testing.assert_allclose(counts, [0.1, 0.6, 0.3], atol=0.01)


# --- GAE ------------------------------------------------------------------------

def test_gae_single_terminal_step():
    adv, ret = gae([2.0], [0.5], [1.0], 9.0, 0.99, 0.95)
    assert adv[0] == pytest.approx(1.5)
    assert ret[0] == pytest.approx(2.0)


def test_gae_lambda_zero_is_td_error():
    r = np.array([1.0, 0.0, 2.0, 0.5])
    v = np.array([0.2, 0.4, -0.1, 0.3])
    d = np.array([0.0, 1.0, 0.0, 0.0])
    adv, _ = gae(r, v, d, 0.7, 0.9, 0.0)
    nxt = np.array([0.4, 0.0, 0.3, 0.7])
    np.testing.assert_allclose(adv, r + 0.9 * nxt * (1 - d) - v)


def test_gae_monte_carlo_limit():
    r = np.array([0.0, 1.0, 0.0, 3.0])
    v = np.array([0.5, -0.2, 0.1, 0.0])
    adv, ret = gae(r, v, [0, 0, 0, 1], 5.0, 1.0, 1.0)
    np.testing.assert_allclose(adv, np.cumsum(r[::-1])[::-1] - v)
    np.testing.assert_allclose(ret, np.cumsum(r[::-1])[::-1])


def test_gae_vectorized_envs_independent(rng):
    r, v, d = rng.normal(size=(6, 3)), rng.normal(size=(6, 3)), (rng.random((6, 3)) < 0.3).astype(float)
    last = rng.normal(size=3)
    adv, _ = gae(r, v, d, last, 0.97, 0.9)
    for k in range(3):
        np.testing.assert_allclose(adv[:, k], gae(r[:, k], v[:, k], d[:, k], last[k], 0.97, 0.9)[0])


# --- loss ---------------------------------------------------------------------------

def test_fresh_ratio_surrogate_equals_mean_advantage(rng):
    m = PolicyModel.init(5, 4, hidden=(8,), rng=rng)
    obs = rng.integers(0, 2, size=(16, 5)).astype(float)
    actions = rng.integers(4, size=16)
    logp = log_softmax(m.forward(obs)[0])[np.arange(16), actions]
    adv = rng.normal(size=16)
    terms, _ = ppo_loss_and_grad(m, obs, actions, logp, adv, np.zeros(16), 0.2, 0.0, 0.5)
    assert terms.clipped_surrogate == pytest.approx(adv.mean(), rel=1e-12)
    assert terms.unclipped_surrogate == pytest.approx(adv.mean(), rel=1e-12)
    assert terms.clip_fraction == 0.0


def test_ratio_inside_band_branches_agree(rng):
    m = PolicyModel.init(5, 4, hidden=(8,), rng=rng)
    obs = rng.integers(0, 2, size=(16, 5)).astype(float)
    actions = rng.integers(4, size=16)
    logp = log_softmax(m.forward(obs)[0])[np.arange(16), actions]
    old = logp + rng.uniform(-0.1, 0.1, size=16)
    terms, _ = ppo_loss_and_grad(m, obs, actions, old, rng.normal(size=16), np.zeros(16), 0.2, 0.0, 0.5)
    assert terms.clipped_surrogate == pytest.approx(terms.unclipped_surrogate, rel=1e-12)


def test_six_parameter_gradient_check(rng):
    m = PolicyModel.init(1, 2, hidden=(), rng=rng)
    assert sum(p.size for p in m.params.values()) == 6
    for _ in range(20):
        for p in m.params.values():
            p[...] = rng.normal(size=p.shape)
        assert grad_rel_error(m, random_batch(rng, m, 16)) < 1e-4


def test_deep_gradient_check(rng):
    m = PolicyModel.init(6, 5, hidden=(7, 4), rng=rng)
    for p in m.params.values():
        p[...] += rng.normal(scale=0.3, size=p.shape)
    assert grad_rel_error(m, random_batch(rng, m, 24)) < 1e-4


def test_clip_grad_norm():
    g = {"a": np.array([3.0, 0.0]), "b": np.array([4.0])}
    assert clip_grad_norm(g, 1.0) == pytest.approx(5.0)
    assert math.sqrt(sum(np.sum(v**2) for v in g.values())) == pytest.approx(1.0)
    g = {"a": np.array([0.1])}
    clip_grad_norm(g, 1.0)
    assert g["a"][0] == 0.1


def test_adam_first_step_is_lr_sized():
    p = {"w": np.array([1.0, -1.0])}
    Adam(p, 0.01).step(p, {"w": np.array([5.0, -0.001])})
    np.testing.assert_allclose(p["w"], [0.99, -0.99], rtol=1e-5)


def test_zero_advantage_zero_lr_update_leaves_parameters(rng):
    env = DisentangleEnv(EnvConfig(n=3, d=4), seed=0)
    m = PolicyModel.init(env.obs_dim, env.n_actions, hidden=(8,), rng=rng)
    before = m.copy()
    buf = RolloutBuffer(32, 1, env.obs_dim)
    obs = env.reset()
    for _ in range(32):
        buf.add(obs[None], [0], [0.0], [0.0], [0.0], [0.0])
    buf.compute_advantages(np.zeros(1), 0.99, 0.95)
    ppo_update(m, buf, small_cfg(l_r=0.0), rng)
    for k in m.params:
        np.testing.assert_array_equal(m.params[k], before.params[k])


def test_update_requires_full_buffer(rng):
    m = PolicyModel.init(2, 2, hidden=())
    with pytest.raises(ValueError):
        ppo_update(m, RolloutBuffer(4, 1, 2), small_cfg(), rng)


# --- configuration ---------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(t_s=10, n_steps=20), dict(clip_eps=0.0), dict(clip_eps=1.0),
                                dict(discount=1.5), dict(gae_lambda=-0.1), dict(n_envs=0), dict(l_r=-1.0)])
def test_train_config_rejects(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_train_config_dict_roundtrip():
    cfg = small_cfg(l_r=3e-4)
    assert TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


# --- training ---------------------------------------------------------------------------------

def _train(cfg):
    env_cfg = EnvConfig(n=3, d=4)
    return train(lambda s: DisentangleEnv(env_cfg, seed=s), cfg)


def test_metric_row_count():
    _, metrics = _train(small_cfg(t_s=700, n_steps=128))
    assert len(metrics.rows) == 700 // 128
    _, metrics = _train(small_cfg(t_s=1024, n_steps=128, n_envs=3))
    assert len(metrics.rows) == 1024 // (128 * 3)
    assert list(metrics.column("timestep")) == [384, 768]


def test_training_is_deterministic():
    m1, k1 = _train(small_cfg())
    m2, k2 = _train(small_cfg())
    for name in m1.params:
        np.testing.assert_array_equal(m1.params[name], m2.params[name])
    for col in ("timestep", "ep_len_mean", "ep_rew_mean", "policy_loss"):
        np.testing.assert_array_equal(k1.column(col), k2.column(col))
    m3, _ = _train(small_cfg(seed=1))
    assert not np.array_equal(m1.params["pi.w"], m3.params["pi.w"])


def test_metrics_csv(tmp_path):
    _, metrics = _train(small_cfg())
    metrics.to_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "timestep,ep_len_mean,ep_rew_mean,policy_loss,value_loss,entropy"
    assert len(lines) == 1 + len(metrics.rows)
    with pytest.raises(ValueError):
        metrics.append(timestep=1, ep_len_mean=0, ep_rew_mean=0, policy_loss=0, value_loss=0, entropy=0)


# --- persistence -----------------------------------------------------------------------------------

def test_save_load_roundtrip(tmp_path, rng):
    m = PolicyModel.init(12, 12, rng=rng)
    save_model(m, small_cfg(), tmp_path / "m.json", extra={"env_config": {"n": 4}})
    m2, cfg, extra = load_model(tmp_path / "m.json", expected_input_dim=12)
    assert cfg == small_cfg() and extra == {"env_config": {"n": 4}}
    for _ in range(100):
        obs = rng.integers(0, 2, 12).astype(float)
        l1, v1 = policy_forward(m, obs)
        l2, v2 = policy_forward(m2, obs)
        np.testing.assert_array_equal(l1, l2)
        assert v1 == v2


def test_load_rejects_bad_files(tmp_path, rng):
    m = PolicyModel.init(6, 6, hidden=(4,), rng=rng)
    path = tmp_path / "m.json"
    save_model(m, small_cfg(), path)
    with pytest.raises(ValueError, match="input_dim"):
        load_model(path, expected_input_dim=12)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="version"):
        load_model(path)
    doc["format"] = "something-else"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_model(path)
    path.write_text("{not json")
    with pytest.raises(ValueError):
        load_model(path)
