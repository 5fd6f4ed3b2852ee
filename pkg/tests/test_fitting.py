import numpy as np
import pytest
from scipy.optimize import curve_fit

from disentangler.fitting import FitError, FitResult, linear_fit, tanh_fit


def test_exact_line():
    fit = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert fit.coefficients == pytest.approx((2.0, 1.0), abs=1e-12)
    assert fit.rss == pytest.approx(0.0, abs=1e-20)


def test_noisy_line_recovery():
    rng = np.random.default_rng(11)
    x = np.arange(1.0, 21.0)
    for _ in range(100):
        fit = linear_fit(x, 2 * x + 10 + rng.normal(0, 0.1, size=20))
        g1, g2 = fit.coefficients
        assert abs(g1 - 2) < 0.05 * 2 and abs(g2 - 10) < 0.05 * 10


def test_linear_matches_polyfit(rng):
    x, y = rng.normal(size=30), rng.normal(size=30)
    np.testing.assert_allclose(linear_fit(x, y).coefficients, np.polyfit(x, y, 1), rtol=1e-10)


@pytest.mark.parametrize("xs, ys", [([3, 3, 3], [1, 2, 3]), ([1, 2], [1]), ([[1, 2]], [[1, 2]])])
def test_linear_rejects(xs, ys):
    with pytest.raises(FitError):
        linear_fit(xs, ys)


def test_tanh_noise_free_recovery():
    x = np.arange(1.0, 11.0)
    fit = tanh_fit(x, 2 * np.tanh(0.3 * x) + 1)
    assert fit.converged
    np.testing.assert_allclose(fit.coefficients, (2.0, 0.3, 1.0), rtol=1e-2)


def test_tanh_constant_data_is_flat():
    fit = tanh_fit(np.arange(1.0, 8.0), np.full(7, 4.2))
    g1, g2, g3 = fit.coefficients
    assert fit.converged
    assert abs(g1) < 1e-6 or abs(g2) < 1e-6
    assert fit.predict([1, 5, 100]) == pytest.approx([4.2] * 3)


def test_tanh_needs_four_points():
    with pytest.raises(FitError):
        tanh_fit([1, 2, 3], [1, 2, 3])


def test_tanh_matches_scipy_on_noisy_saturating_data():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = (rng.uniform(1, 5), rng.uniform(0.1, 0.8), rng.uniform(0, 2))
        x = np.arange(2.0, 12.0)
        y = g[0] * np.tanh(g[1] * x) + g[2] + rng.normal(0, 0.05, size=x.size)
        ours = tanh_fit(x, y)
        ref, _ = curve_fit(lambda x, a, b, c: a * np.tanh(b * x) + c, x, y, p0=g, maxfev=20000)
        ref_rss = float(np.sum((y - (ref[0] * np.tanh(ref[1] * x) + ref[2])) ** 2))
        assert ours.converged
        assert ours.rss <= ref_rss * (1 + 1e-6) + 1e-12


def test_report_format():
    text = FitResult("tanh", (3.5, 0.37, 0.6), 0.01, True).report(x="d")
    lines = text.splitlines()
    assert lines[:5] == ["kind = tanh", "gamma1 = 3.5", "gamma2 = 0.37", "gamma3 = 0.6", "rss = 0.01"]
    assert "x = d" in lines
