"""Least-squares fits of measurement counts: straight lines and saturating tanh."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TANH_STARTS = (0.05, 0.1, 0.2, 0.5, 1.0)


class FitError(ValueError):
    pass


@dataclass
class FitResult:
    kind: str  # "linear": y = g1 x + g2; "tanh": y = g1 tanh(g2 x) + g3
    coefficients: tuple[float, ...]
    rss: float
    converged: bool

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "linear":
            g1, g2 = self.coefficients
            return g1 * x + g2
        g1, g2, g3 = self.coefficients
        return g1 * np.tanh(g2 * x) + g3

    def report(self, **context) -> str:
        lines = [f"kind = {self.kind}"]
        lines += [f"gamma{i + 1} = {c!r}" for i, c in enumerate(self.coefficients)]
        lines += [f"rss = {self.rss!r}", f"converged = {str(self.converged).lower()}"]
        lines += [f"{k} = {v}" for k, v in context.items()]
        return "\n".join(lines) + "\n"


def linear_fit(xs, ys) -> FitResult:
    """Closed-form ordinary least squares for y = g1 x + g2."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("xs and ys must be 1-D and of equal length")
    if len(np.unique(x)) < 2:
        raise FitError("linear fit needs at least two distinct x values")
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    intercept = float(ym - slope * xm)
    rss = float(np.sum((y - slope * x - intercept) ** 2))
    return FitResult("linear", (slope, intercept), rss, True)


def _tanh_model(theta, x):
    g1, g2, g3 = theta
    t = np.tanh(g2 * x)
    f = g1 * t + g3
    jac = np.column_stack([t, g1 * x * (1.0 - t * t), np.ones_like(x)])
    return f, jac


def _levenberg_marquardt(x, y, theta, max_iter=500, tol=1e-12):
    """Damped Gauss-Newton with Marquardt diagonal scaling.  Returns (theta, rss, converged)."""
    theta = np.array(theta, dtype=np.float64)
    f, jac = _tanh_model(theta, x)
    resid = y - f
    rss = float(resid @ resid)
    mu = 1e-3
    scale = max(1.0, float(y @ y))
    for _ in range(max_iter):
        if rss <= 1e-28 * scale:
            return theta, rss, True
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        diag = np.maximum(np.diag(jtj), 1e-12 * (np.max(np.diag(jtj)) + 1.0))
        improved = False
        while mu < 1e16:
            try:
                step = np.linalg.solve(jtj + mu * np.diag(diag), jtr)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            cand = theta + step
            f_new, jac_new = _tanh_model(cand, x)
            r_new = y - f_new
            rss_new = float(r_new @ r_new)
            if np.isfinite(rss_new) and rss_new <= rss:
                small_step = np.linalg.norm(step) <= 1e-10 * (1.0 + np.linalg.norm(theta))
                small_gain = rss - rss_new <= tol * max(rss, 1e-300)
                theta, resid, rss, jac = cand, r_new, rss_new, jac_new
                mu = max(mu / 3.0, 1e-12)
                improved = True
                if small_step or small_gain:
                    return theta, rss, True
                break
            mu *= 2.0
        if not improved:
            # no descent direction at any damping: stationary point
            grad = np.linalg.norm(jac.T @ resid)
            return theta, rss, bool(grad <= 1e-6 * (1.0 + np.sqrt(rss) * np.linalg.norm(jac)))
    return theta, rss, False


def tanh_fit(xs, ys) -> FitResult:
    """Fit y = g1 tanh(g2 x) + g3, multi-starting g2 and keeping the lowest residual.

    The flat fit (g1 = 0, g3 = mean y) is always a candidate, so the result
    is never worse than a constant.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("xs and ys must be 1-D and of equal length")
    if len(x) < 4:
        raise FitError("tanh fit needs at least 4 points")
    lo, hi = float(y.min()), float(y.max())
    best = None
    any_converged = False
    for g2 in TANH_STARTS:
        theta, rss, ok = _levenberg_marquardt(x, y, (hi - lo, g2, lo))
        if not np.all(np.isfinite(theta)):
            continue
        any_converged |= ok
        if ok and (best is None or rss < best[1]):
            best = (theta, rss)
    flat = np.array([0.0, TANH_STARTS[0], float(y.mean())])
    flat_rss = float(np.sum((y - y.mean()) ** 2))
    if best is None or flat_rss < best[1]:
        best = (flat, flat_rss)
    theta, rss = best
    return FitResult("tanh", tuple(float(v) for v in theta), float(rss), any_converged)
