"""Goodness of fit: Cox-Snell type residuals, Kaplan-Meier curves with
Greenwood variance, PP-plot coordinates and the Hill estimator."""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import kstest, norm

from . import transforms as tf
from .moe import softmax_pi
from . import matcore

__all__ = [
    "ResidualSample",
    "SurvivalCurve",
    "residuals",
    "kaplan_meier",
    "pp_points",
    "hill_estimator",
    "uniformity_check",
]


@dataclass
class ResidualSample:
    r: np.ndarray
    delta: np.ndarray   # 1 = event, 0 = right-censored
    excluded: int = 0   # interval-censored rows left out


def _survival_terms(model, y, X):
    z = tf.g_inverse(model.transform, y)
    pis = softmax_pi(X, model.alpha)
    E = matcore.expm(model.T[None] * z[:, None, None])
    return np.einsum("nk,nkl,l->n", pis, E, np.ones(model.p))


def residuals(model, data):
    """``r_i = -log S(y_i | x_i)``.

    Right-censored rows use their censoring point and get ``delta = 0``.
    Interval-censored rows with a finite upper bound are excluded.
    """
    exact = data.is_exact
    right = ~exact & np.isinf(data.high)
    keep = exact | right
    excluded = int((~keep).sum())
    if excluded:
        warnings.warn(f"{excluded} interval-censored rows excluded from residuals",
                      RuntimeWarning)
    y = data.low[keep]
    S = _survival_terms(model, y, data.X[keep])
    with np.errstate(divide="ignore"):
        r = -np.log(np.clip(S, 0.0, 1.0))
    return ResidualSample(r=np.maximum(r, 0.0), delta=exact[keep].astype(int), excluded=excluded)


@dataclass
class SurvivalCurve:
    """Right-continuous product-limit curve evaluated at ``times``."""

    times: np.ndarray
    survival: np.ndarray
    variance: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    level: float = 0.95

    def __call__(self, r):
        """Evaluate the step function at arbitrary points."""
        idx = np.searchsorted(self.times, np.asarray(r, dtype=float), side="right") - 1
        return np.where(idx >= 0, self.survival[np.maximum(idx, 0)], 1.0)


def kaplan_meier(sample, level=0.95):
    """Kaplan-Meier estimator with Greenwood variance and normal bands.

    ``sample`` is a :class:`ResidualSample` or a pair ``(values, delta)``.
    Ties are grouped; the band ``S +- z sqrt(Var)`` is clipped to [0, 1].
    """
    if isinstance(sample, ResidualSample):
        r, delta = sample.r, sample.delta
    else:
        r, delta = sample
    r = np.asarray(r, dtype=float)
    delta = np.asarray(delta, dtype=int)
    if r.size == 0:
        raise ValueError("empty sample")
    times, inverse = np.unique(r, return_inverse=True)
    events = np.bincount(inverse, weights=delta, minlength=times.size)
    total = np.bincount(inverse, minlength=times.size)
    at_risk = r.size - np.concatenate(([0], np.cumsum(total)[:-1]))
    frac = 1.0 - events / at_risk
    surv = np.cumprod(frac)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(events > 0, events / (at_risk * (at_risk - events)), 0.0)
    terms = np.where(np.isfinite(terms), terms, 0.0)
    var = surv ** 2 * np.cumsum(terms)
    zq = norm.ppf(0.5 + level / 2.0)
    half = zq * np.sqrt(var)
    return SurvivalCurve(times=times, survival=surv, variance=var,
                         lower=np.clip(surv - half, 0.0, 1.0),
                         upper=np.clip(surv + half, 0.0, 1.0),
                         at_risk=at_risk.astype(int), events=events.astype(int), level=level)


def pp_points(model, data):
    """``(empirical, fitted)`` pairs for uncensored rows, sorted by the fitted
    probability ``F(y_i | x_i)``; the i-th point has empirical ``i/(N+1)``."""
    exact = data.is_exact
    fitted = 1.0 - _survival_terms(model, data.low[exact], data.X[exact])
    fitted = np.sort(np.clip(fitted, 0.0, 1.0))
    n = fitted.size
    empirical = np.arange(1, n + 1) / (n + 1.0)
    return np.column_stack([empirical, fitted])


def hill_estimator(sample, k_range=None):
    """Hill estimates ``H_k = mean_{i<=k} log(X_(n-i+1) / X_(n-k))``.

    Returns ``(k, H_k)`` arrays. ``k_range`` defaults to ``1..n-2``.
    """
    x = np.asarray(sample, dtype=float)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ValueError("Hill estimator needs finite positive values")
    n = x.size
    ks = np.arange(1, n - 1) if k_range is None else np.asarray(list(k_range), dtype=int)
    if ks.size == 0 or ks.min() < 1 or n <= ks.max() + 1:
        raise ValueError("sample size must exceed max k + 1")
    logs = np.log(np.sort(x)[::-1])
    csum = np.cumsum(logs)
    return ks, csum[ks - 1] / ks - logs[ks]


def uniformity_check(sample, alpha=0.05):
    """KS test of ``exp(-r)`` against U(0, 1) on the uncensored residuals.

    Returns ``(passed, statistic, pvalue)``.
    """
    u = np.exp(-sample.r[sample.delta == 1])
    if u.size == 0:
        raise ValueError("no uncensored residuals")
    res = kstest(u, "uniform")
    return bool(res.pvalue >= alpha), float(res.statistic), float(res.pvalue)
