"""Exact simulation of PH-MoE responses through the underlying jump process."""
from dataclasses import dataclass

import numpy as np

from . import matcore
from . import transforms as tf
from .data import Dataset
from .moe import CATEGORICAL, Column, CovariateSchema, softmax_pi

__all__ = [
    "sample_absorption",
    "sample_absorption_times",
    "sample_response",
    "sample_responses",
    "scenario_gamma_groups",
    "GAMMA_GROUPS",
    "Censoring",
    "apply_censoring",
    "parse_censoring",
]


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _jump_table(T):
    """Cumulative jump probabilities per state; column ``p`` is absorption."""
    T = matcore.check_subintensity(T)
    p = T.shape[0]
    rates = np.zeros((p, p + 1))
    rates[:, :p] = T
    np.fill_diagonal(rates, 0.0)
    rates[:, p] = matcore.exit_vector(T)
    total = -np.diag(T)
    cum = np.cumsum(rates / total[:, None], axis=1)
    cum[:, -1] = 1.0
    return total, cum


def sample_absorption(pi, T, rng=None):
    """One absorption time and its starting state (0-based)."""
    z, start = sample_absorption_times(np.atleast_2d(pi), T, rng)
    return float(z[0]), int(start[0])


def sample_absorption_times(pis, T, rng=None, size=None):
    """Vectorized absorption times.

    ``pis`` is either one initial vector (then ``size`` draws are made) or an
    ``(N, p)`` array with one initial vector per draw.
    """
    rng = _rng(rng)
    pis = np.atleast_2d(np.asarray(pis, dtype=float))
    if size is not None:
        if pis.shape[0] != 1:
            raise ValueError("size is only allowed with a single initial vector")
        pis = np.broadcast_to(pis, (size, pis.shape[1]))
    total, cum = _jump_table(T)
    p = total.shape[0]
    n = pis.shape[0]
    start_cum = np.cumsum(pis, axis=1)
    start_cum[:, -1] = 1.0
    state = (rng.random(n)[:, None] >= start_cum).sum(axis=1)
    start = state.copy()
    time = np.zeros(n)
    alive = np.arange(n)
    while alive.size:
        s = state[alive]
        time[alive] += rng.exponential(1.0, alive.size) / total[s]
        nxt = (rng.random(alive.size)[:, None] >= cum[s]).sum(axis=1)
        state[alive] = nxt
        alive = alive[nxt < p]
    return time, start


def sample_responses(model, X, rng=None):
    """One response per design row: ``g(Z)`` with ``Z ~ PH(pi(x), T)``."""
    pis = softmax_pi(np.atleast_2d(X), model.alpha)
    z, _ = sample_absorption_times(pis, model.T, rng)
    return tf.g_forward(model.transform, z)


def sample_response(model, x, rng=None):
    return float(sample_responses(model, np.atleast_2d(x), rng)[0])


# group label -> (shape, scale)
GAMMA_GROUPS = {"A": (1.0, 3.0), "B": (3.0, 9.0), "C": (1.0, 9.0), "D": (3.0, 3.0)}


def scenario_gamma_groups(rng=None, group_size=500):
    """Four equally sized groups with Gamma responses.

    Returns ``(dataset, schema)``; the single categorical covariate ``group``
    has baseline level ``A``.
    """
    rng = _rng(rng)
    schema = CovariateSchema((Column("group", CATEGORICAL, tuple(GAMMA_GROUPS)),))
    ys, groups = [], []
    for g, (shape, scale) in GAMMA_GROUPS.items():
        ys.append(rng.gamma(shape, scale, group_size))
        groups += [g] * group_size
    cov = {"group": groups}
    X = schema.design_matrix(cov)
    return Dataset.exact(np.concatenate(ys), X, covariates=cov), schema


@dataclass(frozen=True)
class Censoring:
    """Censoring scheme.

    kind
        ``"right"`` (fixed point ``value``), ``"exponential"`` (random
        censoring times with rate ``value``) or ``"grid"`` (interval
        censoring on a grid of width ``value``).
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("right", "exponential", "grid"):
            raise ValueError(f"unknown censoring scheme {self.kind!r}")
        if not self.value > 0:
            raise ValueError("censoring parameter must be positive")


def parse_censoring(spec):
    """Parse ``right@5``, ``exp@0.1`` or ``grid@2``."""
    try:
        kind, value = spec.split("@")
        kind = {"right": "right", "exp": "exponential", "exponential": "exponential",
                "grid": "grid", "interval": "grid"}[kind.strip().lower()]
        return Censoring(kind, float(value))
    except (ValueError, KeyError):
        raise ValueError(f"bad censoring spec {spec!r}; use right@c, exp@rate or grid@width") \
            from None


def apply_censoring(data, scheme, rng=None):
    """Replace exact responses by censoring intervals per ``scheme``."""
    rng = _rng(rng)
    low = data.low.copy()
    high = data.high.copy()
    exact = data.is_exact
    y = low.copy()
    if scheme.kind == "right":
        if np.isinf(scheme.value):
            return data
        hit = exact & (y > scheme.value)
        low[hit] = scheme.value
        high[hit] = np.inf
    elif scheme.kind == "exponential":
        c = rng.exponential(1.0 / scheme.value, len(data))
        hit = exact & (y > c)
        low[hit] = c[hit]
        high[hit] = np.inf
    else:
        w = scheme.value
        hi = w * np.ceil(y / w)
        # half-open (a, b]: a value on the grid belongs to the cell below
        lo = hi - w
        low[exact] = np.maximum(lo[exact], 0.0)
        high[exact] = hi[exact]
    return data.with_responses(low, high)
