"""Softmax gating and the PH mixture-of-experts model.

The gating maps a design row ``x`` (intercept first) to the initial
distribution ``pi_k(x) = exp(x . alpha_k) / sum_j exp(x . alpha_j)``.
Row 0 of ``alpha`` is pinned to zero; softmax is shift invariant so this
loses nothing and makes the coefficients identifiable.
"""
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from . import phcore
from . import transforms as tf
from .errors import SchemaError

__all__ = [
    "Column",
    "CovariateSchema",
    "PhMoeModel",
    "softmax_pi",
    "log_odds",
    "normalize_alpha",
    "conditional_mean",
]

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    """One covariate. Categorical columns are dummy coded against ``levels[0]``.

    ``center``/``scale`` record an optional standardization of a numeric
    column so that predictions apply the same map.
    """

    name: str
    kind: str = NUMERIC
    levels: tuple = ()
    center: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}", column=self.name)
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise SchemaError(f"column {self.name!r}: categorical column needs levels",
                                  column=self.name)
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"column {self.name!r}: duplicate levels", column=self.name)
        if not self.scale > 0:
            raise SchemaError(f"column {self.name!r}: scale must be positive", column=self.name)

    @property
    def width(self):
        return 1 if self.kind == NUMERIC else len(self.levels) - 1

    def labels(self):
        if self.kind == NUMERIC:
            return [self.name]
        return [f"{self.name}{lev}" for lev in self.levels[1:]]

    def to_dict(self):
        if self.kind == NUMERIC:
            return {"name": self.name, "kind": NUMERIC, "center": self.center, "scale": self.scale}
        return {"name": self.name, "kind": CATEGORICAL, "levels": list(self.levels)}

    @classmethod
    def from_dict(cls, d):
        return cls(name=d["name"], kind=d.get("kind", NUMERIC), levels=tuple(d.get("levels", ())),
                   center=d.get("center", 0.0), scale=d.get("scale", 1.0))


@dataclass(frozen=True)
class CovariateSchema:
    """Ordered covariate columns; the design always starts with an intercept."""

    columns: tuple = ()

    def __post_init__(self):
        cols = tuple(self.columns)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise SchemaError("covariate names must be unique")
        object.__setattr__(self, "columns", cols)

    @property
    def names(self):
        return [c.name for c in self.columns]

    @property
    def d(self):
        return 1 + sum(c.width for c in self.columns)

    def labels(self):
        out = ["(Intercept)"]
        for c in self.columns:
            out.extend(c.labels())
        return out

    def build_design(self, raw):
        """Design row for a mapping ``name -> value``."""
        return self.design_matrix({k: [v] for k, v in raw.items()})[0]

    def design_matrix(self, raw, n=None):
        """Design matrix from a mapping ``name -> sequence of values``.

        ``n`` fixes the row count when there are no covariate columns.
        """
        blocks = []
        for col in self.columns:
            if col.name not in raw:
                raise SchemaError(f"missing covariate column {col.name!r}", column=col.name)
            vals = list(raw[col.name])
            if n is None:
                n = len(vals)
            elif len(vals) != n:
                raise SchemaError("covariate columns have different lengths", column=col.name)
            if col.kind == NUMERIC:
                try:
                    x = np.asarray(vals, dtype=float)
                except (TypeError, ValueError):
                    bad = next(i for i, v in enumerate(vals) if not _is_number(v))
                    raise SchemaError(f"column {col.name!r}: non-numeric value {vals[bad]!r}",
                                      column=col.name, row=bad) from None
                if not np.all(np.isfinite(x)):
                    bad = int(np.flatnonzero(~np.isfinite(x))[0])
                    raise SchemaError(f"column {col.name!r}: non-finite value", column=col.name,
                                      row=bad)
                blocks.append(((x - col.center) / col.scale)[:, None])
            else:
                index = {lev: i for i, lev in enumerate(col.levels)}
                block = np.zeros((len(vals), col.width))
                for i, v in enumerate(vals):
                    key = _level_key(v)
                    if key not in index:
                        raise SchemaError(f"column {col.name!r}: unknown level {v!r}",
                                          column=col.name, row=i)
                    j = index[key]
                    if j > 0:
                        block[i, j - 1] = 1.0
                blocks.append(block)
        if n is None:
            lengths = [len(v) for v in raw.values()]
            n = lengths[0] if lengths else 1
        return np.hstack([np.ones((n, 1))] + blocks) if blocks else np.ones((n, 1))

    def to_list(self):
        return [c.to_dict() for c in self.columns]

    @classmethod
    def from_list(cls, items):
        return cls(tuple(Column.from_dict(d) for d in items))


def _is_number(v):
    try:
        float(v)
    except (TypeError, ValueError):
        return False
    return True


def _level_key(v):
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def softmax_pi(X, alpha):
    """Initial probabilities for one design row (``(d,)``) or many (``(N, d)``)."""
    X = np.asarray(X, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    scores = X @ alpha.T
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite gating scores")
    scores = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(X, alpha):
    scores = np.asarray(X, dtype=float) @ np.asarray(alpha, dtype=float).T
    m = scores.max(axis=-1, keepdims=True)
    return scores - m - np.log(np.exp(scores - m).sum(axis=-1, keepdims=True))


def log_odds(x, alpha, k, j):
    """``log(pi_k(x) / pi_j(x)) = x . (alpha_k - alpha_j)`` (0-based states)."""
    alpha = np.asarray(alpha, dtype=float)
    return float(np.asarray(x, dtype=float) @ (alpha[k] - alpha[j]))


def normalize_alpha(alpha):
    """Subtract the first row so that state 0 is the baseline."""
    alpha = np.asarray(alpha, dtype=float)
    return alpha - alpha[0]


@dataclass(frozen=True)
class PhMoeModel:
    """``Y | x ~ IPH(softmax(x alpha), T, lambda)``."""

    schema: CovariateSchema
    alpha: np.ndarray
    T: np.ndarray
    transform: tf.Transform = field(default_factory=tf.Transform)

    def __post_init__(self):
        T = matcore.check_subintensity(self.T)
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        if alpha.shape != (T.shape[0], self.schema.d):
            raise ValueError(f"alpha has shape {alpha.shape}, expected "
                             f"{(T.shape[0], self.schema.d)}")
        if not np.all(np.isfinite(alpha)):
            raise ValueError("alpha must be finite")
        problems = tf.validate(self.transform)
        if problems:
            raise ValueError("; ".join(problems))
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "alpha", normalize_alpha(alpha))

    @property
    def p(self):
        return self.T.shape[0]

    @property
    def t(self):
        return matcore.exit_vector(self.T)

    def pi(self, X):
        return softmax_pi(X, self.alpha)

    def conditional(self, x):
        """IPH distribution of ``Y`` given one design row."""
        pi = self.pi(x)
        return phcore.IphDistribution(phcore.PhaseDistribution(pi / pi.sum(), self.T),
                                      self.transform)

    def dof(self):
        """``p^2 + (p-1) d + dim(theta)``."""
        p, d = self.p, self.schema.d
        return p * p + (p - 1) * d + tf.n_params(self.transform)


def conditional_mean(model, x):
    """``E[Y | x]``; raises :class:`InfiniteMeanError` for infinite means."""
    return phcore.iph_mean(model.conditional(x))
