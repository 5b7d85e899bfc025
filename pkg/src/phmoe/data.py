"""Observations: responses (exact or interval-censored) with design rows."""
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Dataset"]


@dataclass
class Dataset:
    """A batch of observations.

    Each row is an interval ``(low, high]``. Exact responses have
    ``low == high``; right-censored rows have ``high = inf``.

    Attributes
    ----------
    low, high : (N,) arrays
    X : (N, d) design matrix (intercept first)
    weights : (N,) positive weights
    covariates : raw covariate columns (name -> list), kept for output
    """

    low: np.ndarray
    high: np.ndarray
    X: np.ndarray
    weights: np.ndarray = None
    covariates: dict = field(default_factory=dict)

    def __post_init__(self):
        self.low = np.asarray(self.low, dtype=float).reshape(-1)
        self.high = np.asarray(self.high, dtype=float).reshape(-1)
        n = self.low.shape[0]
        self.X = np.asarray(self.X, dtype=float).reshape(n, -1)
        if self.weights is None:
            self.weights = np.ones(n)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.high.shape[0] != n or self.weights.shape[0] != n:
            raise ValueError("low, high, weights and X must have the same length")
        exact = self.low == self.high
        if np.any(np.isnan(self.low)) or np.any(np.isnan(self.high)):
            raise ValueError("responses must not be NaN")
        if np.any(self.low[exact] <= 0):
            i = int(np.flatnonzero(exact & (self.low <= 0))[0])
            raise ValueError(f"row {i}: exact responses must be positive")
        if np.any(self.low < 0) or np.any(self.low > self.high):
            i = int(np.flatnonzero((self.low < 0) | (self.low > self.high))[0])
            raise ValueError(f"row {i}: need 0 <= low < high for censored rows")
        if np.any(~np.isfinite(self.low)):
            raise ValueError("lower bounds must be finite")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be positive")

    @classmethod
    def exact(cls, y, X=None, weights=None, covariates=None):
        y = np.asarray(y, dtype=float).reshape(-1)
        if X is None:
            X = np.ones((y.shape[0], 1))
        return cls(y, y.copy(), X, weights, covariates or {})

    def __len__(self):
        return self.low.shape[0]

    @property
    def is_exact(self):
        return self.low == self.high

    @property
    def n_effective(self):
        return float(self.weights.sum())

    def subset(self, mask):
        mask = np.asarray(mask)
        cov = {k: list(np.asarray(v, dtype=object)[mask]) for k, v in self.covariates.items()}
        return Dataset(self.low[mask], self.high[mask], self.X[mask], self.weights[mask], cov)

    def with_responses(self, low, high):
        return Dataset(low, high, self.X, self.weights, dict(self.covariates))
