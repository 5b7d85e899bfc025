"""Inhomogeneity transforms.

A transform is described by its intensity ``lambda(y)``, the cumulative
intensity ``G(y) = int_0^y lambda(s) ds`` (mapping responses to the
homogeneous time scale) and the inverse map ``g = G^{-1}``.

Families
--------
identity
    ``lambda = 1``.
pareto
    ``lambda(y) = 1 / (y + theta)``; ``G(y) = log(y / theta + 1)``.
weibull
    ``lambda(y) = theta * y**(theta - 1)``; ``G(y) = y**theta``.
semi_weibull
    Unit intensity up to the threshold ``y0``, then a shifted Weibull
    intensity ``theta * (y - y0)**(theta - 1)``.
semi_pareto
    Unit intensity up to ``y0``, then ``1 / (y - y0 + theta)``.
"""
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "FAMILIES",
    "Transform",
    "lam",
    "g_inverse",
    "g_forward",
    "validate",
    "n_params",
]

IDENTITY = "identity"
PARETO = "pareto"
WEIBULL = "weibull"
SEMI_WEIBULL = "semi_weibull"
SEMI_PARETO = "semi_pareto"

FAMILIES = (IDENTITY, PARETO, WEIBULL, SEMI_WEIBULL, SEMI_PARETO)
SEMI_COMPOSITE = (SEMI_WEIBULL, SEMI_PARETO)
PARETO_TAILED = (PARETO, SEMI_PARETO)

_ALIASES = {
    "semicompositeweibulltail": SEMI_WEIBULL,
    "semicompositeparetotail": SEMI_PARETO,
    "semi-weibull": SEMI_WEIBULL,
    "semi-pareto": SEMI_PARETO,
    "ph-weibull": SEMI_WEIBULL,
    "ph-pareto": SEMI_PARETO,
}


def _family_name(name):
    key = str(name).strip().lower()
    key = _ALIASES.get(key.replace("_", ""), _ALIASES.get(key, key))
    if key not in FAMILIES:
        raise ValueError(f"unknown transform family {name!r}; choose from {FAMILIES}")
    return key


@dataclass(frozen=True)
class Transform:
    """Parametric inhomogeneity function.

    ``theta`` is the Pareto scale or Weibull shape (``None`` for identity);
    ``threshold`` is the splice point ``y0`` of the semi-composite families.
    """

    family: str = IDENTITY
    theta: float = None
    threshold: float = None
    threshold_fixed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "family", _family_name(self.family))
        if self.family == IDENTITY:
            object.__setattr__(self, "theta", None)
        elif self.theta is not None:
            object.__setattr__(self, "theta", float(self.theta))
        if self.family not in SEMI_COMPOSITE:
            object.__setattr__(self, "threshold", None)
        elif self.threshold is not None:
            object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def is_identity(self):
        return self.family == IDENTITY

    def with_theta(self, theta):
        return replace(self, theta=float(theta))

    def to_dict(self):
        return {
            "family": self.family,
            "theta": self.theta,
            "threshold": self.threshold,
            "threshold_fixed": bool(self.threshold_fixed),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(family=d["family"], theta=d.get("theta"),
                   threshold=d.get("threshold"),
                   threshold_fixed=d.get("threshold_fixed", True))


def n_params(tr):
    """Number of free transform parameters counted in the degrees of freedom."""
    if tr.family == IDENTITY:
        return 0
    if tr.family in SEMI_COMPOSITE and not tr.threshold_fixed:
        return 2
    return 1


def validate(tr):
    """Return a list of human readable constraint violations (empty if ok)."""
    problems = []
    if tr.family == IDENTITY:
        return problems
    if tr.theta is None or not np.isfinite(tr.theta) or tr.theta <= 0:
        problems.append("theta must be positive")
    if tr.family in SEMI_COMPOSITE:
        if tr.threshold is None or not np.isfinite(tr.threshold) or tr.threshold <= 0:
            problems.append("threshold must be positive")
    return problems


def _check(tr):
    problems = validate(tr)
    if problems:
        raise ValueError("invalid transform: " + "; ".join(problems))


def _scalar_or_array(values, out):
    return float(out) if np.ndim(values) == 0 else out


def lam(tr, y):
    """Intensity ``lambda(y)``. Accepts scalars or arrays; ``y`` must be >= 0.

    The Weibull-type intensities with ``theta < 1`` are infinite at the
    origin (or at ``y0``); that boundary value is returned as ``inf``.
    """
    _check(tr)
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0) or np.any(np.isnan(y_arr)):
        raise ValueError("lambda is defined for y >= 0 only")
    th = tr.theta
    with np.errstate(divide="ignore", invalid="ignore"):
        if tr.family == IDENTITY:
            out = np.ones_like(y_arr)
        elif tr.family == PARETO:
            out = 1.0 / (y_arr + th)
        elif tr.family == WEIBULL:
            out = _weibull_intensity(y_arr, th)
        else:
            y0 = tr.threshold
            excess = np.maximum(y_arr - y0, 0.0)
            if tr.family == SEMI_WEIBULL:
                tail = _weibull_intensity(excess, th)
            else:
                tail = 1.0 / (excess + th)
            out = np.where(y_arr <= y0, 1.0, tail)
    return _scalar_or_array(y, out)


def _weibull_intensity(y, th):
    if th == 1.0:
        return np.ones_like(y)
    return th * np.power(y, th - 1.0)


def g_inverse(tr, y):
    """Cumulative intensity ``G(y) = int_0^y lambda``; maps responses to PH time."""
    _check(tr)
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0):
        raise ValueError("g_inverse is defined for y >= 0 only")
    th = tr.theta
    if tr.family == IDENTITY:
        out = y_arr.copy()
    elif tr.family == PARETO:
        out = np.log1p(y_arr / th)
    elif tr.family == WEIBULL:
        out = np.power(y_arr, th)
    else:
        y0 = tr.threshold
        excess = np.maximum(y_arr - y0, 0.0)
        if tr.family == SEMI_WEIBULL:
            tail = y0 + np.power(excess, th)
        else:
            tail = y0 + np.log1p(excess / th)
        out = np.where(y_arr <= y0, y_arr, tail)
    return _scalar_or_array(y, out)


def g_forward(tr, z):
    """Inverse of :func:`g_inverse`: maps PH time back to the response scale."""
    _check(tr)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise ValueError("g_forward is defined for z >= 0 only")
    th = tr.theta
    if tr.family == IDENTITY:
        out = z_arr.copy()
    elif tr.family == PARETO:
        out = th * np.expm1(z_arr)
    elif tr.family == WEIBULL:
        out = np.power(z_arr, 1.0 / th)
    else:
        y0 = tr.threshold
        excess = np.maximum(z_arr - y0, 0.0)
        if tr.family == SEMI_WEIBULL:
            tail = y0 + np.power(excess, 1.0 / th)
        else:
            tail = y0 + th * np.expm1(excess)
        out = np.where(z_arr <= y0, z_arr, tail)
    return _scalar_or_array(z, out)


def g_forward_derivative(tr, z):
    """``g'(z) = 1 / lambda(g(z))``; used for quadrature on the PH time scale."""
    z_arr = np.asarray(z, dtype=float)
    th = tr.theta
    if tr.family == IDENTITY:
        out = np.ones_like(z_arr)
    elif tr.family == PARETO:
        out = th * np.exp(z_arr)
    elif tr.family == WEIBULL:
        out = np.power(z_arr, 1.0 / th - 1.0) / th
    else:
        y0 = tr.threshold
        excess = np.maximum(z_arr - y0, 0.0)
        with np.errstate(divide="ignore"):
            if tr.family == SEMI_WEIBULL:
                tail = np.power(excess, 1.0 / th - 1.0) / th
            else:
                tail = th * np.exp(excess)
        out = np.where(z_arr <= y0, 1.0, tail)
    return _scalar_or_array(z, out)
