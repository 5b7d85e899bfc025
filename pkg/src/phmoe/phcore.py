"""Phase-type (PH) and inhomogeneous phase-type (IPH) distributions."""
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
from scipy.special import gamma as gamma_fn

from . import matcore
from . import transforms as tf
from .errors import InfiniteMeanError, NumericalError

__all__ = [
    "PhaseDistribution",
    "IphDistribution",
    "TailReport",
    "iph_density",
    "iph_survival",
    "iph_quantile",
    "ph_mean",
    "weibull_fractional_moment",
    "iph_mean",
    "accessible_states",
    "tail_report",
]


@dataclass(frozen=True)
class PhaseDistribution:
    """PH(pi, T): absorption time of a Markov jump process."""

    pi: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float).reshape(-1)
        T = matcore.check_subintensity(self.T)
        if pi.shape[0] != T.shape[0]:
            raise ValueError(f"pi has length {pi.shape[0]} but T has order {T.shape[0]}")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("pi must be a probability vector")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "T", T)

    @property
    def p(self):
        return self.T.shape[0]

    @property
    def t(self):
        return matcore.exit_vector(self.T)


@dataclass(frozen=True)
class IphDistribution:
    """IPH(pi, T, lambda): a PH time pushed through ``g``."""

    base: PhaseDistribution
    transform: tf.Transform = field(default_factory=tf.Transform)

    @classmethod
    def make(cls, pi, T, transform=None):
        return cls(PhaseDistribution(pi, T), transform or tf.Transform())


def _ph_tail_vectors(pi, T, z, vec):
    """``pi exp(T z_j) vec`` for each entry of ``z``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(z.shape[0])
    finite = np.isfinite(z)
    out[~finite] = 0.0
    if np.any(finite):
        E = matcore.expm(T[None, :, :] * z[finite][:, None, None])
        out[finite] = np.einsum("i,nij,j->n", pi, E, vec)
    return out


def iph_density(dist, y):
    """Density ``lambda(y) pi exp(G(y) T) t`` for ``y > 0``."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0) or np.any(np.isnan(y_arr)):
        raise ValueError("density is evaluated at y > 0 only")
    b = dist.base
    z = tf.g_inverse(dist.transform, y_arr.reshape(-1))
    val = tf.lam(dist.transform, y_arr.reshape(-1)) * _ph_tail_vectors(b.pi, b.T, z, b.t)
    val = np.maximum(val, 0.0)
    return float(val[0]) if y_arr.ndim == 0 else val.reshape(y_arr.shape)


def iph_survival(dist, y):
    """Survival ``pi exp(G(y) T) 1``; equals 1 at ``y = 0``."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0) or np.any(np.isnan(y_arr)):
        raise ValueError("survival is evaluated at y >= 0 only")
    b = dist.base
    z = tf.g_inverse(dist.transform, y_arr.reshape(-1))
    val = np.clip(_ph_tail_vectors(b.pi, b.T, z, np.ones(b.p)), 0.0, 1.0)
    val[z == 0] = 1.0
    return float(val[0]) if y_arr.ndim == 0 else val.reshape(y_arr.shape)


def iph_quantile(dist, q, tol=1e-10):
    """Smallest ``y`` with ``F(y) = q``.

    The root is sought on the PH time scale and mapped through ``g``; the
    bracket starts at ``[0, mean]`` and doubles its upper end.
    """
    q = float(q)
    if not 0 < q < 1:
        raise ValueError("quantile level must lie in (0, 1)")
    b = dist.base
    ones = np.ones(b.p)

    def excess(z):
        return 1.0 - _ph_tail_vectors(b.pi, b.T, z, ones)[0] - q

    hi = ph_mean(b)
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalError("quantile bracket expansion exceeded 1e12")
    lo = 0.0
    z = hi
    for _ in range(400):
        z = 0.5 * (lo + hi)
        e = excess(z)
        if abs(e) <= 0.1 * tol or hi - lo <= 4 * np.finfo(float).eps * hi:
            break
        if e < 0:
            lo = z
        else:
            hi = z
    return float(tf.g_forward(dist.transform, z))


def ph_mean(dist):
    """Mean of a PH distribution, ``pi (-T)^{-1} 1``."""
    T = dist.T
    return float(dist.pi @ matcore._solve(-T, np.ones(dist.p)))


def weibull_fractional_moment(dist, theta, zeta):
    """``E[Y**zeta]`` for ``Y = Z**(1/theta)``, ``Z ~ PH(pi, T)``:
    ``Gamma(1 + zeta/theta) pi (-T)^{-zeta/theta} 1``.
    """
    theta = float(theta)
    zeta = float(zeta)
    if theta <= 0 or zeta <= 0:
        raise ValueError("theta and zeta must be positive")
    P = matcore.fractional_power(-dist.T, -zeta / theta)
    return float(gamma_fn(1.0 + zeta / theta) * dist.pi @ P @ np.ones(dist.p))


def iph_mean(dist):
    """Mean of an IPH distribution.

    Identity and Weibull transforms use closed forms. The Pareto family uses
    the PH moment generating function, ``E[exp(Z)] = pi (-I - T)^{-1} t``,
    and exists only when the accessible decay rate exceeds one. Semi-composite
    families are integrated numerically on the PH time scale.
    """
    b, tr = dist.base, dist.transform
    if tr.family == tf.IDENTITY:
        return ph_mean(b)
    if tr.family == tf.WEIBULL:
        return weibull_fractional_moment(b, tr.theta, 1.0)
    if tr.family in tf.PARETO_TAILED:
        eta = tail_report(b.pi, b.T, tr).eta
        if eta <= 1.0:
            raise InfiniteMeanError(f"mean is infinite (tail decay rate {eta:.6g} <= 1)")
    if tr.family == tf.PARETO:
        # inaccessible states carry no mass and may have decay rates <= 1
        idx = np.array(accessible_states(b.pi, b.T))
        Ts = b.T[np.ix_(idx, idx)]
        mgf = b.pi[idx] @ matcore._solve(-np.eye(idx.size) - Ts, b.t[idx])
        return float(tr.theta * (mgf - 1.0))
    return _mean_by_quadrature(dist)


def _mean_by_quadrature(dist, rel=1e-10):
    # E[g(Z)] = int_0^inf g'(z) P(Z > z) dz
    b, tr = dist.base, dist.transform
    ones = np.ones(b.p)

    def integrand(z):
        return tf.g_forward_derivative(tr, z) * _ph_tail_vectors(b.pi, b.T, z, ones)[0]

    y0 = tr.threshold
    body, _ = scipy.integrate.quad(integrand, 0.0, y0, epsabs=0.0, epsrel=rel, limit=200)
    # substitute z = y0 + s/(1-s) to map the tail onto a finite interval
    def tail(s):
        if s >= 1.0:
            return 0.0
        return integrand(y0 + s / (1.0 - s)) / (1.0 - s) ** 2

    tail_val, _ = scipy.integrate.quad(tail, 0.0, 1.0, epsabs=0.0, epsrel=rel, limit=400)
    return float(body + tail_val)


@dataclass(frozen=True)
class TailReport:
    """Conditional tail parameters for a given initial distribution."""

    eta: float
    block_size: int
    accessible_states: tuple
    tail_index: float = None

    def to_dict(self):
        return {
            "eta": self.eta,
            "block_size": self.block_size,
            # reported 1-based, like the states of the model
            "accessible_states": [k + 1 for k in self.accessible_states],
            "tail_index": self.tail_index,
        }


def accessible_states(pi, T, zero_tolerance=1e-8, rate_tolerance=0.0):
    """States reachable from ``{k : pi_k > zero_tolerance}`` (0-based, sorted).

    Edges are the off-diagonal rates above ``rate_tolerance * max|t_kk|``;
    the default 0 uses the exact nonzero pattern of ``T``.
    """
    pi = np.asarray(pi, dtype=float)
    T = np.asarray(T, dtype=float)
    cut = rate_tolerance * float(np.max(np.abs(np.diag(T))))
    adj = (T > cut) & ~np.eye(T.shape[0], dtype=bool)
    frontier = [int(k) for k in np.flatnonzero(pi > zero_tolerance)]
    seen = set(frontier)
    while frontier:
        k = frontier.pop()
        for l in np.flatnonzero(adj[k]):
            if l not in seen:
                seen.add(int(l))
                frontier.append(int(l))
    return tuple(sorted(int(k) for k in seen))


def tail_report(pi, T, transform=None, zero_tolerance=1e-8, rate_tolerance=0.0):
    """Tail decay rate and block size restricted to the accessible states."""
    transform = transform or tf.Transform()
    T = np.asarray(T, dtype=float)
    states = accessible_states(pi, T, zero_tolerance, rate_tolerance)
    if not states:
        raise ValueError("initial distribution has no mass above zero_tolerance")
    idx = np.array(states)
    spec = matcore.dominant_eigen(T[np.ix_(idx, idx)])
    xi = 1.0 / spec.eta if transform.family in tf.PARETO_TAILED else None
    return TailReport(eta=spec.eta, block_size=spec.block_size,
                      accessible_states=states, tail_index=xi)
