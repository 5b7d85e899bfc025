"""EM estimation of PH mixture-of-experts models.

One iteration transforms the responses to the PH time scale, computes the
conditional expectations of the complete-data statistics (E-step), updates
the sub-intensity matrix in closed form (M-step), refits the softmax gating
by weighted multinomial regression on the expected start counts (R-step)
and finally re-optimizes the transform parameter on the observed-data
likelihood.
"""
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.optimize

from . import matcore
from . import transforms as tf
from .data import Dataset
from .errors import DegenerateObservationError, NumericalError
from .moe import PhMoeModel, log_softmax, softmax_pi

log = logging.getLogger(__name__)

__all__ = [
    "FitConfig",
    "FitResult",
    "FitError",
    "SufficientStats",
    "RStepResult",
    "estep_exact",
    "estep_censored",
    "estep",
    "mstep",
    "rstep",
    "rstep_objective",
    "theta_step",
    "log_likelihood",
    "initialize",
    "fit",
]

V_FLOOR = 1e-12
DEN_FLOOR = 1e-300
COEF_CAP = 30.0
CHUNK = 512

RANDOM_GENERAL = "random_general"
RANDOM_COXIAN = "random_coxian"


@dataclass(frozen=True)
class FitConfig:
    p: int = 1
    max_iterations: int = 2000
    loglik_tolerance: float = 1e-8
    rstep_max_newton: int = 30
    rstep_ridge: float = 0.0
    theta_step_every: int = 1
    seed: int = 0
    init_strategy: str = RANDOM_GENERAL

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.max_iterations < 0 or self.theta_step_every < 1 or self.rstep_max_newton < 1:
            raise ValueError("iteration counts must be positive")
        if self.loglik_tolerance < 0 or self.rstep_ridge < 0:
            raise ValueError("tolerance and ridge must be nonnegative")
        if self.init_strategy not in (RANDOM_GENERAL, RANDOM_COXIAN):
            raise ValueError(f"unknown init strategy {self.init_strategy!r}")


@dataclass
class SufficientStats:
    """Expected complete-data statistics.

    ``B`` holds per-observation expected start counts; the rest are
    weighted sums over observations. ``N_trans[k, l]`` counts k -> l jumps.
    """

    B: np.ndarray
    V: np.ndarray
    N_trans: np.ndarray
    N_exit: np.ndarray
    loglik: float = 0.0


# ---------------------------------------------------------------- E-step


def _exact_block(T, t, pis, zs, w, rows=None):
    E, J = matcore.batch_rank_one_integral(T, t, pis, zs)
    a = E @ t                                   # exp(T z) t
    den = np.einsum("nk,nk->n", pis, a)
    _check_den(den, rows)
    B = pis * a / den[:, None]
    S = np.einsum("n,nlk->lk", w / den, J)
    left = np.einsum("nk,nkl->nl", pis, E)      # pi exp(T z)
    exits = t * ((w / den) @ left)
    return B, S, exits, float(w @ np.log(den))


def _censored_block(T, t, lu, pis, a, b, w, rows=None):
    p = T.shape[0]
    ones = np.ones(p)
    Ea, Ja = matcore.batch_rank_one_integral(T, ones, pis, a)
    finite = np.isfinite(b)
    Eb = np.zeros_like(Ea)
    Jb = np.zeros_like(Ja)
    if np.any(finite):
        Eb[finite], Jb[finite] = matcore.batch_rank_one_integral(T, ones, pis[finite], b[finite])
    tail_a = Ea @ ones
    tail_b = Eb @ ones
    den = np.einsum("nk,nk->n", pis, tail_a - tail_b)
    _check_den(den, rows)
    B = pis * (tail_a - tail_b) / den[:, None]
    # int_a^b pi exp(T u) du = pi T^{-1} (exp(T b) - exp(T a))
    diff = np.einsum("nk,nkl->nl", pis, Eb - Ea)
    cum = scipy.linalg.lu_solve(lu, diff.T, trans=1, check_finite=False).T
    scale = w / den
    S = np.einsum("n,nk->k", scale, cum)[None, :] + np.einsum("n,nlk->lk", scale, Ja - Jb)
    return B, S, t * (scale @ cum), float(w @ np.log(den))


def _check_den(den, rows):
    bad = ~(den > DEN_FLOOR) | ~np.isfinite(den)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        i = i if rows is None else int(rows[i])
        raise DegenerateObservationError(
            f"observation {i} has zero likelihood under the current model", index=i)


def estep_exact(pi, T, z):
    """E-step contributions of one exact observation on the PH time scale.

    Returns ``(B, V, N_trans, N_exit)`` where ``B`` is the row of expected
    start counts and the rest are this observation's expected sojourn
    times, jump counts and absorption counts.
    """
    T = np.asarray(T, dtype=float)
    t = matcore.exit_vector(T)
    pis = np.asarray(pi, dtype=float).reshape(1, -1)
    B, S, exits, _ = _exact_block(T, t, pis, np.array([float(z)]), np.ones(1))
    return B[0], np.diag(S).copy(), _jumps(T, S), exits


def estep_censored(pi, T, a, b):
    """E-step contributions of one observation known to lie in ``(a, b]``.

    ``b = inf`` gives right censoring and ``a = 0`` left censoring.
    """
    T = np.asarray(T, dtype=float)
    a, b = float(a), float(b)
    if not 0 <= a < b:
        raise ValueError(f"need 0 <= a < b, got ({a}, {b})")
    t = matcore.exit_vector(T)
    pis = np.asarray(pi, dtype=float).reshape(1, -1)
    lu = _lu(T)
    B, S, exits, _ = _censored_block(T, t, lu, pis, np.array([a]), np.array([b]), np.ones(1))
    return B[0], np.diag(S).copy(), _jumps(T, S), exits


def _jumps(T, S):
    N = T * S.T
    np.fill_diagonal(N, 0.0)
    return np.maximum(N, 0.0)


def _lu(T):
    lu = scipy.linalg.lu_factor(T, check_finite=False)
    if np.any(np.abs(np.diag(lu[0])) <= 1e-300):
        raise NumericalError("sub-intensity matrix is singular")
    return lu


def _n_workers():
    try:
        n = int(os.environ.get("PHMOE_THREADS", "1"))
    except ValueError:
        n = 1
    return (os.cpu_count() or 1) if n <= 0 else n


def _chunks(n):
    return [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]


def estep(model, data, z_low=None, z_high=None):
    """Full E-step over a dataset.

    Returns the :class:`SufficientStats`; ``stats.loglik`` is the observed
    data log-likelihood of ``model`` on the response scale.
    """
    T = model.T
    p = model.p
    t = matcore.exit_vector(T)
    tr = model.transform
    if z_low is None:
        z_low = tf.g_inverse(tr, data.low)
        z_high = np.full(len(data), np.inf)
        fin = np.isfinite(data.high)
        z_high[fin] = tf.g_inverse(tr, data.high[fin])
    pis = softmax_pi(data.X, model.alpha)
    w = data.weights
    exact = data.is_exact
    n = len(data)
    B = np.empty((n, p))
    S = np.zeros((p, p))
    exits = np.zeros(p)
    ll = 0.0

    # fixed chunk boundaries keep the reduction order independent of threads
    tasks = []
    idx_exact = np.flatnonzero(exact)
    idx_cens = np.flatnonzero(~exact)
    for s, e in _chunks(idx_exact.size):
        tasks.append(("x", idx_exact[s:e]))
    lu = _lu(T) if idx_cens.size else None
    for s, e in _chunks(idx_cens.size):
        tasks.append(("c", idx_cens[s:e]))

    def run(task):
        kind, idx = task
        if kind == "x":
            return _exact_block(T, t, pis[idx], z_low[idx], w[idx], rows=idx)
        return _censored_block(T, t, lu, pis[idx], z_low[idx], z_high[idx], w[idx],
                               rows=idx)

    workers = min(_n_workers(), len(tasks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(task) for task in tasks]
    for (_, idx), (Bc, Sc, ec, lc) in zip(tasks, results):
        B[idx] = Bc
        S += Sc
        exits += ec
        ll += lc
    ll += _log_intensity(tr, data.low[exact], w[exact])
    return SufficientStats(B=B, V=np.maximum(np.diag(S).copy(), 0.0), N_trans=_jumps(T, S),
                           N_exit=np.maximum(exits, 0.0), loglik=ll)


def _log_intensity(tr, y, w):
    if tr.is_identity or y.size == 0:
        return 0.0
    return float(w @ np.log(tf.lam(tr, y)))


# ---------------------------------------------------------------- M-step


def mstep(stats, T_prev=None, v_floor=V_FLOOR):
    """Closed-form update ``t_kl = N_kl / V_k``, ``t_k = N_k / V_k``.

    Rows whose expected occupancy falls below ``v_floor`` are copied from
    ``T_prev`` (a 0/0 update carries no information).
    """
    V = np.asarray(stats.V, dtype=float)
    p = V.shape[0]
    T = np.zeros((p, p))
    starved = []
    for k in range(p):
        if V[k] < v_floor:
            starved.append(k)
            continue
        rates = stats.N_trans[k] / V[k]
        rates[k] = 0.0
        exit_rate = stats.N_exit[k] / V[k]
        T[k] = rates
        T[k, k] = -(rates.sum() + exit_rate)
        if not T[k, k] < 0:
            starved.append(k)
    if starved:
        if T_prev is None:
            raise NumericalError(f"states {starved} have no expected occupancy")
        T[starved] = np.asarray(T_prev, dtype=float)[starved]
    return T, starved


# ---------------------------------------------------------------- R-step


@dataclass
class RStepResult:
    alpha: np.ndarray
    objective: float
    grad_max: float
    separated: bool
    converged: bool
    iterations: int


def rstep_objective(alpha, B, X, weights=None, ridge=0.0):
    """Weighted multinomial log-likelihood ``sum_i w_i sum_k B_ik log pi_k(x_i)``."""
    B = np.asarray(B, dtype=float)
    w = np.ones(B.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    lp = log_softmax(X, alpha)
    val = float(w @ np.einsum("nk,nk->n", B, np.where(B > 0, lp, 0.0)))
    if ridge:
        val -= 0.5 * ridge * float(np.sum(np.asarray(alpha)[1:, 1:] ** 2))
    return val


def rstep_gradient(alpha, B, X, weights=None, ridge=0.0):
    """Gradient with respect to the free rows ``alpha[1:]``, shape (p-1, d)."""
    B = np.asarray(B, dtype=float)
    w = np.ones(B.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    P = softmax_pi(X, alpha)
    s = B.sum(axis=1)
    G = ((B - s[:, None] * P) * w[:, None]).T @ X
    G = G[1:]
    if ridge:
        G[:, 1:] -= ridge * np.asarray(alpha)[1:, 1:]
    return G


def rstep_hessian(alpha, B, X, weights=None, ridge=0.0):
    """Hessian over the flattened free coefficients (row-major ``alpha[1:]``)."""
    B = np.asarray(B, dtype=float)
    X = np.asarray(X, dtype=float)
    w = np.ones(B.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    P = softmax_pi(X, alpha)[:, 1:]
    c = w * B.sum(axis=1)
    m, d = P.shape[1], X.shape[1]
    # -sum_i c_i (diag(P_i) - P_i P_i^T) kron x_i x_i^T, as one matrix product
    W = -np.einsum("n,nk,nl->nkl", c, P, P)
    W[:, np.arange(m), np.arange(m)] += c[:, None] * P
    XX = (X[:, :, None] * X[:, None, :]).reshape(-1, d * d)
    H4 = (W.reshape(-1, m * m).T @ XX).reshape(m, m, d, d)
    H = -H4.transpose(0, 2, 1, 3).reshape(m * d, m * d)
    if ridge:
        pen = np.zeros((m, d))
        pen[:, 1:] = ridge
        H -= np.diag(pen.ravel())
    return H


def rstep(B, X, weights=None, alpha0=None, ridge=0.0, max_halvings=30, max_iter=100,
          grad_tol=None, cap=COEF_CAP):
    """Maximize the weighted multinomial objective over the gating coefficients.

    Newton-Raphson with step halving. Coefficients are confined to
    ``[-cap, cap]``; a coefficient pinned at the cap with the gradient
    pushing outward signals separation (the unconstrained optimum is at
    infinity) and is held fixed while the rest are optimized. ``grad_tol``
    defaults to ``1e-12`` times the total weight.
    """
    B = np.asarray(B, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = B.shape
    d = X.shape[1]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    alpha = np.zeros((p, d)) if alpha0 is None else np.array(alpha0, dtype=float)
    alpha = alpha - alpha[0]
    if p == 1:
        return RStepResult(alpha, rstep_objective(alpha, B, X, w), 0.0, False, True, 0)
    if grad_tol is None:
        grad_tol = 1e-12 * max(1.0, float(w.sum()))
    B, X, w = _collapse_rows(B, X, w)

    def obj(a):
        return rstep_objective(a, B, X, w, ridge)

    f = obj(alpha)
    converged = False
    it = 0
    gmax = np.inf
    for it in range(1, max_iter + 1):
        G = rstep_gradient(alpha, B, X, w, ridge)
        free = ~(((alpha[1:] >= cap) & (G > 0)) | ((alpha[1:] <= -cap) & (G < 0)))
        gmax = float(np.abs(G[free]).max()) if free.any() else 0.0
        if gmax == 0.0:
            converged = True
            break
        H = rstep_hessian(alpha, B, X, w, ridge)
        fr = free.ravel()
        step = np.zeros(fr.size)
        step[fr] = _newton_direction(H[np.ix_(fr, fr)], G.ravel()[fr])
        step = step.reshape(p - 1, d)
        # a small gradient alone is not enough: under separation it decays
        # exponentially while the Newton step stays of order one
        if gmax < grad_tol and np.abs(step).max() <= 1e-8 * (1.0 + np.abs(alpha).max()):
            converged = True
            break
        s = 1.0
        improved = False
        for _ in range(max_halvings + 1):
            cand = alpha.copy()
            cand[1:] = np.clip(alpha[1:] + s * step, -cap, cap)
            fc = obj(cand)
            if fc > f:
                improved = True
                break
            if s == 1.0 and abs(fc - f) <= 64 * np.finfo(float).eps * max(1.0, abs(f)):
                # near the optimum the gain is below rounding; accept a full
                # step that leaves the objective unchanged if it shrinks the gradient
                Gc = rstep_gradient(cand, B, X, w, ridge)
                if np.abs(Gc).max() < np.abs(G).max():
                    improved = True
                    break
            s *= 0.5
        if not improved:
            # no representable ascent left along the Newton path
            converged = gmax < 1e-6 * max(1.0, w.sum())
            break
        alpha, f = cand, fc
    separated = bool(np.any(np.abs(alpha[1:]) >= cap * (1 - 1e-12)))
    G = rstep_gradient(alpha, B, X, w, ridge)
    free = ~(((alpha[1:] >= cap) & (G > 0)) | ((alpha[1:] <= -cap) & (G < 0)))
    gmax = float(np.abs(G[free]).max()) if free.any() else 0.0
    return RStepResult(alpha, f, gmax, separated, converged, it)


def _collapse_rows(B, X, w):
    """Merge observations sharing a design row.

    The objective depends on the data only through ``sum_i w_i B_ik`` per
    distinct row, so categorical designs shrink to a handful of rows.
    """
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    if uniq.shape[0] > X.shape[0] // 2:
        return B, X, w
    Bg = np.zeros((uniq.shape[0], B.shape[1]))
    np.add.at(Bg, inverse.reshape(-1), w[:, None] * B)
    return Bg, uniq, np.ones(uniq.shape[0])


def _newton_direction(H, g):
    # H is negative semidefinite; solve (-H + mu I) step = g
    A = -H
    scale = max(1.0, float(np.abs(np.diag(A)).max()))
    mu = 0.0
    for _ in range(12):
        try:
            c = scipy.linalg.cho_factor(A + mu * np.eye(A.shape[0]), check_finite=False)
            step = scipy.linalg.cho_solve(c, g, check_finite=False)
            if np.all(np.isfinite(step)):
                return step
        except np.linalg.LinAlgError:
            pass
        mu = 1e-10 * scale if mu == 0.0 else mu * 100.0
    return g / scale


# ---------------------------------------------------------------- likelihood


def _loglik_terms(model, data):
    """Per-observation log-likelihood contributions (response scale)."""
    T = model.T
    t = matcore.exit_vector(T)
    tr = model.transform
    pis = softmax_pi(data.X, model.alpha)
    exact = data.is_exact
    out = np.empty(len(data))
    if np.any(exact):
        y = data.low[exact]
        z = tf.g_inverse(tr, y)
        E = matcore.expm(T[None] * z[:, None, None])
        dens = np.einsum("nk,nkl,l->n", pis[exact], E, t)
        with np.errstate(divide="ignore"):
            out[exact] = np.log(dens) + np.log(tf.lam(tr, y))
    cens = ~exact
    if np.any(cens):
        ones = np.ones(model.p)
        za = tf.g_inverse(tr, data.low[cens])
        zb = data.high[cens].copy()
        fin = np.isfinite(zb)
        zb[fin] = tf.g_inverse(tr, zb[fin])
        Sa = np.einsum("nk,nkl,l->n", pis[cens], matcore.expm(T[None] * za[:, None, None]), ones)
        Sb = np.zeros_like(Sa)
        if np.any(fin):
            Eb = matcore.expm(T[None] * zb[fin][:, None, None])
            Sb[fin] = np.einsum("nk,nkl,l->n", pis[cens][fin], Eb, ones)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[cens] = np.log(Sa - Sb)
    return out


def log_likelihood(model, data):
    """Observed-data log-likelihood ``sum_i w_i log L_i``."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    terms = _loglik_terms(model, data)
    bad = ~np.isfinite(terms)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise DegenerateObservationError(f"observation {i} has zero likelihood", index=i)
    return float(data.weights @ terms)


# ---------------------------------------------------------------- theta step


def theta_step(data, model, grid=None):
    """Maximize the observed-data likelihood over the transform parameter.

    Nelder-Mead on ``log(theta)``. When the transform's threshold is not
    fixed, the threshold is searched over ``grid`` (order statistics of the
    exact responses by default) with ``theta`` re-optimized at each point.
    Returns ``(transform, loglik)``; the incoming transform is kept unless
    a strictly better one is found.
    """
    tr = model.transform
    if tr.is_identity:
        return tr, None

    def loglik_at(trc):
        try:
            terms = _loglik_terms(replace(model, transform=trc), data)
        except (ValueError, NumericalError, FloatingPointError):
            return -np.inf
        if not np.all(np.isfinite(terms)):
            return -np.inf
        return float(data.weights @ terms)

    best_tr = tr
    best = loglik_at(tr)
    thresholds = [tr.threshold]
    if tr.family in tf.SEMI_COMPOSITE and not tr.threshold_fixed:
        thresholds = list(_threshold_grid(data) if grid is None else grid)
    for y0 in thresholds:
        base = replace(tr, threshold=y0) if y0 is not None else tr
        x0 = np.log(tr.theta)

        def neg(x):
            return -loglik_at(base.with_theta(np.exp(x[0])))

        try:
            res = scipy.optimize.minimize(
                neg, [x0], method="Nelder-Mead",
                options={"xatol": 1e-7, "fatol": 1e-10, "maxiter": 200,
                         "initial_simplex": [[x0], [x0 + 0.05]]})
            cand = base.with_theta(float(np.exp(res.x[0])))
        except (ValueError, FloatingPointError) as exc:  # pragma: no cover
            warnings.warn(f"theta step failed: {exc}; keeping current value", RuntimeWarning)
            continue
        val = loglik_at(cand)
        if val > best:
            best, best_tr = val, cand
    return best_tr, best


def _threshold_grid(data, n=15):
    y = np.sort(data.low[data.is_exact])
    if y.size < 10:
        return [None]
    qs = np.linspace(0.5, 0.95, n)
    return sorted(set(float(v) for v in np.quantile(y, qs, method="inverted_cdf")))


# ---------------------------------------------------------------- driver


def default_transform(family, data, theta=None, threshold=None):
    """Family-specific starting transform: Pareto scale at the sample median,
    shape 1 otherwise."""
    family = tf.Transform(family).family if family is not None else tf.IDENTITY
    if family == tf.IDENTITY:
        return tf.Transform()
    if theta is None:
        if family == tf.PARETO:
            y = _representative_y(data)
            theta = float(np.median(y))
        else:
            theta = 1.0
    if family in tf.SEMI_COMPOSITE:
        fixed = threshold is not None
        if threshold is None:
            threshold = float(np.median(_representative_y(data)))
        return tf.Transform(family, theta, threshold, threshold_fixed=fixed)
    return tf.Transform(family, theta)


def _representative_y(data):
    y = np.where(data.is_exact, data.low, np.nan)
    fin = ~data.is_exact & np.isfinite(data.high)
    y[fin] = 0.5 * (data.low[fin] + data.high[fin])
    rc = ~data.is_exact & ~np.isfinite(data.high)
    y[rc] = np.maximum(data.low[rc], np.finfo(float).tiny)
    return np.maximum(y, np.finfo(float).tiny)


def initialize(p, schema, data, config, transform=None):
    """Starting values: uniform gating, random ``T`` scaled so that the PH
    mean matches the mean of the transformed responses."""
    rng = np.random.default_rng(config.seed)
    transform = transform or tf.Transform()
    alpha = np.zeros((p, schema.d))
    if config.init_strategy == RANDOM_COXIAN:
        T = np.zeros((p, p))
        for k in range(p - 1):
            T[k, k + 1] = rng.uniform(0.1, 1.0)
        exits = rng.uniform(0.1, 1.0, size=p)
    else:
        T = rng.uniform(0.1, 1.0, size=(p, p))
        np.fill_diagonal(T, 0.0)
        exits = rng.uniform(0.1, 1.0, size=p)
    np.fill_diagonal(T, -(T.sum(axis=1) + exits))
    y = _representative_y(data)
    z = tf.g_inverse(transform, y)
    target = float(data.weights @ z / data.weights.sum())
    if not target > 0:
        raise ValueError("transformed responses have nonpositive mean")
    pi = np.full(p, 1.0 / p)
    mean = float(pi @ np.linalg.solve(-T, np.ones(p)))
    T = T * (mean / target)
    return alpha, T, transform


@dataclass
class FitResult:
    model: PhMoeModel
    trace: np.ndarray
    converged: bool
    iterations: int
    dof: int
    seed: int = 0
    separated: bool = False
    stats: SufficientStats = field(default=None, repr=False)

    @property
    def loglik(self):
        return float(self.trace[-1])


class FitError(NumericalError):
    """A fitting step failed; carries the iteration and last valid model."""

    def __init__(self, message, iteration, model, trace):
        super().__init__(message)
        self.iteration = iteration
        self.model = model
        self.trace = np.asarray(trace)


def fit(data, schema, transform=None, config=None, init=None, callback=None):
    """Fit a PH-MoE model by EM.

    Parameters
    ----------
    data : Dataset
    schema : CovariateSchema
        Must produce the design matrix ``data.X``.
    transform : Transform, optional
        Family and starting parameters; identity by default.
    config : FitConfig
    init : (alpha, T, transform), optional
        Starting point overriding :func:`initialize`.
    callback : callable(iteration, loglik, model), optional

    Returns
    -------
    FitResult
        ``trace[i]`` is the log-likelihood after ``i`` completed iterations.
    """
    config = config or FitConfig()
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.X.shape[1] != schema.d:
        raise ValueError(f"design has {data.X.shape[1]} columns, schema expects {schema.d}")
    if transform is None:
        transform = tf.Transform()
    if init is None:
        alpha, T, transform = initialize(config.p, schema, data, config, transform)
    else:
        alpha, T, transform = init
    model = PhMoeModel(schema, alpha, T, transform)
    trace = []
    converged = False
    separated = False
    starved_run = np.zeros(model.p, dtype=int)
    stats = None
    for it in range(config.max_iterations + 1):
        try:
            stats = estep(model, data)
        except NumericalError as exc:
            raise FitError(f"E-step failed at iteration {it}: {exc}", it, model, trace) from exc
        ll = stats.loglik
        if trace and ll < trace[-1] - 1e-8:
            log.warning("log-likelihood decreased by %.3g at iteration %d", trace[-1] - ll, it)
        trace.append(ll)
        if callback is not None:
            callback(it, ll, model)
        if len(trace) > 1 and (ll - trace[-2]) < config.loglik_tolerance * abs(trace[-2]):
            converged = True
            break
        if it == config.max_iterations:
            break
        try:
            T_new, starved = mstep(stats, model.T)
            r = rstep(stats.B, data.X, data.weights, model.alpha, ridge=config.rstep_ridge,
                      max_halvings=config.rstep_max_newton)
            new = PhMoeModel(schema, r.alpha, T_new, model.transform)
            separated = separated or r.separated
            if not new.transform.is_identity and (it + 1) % config.theta_step_every == 0:
                tr_new, _ = theta_step(data, new)
                new = replace(new, transform=tr_new)
        except (NumericalError, ValueError, np.linalg.LinAlgError) as exc:
            raise FitError(f"update failed at iteration {it}: {exc}", it, model, trace) from exc
        mask = np.zeros(model.p, dtype=bool)
        mask[starved] = True
        starved_run = np.where(mask, starved_run + 1, 0)
        if np.any(starved_run == 10):
            warnings.warn(f"states {list(np.flatnonzero(starved_run >= 10))} have been starved "
                          "for 10 iterations; consider a smaller p", RuntimeWarning)
        model = new
    if separated:
        log.info("gating coefficients reached the magnitude cap (separation)")
    return FitResult(model=model, trace=np.asarray(trace), converged=converged,
                     iterations=len(trace) - 1, dof=model.dof(), seed=config.seed,
                     separated=separated, stats=stats)


def make_dataset(y, X=None, weights=None):
    """Convenience wrapper for exact data."""
    return Dataset.exact(y, X, weights)
