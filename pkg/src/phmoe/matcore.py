"""Dense matrix kernels: exponentials, exponential integrals, fractional
powers and dominant-eigenvalue analysis of sub-intensity matrices.

Every function here is pure. Matrices are plain ``numpy`` arrays; functions
that accept a stack of matrices (leading batch axis) say so explicitly.
"""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError

__all__ = [
    "SpectralSummary",
    "check_subintensity",
    "exit_vector",
    "expm",
    "expm_rank_one_integral",
    "batch_rank_one_integral",
    "expm_cumulative",
    "fractional_power",
    "dominant_eigen",
]


def _as_square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def check_subintensity(T, atol=1e-12):
    """Validate a sub-intensity matrix and return it as a float array.

    Raises ``ValueError`` listing the first violated constraint.
    """
    T = _as_square(T)
    if not np.all(np.isfinite(T)):
        raise ValueError("sub-intensity matrix has non-finite entries")
    if np.any(np.diag(T) >= 0):
        raise ValueError("diagonal entries must be strictly negative")
    off = T - np.diag(np.diag(T))
    if np.any(off < 0):
        raise ValueError("off-diagonal entries must be nonnegative")
    if np.any(T.sum(axis=1) > atol * np.abs(np.diag(T))):
        raise ValueError("row sums must be nonpositive")
    return T


def exit_vector(T):
    """Exit rates ``t = -T 1``, clipped at zero against rounding."""
    T = np.asarray(T, dtype=float)
    return np.maximum(-T.sum(axis=-1), 0.0)


def expm(A, scale=1.0):
    """Matrix exponential ``exp(scale * A)``.

    Scaling and squaring with a degree-13 Pade approximant (delegated to
    ``scipy.linalg.expm``). ``A`` may carry leading batch dimensions.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    scale = float(scale)
    if not np.isfinite(scale) or not np.all(np.isfinite(A)):
        raise ValueError("expm: non-finite input")
    if A.shape[-1] == 1:
        return np.exp(scale * A)
    if A.ndim == 3 and A.shape[0] > 1:
        return _expm_stack(scale * A)
    return scipy.linalg.expm(scale * A)


# degree-13 Pade coefficients and the matching 1-norm bound (Higham, 2005)
_PADE13 = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
           1187353796428800.0, 129060195264000.0, 10559470521600.0,
           670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
           960960.0, 16380.0, 182.0, 1.0)
_THETA13 = 5.371920351148152


def _expm_stack(A):
    """Vectorized scaling and squaring over a stack ``(N, n, n)``.

    ``scipy.linalg.expm`` loops over the stack in Python, which dominates
    the E-step for large samples; here every stage is one batched call.
    Each matrix gets its own scaling exponent.
    """
    b = _PADE13
    norms = np.abs(A).sum(axis=-2).max(axis=-1)
    with np.errstate(divide="ignore"):
        s = np.ceil(np.log2(norms / _THETA13))
    s = np.where(np.isfinite(s), np.maximum(s, 0), 0).astype(int)
    A = A * np.ldexp(1.0, -s)[:, None, None]
    eye = np.eye(A.shape[-1])
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * eye)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * eye)
    R = np.linalg.solve(V - U, V + U)
    for k in range(int(s.max(initial=0))):
        idx = np.nonzero(s > k)[0]
        R[idx] = R[idx] @ R[idx]
    return R


def expm_rank_one_integral(T, t, pi, z):
    """Return ``(exp(T z), J(z))`` with

        J(z) = int_0^z exp(T (z - u)) t pi exp(T u) du.

    Computed from the exponential of the block matrix
    ``[[T, t pi], [0, T]] * z``: ``exp(T z)`` sits in the top-left block and
    ``J(z)`` in the top-right block.
    """
    T = _as_square(T)
    z = float(z)
    if not z >= 0:
        raise ValueError(f"z must be nonnegative, got {z}")
    E, J = batch_rank_one_integral(T, t, np.atleast_2d(pi), np.array([z]))
    return E[0], J[0]


def batch_rank_one_integral(T, t, pis, zs):
    """Stacked version of :func:`expm_rank_one_integral`.

    Parameters
    ----------
    T : (p, p) array
    t : (p,) array
        Column vector of the rank-one coupling (exit rates, or ones for the
        censored kernels).
    pis : (N, p) array
        One row vector per evaluation point.
    zs : (N,) array of nonnegative reals

    Returns
    -------
    E : (N, p, p) array of ``exp(T z_i)``
    J : (N, p, p) array of ``J_i(z_i)``
    """
    T = _as_square(T)
    p = T.shape[0]
    t = np.asarray(t, dtype=float).reshape(p)
    pis = np.asarray(pis, dtype=float).reshape(-1, p)
    zs = np.asarray(zs, dtype=float).reshape(-1)
    if pis.shape[0] != zs.shape[0]:
        raise ValueError("pis and zs must have the same length")
    if np.any(zs < 0) or not np.all(np.isfinite(zs)):
        raise ValueError("z must be finite and nonnegative")
    n = zs.shape[0]
    C = np.zeros((n, 2 * p, 2 * p))
    C[:, :p, :p] = T
    C[:, p:, p:] = T
    C[:, :p, p:] = t[None, :, None] * pis[:, None, :]
    C *= zs[:, None, None]
    if p == 1:
        # closed form avoids the Pade overhead on the scalar case
        e = np.exp(T[0, 0] * zs)
        E = e.reshape(n, 1, 1)
        J = (t[0] * pis[:, 0] * zs * e).reshape(n, 1, 1)
        return E, J
    M = expm(C)
    return M[:, :p, :p], M[:, :p, p:]


def expm_cumulative(T, a, b):
    """Cumulative integral ``int_a^b exp(T u) du = T^{-1}(exp(T b) - exp(T a))``.

    ``b`` may be ``inf``; then ``exp(T b)`` is taken as zero.
    """
    T = _as_square(T)
    a = float(a)
    b = float(b)
    if a < 0 or not a <= b:
        raise ValueError(f"need 0 <= a <= b, got a={a}, b={b}")
    if a == b:
        return np.zeros_like(T)
    Ea = expm(T, a)
    Eb = np.zeros_like(T) if np.isinf(b) else expm(T, b)
    return _solve(T, Eb - Ea)


def _solve(T, rhs):
    try:
        with warnings.catch_warnings():
            # singularity is reported below as NumericalError
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(T, check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover
        raise NumericalError(f"cannot factor T: {exc}") from exc
    if np.any(np.abs(np.diag(lu[0])) <= 1e-300):
        raise NumericalError("sub-intensity matrix is singular")
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > 1e15:
        raise NumericalError(f"sub-intensity matrix is numerically singular (cond={cond:.3g})")
    return scipy.linalg.lu_solve(lu, rhs, check_finite=False)


def fractional_power(A, s):
    """``A**s`` via ``exp(s log A)`` with the principal matrix logarithm.

    ``A`` is expected to be ``-T`` for a sub-intensity matrix ``T`` so that
    its spectrum lies in the open right half-plane.
    """
    A = _as_square(A)
    s = float(s)
    ev = np.linalg.eigvals(A)
    on_cut = (np.abs(ev.imag) <= 1e-12 * max(1.0, np.abs(ev).max())) & (ev.real <= 0)
    if np.any(on_cut):
        raise NumericalError("spectrum touches the closed negative real axis")
    if s == 1.0:
        return A.copy()
    if s == 0.0:
        return np.eye(A.shape[0])
    L = scipy.linalg.logm(A)
    L = np.real_if_close(L, tol=1e6)
    if np.iscomplexobj(L):
        if np.abs(L.imag).max() > 1e-8 * max(1.0, np.abs(L).max()):
            raise NumericalError("matrix logarithm is not real")
        L = L.real
    return scipy.linalg.expm(s * L)


@dataclass(frozen=True)
class SpectralSummary:
    """Dominant decay rate of a sub-intensity matrix.

    ``block_size`` is an estimate: the number of eigenvalues found within
    ``multiplicity_tolerance`` of the dominant one. Exact Jordan structure
    is not computable in floating point.
    """

    eta: float
    block_size: int
    multiplicity_tolerance: float


def dominant_eigen(T, rel_tol=1e-6):
    """Decay rate ``eta = -max Re(eig T)`` and Jordan block size estimate."""
    T = _as_square(T)
    try:
        ev = scipy.linalg.eigvals(T)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigen-solver failed: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise NumericalError("eigen-solver returned non-finite eigenvalues")
    # the dominant eigenvalue of a Metzler matrix is real
    top = ev[np.argmax(ev.real)]
    tol = rel_tol * np.linalg.norm(T, 2)
    mult = int(np.sum(np.abs(ev - top.real) <= max(tol, 1e-15)))
    return SpectralSummary(eta=float(-top.real), block_size=max(mult, 1),
                           multiplicity_tolerance=float(tol))
