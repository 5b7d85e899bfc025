"""Partial-likelihood inference for the gating coefficients.

Once EM has converged the sub-intensity matrix and transform are treated as
nuisance parameters and the expected start counts ``B`` as fixed weights.
Standard errors come from the inverse observed information of the weighted
multinomial objective. They ignore E-step uncertainty and are therefore
lower bounds.
"""
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .emfit import rstep_hessian

__all__ = [
    "CoefficientTable",
    "gating_inference",
    "information_criteria",
    "fit_information_criteria",
    "stars",
]


def stars(pvalue):
    if not np.isfinite(pvalue):
        return ""
    if pvalue < 0.001:
        return "***"
    if pvalue < 0.01:
        return "**"
    if pvalue < 0.05:
        return "*"
    return ""


@dataclass
class CoefficientTable:
    """Estimates for states 2..p (rows) and design columns (columns).

    Missing standard errors (singular information) are ``nan`` and flagged
    in ``missing``.
    """

    estimate: np.ndarray
    std_error: np.ndarray
    labels: list
    ridge_stabilized: bool = False

    @property
    def z_value(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.estimate / self.std_error

    @property
    def p_value(self):
        return 2.0 * norm.sf(np.abs(self.z_value))

    @property
    def missing(self):
        return ~np.isfinite(self.std_error)

    def rows(self):
        """Long-format records, one per (state, column)."""
        out = []
        z, pv = self.z_value, self.p_value
        for k in range(self.estimate.shape[0]):
            for j, lab in enumerate(self.labels):
                out.append({
                    "state": k + 2,
                    "term": lab,
                    "estimate": self.estimate[k, j],
                    "std_error": self.std_error[k, j],
                    "z_value": z[k, j],
                    "p_value": pv[k, j],
                    "signif": stars(pv[k, j]),
                })
        return out

    def format(self, digits=3):
        """Text table: ``estimate (se) stars``; blank parentheses when missing."""
        head = ["State"] + list(self.labels)
        lines = []
        pv = self.p_value
        for k in range(self.estimate.shape[0]):
            cells = [str(k + 2)]
            for j in range(len(self.labels)):
                se = self.std_error[k, j]
                se_txt = f"{se:.{digits}f}" if np.isfinite(se) else " "
                cells.append(f"{self.estimate[k, j]:.{digits}f} ({se_txt}){stars(pv[k, j])}")
            lines.append(cells)
        widths = [max(len(r[i]) for r in [head] + lines) for i in range(len(head))]
        fmt = "  ".join("{:>%d}" % w for w in widths)
        text = [fmt.format(*head)] + [fmt.format(*r) for r in lines]
        text.append("Signif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 ' ' 1")
        return "\n".join(text)


def gating_inference(B, X, alpha_hat, weights=None, labels=None, null_tol=1e-10):
    """Coefficient table for the free gating coefficients ``alpha_hat[1:]``."""
    B = np.asarray(B, dtype=float)
    X = np.asarray(X, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    alpha_hat = alpha_hat - alpha_hat[0]
    p, d = alpha_hat.shape
    labels = list(labels) if labels is not None else [f"x{j}" for j in range(d)]
    if p == 1:
        return CoefficientTable(np.zeros((0, d)), np.zeros((0, d)), labels)
    info = -rstep_hessian(alpha_hat, B, X, weights)
    info = 0.5 * (info + info.T)
    evals, evecs = np.linalg.eigh(info)
    top = max(float(evals.max()), 1e-300)
    null = evals <= null_tol * top
    se = np.full(info.shape[0], np.nan)
    ridge = False
    if np.any(null):
        ridge = True
        # coefficients loading on the null space are not identified
        loading = (evecs[:, null] ** 2).sum(axis=1)
        ok = loading < 1e-8
        inv_diag = (evecs[:, ~null] ** 2 / evals[~null]).sum(axis=1)
        se[ok] = np.sqrt(inv_diag[ok])
    else:
        cov = (evecs / evals) @ evecs.T
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return CoefficientTable(alpha_hat[1:].copy(), se.reshape(p - 1, d), labels,
                            ridge_stabilized=ridge)


def information_criteria(loglik, dof, n):
    """``(loglik, dof, AIC, BIC)`` with ``AIC = -2l + 2 dof`` and
    ``BIC = -2l + dof log n``."""
    loglik = float(loglik)
    return loglik, int(dof), -2.0 * loglik + 2.0 * dof, -2.0 * loglik + dof * np.log(n)


def fit_information_criteria(fit, data):
    """Information criteria of a :class:`~phmoe.emfit.FitResult`; ``n`` is the
    total observation weight."""
    return information_criteria(fit.loglik, fit.dof, data.n_effective)
