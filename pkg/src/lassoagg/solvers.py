"""Fixed-lambda Lasso by cyclic coordinate descent, KKT verification, and
the square-root Lasso solved by the scaled alternation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import as_design, as_response
from .errors import DegenerateVarianceError, InvalidInputError

# Coefficients with magnitude above this count as part of the support.
# Coordinate descent produces exact zeros, so this only guards round-off.
SUPPORT_THRESH = 1e-10

DEFAULT_CD_TOL = 1e-9
DEFAULT_CD_MAX_ITER = 100_000


@dataclass
class LassoFit:
    beta: np.ndarray
    lam: float
    duality_gap: float
    iterations: int
    converged: bool


@dataclass
class SqrtLassoFit:
    beta: np.ndarray
    lam: float
    sigma_hat_sq: float
    iterations: int
    converged: bool


@dataclass
class KKTReport:
    ok: bool
    worst_violation: float


def _duality_gap(n, lam, beta, r, Xt_r):
    """Fenchel duality gap for (1/2n)||y - Xb||^2 + lam*||b||_1.

    The dual point is the residual/n scaled into the dual-feasible box
    ||X^T theta||_inf <= lam.
    """
    r_sq = float(r @ r)
    primal = r_sq / (2.0 * n) + lam * float(np.abs(beta).sum())
    dual_inf = float(np.max(np.abs(Xt_r))) / n if Xt_r.size else 0.0
    scale = 1.0 if dual_inf <= lam or dual_inf == 0.0 else lam / dual_inf
    # dual objective at theta = scale * r / n
    y_dot_r = r_sq + float(beta @ Xt_r)  # r.(y) = r.(r + Xb)
    dual = scale * y_dot_r / n - scale * scale * r_sq / (2.0 * n)
    return primal - dual


def lasso_cd(X, y, lam: float, tol: float = DEFAULT_CD_TOL,
             max_iter: int = DEFAULT_CD_MAX_ITER,
             beta0: Optional[np.ndarray] = None) -> LassoFit:
    """Minimize (1/2n)||y - X b||^2 + lam*||b||_1 by cyclic coordinate descent.

    Terminates when the duality gap drops below tol or after max_iter full
    cycles.  Zero-norm columns are skipped (their optimal coefficient is 0).
    """
    X = as_design(X)
    y = as_response(y, X.n)
    if lam <= 0:
        raise InvalidInputError("lam must be positive")
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    n, p = X.n, X.p
    Xm = X.entries
    norms_n = X.column_norms_sq / n
    if beta0 is None:
        beta = np.zeros(p)
    else:
        beta = np.array(beta0, dtype=float).ravel()
        if beta.shape[0] != p:
            raise InvalidInputError("warm-start beta has wrong length")
    r = y - Xm @ beta

    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        for j in range(p):
            if norms_n[j] <= 0.0:
                continue
            bj = beta[j]
            col = Xm[:, j]
            if bj != 0.0:
                r += bj * col
            rho = float(col @ r) / n
            bj_new = math.copysign(max(abs(rho) - lam, 0.0), rho) / norms_n[j]
            beta[j] = bj_new
            if bj_new != 0.0:
                r -= bj_new * col
        gap = _duality_gap(n, lam, beta, r, Xm.T @ r)
        if gap <= tol:
            return LassoFit(beta=beta, lam=lam, duality_gap=gap, iterations=it, converged=True)
    return LassoFit(beta=beta, lam=lam, duality_gap=gap, iterations=it, converged=False)


def kkt_check(X, y, lam: float, beta, tol: float = 1e-7) -> KKTReport:
    """First-order optimality report for the Lasso objective.

    Requires |X_j^T (y - Xb)/n| <= lam + tol everywhere and the gradient to
    equal lam*sign(b_j) up to tol on active coordinates.
    """
    X = as_design(X)
    y = as_response(y, X.n)
    beta = np.asarray(beta, dtype=float).ravel()
    g = X.entries.T @ (y - X.entries @ beta) / X.n
    worst = 0.0
    for j in range(X.p):
        if abs(beta[j]) > SUPPORT_THRESH:
            worst = max(worst, abs(g[j] - lam * math.copysign(1.0, beta[j])))
        else:
            worst = max(worst, max(0.0, abs(g[j]) - lam))
    return KKTReport(ok=worst <= tol, worst_violation=worst)


def sqrt_lasso(X, y, lam: float, tol: float = 1e-8, max_iter: int = 500,
               cd_tol: float = 1e-12, cd_max_iter: int = DEFAULT_CD_MAX_ITER,
               beta0: Optional[np.ndarray] = None) -> SqrtLassoFit:
    """Minimize (1/sqrt(n))||y - Xb|| + lam*||b||_1 by the scaled alternation.

    Alternates sigma <- ||y - Xb||/sqrt(n) with a Lasso fit at penalty
    lam*sigma until the relative change of sigma is below tol.  Raises
    DegenerateVarianceError when the residual collapses (interpolation
    regime), where no variance estimate is defined.
    """
    X = as_design(X)
    y = as_response(y, X.n)
    if lam <= 0:
        raise InvalidInputError("lam must be positive")
    n = X.n
    y_scale = float(np.linalg.norm(y)) / math.sqrt(n)
    floor = 1e-12 * y_scale
    sigma = y_scale
    if sigma <= floor:
        raise DegenerateVarianceError("degenerate variance estimate: zero response")
    beta = np.zeros(X.p) if beta0 is None else np.array(beta0, dtype=float).ravel()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        fit = lasso_cd(X, y, lam * sigma, tol=cd_tol, max_iter=cd_max_iter, beta0=beta)
        beta = fit.beta
        sigma_new = float(np.linalg.norm(y - X.entries @ beta)) / math.sqrt(n)
        if sigma_new <= floor:
            raise DegenerateVarianceError(
                "degenerate variance estimate: residual collapsed (interpolation regime)")
        if abs(sigma_new - sigma) <= tol * sigma:
            sigma = sigma_new
            converged = True
            break
        sigma = sigma_new
    return SqrtLassoFit(beta=beta, lam=lam, sigma_hat_sq=sigma * sigma,
                        iterations=it, converged=converged)


def sqrt_lasso_universal_lambda(n: int, p: int) -> float:
    """Universal square-root-Lasso parameter 2*sqrt(log(p/0.01)/n)
    (confidence level 0.01)."""
    if n < 1 or p < 1:
        raise InvalidInputError("n and p must be >= 1")
    return 2.0 * math.sqrt(math.log(p / 0.01) / n)
