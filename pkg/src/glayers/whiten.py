"""Whitening transforms for patch matrices.

Both variants center the columns-as-samples data, blend the empirical
covariance with the identity to avoid ill-conditioning, and then apply the
symmetric inverse square root of the blended covariance: via an explicit
eigendecomposition (ZCA) or via the normalized Newton-Schulz iteration. The
iterative route only ever differentiates the largest eigenvalue, never the
full eigendecomposition adjoint.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import ConvergenceError, DomainError, RankError


def _check_input(v: np.ndarray, eta: float):
    if v.ndim != 2:
        raise RankError("whitening expects a (D, N) patch matrix")
    d, n = v.shape
    if n < d:
        raise RankError(f"need at least as many patches as patch dimension, got D={d}, N={n}")
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta must lie in (0, 1), got {eta}")


def blended_covariance(v: np.ndarray, eta: float) -> np.ndarray:
    """(1-eta)/(N-1) Vc Vc^T + eta I of centered data, the estimator both whiteners use."""
    vc = v - v.mean(axis=1, keepdims=True)
    n = v.shape[1]
    return (1.0 - eta) / (n - 1) * (vc @ vc.T) + eta * np.eye(v.shape[0])


def _centered_and_cov(v: ad.Var, eta: float):
    d, n = v.shape
    rowmean = ad.asum(v, axis=1).reshape(d, 1) * (1.0 / n)
    vc = v - rowmean
    c = ad.matmul(vc, ad.transpose(vc)) * ((1.0 - eta) / (n - 1)) + eta * np.eye(d)
    return vc, c


def zca_whiten_t(v: ad.Var, eta: float) -> ad.Var:
    """Taped ZCA whitening: D Lambda^{-1/2} D^T applied to the centered data."""
    _check_input(v.value, eta)
    vc, c = _centered_and_cov(v, eta)
    lam, u = ad.sym_eig(c)
    inv_sqrt = ad.exp(-0.5 * ad.log(lam))
    w = ad.matmul(ad.matmul(u, ad.diag_matrix(inv_sqrt)), ad.transpose(u))
    return ad.matmul(w, vc)


def zca_whiten(v: np.ndarray, eta: float) -> np.ndarray:
    tape = ad.Tape()
    return zca_whiten_t(tape.leaf(v), eta).value


def zca_matrix(v: np.ndarray, eta: float) -> np.ndarray:
    """The symmetric PSD whitening matrix itself (for structural checks)."""
    _check_input(np.asarray(v, float), eta)
    c = blended_covariance(np.asarray(v, float), eta)
    lam, u = np.linalg.eigh(c)
    return u @ np.diag(lam**-0.5) @ u.T


def iterative_whiten_t(v: ad.Var, eta: float, eps: float = 1e-7, max_iter: int = 100) -> ad.Var:
    """Taped Newton-Schulz whitening, W -> (3/2)W - (1/2)W W^T C W after normalization."""
    _check_input(v.value, eta)
    d, _ = v.shape
    vc, c = _centered_and_cov(v, eta)
    w = v.tape.leaf(np.eye(d))
    w = w / ad.sqrt(ad.eig_max(c))
    converged = False
    for _ in range(max_iter):
        w_next = 1.5 * w - 0.5 * ad.matmul(w, ad.matmul(ad.transpose(w), ad.matmul(c, w)))
        step = float(np.linalg.norm(w_next.value - w.value))
        w = w_next
        if step < eps:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"iterative whitening: no convergence in {max_iter} iterations", best=w.value
        )
    return ad.matmul(ad.transpose(w), vc)


def iterative_whiten(v: np.ndarray, eta: float, eps: float = 1e-7, max_iter: int = 100) -> np.ndarray:
    tape = ad.Tape()
    return iterative_whiten_t(tape.leaf(v), eta, eps, max_iter).value
