"""Unconstrained optimizers: L-BFGS with a strong-Wolfe line search, and Adam.

The L-BFGS direction comes from the standard two-loop recursion with the
s.y/y.y initial scaling; curvature pairs that would break positive
definiteness are skipped. A failed line search triggers one restart from
steepest descent before aborting with the best iterate seen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationError


@dataclass
class OptimizerConfig:
    memory: int = 10
    max_iter: int = 300
    grad_tol: float = 1e-8
    c1: float = 1e-4
    c2: float = 0.9
    ls_max_steps: int = 25

    def __post_init__(self):
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ConfigError(f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")
        if self.memory < 0:
            raise ConfigError("memory must be non-negative")


@dataclass
class LineSearchRecord:
    alpha: float
    f0: float
    dphi0: float
    f_new: float
    dphi_new: float


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    grad: np.ndarray
    trace: list  # loss per accepted iteration, starting with f(x0)
    wolfe: list  # per-iteration LineSearchRecord
    iterations: int
    converged: bool
    status: str


def _cubic_min(a, fa, dfa, b, fb, dfb):
    """Minimizer of the cubic Hermite interpolant on [a, b]; None if degenerate."""
    d1 = dfa + dfb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - dfa * dfb
    if disc < 0.0:
        return None
    d2 = np.sqrt(disc) * np.sign(b - a)
    denom = dfb - dfa + 2.0 * d2
    if denom == 0.0:
        return None
    x = b - (b - a) * (dfb + d2 - d1) / denom
    return x if np.isfinite(x) else None


def _zoom(phi, alo, ahi, flo, dflo, fhi, dfhi, f0, dphi0, c1, c2, max_steps):
    for _ in range(max_steps):
        aj = _cubic_min(alo, flo, dflo, ahi, fhi, dfhi)
        width = abs(ahi - alo)
        lo, hi = min(alo, ahi), max(alo, ahi)
        if aj is None or not (lo + 0.05 * width <= aj <= hi - 0.05 * width):
            aj = 0.5 * (alo + ahi)
        fj, dfj = phi(aj)
        if fj > f0 + c1 * aj * dphi0 or fj >= flo:
            ahi, fhi, dfhi = aj, fj, dfj
        else:
            if abs(dfj) <= -c2 * dphi0:
                return aj, fj, dfj
            if dfj * (ahi - alo) >= 0.0:
                ahi, fhi, dfhi = alo, flo, dflo
            alo, flo, dflo = aj, fj, dfj
        if abs(ahi - alo) < 1e-16:
            break
    return None


def strong_wolfe(phi, f0, dphi0, c1=1e-4, c2=0.9, alpha0=1.0, max_steps=25):
    """Bracketing strong-Wolfe search on phi(alpha) = f(x + alpha p).

    ``phi`` returns (value, directional derivative). Returns (alpha, f, dphi)
    or None on failure.
    """
    if dphi0 >= 0.0:
        return None
    a_prev, f_prev, df_prev = 0.0, f0, dphi0
    a = alpha0
    for i in range(max_steps):
        f, df = phi(a)
        if f > f0 + c1 * a * dphi0 or (i > 0 and f >= f_prev):
            return _zoom(phi, a_prev, a, f_prev, df_prev, f, df, f0, dphi0, c1, c2, max_steps)
        if abs(df) <= -c2 * dphi0:
            return a, f, df
        if df >= 0.0:
            return _zoom(phi, a, a_prev, f, df, f_prev, df_prev, f0, dphi0, c1, c2, max_steps)
        a_prev, f_prev, df_prev = a, f, df
        a *= 2.0
    return None


def _two_loop(grad, s_list, y_list):
    q = grad.copy()
    alphas = []
    for s, y in zip(reversed(s_list), reversed(y_list)):
        rho = 1.0 / float(np.dot(y, s))
        a = rho * float(np.dot(s, q))
        alphas.append(a)
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= float(np.dot(s, y)) / float(np.dot(y, y))
    for (s, y), a in zip(zip(s_list, y_list), reversed(alphas)):
        rho = 1.0 / float(np.dot(y, s))
        b = rho * float(np.dot(y, q))
        q += (a - b) * s
    return q


def lbfgs(value_and_grad, x0, cfg: OptimizerConfig | None = None) -> LbfgsResult:
    """Minimize a smooth function given a (value, gradient) callable."""
    cfg = cfg or OptimizerConfig()
    x = np.asarray(x0, float).ravel().copy()
    f, g = value_and_grad(x)
    f = float(f)
    g = np.asarray(g, float).ravel().copy()
    if not np.isfinite(f):
        raise EvaluationError("objective is not finite at the starting point")
    trace = [f]
    wolfe: list = []
    s_list: list = []
    y_list: list = []
    best_x, best_f, best_g = x.copy(), f, g.copy()
    restarted = False
    status = "max_iter"
    converged = False
    it = 0
    while it < cfg.max_iter:
        gnorm = float(np.linalg.norm(g))
        if gnorm <= cfg.grad_tol:
            status, converged = "grad_tol", True
            break
        p = -_two_loop(g, s_list, y_list)
        dphi0 = float(np.dot(g, p))
        if dphi0 >= 0.0:  # stale curvature made the direction non-descent
            s_list.clear()
            y_list.clear()
            p = -g
            dphi0 = float(np.dot(g, p))

        g_new_holder = {}

        def phi(alpha):
            fx, gx = value_and_grad(x + alpha * p)
            gx = np.asarray(gx, float).ravel()
            g_new_holder[alpha] = (float(fx), gx)
            return float(fx), float(np.dot(gx, p))

        hit = strong_wolfe(phi, f, dphi0, cfg.c1, cfg.c2, 1.0, cfg.ls_max_steps)
        if hit is None:
            if not restarted and s_list:
                restarted = True
                s_list.clear()
                y_list.clear()
                continue
            status = "line_search_failure"
            break
        alpha, f_new, dphi_new = hit
        f_store, g_new = g_new_holder[alpha]
        wolfe.append(LineSearchRecord(alpha, f, dphi0, f_new, dphi_new))
        x_new = x + alpha * p
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if cfg.memory > 0 and sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_list.append(s)
            y_list.append(y)
            if len(s_list) > cfg.memory:
                s_list.pop(0)
                y_list.pop(0)
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        if f < best_f:
            best_x, best_f, best_g = x.copy(), f, g.copy()
        it += 1
    if converged or f <= best_f:
        best_x, best_f, best_g = x, f, g
    return LbfgsResult(
        x=best_x,
        f=best_f,
        grad=best_g,
        trace=trace,
        wolfe=wolfe,
        iterations=it,
        converged=converged,
        status=status,
    )


def adam(value_and_grad, x0, lr: float, beta1: float = 0.9, beta2: float = 0.999, steps: int = 1000):
    """Plain first-order Adam; deterministic given the inputs."""
    if lr <= 0:
        raise ConfigError("learning rate must be positive")
    x = np.asarray(x0, float).ravel().copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    eps = 1e-8
    for t in range(1, steps + 1):
        _, g = value_and_grad(x)
        g = np.asarray(g, float).ravel()
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        x = x - lr * mhat / (np.sqrt(vhat) + eps)
    return x
